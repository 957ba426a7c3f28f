"""uae-minmax: mutual-information-guided adversarial examples and UAE augmentation."""

__version__ = "0.3.0"
