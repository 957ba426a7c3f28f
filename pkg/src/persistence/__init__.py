"""Datasets, model storage and result ledgers."""
