"""Augmentation pipeline and diagnostic studies."""
