"""Embedding-level augmentation and view-attention classification pipeline."""

__version__ = "0.1.0"
