"""Kernel-inducing-point distillation of imbalanced binary tabular data."""

__version__ = "0.1.0"
