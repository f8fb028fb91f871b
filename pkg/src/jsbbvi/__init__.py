"""Black-box variational inference for Gaussian mixtures with James-Stein gradient shrinkage."""

__version__ = "0.1.0"
