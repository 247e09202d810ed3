"""Masked-proxy metric learning losses, baselines, samplers and
speaker-verification style evaluation on numpy."""

__version__ = "0.1.0"
