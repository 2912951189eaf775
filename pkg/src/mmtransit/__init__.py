"""Multimodal transit network design with shared autonomous vehicle feeders."""

__version__ = "0.1.0"
