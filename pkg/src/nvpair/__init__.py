"""Spin physics of engineered NV-N defect pairs in diamond."""

__version__ = "0.1.0"
