"""Numerical laboratory for integral conditions on quasiconformal-type maps."""

__version__ = "0.1.0"
