"""Verification toolchain for parametric component-based systems."""

__version__ = "0.1.0"
