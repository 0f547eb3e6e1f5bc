"""Simulator and exact Weingarten toolkit for quantum algorithmic measurements."""

__version__ = "0.1.0"
