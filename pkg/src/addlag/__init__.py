"""Variational analysis of additive fourth-order difference equations."""

__version__ = "0.1.0"
