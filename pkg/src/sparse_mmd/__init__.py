"""Robust sparse regression by l1-penalized maximum mean discrepancy."""

__version__ = "0.1.0"
