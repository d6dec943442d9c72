"""Numerical tooling for large-system CDMA power control."""
