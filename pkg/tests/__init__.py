"""
Tests for the multi-hop diffusion workbench.

This package contains the unit and end-to-end tests plus the reference
builders shared by them (oracles.py).
"""
