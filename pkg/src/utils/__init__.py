"""Utility functions module."""
