"""Presets module."""
