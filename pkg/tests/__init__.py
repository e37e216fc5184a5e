"""
Test package for fgwise.
"""
