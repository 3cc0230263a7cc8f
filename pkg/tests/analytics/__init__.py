"""
Tests for the survival criteria
"""
