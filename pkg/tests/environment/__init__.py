"""
Tests for the environment laws
"""
