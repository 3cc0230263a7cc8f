"""
Tests for the population process runners
"""
