"""
Tests for the Monte Carlo harness
"""
