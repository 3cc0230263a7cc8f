"""
Tests for the birth-death chain
"""
