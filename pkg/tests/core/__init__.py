"""
Tests for the shared record types
"""
