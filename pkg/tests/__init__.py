"""Test suite for exmart."""
