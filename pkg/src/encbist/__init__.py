"""Encoded-stimulus online self-test simulation."""
