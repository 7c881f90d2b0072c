"""Semantic-landmark visual teach and repeat."""
