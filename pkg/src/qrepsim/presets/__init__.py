"""Shipped scenario documents."""
