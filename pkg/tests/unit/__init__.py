"""Unit tests for individual components."""

__all__: list[str] = []
