"""Integration tests for component interactions."""

__all__: list[str] = []
