"""End-to-end tests for complete workflows."""

__all__: list[str] = []
