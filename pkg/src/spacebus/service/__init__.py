"""HTTP facade over the broker, registry, scenario runner, and bench."""

from .app import create_app

__all__ = ["create_app"]
