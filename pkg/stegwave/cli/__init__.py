"""Command-line interface"""

from .app import app, dispatch

__all__ = ["app", "dispatch"]
