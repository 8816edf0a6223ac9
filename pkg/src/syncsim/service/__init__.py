"""FastAPI service exposing scenario runs, validation, and the built-in tables."""

from .app import app, create_app

__all__ = ["app", "create_app"]
