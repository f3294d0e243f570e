"""HTTP service wrapping dataset generation, training and evaluation."""

from .app import create_app

__all__ = ["create_app"]
