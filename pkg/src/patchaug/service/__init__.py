"""HTTP service exposing the experiment runners."""
from .app import create_app

__all__ = ["create_app"]
