from .app import create_app, make_backend

__all__ = ["create_app", "make_backend"]
