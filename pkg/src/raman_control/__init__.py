from ._backend import BACKEND

__all__ = ["BACKEND"]
