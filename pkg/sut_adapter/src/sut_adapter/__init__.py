"""Serve any trajectory predictor callable over the harness wire protocol."""

from .server import PredictorFn, serve

__version__ = "0.1.0"

__all__ = ["PredictorFn", "serve"]
