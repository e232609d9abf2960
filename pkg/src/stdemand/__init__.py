"""Spatio-temporal emergency demand analytics toolkit."""

from . import gwr, ingest, oracle, render, spstat, surface, tsa, weights

__all__ = ["gwr", "ingest", "oracle", "render", "spstat", "surface",
           "tsa", "weights"]
__version__ = "0.1.0"
