"""Behavioral motifs and PageRank forecasting on evolving message networks."""

__version__ = "0.1.0"
