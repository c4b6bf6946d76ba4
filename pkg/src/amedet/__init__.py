"""Smart contract vulnerability detection with expert patterns and a graph network."""

__version__ = "0.1.0"
