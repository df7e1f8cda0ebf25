"""Two-pathway (form + motion) action recognition toolkit."""

__version__ = "0.1.0"
