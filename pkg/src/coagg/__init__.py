"""Industry co-agglomeration networks and Marshallian channel estimates."""

__version__ = "0.1.0"
