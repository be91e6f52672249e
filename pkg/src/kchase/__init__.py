"""k-chasing of convex functions and top-k action online learning, at desk scale."""

__version__ = "0.1.0"
