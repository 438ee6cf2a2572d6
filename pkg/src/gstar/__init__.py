"""Online convex optimization with regret bounds in the squared gradient norm
at the best fixed comparator."""

__version__ = "0.1.0"
