"""Conformal hypersurface invariants computed from truncated Taylor jets."""

from .jets import Jet

__all__ = ["Jet"]
