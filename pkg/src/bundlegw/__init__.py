"""Genus-0 Gromov-Witten invariants of projective bundles by master-space localization."""
from fractions import Fraction

__all__ = ["Fraction"]
__version__ = "0.1.0"
