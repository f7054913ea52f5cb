"""Numerical verification toolkit for three-dimensional paracontact metric
(kappa, mu, nu)-structures given in a coordinate chart."""

__version__ = "0.1.0"

from .families import build_family, example_preset, synthetic_h3  # noqa: E402,F401
from .structure import ParacontactStructure  # noqa: E402,F401
