"""Darcy flow PINN/FDM experiments: random fields, manufactured solutions,
training, finite differences, sensitivity screening and search."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
