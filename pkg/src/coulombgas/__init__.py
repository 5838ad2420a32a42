"""Numerical laboratory for linear statistics of 2D Coulomb gases."""

__version__ = "0.1.0"

from .measures import make_measure, UniformDisk, QuadraticDisk, ConfiningPotential
from .testfunctions import TestFunction
from .energy import PointConfiguration, log_energy, fluctuation, gibbs_log_density
