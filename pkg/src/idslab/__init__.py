"""Numerical checks of how the integrated density of states of the discrete
Anderson model depends on the disorder distribution."""

from .lattice import BoxShape, LatticeOperator, build_anderson, free_operator, matvec, shift_potential
from .measures import (ProbabilityMeasure, atomic, bl_distance, cdf, from_samples, kr_distance,
                       metric_sandwich_check, point_mass, quantile, quantile_couple, two_point, uniform)
from .spectra import Spectrum, count_at_most, eig_dense_symmetric, eig_tridiagonal, spectral_transport_cost, \
    spectrum

__version__ = "0.1.0"
