"""Desk-scale block-encoding toolkit for free-fermion correlation matrices."""

from .block_encoding import BlockEncoding, apply_polynomial, dilate, encode_sparse, evolve, extract_block, multiply
from .chebyshev import ChebyshevApprox, chebyshev_fit, eval_poly, exp_taylor, fermi_dirac_approx, greens_scalar_approx, log_fermi_approx
from .correlation import ErrorBudget, exact_reference, greens_fourier, momentum_transform, thermal_correlation, time_evolved_correlation
from .estimation import EstimateResult, estimate_energy_density, estimate_entry, free_energy_density, particle_density, wick_quartic
from .oracles import LatticeSpec, OracleTuple, build_fermi_sea, build_margulis, build_tight_binding, gershgorin_bound, materialize

__version__ = "0.1.0"
