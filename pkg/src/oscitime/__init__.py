"""Conjugate and time operators of the harmonic oscillator on truncated l^2(N).

Submodules
----------
fock
    Truncated Fock vectors, tail certificates, vector families and domain samplers.
operators
    Banded operators built from shifts, ``N``, ``a`` and ``a*``.
opfunc
    Power-series log/exp/arctan, the principal Log and the Dunford logarithm.
conjugates
    The ``T_{omega,m}`` families, Galapon operators, angle operators and ``X_p``.
ccr
    Commutator, ultra-weak and Kennard checks.
evolution
    Heisenberg evolution, periodicity and the weak Weyl probe.
hermite
    Hermite coefficients of Gaussians by closed form and quadrature.
cli
    Batch suites and the ``oscitime`` command.
"""

from . import ccr, conjugates, evolution, fock, hermite, operators, opfunc
from .ccr import Verdict, ccr_check, kennard_check, ultraweak_ccr_check
from .conjugates import (
    AngleContext,
    ConjugateOperator,
    FamilyClass,
    angle_operator,
    classify,
    conjugate_operator,
    finite_ccr_root_solver,
    galapon_operator,
    poly_time_operator,
)
from .errors import OscitimeError
from .evolution import EvolutionParams, evolve, periodicity_check, weak_weyl_failure_probe
from .fock import (
    Auto,
    FockVector,
    TailBound,
    basis_vector,
    ccr_domain_sample,
    coherent_vector,
    generalized_eigen_vector,
    geometric_vector,
    super_coherent_vector,
)
from .hermite import GaussianProfile, bridge_check, gaussian_to_fock, quadrature_overlap
from .operators import BandedOperator, apply, compose, make, power
from .opfunc import SeriesPolicy, dunford_log, principal_log_apply, series_apply

__version__ = "0.1.0"
