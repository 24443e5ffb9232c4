"""Exact probabilities for order statistics from two populations falling in
ordered intervals, with the Benjamini-Hochberg (R, V) joint law as the main
application."""

from .bh import (
    BhSpec,
    JointPmf,
    bh_joint_pmf_occupancy,
    bh_joint_pmf_separation,
    bh_reject_count,
    bh_thresholds,
    derived_summaries,
)
from .distributions import PiecewiseLinear, TwoSidedZTest, Uniform, parse_model, std_normal_cdf, std_normal_quantile
from .engine import (
    SeparationEvent,
    TwoPopulationModel,
    cdf_orderstats_conditioned,
    occupancy_event_probability,
    separation_probability,
    separation_probability_by_j,
)
from .enumeration import OrderStatQuery, enumerate_index_vectors, enumerate_lambda
from .errors import SizeGuardError, ValidationError
from .montecarlo import SimConfig, simulate_bh, simulate_event

__version__ = "0.1.0"
