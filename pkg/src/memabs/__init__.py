"""Memory-based Markov abstractions of dynamical systems from sampled trajectories."""

from .abstraction import MemoryMarkovModel, build_model, lift, read_model, sample_model, unroll, write_model
from .core import (
    Alphabet,
    CapacityError,
    CategoricalDistribution,
    InvalidArgument,
    WordDistribution,
    count_subwords,
    total_variation_like_gap,
)
from .metrics import DistanceReport, distance, empirical_behavior, missing_mass, proposition1_check, spurious_mass
from .refine import RefinementConfig, RefinementReport, export_partition, run_refinement
from .sampler import SampleSet, simulate
from .systems import PiecewiseDemo, Sturmian, SwitchedLinear, TableDriven, make_system, stream

__version__ = "0.1.0"
