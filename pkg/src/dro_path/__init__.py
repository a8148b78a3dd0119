"""Distributionally robust shortest paths under quantile and expectation ambiguity."""
from .ambiguity import (AmbiguitySet, ArcAmbiguity, ElementaryPartition, ExpectationConstraint,
                        QuantileConstraint, elementary_partition, validate)
from .baselines import budgeted_robust_sp, censored_moment_estimates, dr0_solve
from .datagen import ExperimentConfig, NominalModel, build_ambiguity, gen_layered, gen_nominal
from .errors import (A1Infeasible, A2Violation, AmbiguityInfeasible, CapExceeded, DroPathError,
                     NegativeCycle, NodeLimit, NoPath, NumericalFailure, RequiresMip,
                     SampleOutOfSupport, UnresolvableSample)
from .estimator import DistributionallyRobustRouter
from .graph import DirectedGraph, Path, enumerate_paths, shortest_path
from .lp import LinearProgram, LpSolution, solve_lp
from .moment import CostBounds, DiscreteDistribution, best_case_cost, bounds_all, worst_case_cost
from .solver import (DrsppInstance, DrsppSolution, oracle_solve, solve, solve_mip,
                     solve_no_expectation)

__version__ = "0.1.0"
