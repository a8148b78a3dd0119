"""scikit-learn style facade: learn an ambiguity set from cost samples, then route."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .datagen import ExperimentConfig, NominalModel, build_ambiguity
from .graph import DirectedGraph
from .solver import DrsppInstance, solve


class DistributionallyRobustRouter(BaseEstimator):
    """Distributionally robust s-t path chosen from observed arc costs.

    ``fit`` draws ``n1`` random subintervals per arc, turns the samples into
    quantile constraints (and, optionally, expectation rows along
    near-optimal paths), then solves for the path with the smallest
    worst-case expected cost.

    Parameters
    ----------
    graph : DirectedGraph
    source, sink : int
        ``sink=None`` means the last node.
    support_lower, support_upper : array-like of shape (n_arcs,)
        Known cost supports. Default to the sample minimum and maximum.
    n1 : int
        Subintervals per arc.
    kappa : float
        Subinterval width relative to the support.
    eta0 : float
        Total violation probability of the ambiguity set.
    use_expectation : bool
        Add expectation rows; the MIP solver is then needed.
    method : {"auto", "poly", "mip", "oracle"}
    random_state : int, RandomState or None
        Drives the subinterval positions.

    Attributes
    ----------
    path_ : Path
    objective_ : float
        Worst-case expected cost of ``path_``.
    worst_case_costs_ : ndarray of shape (n_arcs,)
    ambiguity_ : AmbiguitySet
    n_features_in_ : int
    """

    def __init__(self, graph: DirectedGraph | None = None, source: int = 0, sink: int | None = None,
                 support_lower=None, support_upper=None, n1: int = 4, kappa: float = 0.6,
                 eta0: float = 0.05, use_expectation: bool = True, method: str = "auto",
                 random_state=None):
        self.graph = graph
        self.source = source
        self.sink = sink
        self.support_lower = support_lower
        self.support_upper = support_upper
        self.n1 = n1
        self.kappa = kappa
        self.eta0 = eta0
        self.use_expectation = use_expectation
        self.method = method
        self.random_state = random_state

    def _support(self, X):
        lo = X.min(axis=0) if self.support_lower is None else np.asarray(self.support_lower, float)
        hi = X.max(axis=0) if self.support_upper is None else np.asarray(self.support_upper, float)
        if lo.shape != (X.shape[1],) or hi.shape != lo.shape:
            raise ValueError("supports need one entry per arc")
        if np.any(X < lo - 1e-12) or np.any(X > hi + 1e-12):
            raise ValueError("samples fall outside the given support")
        return lo, hi

    def fit(self, X, y=None):
        """Build the ambiguity set from ``X`` of shape (n_samples, n_arcs) and solve."""
        if self.graph is None:
            raise ValueError("graph is required")
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if X.shape[1] != self.graph.arc_count:
            raise ValueError(f"X has {X.shape[1]} columns; graph has {self.graph.arc_count} arcs")
        lo, hi = self._support(X)
        seed = int(check_random_state(self.random_state).randint(np.iinfo(np.int32).max))
        cfg = ExperimentConfig(n0=X.shape[0], n1=self.n1, kappa=self.kappa, eta0=self.eta0,
                               seed=seed, use_expectation=self.use_expectation)
        sink = self.graph.node_count - 1 if self.sink is None else self.sink
        # only the support of the model is read
        support = NominalModel(lo, hi, np.ones_like(lo), np.ones_like(lo))
        amb = build_ambiguity(self.graph, support, X, cfg, self.source, sink)
        sol = solve(DrsppInstance(self.graph, self.source, sink, amb), self.method)
        self.ambiguity_ = amb
        self.path_ = sol.path
        self.objective_ = sol.objective
        self.worst_case_costs_ = sol.worst_case_costs
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        """Cost of the chosen path under each row of arc costs."""
        check_is_fitted(self, "path_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X @ self.path_.incidence

    def score(self, X, y=None) -> float:
        """Negative mean path cost over the rows of ``X``."""
        return -float(np.mean(self.predict(X)))
