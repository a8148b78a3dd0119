"""Dense two-phase primal simplex with bounded variables and dual certificates.

The tableau keeps every initial basic column (a slack or an artificial per
row), so ``B^-1`` can be read off at the end and the row duals come for free.
Variable bounds are handled by the bounded-variable ratio test rather than by
extra rows, which keeps branch-and-bound relaxations small.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

__all__ = ["LinearProgram", "LpSolution", "Basis", "solve_lp", "TOL_FEAS", "TOL_GAP"]

log = logging.getLogger(__name__)

TOL_FEAS = 1e-9
TOL_GAP = 1e-9

_RELATIONS = {"<=": "<=", "≤": "<=", "le": "<=", "=": "=", "==": "=", "eq": "=",
              ">=": ">=", "≥": ">=", "ge": ">="}


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``sense`` c.x subject to ``A x (relations) rhs`` and ``lower <= x <= upper``.

    Infinite bounds are allowed. ``A`` may have zero rows.
    """

    objective: np.ndarray
    A: np.ndarray
    relations: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        rel = tuple(_RELATIONS[r] for r in self.relations)
        b = np.asarray(self.rhs, dtype=float).ravel()
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if not (len(rel) == A.shape[0] == b.size):
            raise ValueError("rows, relations and rhs differ in length")
        if np.any(lo > hi):
            raise ValueError("a lower bound exceeds its upper bound")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("bounds must leave the variable a finite value")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        for name, val in (("objective", c), ("A", A), ("relations", rel), ("rhs", b),
                          ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, val)

    @classmethod
    def from_rows(cls, objective, rows, bounds=None, sense="min"):
        """Build from ``rows = [(coeffs, relation, rhs), ...]`` and ``bounds = [(lo, hi), ...]``.

        Variables default to ``[0, inf)``.
        """
        c = np.asarray(objective, dtype=float)
        n = c.size
        A = np.array([np.asarray(r[0], dtype=float) for r in rows]).reshape(-1, n)
        rel = tuple(r[1] for r in rows)
        b = np.array([float(r[2]) for r in rows])
        if bounds is None:
            lo, hi = np.zeros(n), np.full(n, np.inf)
        else:
            lo = np.array([-np.inf if bd[0] is None else bd[0] for bd in bounds], dtype=float)
            hi = np.array([np.inf if bd[1] is None else bd[1] for bd in bounds], dtype=float)
        return cls(c, A, rel, b, lo, hi, sense)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @property
    def rows(self):
        return [(self.A[i], self.relations[i], self.rhs[i]) for i in range(self.n_rows)]

    @property
    def variable_bounds(self):
        return list(zip(self.lower, self.upper))

    def with_bounds(self, lower=None, upper=None) -> "LinearProgram":
        return LinearProgram(self.objective, self.A, self.relations, self.rhs,
                             self.lower if lower is None else lower,
                             self.upper if upper is None else upper, self.sense)


@dataclass(eq=False)
class LpSolution:
    """Result of :func:`solve_lp`.

    ``duals[i]`` is the sensitivity of the optimal value to ``rhs[i]`` and
    ``reduced_costs = objective - A.T @ duals``; together they certify
    optimality through the residuals stored alongside.
    """

    status: str
    x: np.ndarray
    objective_value: float
    duals: np.ndarray
    reduced_costs: np.ndarray = field(repr=False)
    pivots: int = 0
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    complementarity_residual: float = np.nan
    dual_objective: float = np.nan
    basis: "Basis | None" = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def duality_gap(self) -> float:
        return abs(self.objective_value - self.dual_objective)


def _scale(*arrays):
    m = 1.0
    for a in arrays:
        a = np.asarray(a, dtype=float)
        a = a[np.isfinite(a)]
        if a.size:
            m = max(m, float(np.max(np.abs(a))))
    return m


class _Tableau:
    """Mutable simplex state; one instance per solve."""

    def __init__(self, M, b, ub, init_basis, max_pivots, tol, bland_after, refactor_every):
        self.M = M
        self.b = b
        self.T = M.copy()
        self.beta = b.copy()
        self.ub = ub
        self.basis = np.asarray(init_basis, dtype=np.int64)
        self.at_upper = np.zeros(M.shape[1], dtype=bool)
        self.is_basic = np.zeros(M.shape[1], dtype=bool)
        self.is_basic[self.basis] = True
        self.max_pivots = max_pivots
        self.tol = tol
        self.bland_after = bland_after
        self.refactor_every = refactor_every
        self.pivots = 0
        self.since_refactor = 0

    def refactor(self):
        B = self.M[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.M)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("basis matrix became singular") from exc
        up = np.flatnonzero(self.at_upper & ~self.is_basic)
        r = self.b - self.M[:, up] @ self.ub[up] if up.size else self.b
        self.beta = np.linalg.solve(B, r)
        self.since_refactor = 0

    def _pivot(self, r, j, step, leave_to_upper=False):
        """Bring column j into the basis at row r after moving it by ``step``."""
        T = self.T
        col = T[:, j].copy()
        self.beta -= step * col
        leave = self.basis[r]
        value = (self.ub[j] if self.at_upper[j] else 0.0) + step
        self.beta[r] = value
        piv = col[r]
        T[r] /= piv
        col[r] = 0.0
        rows = np.flatnonzero(col)
        if rows.size:
            T[rows] -= np.outer(col[rows], T[r])
        self.is_basic[leave] = False
        self.at_upper[leave] = leave_to_upper
        self.is_basic[j] = True
        self.at_upper[j] = False
        self.basis[r] = j
        self.pivots += 1
        self.since_refactor += 1
        if self.since_refactor >= self.refactor_every:
            self.refactor()

    def dual_run(self, cost, allowed):
        """Dual simplex from a dual-feasible basis.

        Returns 'optimal', 'infeasible' or 'dual_infeasible' (the start basis
        was not dual feasible).
        """
        tol = self.tol
        piv_tol = 1e-9
        d = cost - cost[self.basis] @ self.T
        movable = allowed & (self.ub > 0)
        nb = movable & ~self.is_basic
        dtol = 1e-7 * max(1.0, float(np.max(np.abs(cost), initial=0.0)))
        if np.any(nb & (((~self.at_upper) & (d < -dtol)) | (self.at_upper & (d > dtol)))):
            return "dual_infeasible"
        while True:
            if self.pivots >= self.max_pivots:
                raise NumericalFailure(f"simplex exceeded {self.max_pivots} pivots")
            if self.basis.size == 0:
                return "optimal"
            ub_b = self.ub[self.basis]
            below = -self.beta
            above = np.where(np.isfinite(ub_b), self.beta - ub_b, -np.inf)
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            bound_r = 0.0 if below[r] >= above[r] else ub_b[r]
            if infeas[r] <= tol * (1.0 + abs(bound_r)):
                return "optimal"
            row = self.T[r]
            nb = movable & ~self.is_basic
            if below[r] >= above[r]:
                cand = nb & ((~self.at_upper & (row < -piv_tol)) | (self.at_upper & (row > piv_tol)))
            else:
                cand = nb & ((~self.at_upper & (row > piv_tol)) | (self.at_upper & (row < -piv_tol)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "infeasible"
            ratios = np.abs(d[idx]) / np.abs(row[idx])
            best = ratios.min()
            ties = idx[ratios <= best + 1e-12 * (1.0 + best)]
            j = int(ties[np.argmax(np.abs(row[ties]))])
            step = (self.beta[r] - bound_r) / row[j]
            self._pivot(r, j, step, leave_to_upper=bool(below[r] < above[r]))
            d = cost - cost[self.basis] @ self.T if self.since_refactor == 0 \
                else d - d[j] * self.T[r]

    def run(self, cost, allowed):
        """Minimise ``cost`` over the current feasible basis; returns 'optimal' or 'unbounded'."""
        tol = self.tol
        bland = False
        stall = 0
        d = cost - cost[self.basis] @ self.T
        while True:
            if self.pivots >= self.max_pivots:
                raise NumericalFailure(f"simplex exceeded {self.max_pivots} pivots")
            cand = allowed & ~self.is_basic & (
                (~self.at_upper & (d < -tol)) | (self.at_upper & (d > tol)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            j = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            dj = d[j]
            dirn = -1.0 if self.at_upper[j] else 1.0
            alpha = self.T[:, j] * dirn
            ub_b = self.ub[self.basis]
            ratio = np.full(alpha.size, np.inf)
            pos = alpha > tol
            ratio[pos] = np.maximum(self.beta[pos], 0.0) / alpha[pos]
            neg = (alpha < -tol) & np.isfinite(ub_b)
            ratio[neg] = np.maximum(ub_b[neg] - self.beta[neg], 0.0) / -alpha[neg]
            t_row = ratio.min() if ratio.size else np.inf
            t_flip = self.ub[j]
            if not np.isfinite(t_row) and not np.isfinite(t_flip):
                return "unbounded"
            if t_flip <= t_row:
                self.beta -= t_flip * alpha
                self.at_upper[j] = not self.at_upper[j]
                self.pivots += 1
                t = t_flip
            else:
                t = t_row
                ties = np.flatnonzero(ratio <= t_row + 1e-12 * (1.0 + t_row))
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(alpha[ties]))])
                leave = self.basis[r]
                self._pivot(r, j, dirn * t, leave_to_upper=bool(alpha[r] < 0))
                d = cost - cost[self.basis] @ self.T if self.since_refactor == 0 \
                    else d - d[j] * self.T[r]
                log.debug("pivot %d: in=%d out=%d step=%.3g", self.pivots, j, leave, t)
            if t * abs(dj) <= 1e-12:
                stall += 1
                if stall > self.bland_after:
                    bland = True
            else:
                stall = 0
                bland = False


@dataclass(frozen=True, eq=False)
class Basis:
    """Final simplex basis, reusable as a warm start after bound changes.

    ``column_status`` covers the internal nonnegative columns (0 at lower
    bound, 1 at upper bound, 2 basic); ``row_basic`` marks rows whose slack or
    artificial is basic. ``key`` pins the problem shape it belongs to.
    """

    column_status: np.ndarray
    row_basic: np.ndarray
    key: tuple


def _shape_key(p: LinearProgram) -> tuple:
    pattern = (np.isfinite(p.lower).astype(np.int8) + 2 * np.isfinite(p.upper).astype(np.int8))
    return (p.n_vars, p.n_rows, pattern.tobytes(), p.relations)


class _StandardForm:
    """``M z = b``, ``0 <= z <= ub`` with columns: structural, slacks, artificials."""

    def __init__(self, p: LinearProgram, tol: float, warm: Basis | None):
        n, m = p.n_vars, p.n_rows
        lo, hi = p.lower, p.upper
        self.p = p
        self.infeasible = False
        nonempty = np.any(p.A != 0.0, axis=1) if m else np.zeros(0, dtype=bool)
        for i in np.flatnonzero(~nonempty):
            rel, bi = p.relations[i], p.rhs[i]
            if (rel == "<=" and bi < -tol) or (rel == ">=" and bi > tol) or (rel == "=" and abs(bi) > tol):
                self.infeasible = True
        keep = np.flatnonzero(nonempty)
        A = p.A[keep]
        rel = [p.relations[i] for i in keep]
        mk = keep.size

        # x = shift + sum(sign * z), 0 <= z <= ub
        src, sign, ub_std = [], [], []
        shift = np.zeros(n)
        for j in range(n):
            if np.isfinite(lo[j]):
                shift[j] = lo[j]
                src.append(j); sign.append(1.0); ub_std.append(hi[j] - lo[j])
            elif np.isfinite(hi[j]):
                shift[j] = hi[j]
                src.append(j); sign.append(-1.0); ub_std.append(np.inf)
            else:
                src += [j, j]; sign += [1.0, -1.0]; ub_std += [np.inf, np.inf]
        src = np.asarray(src, dtype=np.int64)
        sign = np.asarray(sign)
        ns = src.size
        ub_std = np.asarray(ub_std, dtype=float)
        b = p.rhs[keep] - A @ shift
        M_std = A[:, src] * sign
        c = p.objective if p.sense == "min" else -p.objective

        # flip rows so that b >= 0, preferring a +1 slack when b == 0
        flip = np.ones(mk)
        for i in range(mk):
            if b[i] < 0 or (b[i] == 0 and rel[i] == ">="):
                flip[i] = -1.0
        b = b * flip
        M_std *= flip[:, None]
        slack_rows = [i for i in range(mk) if rel[i] != "="]
        k = len(slack_rows)
        S = np.zeros((mk, k))
        slack_col = np.full(mk, -1, dtype=np.int64)
        for col, i in enumerate(slack_rows):
            S[i, col] = (1.0 if rel[i] == "<=" else -1.0) * flip[i]
            slack_col[i] = ns + col

        if warm is None:
            init = np.full(mk, -1, dtype=np.int64)
            for i in range(mk):
                if slack_col[i] >= 0 and S[i, slack_col[i] - ns] > 0:
                    init[i] = slack_col[i]
            # crash: singleton structural columns replace artificials
            nnz = np.count_nonzero(M_std, axis=0)
            used = set()
            for j in np.flatnonzero(nnz == 1):
                i = int(np.flatnonzero(M_std[:, j])[0])
                a = M_std[i, j]
                if init[i] < 0 and a > 0 and b[i] / a <= ub_std[j] and i not in used:
                    init[i] = j
                    used.add(i)
            art_rows = [i for i in range(mk) if init[i] < 0]
        else:
            art_rows = [i for i in range(mk)
                        if slack_col[i] < 0 and warm.row_basic[keep[i]]]
            init = None
        q = len(art_rows)
        R = np.zeros((mk, q))
        art_col = np.full(mk, -1, dtype=np.int64)
        for col, i in enumerate(art_rows):
            R[i, col] = 1.0
            art_col[i] = ns + k + col
            if init is not None:
                init[i] = ns + k + col

        self.keep, self.mk, self.src, self.sign, self.shift, self.ns = keep, mk, src, sign, shift, ns
        self.k, self.q, self.flip, self.b = k, q, flip, b
        self.M = np.hstack([M_std, S, R])
        self.N = ns + k + q
        self.ub = np.concatenate([ub_std, np.full(k, np.inf), np.full(q, np.inf)])
        self.is_art = np.zeros(self.N, dtype=bool)
        self.is_art[ns + k:] = True
        self.cost = np.concatenate([c[src] * sign, np.zeros(k + q)])
        self.slack_col, self.art_col = slack_col, art_col
        self.init = init

    def warm_basis(self, warm: Basis):
        """Columns and upper-bound flags for ``warm``, or ``None`` if it does not fit."""
        status = warm.column_status
        basis = list(np.flatnonzero(status == 2))
        for i in range(self.mk):
            if warm.row_basic[self.keep[i]]:
                basis.append(self.slack_col[i] if self.slack_col[i] >= 0 else self.art_col[i])
        if len(basis) != self.mk:
            return None
        at_upper = np.zeros(self.N, dtype=bool)
        at_upper[: self.ns] = (status == 1) & np.isfinite(self.ub[: self.ns])
        return np.asarray(basis, dtype=np.int64), at_upper


def solve_lp(p: LinearProgram, *, max_pivots: int = 100_000, tol: float = TOL_FEAS,
             bland_after: int = 50, refactor_every: int = 400,
             warm_start: Basis | None = None) -> LpSolution:
    """Solve a linear program with the bounded simplex method.

    Cold solves run two primal phases from a slack/singleton crash basis.
    With ``warm_start`` (the :attr:`LpSolution.basis` of a problem that
    differs only in variable bounds) the dual simplex restores feasibility
    from that basis instead; if the basis does not fit, the solve falls back
    to a cold start.

    Parameters
    ----------
    p : LinearProgram
    max_pivots : int
        Pivot budget across both phases.
    tol : float
        Feasibility and optimality tolerance on unit-scaled data.
    bland_after : int
        Consecutive degenerate pivots before switching to Bland's rule.
    refactor_every : int
        Pivots between refactorisations of the basis from the original data.
    warm_start : Basis, optional

    Returns
    -------
    LpSolution

    Raises
    ------
    NumericalFailure
        When the pivot budget runs out or the basis turns singular.
    """
    if warm_start is not None and warm_start.key == _shape_key(p):
        sf = _StandardForm(p, tol, warm_start)
        if sf.infeasible:
            return _finish_infeasible(p)
        try:
            sol = _solve_warm(sf, warm_start, max_pivots, tol, bland_after, refactor_every)
        except NumericalFailure:
            sol = None
        if sol is not None:
            return sol
    sf = _StandardForm(p, tol, None)
    if sf.infeasible:
        return _finish_infeasible(p)
    return _solve_cold(sf, max_pivots, tol, bland_after, refactor_every)


def _solve_cold(sf, max_pivots, tol, bland_after, refactor_every):
    ub = sf.ub.copy()
    is_art = sf.is_art
    tab = _Tableau(sf.M, sf.b, ub, sf.init, max_pivots, tol, bland_after, refactor_every)
    tab.refactor()
    scale = _scale(sf.b)
    if sf.q:
        tab.run(is_art.astype(float), np.ones(sf.N, dtype=bool))
        tab.refactor()
        infeas = float(np.sum(np.abs(tab.beta[is_art[tab.basis]])))
        if infeas > tol * scale * max(1, sf.q):
            return _finish_infeasible(sf.p, tab.pivots)
        for r in np.flatnonzero(is_art[tab.basis]):
            row = tab.T[r]
            cand = np.flatnonzero(~is_art & ~tab.is_basic & (np.abs(row) > 1e-7))
            if cand.size:
                j = int(cand[np.argmax(np.abs(row[cand]))])
                tab._pivot(r, j, tab.beta[r] / row[j])
        ub[is_art] = 0.0
        tab.at_upper[is_art] = False
        tab.refactor()
    status = tab.run(sf.cost, ~is_art)
    if status == "optimal":
        tab.refactor()
        status = tab.run(sf.cost, ~is_art)
    return _finish(sf, tab, status)


def _solve_warm(sf, warm, max_pivots, tol, bland_after, refactor_every):
    fit = sf.warm_basis(warm)
    if fit is None:
        return None
    basis, at_upper = fit
    ub = sf.ub.copy()
    ub[sf.is_art] = 0.0
    tab = _Tableau(sf.M, sf.b, ub, basis, max_pivots, tol, bland_after, refactor_every)
    tab.at_upper = at_upper
    tab.refactor()
    allowed = ~sf.is_art
    for _ in range(2):
        status = tab.dual_run(sf.cost, allowed)
        if status == "dual_infeasible":
            return None
        if status == "infeasible":
            return _finish_infeasible(sf.p, tab.pivots)
        tab.refactor()
    status = tab.run(sf.cost, allowed)
    sol = _finish(sf, tab, status)
    if sol.optimal and sol.primal_residual > 1e-7 * _scale(sf.b):
        return None
    return sol


def _finish(sf, tab, status):
    p = sf.p
    n, m = p.n_vars, p.n_rows
    xf = np.where(tab.at_upper, tab.ub, 0.0)
    xf[tab.basis] = tab.beta
    x = sf.shift.copy()
    np.add.at(x, sf.src, sf.sign * xf[: sf.ns])
    x = np.where(np.abs(x) < 1e-14, 0.0, x)

    if status == "unbounded":
        val = -np.inf if p.sense == "min" else np.inf
        return LpSolution("unbounded", x, val, np.full(m, np.nan), np.full(n, np.nan), tab.pivots)

    duals = np.zeros(m)
    if sf.mk:
        y = np.linalg.solve(sf.M[:, tab.basis].T, sf.cost[tab.basis])
        duals[sf.keep] = y * sf.flip
    if p.sense == "max":
        duals = -duals
    obj = float(p.objective @ x)
    sol = LpSolution("optimal", x, obj, duals, p.objective - p.A.T @ duals, tab.pivots)
    column_status = np.where(tab.at_upper[: sf.ns], 1, 0).astype(np.int8)
    column_status[tab.is_basic[: sf.ns]] = 2
    row_basic = np.zeros(m, dtype=bool)
    for i in range(sf.mk):
        for col in (sf.slack_col[i], sf.art_col[i]):
            if col >= 0 and tab.is_basic[col]:
                row_basic[sf.keep[i]] = True
    sol.basis = Basis(column_status, row_basic, _shape_key(p))
    _certify(p, sol)
    log.debug("solved LP %dx%d in %d pivots, gap %.2e", m, n, tab.pivots, sol.duality_gap)
    return sol


def _finish_infeasible(p, pivots=0):
    nan = np.full(p.n_vars, np.nan)
    val = np.inf if p.sense == "min" else -np.inf
    return LpSolution("infeasible", nan, val, np.full(p.n_rows, np.nan), nan, pivots)


def _certify(p: LinearProgram, sol: LpSolution) -> None:
    """Fill primal/dual residuals and the dual objective."""
    x, y, r = sol.x, sol.duals, sol.reduced_costs
    act = p.A @ x - p.rhs
    viol = []
    for i, rel in enumerate(p.relations):
        viol.append(max(act[i], 0.0) if rel == "<=" else max(-act[i], 0.0) if rel == ">=" else abs(act[i]))
    viol.append(float(np.max(np.maximum(p.lower - x, 0.0), initial=0.0)))
    viol.append(float(np.max(np.maximum(x - p.upper, 0.0), initial=0.0)))
    sol.primal_residual = float(max(viol))

    mx = 1.0 if p.sense == "min" else -1.0
    # sign conditions for a min problem: >= rows y >= 0, <= rows y <= 0
    dual_viol = [0.0]
    for i, rel in enumerate(p.relations):
        yi = mx * y[i]
        if rel == "<=":
            dual_viol.append(max(yi, 0.0))
        elif rel == ">=":
            dual_viol.append(max(-yi, 0.0))
    rr = mx * r
    at_lo = np.where(np.isfinite(p.lower), p.lower, x)
    at_hi = np.where(np.isfinite(p.upper), p.upper, x)
    bound_val = np.where(rr > 0, at_lo, at_hi)
    # reduced cost pointing at an infinite bound is a dual infeasibility
    dual_viol.append(float(np.max(np.where((rr > 0) & ~np.isfinite(p.lower), np.abs(rr), 0.0), initial=0.0)))
    dual_viol.append(float(np.max(np.where((rr < 0) & ~np.isfinite(p.upper), np.abs(rr), 0.0), initial=0.0)))
    sol.dual_residual = float(max(dual_viol))
    sol.dual_objective = float(p.rhs @ y + r @ bound_val)
    cs_rows = np.abs(y * act)
    gap_bound = np.abs(r * (x - bound_val))
    sol.complementarity_residual = float(max(np.max(cs_rows, initial=0.0), np.max(gap_bound, initial=0.0)))
