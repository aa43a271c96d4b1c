"""Discrete dynamical transport plans over a dyadic time schedule.

Optimal plans between consecutive measures are chained into a joint measure
on node sequences (Markov gluing). Pushing it forward by a path
representative gives a finitely supported measure on paths whose time
marginals reproduce the curve of measures. From it we read off speeds,
averaged velocity fields and the continuity-equation residual.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ModelError
from .transport import DiscreteMeasure, cost_matrix, solve_ot

log = logging.getLogger(__name__)

JENSEN_TOL = 1e-9
MOMENT_TOL = 1e-9


@dataclass(frozen=True)
class DyadicSchedule:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise InputError("N must be a nonnegative integer")

    @property
    def cells(self):
        return 2**self.N

    @property
    def times(self):
        return np.arange(self.cells + 1) / self.cells

    @property
    def dt(self):
        return 1.0 / self.cells


@dataclass(frozen=True)
class CurveOfMeasures:
    schedule: DyadicSchedule
    measures: tuple

    def __post_init__(self):
        ms = tuple(self.measures)
        if len(ms) != self.schedule.cells + 1:
            raise InputError(f"need {self.schedule.cells + 1} measures for N={self.schedule.N}")
        dims = {m.dim for m in ms}
        if len(dims) != 1:
            raise InputError("all measures must live in the same dimension")
        object.__setattr__(self, "measures", ms)

    @classmethod
    def from_function(cls, N, f):
        """Measures f(t) at the schedule's node times."""
        sched = DyadicSchedule(N)
        return cls(sched, tuple(f(t) for t in sched.times))


@dataclass(frozen=True)
class JointMeasure:
    """Weights on index sequences (i_0, ..., i_K): ``paths[a, k]`` indexes the support of measure k."""

    curve: CurveOfMeasures
    plans: tuple
    paths: np.ndarray
    weights: np.ndarray
    p: float

    def marginal(self, k):
        n = len(self.curve.measures[k])
        return np.bincount(self.paths[:, k], weights=self.weights, minlength=n)

    def pair_marginal(self, k):
        n = len(self.curve.measures[k])
        m = len(self.curve.measures[k + 1])
        out = np.zeros((n, m))
        np.add.at(out, (self.paths[:, k], self.paths[:, k + 1]), self.weights)
        return out

    def nodes(self, select=None):
        """(paths, K+1, d) array of node points (optionally for a subset of paths)."""
        paths = self.paths if select is None else self.paths[select]
        pts = [m.points for m in self.curve.measures]
        return np.stack([pts[k][paths[:, k]] for k in range(paths.shape[1])], axis=1)


def glue_plans(model, curve: CurveOfMeasures, p=1.0) -> JointMeasure:
    """Markov chaining of optimal forward plans between consecutive measures."""
    plans = []
    ms = curve.measures
    for k in range(len(ms) - 1):
        C = cost_matrix(model, ms[k], ms[k + 1], p, "forward")
        plans.append(solve_ot(C, ms[k], ms[k + 1]).plan)
    # expand paths one step at a time over the positive plan entries
    w0 = ms[0].weights
    idx = np.nonzero(w0 > 0)[0]
    paths = idx[:, None].astype(np.int32)
    weights = w0[idx]
    for k, P in enumerate(plans):
        rows = P.sum(axis=1)
        if np.any(rows[paths[:, -1]] <= 0):
            log.info("dropping paths through zero-mass rows at step %d", k)
        kernel = np.divide(P, rows[:, None], out=np.zeros_like(P), where=rows[:, None] > 0)
        last = paths[:, -1]
        a, j = np.nonzero(kernel[last] > 0)
        paths = np.hstack([paths[a], j[:, None].astype(np.int32)])
        weights = weights[a] * kernel[last[a], j]
    return JointMeasure(curve, tuple(plans), paths, weights, float(p))


@dataclass(frozen=True)
class DiscretePathMeasure:
    schedule: DyadicSchedule
    nodes: np.ndarray  # (atoms, K+1, d)
    weights: np.ndarray
    representative: str
    model: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.representative not in ("constant", "geodesic"):
            raise InputError("representative must be 'constant' or 'geodesic'")
        if self.nodes.shape[1] != self.schedule.cells + 1:
            raise InputError("node sequences do not match the schedule")

    def _cell(self, t):
        if not 0.0 <= t <= 1.0:
            raise InputError("t must lie in [0, 1]")
        K = self.schedule.cells
        c = int(np.floor(t * K))
        return c, t * K - c

    def positions(self, t):
        c, lam = self._cell(t)
        K = self.schedule.cells
        if self.representative == "constant" or c == K:
            # right-continuous step paths
            return self.nodes[:, min(c, K)]
        return self.model.chord_point(self.nodes[:, c], self.nodes[:, c + 1], lam)

    def velocities(self, t):
        """Right time-derivative of each path at t (geodesic representative only)."""
        if self.representative != "geodesic":
            raise ModelError("piecewise-constant paths carry no velocities")
        c, lam = self._cell(t)
        K = self.schedule.cells
        if c == K:
            c, lam = K - 1, 1.0
        return self.model.chord_velocity(self.nodes[:, c], self.nodes[:, c + 1], lam) * K

    def to_json(self):
        return {
            "schedule_N": self.schedule.N,
            "representative": self.representative,
            "atoms": [{"nodes": n.tolist(), "weight": float(w)} for n, w in zip(self.nodes, self.weights)],
        }


def path_measure(joint: JointMeasure, model=None, representative="constant") -> DiscretePathMeasure:
    if representative == "geodesic" and model is None:
        raise InputError("the geodesic representative needs a model")
    return DiscretePathMeasure(joint.curve.schedule, joint.nodes(), joint.weights.copy(), representative, model)


def merge_atoms(points, weights):
    """Combine atoms at identical points (exact equality)."""
    pts, inv = np.unique(points, axis=0, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=weights, minlength=len(pts))
    return pts, w


def marginal_at(eta: DiscretePathMeasure, t) -> DiscreteMeasure:
    pts, w = merge_atoms(eta.positions(t), eta.weights)
    return DiscreteMeasure(pts, w)


def speed_estimate(eta: DiscretePathMeasure, model, p, t, direction="forward") -> float:
    """(sum_a w_a F(x_a(t), +-x_a'(t))^p)^(1/p) over the path atoms."""
    if eta.representative != "geodesic":
        raise ModelError("speed estimates need the geodesic representative")
    X = eta.positions(t)
    V = eta.velocities(t)
    if direction == "backward":
        V = -V
    F = np.asarray(model.metric_value(X, V), dtype=float)
    return float(np.sum(eta.weights * F**p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# shift and moment estimates for glued paths


def _shift_integral(Dpow, K, h):
    """int_0^{1-h} D[sigma_t, sigma_{t+h}] dt for step paths, for every path (exact).

    ``Dpow[a, i, j]`` is the integrand value when sigma_t = x_i, sigma_{t+h} = x_j.
    """
    grid = np.arange(K + 1) / K
    br = np.concatenate([grid, grid - h, [0.0, 1.0 - h]])
    br = np.unique(br[(br >= 0.0) & (br <= 1.0 - h)])
    if len(br) < 2:
        return np.zeros(Dpow.shape[0])
    mid = 0.5 * (br[1:] + br[:-1])
    length = np.diff(br)
    i = np.minimum(np.floor(mid * K).astype(int), K)
    j = np.minimum(np.floor((mid + h) * K).astype(int), K)
    return Dpow[:, i, j] @ length


@dataclass
class Step1Report:
    shift_ratio: dict
    normalized_ratio: dict
    moment_ratio: dict
    violations: int

    @property
    def ok(self):
        return self.violations == 0

    def to_json(self):
        return {
            "shift_ratio": self.shift_ratio,
            "normalized_ratio": self.normalized_ratio,
            "moment_ratio": self.moment_ratio,
            "violations": self.violations,
            "ok": self.ok,
        }


def step1_inequalities_check(joint: JointMeasure, model, p=None, h_per_cell=33, max_paths=4096, tol=MOMENT_TOL) -> Step1Report:
    """Check the three per-schedule estimates for alpha in {1, p}.

    (a) sup_{h >= 1/K} int_0^{1-h} (d(s_t, s_{t+h})/h)^a dt <= 2^{a + N(a-1)} sum_i d(x_i, x_{i+1})^a
    (b) sup_{0 < h < 1} int_0^{1-h} d(s_t, s_{t+h})^a / h dt <= (2^a + 2^{aN}/(2^N - 1)) sum_i d(x_i, x_{i+1})^a
    (c) int d(x_i, x_{i+1})^a d(joint) <= W_p(mu_i, mu_{i+1})^a

    (a) and (b) hold for every node sequence, so they are tested on the
    ``max_paths`` heaviest paths of the joint, on a grid of ``h_per_cell``
    shifts per schedule cell. (c) uses the full joint. Ratios are max lhs/rhs.
    """
    p = joint.p if p is None else float(p)
    sched = joint.curve.schedule
    N, K = sched.N, sched.cells
    ms = joint.curve.measures
    tables = {(k, l): cost_matrix(model, ms[k], ms[l], 1.0) for k in range(K + 1) for l in range(K + 1)}
    sel = np.argsort(-joint.weights, kind="stable")[:max_paths]
    sub = joint.paths[sel]
    D = np.empty((len(sub), K + 1, K + 1))
    for (k, l), T in tables.items():
        D[:, k, l] = T[sub[:, k], sub[:, l]]
    hs = (np.arange(K)[:, None] + np.arange(h_per_cell)[None, :] / h_per_cell).ravel() / K
    hs = hs[hs > 0]
    violations = 0
    shift, norm_, moment = {}, {}, {}
    for alpha in sorted({1.0, p}):
        Dp = D**alpha
        chain = np.sum(Dp[:, np.arange(K), np.arange(1, K + 1)], axis=1)
        if N >= 1:
            ca = 2.0 ** (alpha + N * (alpha - 1))
            cb = 2.0**alpha + 2.0 ** (alpha * N) / (2**N - 1)
            worst_a = worst_b = 0.0
            for h in hs:
                I = _shift_integral(Dp, K, h)
                if h >= 1.0 / K:
                    lhs_a = I / h**alpha
                    violations += int(np.sum(lhs_a > ca * chain + tol))
                    worst_a = max(worst_a, _ratio(lhs_a, ca * chain))
                lhs_b = I / h
                violations += int(np.sum(lhs_b > cb * chain + tol))
                worst_b = max(worst_b, _ratio(lhs_b, cb * chain))
            shift[alpha] = worst_a
            norm_[alpha] = worst_b
        worst_c = 0.0
        for k in range(K):
            pair = joint.pair_marginal(k)
            lhs = float(np.sum(pair * tables[(k, k + 1)] ** alpha))
            W = float(np.sum(joint.plans[k] * tables[(k, k + 1)] ** p))
            rhs = max(W, 0.0) ** (alpha / p)
            violations += int(lhs > rhs + tol * max(1.0, rhs))
            worst_c = max(worst_c, _ratio(np.array([lhs]), np.array([rhs])))
        moment[alpha] = worst_c
    return Step1Report(shift, norm_, moment, violations)


def _ratio(lhs, rhs):
    ok = rhs > 0
    r = float(np.max(lhs[ok] / rhs[ok])) if ok.any() else 0.0
    return r


# ---------------------------------------------------------------------------
# velocity fields and the continuity equation


@dataclass
class VelocityFieldSample:
    t: float
    cell: int
    points: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    lp_norm: float
    path_bound: float
    p: float

    @property
    def jensen_ok(self):
        return self.lp_norm <= self.path_bound + JENSEN_TOL


def velocity_field(eta: DiscretePathMeasure, model, t, merge_radius=1e-9, p=2.0) -> VelocityFieldSample:
    """Conditional average of path velocities given the position at time t.

    Atoms whose symmetrized distance max(d(x,y), d(y,x)) is within
    ``merge_radius`` of a group's first atom share one averaged vector.
    """
    X = eta.positions(t)
    V = eta.velocities(t)
    w = eta.weights
    unassigned = np.ones(len(X), dtype=bool)
    pts, vecs, ws = [], [], []
    for a in range(len(X)):
        if not unassigned[a]:
            continue
        rest = np.nonzero(unassigned)[0]
        base = np.broadcast_to(X[a], X[rest].shape)
        sym = np.maximum(model.distance(base, X[rest]), model.distance(X[rest], base))
        group = rest[np.asarray(sym) <= merge_radius]
        unassigned[group] = False
        W = w[group].sum()
        pts.append(X[a])
        vecs.append(w[group] @ V[group] / W)
        ws.append(W)
    pts, vecs, ws = np.array(pts), np.array(vecs), np.array(ws)
    lp = float(np.sum(ws * np.asarray(model.metric_value(pts, vecs)) ** p) ** (1.0 / p))
    bound = float(np.sum(w * np.asarray(model.metric_value(X, V)) ** p) ** (1.0 / p))
    K = eta.schedule.cells
    return VelocityFieldSample(float(t), min(int(np.floor(t * K)), K - 1), pts, vecs, ws, lp, bound, float(p))


@dataclass
class ContinuityReport:
    residuals: np.ndarray  # (tests, cells)

    @property
    def max_residual(self):
        return float(np.max(self.residuals))

    def rows(self):
        return [(c, k, float(self.residuals[k, c])) for k in range(self.residuals.shape[0]) for c in range(self.residuals.shape[1])]


def cell_fields(eta: DiscretePathMeasure, model, merge_radius=1e-9, p=2.0):
    """Velocity fields at every cell midpoint."""
    K = eta.schedule.cells
    return [velocity_field(eta, model, (c + 0.5) / K, merge_radius, p) for c in range(K)]


def continuity_residual(curve: CurveOfMeasures, fields, tests) -> ContinuityReport:
    """|(int phi dmu_{i+1} - int phi dmu_i)/dt - sum_x w_x <v(x), dphi(x)>| per test and cell.

    ``fields[c]`` is the velocity field sampled at the midpoint of cell c.
    """
    dt = curve.schedule.dt
    if len(fields) != curve.schedule.cells:
        raise InputError("need one velocity field per cell")
    res = np.empty((len(tests), len(fields)))
    for k, phi in enumerate(tests):
        integrals = np.array([m.weights @ np.atleast_1d(phi.value(m.points)) for m in curve.measures])
        for c, f in enumerate(fields):
            flux = float(np.sum(f.weights * np.einsum("ij,ij->i", f.vectors, phi.differential(f.points))))
            res[k, c] = abs((integrals[c + 1] - integrals[c]) / dt - flux)
    return ContinuityReport(res)
