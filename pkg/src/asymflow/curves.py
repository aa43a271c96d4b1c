"""Sampled curves: lengths, one-sided metric derivatives, variation and AC classification.

A curve is known only through samples (t_i, p_i). All quantities are computed
at that resolution; the model is used only through ``model.distance`` and,
for quadrature lengths, ``model.metric_value``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, ModelError

AC_TOL = 1e-9
# slack allowed when a coarse certificate is tested on finer samples
REFINE_SLACK = 1.5
REFINE_STRIDES = (2, 4, 8)


@dataclass(frozen=True)
class SampledCurve:
    """Samples (t_i, p_i), i = 0..K, with strictly increasing times."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if t.ndim != 1 or len(t) < 2:
            raise InputError("a curve needs at least two samples")
        if len(p) != len(t):
            raise InputError("times and points must have the same length")
        if np.any(np.diff(t) <= 0):
            raise InputError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)

    @classmethod
    def from_function(cls, gamma, K, t0=0.0, t1=1.0):
        t = np.linspace(t0, t1, K + 1)
        return cls(t, np.array([np.atleast_1d(gamma(s)) for s in t]))

    @property
    def K(self):
        return len(self.times) - 1

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def dt(self):
        return np.diff(self.times)

    def subcurve(self, i, j):
        return SampledCurve(self.times[i : j + 1], self.points[i : j + 1])

    def reversed(self):
        """Same image traversed backwards on the same time span."""
        t = self.times
        return SampledCurve((t[0] + t[-1] - t)[::-1], self.points[::-1])


@dataclass(frozen=True)
class Trajectory(SampledCurve):
    """A sampled curve that also carries velocities; ``exit_time`` is set when integration stopped early."""

    velocities: np.ndarray = None
    exit_time: Optional[float] = None

    @property
    def exited(self):
        return self.exit_time is not None


@dataclass(frozen=True)
class DerivativeProfile:
    """Difference quotients on each cell [t_i, t_{i+1}] (left endpoints in ``times``)."""

    times: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    side: str = "forward"

    @property
    def values(self):
        return self.forward if self.side == "forward" else self.backward


def _consecutive(model, curve):
    p = curve.points
    fwd = np.asarray(model.distance(p[:-1], p[1:]), dtype=float)
    bwd = np.asarray(model.distance(p[1:], p[:-1]), dtype=float)
    return fwd, bwd


def curve_length(model, curve: SampledCurve):
    """(chord length, quadrature length); the second is None for non-smooth models.

    The quadrature evaluates F at the midpoint of each chord.
    """
    fwd, _ = _consecutive(model, curve)
    chord = float(fwd.sum())
    if not model.smooth or getattr(model, "kind", "") == "toy_halfline":
        return chord, None
    p = curve.points
    quad = float(np.sum(model.metric_value(0.5 * (p[1:] + p[:-1]), np.diff(p, axis=0))))
    return chord, quad


def quadrature_length(model, curve: SampledCurve) -> float:
    if not model.smooth:
        raise ModelError(f"{model.kind} has no pointwise metric")
    return curve_length(model, curve)[1]


def metric_derivative(model, curve: SampledCurve, side="forward") -> DerivativeProfile:
    if side not in ("forward", "backward"):
        raise InputError("side must be 'forward' or 'backward'")
    fwd, bwd = _consecutive(model, curve)
    dt = curve.dt
    return DerivativeProfile(curve.times[:-1].copy(), fwd / dt, bwd / dt, side)


def lp_norm(values, dt, p):
    if np.isinf(p):
        return float(np.max(values))
    return float(np.sum(values**p * dt) ** (1.0 / p))


def _distance_rows(model, pts, rows):
    """d(p_i, p_j) for i in rows and all j."""
    a = np.repeat(pts[rows], len(pts), axis=0)
    b = np.tile(pts, (len(rows), 1))
    return np.asarray(model.distance(a, b), dtype=float).reshape(len(rows), len(pts))


def distance_matrix(model, points, chunk=256):
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    D = np.empty((n, n))
    for s in range(0, n, chunk):
        rows = np.arange(s, min(n, s + chunk))
        D[rows] = _distance_rows(model, pts, rows)
    return D


def _check_certificate(D, cum, slack, tol):
    """Pairs i<j with D[i,j] > slack*(cum[j]-cum[i]) + tol*(1 + D[i,j])."""
    bound = slack * (cum[None, :] - cum[:, None]) + tol * (1.0 + np.abs(D))
    bad = np.triu(D > bound, k=1)
    idx = np.argwhere(bad)
    excess = D[bad] - bound[bad] if idx.size else np.array([])
    return idx, excess


@dataclass
class ACReport:
    forward_ok: bool
    backward_ok: bool
    forward_certificate: np.ndarray
    backward_certificate: np.ndarray
    lp_norms: dict
    violations: list = field(default_factory=list)

    def to_json(self):
        return {
            "forward_ok": bool(self.forward_ok),
            "backward_ok": bool(self.backward_ok),
            "lp_norms": {k: float(v) for k, v in self.lp_norms.items()},
            "violations": self.violations,
        }


def classify_ac(model, curve: SampledCurve, p=1.0, tol=AC_TOL, max_report=20) -> ACReport:
    """Finite-resolution forward/backward AC test.

    The certificate of each direction is its one-sided difference quotient.
    It is tested on all O(K^2) sampled subintervals. In addition, the
    certificates built from every 2nd, 4th and 8th sample are tested on the
    full sample set (with slack ``REFINE_SLACK``); a direction is declared
    not AC when it fails the own-resolution test or fails at every
    refinement level tried, i.e. when no coarser certificate survives
    refinement.
    """
    if p < 1:
        raise InputError("p must be >= 1")
    t = curve.times
    prof = metric_derivative(model, curve)
    D = distance_matrix(model, curve.points)
    # backward direction: d(p_j, p_i) for i<j
    DT = D.T
    results = {}
    violations = []
    for name, quot, M in (("forward", prof.forward, D), ("backward", prof.backward, DT)):
        cum = np.concatenate([[0.0], np.cumsum(quot * curve.dt)])
        idx, exc = _check_certificate(M, cum, 1.0, tol)
        own_ok = idx.size == 0
        levels_failed = []
        for i, j in idx[:max_report]:
            violations.append({"side": name, "level": 1, "i": int(i), "j": int(j), "excess": float(M[i, j] - cum[j] + cum[i])})
        for s in REFINE_STRIDES:
            nodes = np.arange(0, curve.K + 1, s)
            if len(nodes) < 2:
                continue
            if nodes[-1] != curve.K:
                nodes = np.append(nodes, curve.K)
            coarse = M[nodes[:-1], nodes[1:]]
            ccum = np.concatenate([[0.0], np.cumsum(coarse)])
            cum_s = np.interp(t, t[nodes], ccum)
            idx_s, _ = _check_certificate(M, cum_s, REFINE_SLACK, tol)
            levels_failed.append(idx_s.size > 0)
            for i, j in idx_s[: max(0, max_report - len(violations))]:
                violations.append({"side": name, "level": s, "i": int(i), "j": int(j), "excess": float(M[i, j] - REFINE_SLACK * (cum_s[j] - cum_s[i]))})
        results[name] = own_ok and not (levels_failed and all(levels_failed))
    dt = curve.dt
    norms = {
        "forward": lp_norm(prof.forward, dt, p),
        "backward": lp_norm(prof.backward, dt, p),
    }
    return ACReport(results["forward"], results["backward"], prof.forward, prof.backward, norms, violations)


# ---------------------------------------------------------------------------
# variation


def _cell_cumulative(model, curve):
    fwd, _ = _consecutive(model, curve)
    return np.concatenate([[0.0], np.cumsum(fwd)])


def pointwise_variation(model, curve: SampledCurve, interval=None) -> float:
    """V(gamma; [a, b]) at sample resolution.

    On sample-aligned intervals this is the sum of consecutive forward
    distances. Partial cells contribute in proportion to their overlap, which
    makes V exactly additive over adjacent intervals.
    """
    cum = _cell_cumulative(model, curve)
    return _variation_from_cum(curve.times, cum, interval)


def _variation_from_cum(t, cum, interval):
    a, b = (t[0], t[-1]) if interval is None else interval
    if a > b:
        raise InputError("interval must satisfy a <= b")
    a = min(max(a, t[0]), t[-1])
    b = min(max(b, t[0]), t[-1])
    return float(np.interp(b, t, cum) - np.interp(a, t, cum))


class VariationMeasure:
    """Dyadic tree of V(gamma; J) over the curve's time span.

    ``nodes[level][k]`` is the variation of the k-th of 2^level equal subintervals.
    """

    def __init__(self, model, curve: SampledCurve, depth=8):
        self.curve = curve
        self.cum = _cell_cumulative(model, curve)
        t0, t1 = curve.times[0], curve.times[-1]
        self.depth = depth
        self.nodes = []
        for level in range(depth + 1):
            edges = np.linspace(t0, t1, 2**level + 1)
            vals = np.interp(edges, curve.times, self.cum)
            self.nodes.append(np.diff(vals))

    @property
    def total(self):
        return float(self.cum[-1])

    def __call__(self, a, b):
        return _variation_from_cum(self.curve.times, self.cum, (a, b))

    def density(self, t, eps):
        t0, t1 = self.curve.times[0], self.curve.times[-1]
        lo, hi = max(t - eps, t0), min(t + eps, t1)
        if not hi > lo:
            raise InputError("degenerate density window")
        return self(lo, hi) / (hi - lo)

    def additivity_defect(self):
        """max |V(parent) - V(left child) - V(right child)| over the tree."""
        worst = 0.0
        for level in range(self.depth):
            kids = self.nodes[level + 1].reshape(-1, 2).sum(axis=1)
            worst = max(worst, float(np.max(np.abs(self.nodes[level] - kids))))
        return worst


def variation_density(model, curve: SampledCurve, t, eps) -> float:
    return VariationMeasure(model, curve, depth=0).density(t, eps)


@dataclass
class TransferReport:
    theta: float
    holds: bool
    max_excess: float
    tightness: float

    def to_json(self):
        return {k: float(v) if not isinstance(v, bool) else v for k, v in self.__dict__.items()}


def reversibility_transfer_check(model, curve: SampledCurve, p=1.0, tol=1e-9) -> TransferReport:
    """Check d(g(t2), g(t1)) <= theta * (forward length of g on [t1, t2]) on all sampled pairs.

    theta is the largest pointwise reversibility at the samples. For models
    whose pointwise reversibility is convex along chords (Minkowski, Funk)
    this bounds the reversibility on the whole polygon. ``tightness`` is the
    largest ratio of left side to right side (1 means the bound is attained).
    """
    if not model.smooth:
        raise ModelError(f"{model.kind} has no pointwise reversibility")
    theta = max(float(np.max(model.pointwise_reversibility(x))) for x in curve.points)
    D = distance_matrix(model, curve.points)
    cum = _cell_cumulative(model, curve)
    rhs = theta * (cum[None, :] - cum[:, None])
    lhs = D.T
    iu = np.triu_indices(len(cum), k=1)
    excess = lhs[iu] - rhs[iu]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs[iu] > 0, lhs[iu] / rhs[iu], 0.0)
    return TransferReport(theta, bool(np.all(excess <= tol)), float(np.max(excess)), float(np.max(ratio)))
