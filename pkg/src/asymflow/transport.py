"""Exact discrete optimal transport under asymmetric costs.

The solver is a transportation simplex (northwest-corner start, u-v
potentials on the basis tree, Dantzig pricing with a Bland fallback after a
run of degenerate pivots). Every result is certified before it is returned:
marginals, dual feasibility, complementary slackness and the duality gap.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError, SizeError

log = logging.getLogger(__name__)

MAX_SUPPORT = 512
CERT_TOL = 1e-9
MARGINAL_TOL = 1e-10
DEGENERATE_RUN = 50


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(pts) or len(w) == 0:
            raise InputError("weights must be a 1-d array matching the support")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be nonnegative and finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InputError(f"weights must sum to 1 (got {w.sum():.17g})")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points):
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def dirac(cls, point):
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.array([1.0]))

    @classmethod
    def normalized(cls, points, weights):
        w = np.asarray(weights, dtype=float)
        return cls(points, w / w.sum())

    def __len__(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.points.shape[1]

    def to_json(self):
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(np.asarray(obj["points"], dtype=float), np.asarray(obj["weights"], dtype=float))
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad measure: {obj!r}") from exc


@dataclass(frozen=True)
class OTResult:
    plan: np.ndarray
    value: float
    u: np.ndarray
    v: np.ndarray
    pivots: int = 0

    def to_json(self):
        i, j = np.nonzero(self.plan)
        return {
            "value": self.value,
            "plan": [[int(a), int(b), float(self.plan[a, b])] for a, b in zip(i, j)],
            "shape": list(self.plan.shape),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
        }


def cost_matrix(model, mu: DiscreteMeasure, nu: DiscreteMeasure, p=1.0, direction="forward"):
    """C[i, j] = d(x_i, y_j)^p (forward) or d(y_j, x_i)^p (backward)."""
    if p < 1:
        raise InputError("p must be >= 1")
    if direction not in ("forward", "backward"):
        raise InputError("direction must be 'forward' or 'backward'")
    X = model.check_points(mu.points)
    Y = model.check_points(nu.points)
    a, b = np.broadcast_arrays(X[:, None, :], Y[None, :, :])
    a = a.reshape(-1, X.shape[1])
    b = b.reshape(-1, X.shape[1])
    d = model.distance(a, b) if direction == "forward" else model.distance(b, a)
    return np.asarray(d, dtype=float).reshape(len(X), len(Y)) ** p


# ---------------------------------------------------------------------------
# transportation simplex


def _northwest(a, b):
    n, m = len(a), len(b)
    a = a.copy()
    b = b.copy()
    flow = {}
    i = j = 0
    while True:
        q = min(a[i], b[j])
        flow[(i, j)] = q
        a[i] -= q
        b[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return flow


def _adjacency(basis, n):
    adj = {}
    for i, j in basis:
        adj.setdefault(i, []).append(n + j)
        adj.setdefault(n + j, []).append(i)
    return adj


def _potentials(C, basis, n, m):
    adj = _adjacency(basis, n)
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj.get(node, ()):
            if node < n:
                j = nb - n
                if np.isnan(v[j]):
                    v[j] = C[node, j] - u[node]
                    queue.append(nb)
            else:
                if np.isnan(u[nb]):
                    u[nb] = C[nb, node - n] - v[node - n]
                    queue.append(nb)
    return u, v


def _tree_path(basis, n, start, goal):
    """Cells on the unique tree path from node ``start`` to node ``goal``."""
    adj = _adjacency(basis, n)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj.get(node, ()):
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    cells = []
    node = goal
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev, node - n) if prev < n else (node, prev - n))
        node = prev
    return cells[::-1]


def _tree_flows(basis, a, b):
    """Flows on a spanning tree that reproduce the marginals (leaf elimination)."""
    n, m = len(a), len(b)
    ra = a.astype(float).copy()
    rb = b.astype(float).copy()
    adj = {k: set(vs) for k, vs in _adjacency(basis, n).items()}
    flow = {}
    leaves = deque(k for k, vs in adj.items() if len(vs) == 1)
    while leaves:
        node = leaves.popleft()
        if not adj.get(node):
            continue
        (nb,) = adj[node]
        if node < n:
            i, j = node, nb - n
            q = ra[i]
        else:
            i, j = nb, node - n
            q = rb[j]
        flow[(i, j)] = q
        ra[i] -= q
        rb[j] -= q
        adj[nb].discard(node)
        del adj[node]
        if len(adj[nb]) == 1:
            leaves.append(nb)
        elif len(adj[nb]) == 0:
            del adj[nb]
    return flow


def _simplex(C, a, b, max_pivots=None):
    n, m = C.shape
    flow = _northwest(a, b)
    basis = set(flow)
    scale = max(1.0, float(np.max(np.abs(C))))
    opt_tol = 1e-12 * scale
    max_pivots = max_pivots or 50 * n * m + 1000
    degenerate = 0
    pivots = 0
    while True:
        u, v = _potentials(C, basis, n, m)
        R = C - u[:, None] - v[None, :]
        if degenerate >= DEGENERATE_RUN:
            neg = np.argwhere(R < -opt_tol)
            if neg.size == 0:
                break
            ie, je = map(int, neg[0])
        else:
            k = int(np.argmin(R))
            ie, je = divmod(k, m)
            if R[ie, je] >= -opt_tol:
                break
        path = _tree_path(basis, n, ie, n + je)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        ties = [c for c in minus if flow[c] <= theta]
        leave = min(ties)
        flow[(ie, je)] = theta
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        basis.remove(leave)
        del flow[leave]
        basis.add((ie, je))
        degenerate = degenerate + 1 if theta <= 0 else 0
        pivots += 1
        if pivots > max_pivots:
            raise NumericalError("transportation simplex exceeded its pivot budget")
    return basis, pivots


@dataclass
class Certificate:
    marginal_error: float
    feasibility_violation: float
    slackness_violation: float
    duality_gap: float
    primal: float
    dual: float

    @property
    def ok(self):
        return (
            self.marginal_error <= MARGINAL_TOL
            and self.feasibility_violation <= CERT_TOL
            and self.slackness_violation <= CERT_TOL
            and self.duality_gap <= CERT_TOL
        )

    def to_json(self):
        out = {k: float(v) for k, v in self.__dict__.items()}
        out["ok"] = self.ok
        return out


def certify(result: OTResult, cost, a, b) -> Certificate:
    C = np.asarray(cost, dtype=float)
    P = result.plan
    marg = max(np.max(np.abs(P.sum(axis=1) - a)), np.max(np.abs(P.sum(axis=0) - b)))
    slack = C - result.u[:, None] - result.v[None, :]
    feas = max(0.0, float(-slack.min()))
    active = P > 1e-12
    cs = float(np.max(np.abs(slack[active]))) if active.any() else 0.0
    primal = float(np.sum(P * C))
    dual = float(a @ result.u + b @ result.v)
    return Certificate(float(marg), feas, cs, abs(primal - dual), primal, dual)


def _weights(x):
    return x.weights if isinstance(x, DiscreteMeasure) else np.asarray(x, dtype=float)


def solve_ot(cost, mu, nu) -> OTResult:
    """Exact optimal plan for the cost matrix between weight vectors (or measures) mu, nu."""
    C = np.asarray(cost, dtype=float)
    a = _weights(mu)
    b = _weights(nu)
    if C.shape != (len(a), len(b)):
        raise InputError(f"cost shape {C.shape} does not match marginals ({len(a)}, {len(b)})")
    if not np.all(np.isfinite(C)):
        raise InputError("cost must be finite")
    if np.any(a < 0) or np.any(b < 0) or abs(a.sum() - 1) > 1e-12 or abs(b.sum() - 1) > 1e-12:
        raise InputError("marginals must be probability vectors")
    rows = np.nonzero(a > 0)[0]
    cols = np.nonzero(b > 0)[0]
    if len(rows) > MAX_SUPPORT or len(cols) > MAX_SUPPORT:
        raise SizeError(f"support sizes ({len(rows)}, {len(cols)}) exceed the {MAX_SUPPORT} cap")
    if len(rows) < len(a) or len(cols) < len(b):
        log.info("pruned %d zero-weight atoms", len(a) + len(b) - len(rows) - len(cols))
    Cr = C[np.ix_(rows, cols)]
    ar, br = a[rows], b[cols]
    basis, pivots = _simplex(Cr, ar, br)
    flows = _tree_flows(basis, ar, br)
    Pr = np.zeros_like(Cr)
    for (i, j), q in flows.items():
        Pr[i, j] = q
    if Pr.min() < -1e-13:
        raise NumericalError("negative flow on the final basis", residual=float(-Pr.min()))
    Pr = np.maximum(Pr, 0.0)
    u_r, v_r = _potentials(Cr, basis, len(rows), len(cols))
    # c-transforms: exact feasibility up to rounding, tight on the basis
    u = np.min(C[:, cols] - v_r[None, :], axis=1)
    v = np.min(C - u[:, None], axis=0)
    P = np.zeros_like(C)
    P[np.ix_(rows, cols)] = Pr
    res = OTResult(P, float(np.sum(P * C)), u, v, pivots)
    cert = certify(res, C, a, b)
    if not cert.ok:
        raise NumericalError(f"OT certificate failed: {cert.to_json()}", residual=cert.duality_gap)
    return res


def wasserstein(model, mu, nu, p=1.0, direction="forward") -> float:
    res = solve_ot(cost_matrix(model, mu, nu, p, direction), mu, nu)
    return float(max(res.value, 0.0) ** (1.0 / p))


# ---------------------------------------------------------------------------
# one-dimensional monotone solver


def monotone_plan(a, b):
    """Northwest-corner coupling of two weight vectors given in sorted support order.

    For a cost with the Monge property on the sorted supports this coupling is optimal.
    Returns (rows, cols, mass) triplets.
    """
    rows, cols, mass = [], [], []
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    i = j = 0
    n, m = len(a), len(b)
    while i < n and j < m:
        q = min(a[i], b[j])
        if q > 0:
            rows.append(i)
            cols.append(j)
            mass.append(q)
        a[i] -= q
        b[j] -= q
        if a[i] <= 0 and i < n - 1:
            i += 1
        elif b[j] <= 0 and j < m - 1:
            j += 1
        else:
            if i == n - 1 and j == m - 1:
                break
            if i < n - 1:
                i += 1
            else:
                j += 1
    return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(mass)


# ---------------------------------------------------------------------------
# duality and bounds


@dataclass
class KRReport:
    primal: float
    dual: float
    feasible: bool
    lipschitz_ok: bool
    max_lipschitz_excess: float

    @property
    def ok(self):
        return self.feasible and self.lipschitz_ok and abs(self.primal - self.dual) <= CERT_TOL

    def to_json(self):
        out = dict(self.__dict__)
        out["ok"] = self.ok
        return out


def kr_duality_check(result: OTResult, cost, mu, nu, model=None) -> KRReport:
    """Primal = dual and the asymmetric Lipschitz bound of the column potential.

    v_j - v_k <= d(y_k, y_j) is checked against the model distance when a
    model is given, otherwise against max_i (C[i, j] - C[i, k]).
    """
    C = np.asarray(cost, dtype=float)
    a, b = _weights(mu), _weights(nu)
    cert = certify(result, C, a, b)
    v = result.v
    diff = v[:, None] - v[None, :]  # diff[j, k] = v_j - v_k
    if model is not None and isinstance(nu, DiscreteMeasure):
        Y = nu.points
        A, B = np.broadcast_arrays(Y[None, :, :], Y[:, None, :])
        Dyy = np.asarray(model.distance(A.reshape(-1, Y.shape[1]), B.reshape(-1, Y.shape[1]))).reshape(len(Y), len(Y))
        bound = Dyy  # bound[j, k] = d(y_k, y_j)
    else:
        bound = np.max(C[:, :, None] - C[:, None, :], axis=0)
    excess = float(np.max(diff - bound))
    return KRReport(cert.primal, cert.dual, cert.feasibility_violation <= CERT_TOL, excess <= CERT_TOL, excess)


@dataclass
class ThetaReport:
    lhs: float
    rhs: float
    theta: float
    bound_holds: bool
    hypothesis_ok: bool

    @property
    def status(self):
        if not self.hypothesis_ok:
            return "hypothesis unmet"
        return "holds" if self.bound_holds else "violated"

    def to_json(self):
        out = dict(self.__dict__)
        out["status"] = self.status
        return out


def midpoint_concave(radii, values, tol=1e-12):
    """Discrete concavity of sampled values: each interior value dominates its neighbours' chord."""
    r = np.asarray(radii, dtype=float)
    f = np.asarray(values, dtype=float)
    if len(r) < 3:
        return True
    w = (r[1:-1] - r[:-2]) / (r[2:] - r[:-2])
    chord = (1 - w) * f[:-2] + w * f[2:]
    return bool(np.all(f[1:-1] >= chord - tol * np.maximum(1.0, np.abs(chord))))


def theta_transfer_check(model, mu, nu, p, q, star, theta, tol=CERT_TOL) -> ThetaReport:
    """W_q(nu, mu) <= Theta(W_p(delta_star, mu) + W_p(mu, nu)) * W_p(mu, nu).

    ``theta`` is a constant, a callable r -> Theta(r), or a ReversibilityProfile.
    For q = p only the constant sup Theta is meaningful and is used. Sampled
    profiles are tested for discrete concavity of Theta^{qp/(p-q)}.
    """
    if not 1 <= q <= p:
        raise InputError("need 1 <= q <= p")
    w_pq = wasserstein(model, mu, nu, p)
    w_back = wasserstein(model, nu, mu, q)
    hyp = True
    if np.isscalar(theta):
        th = float(theta)
    else:
        radii = getattr(theta, "radii", None)
        values = getattr(theta, "values", None)
        if q == p:
            if values is None:
                raise InputError("q = p needs a constant theta or a sampled profile")
            th = float(np.max(values))
        else:
            r = wasserstein(model, DiscreteMeasure.dirac(star), mu, p) + w_pq
            if radii is not None:
                hyp = midpoint_concave(radii, np.asarray(values) ** (q * p / (p - q)))
                if r > radii[-1]:
                    hyp = False
                    th = float(values[-1])
                else:
                    th = float(theta(r))
            else:
                th = float(theta(r))
    rhs = th * w_pq
    return ThetaReport(w_back, rhs, th, bool(w_back <= rhs + tol), hyp)


# ---------------------------------------------------------------------------
# Funk divergence experiment


def divergence_curve(t):
    """Points (1 - exp(1/(t-1) + 1)) e_1 of the unit disk, t in [0, 1)."""
    t = np.asarray(t, dtype=float)
    r = -np.expm1(_log_gap(t))
    return np.stack([r, np.zeros_like(r)], axis=-1)


def _log_gap(t):
    """ln(1 - |gamma(t)|) = 1/(t-1) + 1, exact even where 1 - |gamma(t)| underflows."""
    return 1.0 / (np.asarray(t, dtype=float) - 1.0) + 1.0


@dataclass(frozen=True)
class DivergenceRow:
    m: int
    k: int
    forward_dist: float
    anchor_dist: float


def _radial_cost(Ls, Lt, p):
    """Funk d(s e1, t e1)^p for radial points given by their log-gaps ln(1 - radius).

    Outward moves cost ln(1-s) - ln(1-t); inward moves cost ln(1+s) - ln(1+t).
    """
    Ls = np.asarray(Ls, dtype=float)
    Lt = np.asarray(Lt, dtype=float)
    out = np.maximum(Ls - Lt, 0.0)
    inward = np.log1p(-np.expm1(Ls)) - np.log1p(-np.expm1(Lt))
    return np.where(Lt <= Ls, out, inward) ** p


def funk_divergence_experiment(ms, ks, p=1.0):
    """Table of (m, k, W_p(mu^m, mu_k^m), W_p(delta_0, mu^m)).

    mu^m is uniform on the curve at the cell midpoints t_i = (i + 1/2)/m;
    mu_k^m moves the atoms with t_i >= 1 - 1/k to the origin. All supports lie
    on one ray, where the Funk cost is a Monge cost, so the sorted
    (northwest-corner) coupling is optimal; the anchor distance is the
    closed-form single-source value. Points are handled through their exact
    log-gap ln(1 - radius): for m beyond a few dozen the outer atoms are
    closer to the boundary than double precision can resolve.
    """
    ms = [ms] if np.isscalar(ms) else list(ms)
    rows = []
    for m in ms:
        m = int(m)
        if m < 2:
            raise InputError("m must be >= 2")
        t = (np.arange(m) + 0.5) / m
        L = _log_gap(t)
        w = np.full(m, 1.0 / m)
        anchor = float(np.mean(_radial_cost(0.0, L, p)) ** (1.0 / p))
        for k in ks:
            k = int(k)
            if k < 1:
                raise InputError("cutoff k must be >= 1")
            Lk = np.where(t >= 1.0 - 1.0 / k, 0.0, L)
            # increasing radius = decreasing log-gap
            ia = np.argsort(-L, kind="stable")
            ib = np.argsort(-Lk, kind="stable")
            i, j, mass = monotone_plan(w[ia], w[ib])
            val = float(np.sum(mass * _radial_cost(L[ia][i], Lk[ib][j], p)))
            rows.append(DivergenceRow(m, k, val ** (1.0 / p), anchor))
    return rows
