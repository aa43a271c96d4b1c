"""Asymmetric metric models: Funk ball, Minkowski spaces, a toy half-line and black-box charts.

Every model exposes the pointwise metric ``F(x, v)`` (smooth models only), the
distance ``d(x, y)``, and for smooth models a per-point tangent norm used for
the metric tensor, Legendre inverse (gradients) and the geodesic spray.
Distances and metric values are vectorized over leading axes wherever the
model admits a closed form.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .curves import Trajectory
from .errors import DomainError, InputError, ModelError, NumericalError
from .norms import (
    FiniteDifferenceForm,
    NormSpec,
    RandersForm,
    hessian_half_sq,
    norm,
    reversibility,
    solve_legendre,
)

log = logging.getLogger(__name__)

# 8-point Gauss-Legendre rule on [0, 1] for segment lengths
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


class MetricModel:
    """Base class. Subclasses fill in the geometry."""

    dim: int
    smooth = True
    kind = "abstract"

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def check_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise InputError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        if not np.all(self.contains(x)):
            raise DomainError(f"point(s) outside the domain of {self.kind}")
        return x

    def metric_value(self, x, v):
        raise ModelError(f"{self.kind} has no tangent structure")

    def distance(self, x, y):
        raise NotImplementedError

    def tangent_form(self, x):
        raise ModelError(f"{self.kind} has no tangent structure")

    def pointwise_reversibility(self, x) -> float:
        return float(self.tangent_form(x).reversibility())

    def forward_ray_extent(self, c, u, r):
        """Largest t with d(c, c + t u) <= r, per direction u (rows)."""
        u = np.atleast_2d(u)
        out = np.empty(len(u))
        for k, w in enumerate(u):
            lo, hi = 0.0, 1.0
            while hi < 1e6 and self.contains(c + hi * w) and self.distance(c, c + hi * w) <= r:
                lo, hi = hi, 2 * hi
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if self.contains(c + mid * w) and self.distance(c, c + mid * w) <= r:
                    lo = mid
                else:
                    hi = mid
            out[k] = lo
        return out

    def chord_point(self, a, b, lam):
        """Constant-speed geodesic from a to b at normalized time lam (straight line by default)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        lam = np.asarray(lam, dtype=float)[..., None]
        return a + lam * (b - a)

    def chord_velocity(self, a, b, lam):
        """d/dlam of :meth:`chord_point`."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return np.broadcast_to(b - a, np.broadcast_shapes(a.shape, b.shape, np.shape(lam) + (self.dim,))).copy()

    def to_json(self):
        raise InputError(f"{self.kind} models are not serializable")


class FunkBall(MetricModel):
    """The open Euclidean unit ball with the Funk metric."""

    kind = "funk"

    def __init__(self, dim=2):
        if int(dim) != dim or dim < 2:
            raise InputError("the Funk ball needs dimension >= 2")
        self.dim = int(dim)

    def contains(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) < 1.0

    @staticmethod
    def _funk(x, v):
        rx = np.linalg.norm(x, axis=-1)
        one_minus_r2 = (1.0 - rx) * (1.0 + rx)
        xv = np.sum(x * v, axis=-1)
        vv = np.sum(v * v, axis=-1)
        S = np.sqrt(np.maximum(xv * xv + vv * one_minus_r2, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            # two algebraically equal forms; pick the one free of cancellation
            pos = (S + xv) / one_minus_r2
            neg = vv / (S - xv)
        return np.where(xv >= 0, pos, neg)

    def metric_value(self, x, v):
        x = self.check_points(x)
        return self._funk(x, np.asarray(v, dtype=float))

    def distance(self, x, y):
        x = self.check_points(x)
        y = self.check_points(y)
        F = self._funk(x, y - x)
        return -np.log1p(-F)

    def tangent_form(self, x):
        x = self.check_points(x)
        r2 = x @ x
        c = 1.0 - r2
        A = (c * np.eye(self.dim) + np.outer(x, x)) / c**2
        return RandersForm(A, x / c)

    def pointwise_reversibility(self, x):
        r = np.linalg.norm(self.check_points(x), axis=-1)
        return (1.0 + r) / (1.0 - r)

    def forward_ray_extent(self, c, u, r):
        u = np.atleast_2d(u)
        c = np.broadcast_to(np.asarray(c, dtype=float), u.shape)
        return -np.expm1(-r) / self._funk(c, u)

    def chord_point(self, a, b, lam):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        u = b - a
        F = self._funk(a, u)
        D = -np.log1p(-F)
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(F > 0, -np.expm1(-lam * D) / F, 0.0)
        return a + s[..., None] * u

    def chord_velocity(self, a, b, lam):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        u = b - a
        F = self._funk(a, u)
        D = -np.log1p(-F)
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ds = np.where(F > 0, D * np.exp(-lam * D) / F, 0.0)
        return ds[..., None] * u

    def to_json(self):
        return {"variant": "funk", "dim": self.dim}


class MinkowskiSpace(MetricModel):
    """R^n with a constant asymmetric norm."""

    kind = "minkowski"

    def __init__(self, spec: NormSpec):
        self.spec = spec
        self.dim = spec.dim
        self.smooth = spec.smooth

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1)

    def metric_value(self, x, v):
        self.check_points(x)
        return norm(self.spec, v)

    def distance(self, x, y):
        x = self.check_points(x)
        y = self.check_points(y)
        return norm(self.spec, y - x)

    def tangent_form(self, x):
        return self.spec.form()

    def pointwise_reversibility(self, x):
        return reversibility(self.spec)

    def forward_ray_extent(self, c, u, r):
        return r / norm(self.spec, np.atleast_2d(u))

    def to_json(self):
        return {"variant": "minkowski", "dim": self.dim, "norm": self.spec.to_json()}


class ToyHalfLine(MetricModel):
    """R with d(x, y) = y - x if y >= x, else 1. A pure metric counterexample."""

    kind = "toy_halfline"
    smooth = False
    dim = 1

    def contains(self, x):
        return np.all(np.isfinite(np.asarray(x, dtype=float)), axis=-1)

    def distance(self, x, y):
        x = self.check_points(x)[..., 0]
        y = self.check_points(y)[..., 0]
        return np.where(y >= x, y - x, 1.0)

    def pointwise_reversibility(self, x):
        raise ModelError("toy half-line has no tangent structure")

    def forward_ray_extent(self, c, u, r):
        u = np.atleast_2d(u)[:, 0]
        back = np.inf if r >= 1.0 else 0.0
        return np.where(u > 0, r / np.where(u > 0, u, 1.0), back)

    def to_json(self):
        return {"variant": "toy_halfline", "dim": 1}


class BlackBoxChart(MetricModel):
    """A chart with a user-supplied Finsler evaluator ``metric(x, v)`` and ``domain(x)`` predicate.

    Distances minimize a discretized length over polylines; see :meth:`distance`.
    """

    kind = "blackbox"
    levels = 6
    rel_tol = 5e-3

    def __init__(self, metric, dim, domain=None, fd_step=1e-5):
        self._metric = metric
        self._domain = domain
        self.dim = int(dim)
        self.fd_step = fd_step

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self._domain is None:
            return np.all(np.isfinite(x), axis=-1)
        flat = x.reshape(-1, self.dim)
        out = np.array([bool(self._domain(p)) for p in flat])
        return out.reshape(x.shape[:-1])

    def _F(self, x, v):
        return float(self._metric(x, v))

    def metric_value(self, x, v):
        x = self.check_points(x)
        x, v = np.broadcast_arrays(x, np.asarray(v, dtype=float))
        flat = [self._F(a, b) for a, b in zip(x.reshape(-1, self.dim), v.reshape(-1, self.dim))]
        return np.array(flat).reshape(x.shape[:-1]) if x.ndim > 1 else flat[0]

    def tangent_form(self, x):
        x = self.check_points(x)
        return FiniteDifferenceForm(lambda v: self._F(x, v), self.dim, self.fd_step)

    def _segment_length(self, a, b):
        """Length of the straight segment a -> b (Gauss-Legendre)."""
        d = b - a
        return sum(w * self._F(a + s * d, d) for s, w in zip(_GL_NODES, _GL_WEIGHTS))

    def _polyline_length(self, nodes):
        return sum(self._segment_length(a, b) for a, b in zip(nodes[:-1], nodes[1:]))

    def distance(self, x, y):
        """Upper bound of d(x, y) by minimizing the length of polylines.

        Polylines with 2^k segments, k = 1..6; each level starts from the
        previous optimum with midpoints inserted. The reported value is the
        running minimum over levels; global optimality is not claimed.
        """
        x = self.check_points(x)
        y = self.check_points(y)
        if x.ndim > 1:
            return np.array([self.distance(a, b) for a, b in zip(x.reshape(-1, self.dim), y.reshape(-1, self.dim))]).reshape(x.shape[:-1])
        if np.array_equal(x, y):
            return 0.0
        nodes = np.array([x, y])
        best = self._polyline_length(nodes)
        history = [best]
        for _ in range(self.levels):
            mids = 0.5 * (nodes[1:] + nodes[:-1])
            refined = np.empty((2 * len(nodes) - 1, self.dim))
            refined[0::2] = nodes
            refined[1::2] = mids
            nodes = self._optimize_interior(refined)
            val = self._polyline_length(nodes)
            best = min(best, val)
            history.append(best)
        change = abs(history[-2] - history[-1]) / max(history[-1], 1e-300)
        if change > self.rel_tol:
            raise NumericalError(
                f"polyline distance not converged (relative change {change:.2e})", residual=change, best=best
            )
        return best

    def _optimize_interior(self, nodes):
        x0, x1 = nodes[0], nodes[-1]
        n_int = len(nodes) - 2
        h = self.fd_step

        def unpack(z):
            return np.vstack([x0, z.reshape(n_int, self.dim), x1])

        seg = self._segment_length

        def fun(z):
            pts = unpack(z)
            if not np.all(self.contains(pts)):
                return np.inf, np.zeros_like(z)
            total = self._polyline_length(pts)
            grad = np.zeros((n_int, self.dim))
            for k in range(1, n_int + 1):
                for i in range(self.dim):
                    e = np.zeros(self.dim)
                    e[i] = h
                    plus = pts[k] + e
                    minus = pts[k] - e
                    fp = seg(pts[k - 1], plus) + seg(plus, pts[k + 1])
                    fm = seg(pts[k - 1], minus) + seg(minus, pts[k + 1])
                    grad[k - 1, i] = (fp - fm) / (2 * h)
            return total, grad.ravel()

        res = optimize.minimize(fun, nodes[1:-1].ravel(), jac=True, method="L-BFGS-B", options={"maxiter": 500})
        cand = unpack(res.x)
        if np.all(self.contains(cand)) and self._polyline_length(cand) <= self._polyline_length(nodes):
            return cand
        return nodes


class ReverseModel(MetricModel):
    """The reverse structure: F~(x, v) = F(x, -v), d~(x, y) = d(y, x)."""

    def __init__(self, base: MetricModel):
        self.base = base
        self.dim = base.dim
        self.smooth = base.smooth
        self.kind = f"reverse({base.kind})"

    def contains(self, x):
        return self.base.contains(x)

    def metric_value(self, x, v):
        return self.base.metric_value(x, -np.asarray(v, dtype=float))

    def distance(self, x, y):
        return self.base.distance(y, x)

    def tangent_form(self, x):
        form = self.base.tangent_form(x)
        if isinstance(form, RandersForm):
            return RandersForm(form.A, -form.b)
        return FiniteDifferenceForm(lambda v: form.value(-v), self.dim, form.step)

    def pointwise_reversibility(self, x):
        return self.base.pointwise_reversibility(x)

    def chord_point(self, a, b, lam):
        return self.base.chord_point(b, a, 1.0 - np.asarray(lam, dtype=float))

    def chord_velocity(self, a, b, lam):
        return -self.base.chord_velocity(b, a, 1.0 - np.asarray(lam, dtype=float))

    def to_json(self):
        out = dict(self.base.to_json())
        out["reverse"] = not out.get("reverse", False)
        return out


def model_from_json(obj) -> MetricModel:
    """Inverse of ``model.to_json()``."""
    try:
        variant = obj["variant"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad model spec: {obj!r}") from exc
    if variant == "funk":
        model = FunkBall(int(obj.get("dim", 2)))
    elif variant == "minkowski":
        if "norm" not in obj:
            raise InputError("minkowski model needs a 'norm' object")
        model = MinkowskiSpace(NormSpec.from_json(obj["norm"]))
        if "dim" in obj and int(obj["dim"]) != model.dim:
            raise InputError("model dim does not match norm dim")
    elif variant == "toy_halfline":
        model = ToyHalfLine()
    else:
        raise InputError(f"unknown model variant {variant!r}")
    if obj.get("reverse", False):
        model = ReverseModel(model)
    return model


# ---------------------------------------------------------------------------
# operations


@dataclass(frozen=True)
class MetricTensor:
    x: np.ndarray
    v: np.ndarray
    g: np.ndarray

    def __call__(self, a, b):
        return float(np.asarray(a) @ self.g @ np.asarray(b))


def metric_value(model: MetricModel, x, v):
    return model.metric_value(x, v)


def distance(model: MetricModel, x, y):
    return model.distance(x, y)


def metric_tensor(model: MetricModel, x, v, rel_step=1e-5, pd_tol=1e-8) -> MetricTensor:
    """g_v = Hess_v(F(x, .)^2/2) by central second differences (step rel_step*|v|)."""
    if not model.smooth:
        raise ModelError(f"{model.kind} has no metric tensor")
    x = model.check_points(x)
    v = np.asarray(v, dtype=float)
    if not np.linalg.norm(v) > 0:
        raise InputError("metric tensor needs v != 0")
    g = hessian_half_sq(lambda w: model.metric_value(x, w), v, rel_step)
    g = 0.5 * (g + g.T)
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= pd_tol * max(eig[-1], 1.0):
        raise ModelError(f"metric tensor is not positive definite (min eigenvalue {eig[0]:.3e})")
    return MetricTensor(x.copy(), v.copy(), g)


def gradient(model: MetricModel, x, dphi):
    """Finsler gradient L^{-1}(dphi) in the tangent space at x."""
    if not model.smooth:
        raise ModelError(f"{model.kind} has no Legendre transformation")
    return solve_legendre(model.tangent_form(x), dphi)[0]


def dual_metric(model: MetricModel, x, xi) -> float:
    """F*(x, xi)."""
    if not model.smooth:
        raise ModelError(f"{model.kind} has no dual metric")
    return solve_legendre(model.tangent_form(x), xi)[1]


def spray_acceleration(model: MetricModel, x, y, eps=1e-5):
    """Geodesic acceleration -2G(x, y) from the Euler-Lagrange equation of L = F^2/2.

    g_y(x) a = L_x - (d/dx L_y) . y, with the x-derivatives taken by central differences.
    """
    form = model.tangent_form(x)
    g = form.half_sq_hess(y)
    n = model.dim
    # keep the stencil well inside the domain: near a boundary the metric
    # varies on the scale of the distance to it
    eye = np.eye(n)
    while eps > 1e-14 and not np.all(model.contains(x + 64.0 * eps * np.vstack([eye, -eye]))):
        eps *= 0.5
    Lx = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = eps
        Lx[k] = (model.metric_value(x + e, y) ** 2 - model.metric_value(x - e, y) ** 2) / (4.0 * eps)
    ny = np.linalg.norm(y)
    yhat = y / ny
    Lyx_y = (
        model.tangent_form(x + eps * yhat).half_sq_grad(y) - model.tangent_form(x - eps * yhat).half_sq_grad(y)
    ) / (2.0 * eps) * ny
    return np.linalg.solve(g, Lx - Lyx_y)


def geodesic(model: MetricModel, x, v, T, steps=10_000) -> Trajectory:
    """Integrate the geodesic ODE with classical RK4; stops at a domain exit."""
    if not model.smooth:
        raise ModelError(f"{model.kind} has no geodesic spray")
    x = model.check_points(x).copy()
    v = np.asarray(v, dtype=float).copy()
    if not np.linalg.norm(v) > 0:
        raise InputError("initial velocity must be nonzero")
    dt = T / steps
    times = [0.0]
    pts = [x.copy()]
    vels = [v.copy()]
    exit_time = None

    def rhs(p, w):
        if not model.contains(p):
            raise DomainError("left domain")
        return w, spray_acceleration(model, p, w)

    for k in range(steps):
        try:
            k1x, k1v = rhs(x, v)
            k2x, k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
            k3x, k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
            k4x, k4v = rhs(x + dt * k3x, v + dt * k3v)
        except DomainError:
            exit_time = times[-1]
            break
        xn = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not model.contains(xn):
            exit_time = times[-1]
            break
        x, v = xn, vn
        times.append((k + 1) * dt)
        pts.append(x.copy())
        vels.append(v.copy())
    if exit_time is not None:
        log.info("geodesic left the domain at t=%.6g", exit_time)
    return Trajectory(np.array(times), np.array(pts), np.array(vels), exit_time=exit_time)


@dataclass(frozen=True)
class ReversibilityProfile:
    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray

    def __call__(self, r):
        """Theta(r) as a right-continuous step function (value of the smallest sampled radius >= r)."""
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.radii, r, side="left")
        if np.any(idx >= len(self.radii)):
            raise InputError("radius beyond the sampled profile range")
        return self.values[idx]


def _sample_forward_ball(model, center, r, n, rng):
    u = rng.standard_normal((n, model.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    tmax = np.minimum(model.forward_ray_extent(center, u, r), 1e6)
    s = rng.random(n) ** (1.0 / model.dim)
    return center + (s * tmax)[:, None] * u, tmax


def reversibility_profile(model: MetricModel, center, radii, samples=2000, seed=0) -> ReversibilityProfile:
    """Sampled lower estimate of Theta(r) = sup d(x,y)/d(y,x) over closed forward r-balls.

    Half of the pairs are independent points of the ball; the other half are
    close pairs (x, x + eps w), which probe the pointwise reversibility.
    """
    center = model.check_points(center)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise InputError("radii must be increasing")
    rng = np.random.default_rng(seed)
    vals = []
    for r in radii:
        x, tmax = _sample_forward_ball(model, center, r, samples, rng)
        y, _ = _sample_forward_ball(model, center, r, samples, rng)
        w = rng.standard_normal((samples, model.dim))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        z = x + (1e-4 * np.maximum(tmax, 1e-12))[:, None] * w
        ok = model.contains(z)
        z = z[ok]
        zx = x[ok]
        inball = model.distance(np.broadcast_to(center, z.shape), z) <= r
        a = np.vstack([x, zx[inball]])
        b = np.vstack([y, z[inball]])
        dab = model.distance(a, b)
        dba = model.distance(b, a)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.concatenate([dab / dba, dba / dab])
        ratio = ratio[np.isfinite(ratio)]
        vals.append(max(1.0, ratio.max() if ratio.size else 1.0))
    return ReversibilityProfile(center.copy(), radii.copy(), np.maximum.accumulate(np.array(vals)))


def uniform_constant(model: MetricModel, samples=1000, seed=0, radius=0.9) -> float:
    """Sampled lower bound of sup g_v(y,y)/g_z(y,y) (same base point).

    Samples are drawn from fixed-seed streams row by row, so a run with more
    samples sees a superset of the tuples of a smaller run.
    """
    if not model.smooth:
        raise ModelError(f"{model.kind} has no metric tensor")
    s_vec, s_rad = np.random.SeedSequence(seed).spawn(2)
    W = np.random.default_rng(s_vec).standard_normal((samples, 4, model.dim))
    R = np.random.default_rng(s_rad).random(samples)
    best = 1.0
    for k in range(samples):
        xdir, v, z, y = W[k]
        if isinstance(model, FunkBall) or (isinstance(model, ReverseModel) and isinstance(model.base, FunkBall)):
            x = xdir / np.linalg.norm(xdir) * radius * R[k] ** (1.0 / model.dim)
        else:
            x = xdir
        form = model.tangent_form(x)
        ratio = (y @ form.half_sq_hess(v) @ y) / (y @ form.half_sq_hess(z) @ y)
        best = max(best, float(ratio))
    return best
