"""Asymmetric Minkowski norms on R^n, their duals and the Legendre inverse.

Three variants are supported:

* ``euclidean``  F(v) = |v|
* ``randers``    F(v) = |v| + <w, v>, |w| < 1
* ``l1drift``    F(v) = sum|v_i| + omega * sum v_i, |omega| < 1

The smooth variants are represented internally by a :class:`RandersForm`
``sqrt(v^T A v) + <b, v>``, which is also what the Funk metric looks like on a
single tangent space, so the Legendre machinery here is reused by
:mod:`asymflow.models`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, ModelError, NumericalError

VARIANTS = ("euclidean", "randers", "l1drift")

LEGENDRE_MAX_ITER = 200
LEGENDRE_TOL = 1e-12


class RandersForm:
    """The norm y -> sqrt(y^T A y) + <b, y> with A SPD and |b|_{A^-1} < 1."""

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.dim = self.b.shape[0]

    def value(self, y):
        y = np.asarray(y, dtype=float)
        # rescale so the quadratic form neither underflows nor overflows
        s = np.max(np.abs(y), axis=-1, keepdims=True)
        z = np.divide(y, s, out=np.zeros_like(y), where=s > 0)
        quad = np.einsum("...i,ij,...j->...", z, self.A, z)
        return s[..., 0] * (np.sqrt(np.maximum(quad, 0.0)) + z @ self.b)

    def grad(self, y):
        """Gradient of F at y != 0."""
        Ay = self.A @ y
        alpha = np.sqrt(y @ Ay)
        return Ay / alpha + self.b

    def half_sq_grad(self, y):
        """Gradient of F^2/2, i.e. the Legendre map y -> g_y(y, .)."""
        if not np.any(y):
            return np.zeros(self.dim)
        return self.value(y) * self.grad(y)

    def half_sq_hess(self, y):
        """Fundamental tensor g_y = Hess(F^2/2) at y != 0."""
        Ay = self.A @ y
        alpha = np.sqrt(y @ Ay)
        dF = Ay / alpha + self.b
        hessF = (self.A - np.outer(Ay, Ay) / alpha**2) / alpha
        return np.outer(dF, dF) + (alpha + y @ self.b) * hessF

    def reversibility(self):
        beta = np.sqrt(self.b @ np.linalg.solve(self.A, self.b))
        return (1.0 + beta) / (1.0 - beta)

    def initial_guess(self, xi):
        return np.linalg.solve(self.A, xi)


class FiniteDifferenceForm:
    """A norm known only through an evaluator; derivatives by central differences."""

    def __init__(self, f, dim, step=1e-5):
        self.f = f
        self.dim = dim
        self.step = step

    def value(self, y):
        return float(self.f(np.asarray(y, dtype=float)))

    def half_sq_grad(self, y):
        y = np.asarray(y, dtype=float)
        h = self.step * max(np.linalg.norm(y), 1e-300)
        out = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            out[i] = (0.5 * self.f(y + e) ** 2 - 0.5 * self.f(y - e) ** 2) / (2 * h)
        return out

    def half_sq_hess(self, y):
        return hessian_half_sq(self.f, y, self.step)

    def reversibility(self, n_dirs=2048, seed=0):
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((n_dirs, self.dim))
        return max(self.f(-w) / self.f(w) for w in u)

    def initial_guess(self, xi):
        return np.array(xi, dtype=float)


def hessian_half_sq(f, y, rel_step=1e-5):
    """Central second differences of F^2/2 at y with step rel_step*|y|, symmetrized."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    h = rel_step * np.linalg.norm(y)
    E = np.eye(n) * h

    def q(z):
        return 0.5 * float(f(z)) ** 2

    H = np.empty((n, n))
    q0 = q(y)
    for i in range(n):
        H[i, i] = (q(y + E[i]) - 2.0 * q0 + q(y - E[i])) / h**2
        for j in range(i + 1, n):
            H[i, j] = (
                q(y + E[i] + E[j]) - q(y + E[i] - E[j]) - q(y - E[i] + E[j]) + q(y - E[i] - E[j])
            ) / (4.0 * h**2)
            H[j, i] = H[i, j]
    return H


def solve_legendre(form, xi, max_iter=LEGENDRE_MAX_ITER, tol=LEGENDRE_TOL):
    """Return (v, dual) with v = L^{-1}(xi) and dual = F*(xi).

    Minimizes the strictly convex potential F(y)^2/2 - <y, xi>, whose unique
    minimizer is the Legendre inverse of xi. Damped Newton with backtracking
    that accepts either an Armijo decrease or a smaller gradient residual. The dual value is read off as the supremum ratio
    <u, xi>/F(u) at the optimal direction u, and v is rescaled so that
    F(v) = F*(xi) holds to rounding.
    """
    xi = np.asarray(xi, dtype=float)
    scale = np.linalg.norm(xi)
    if scale == 0.0:
        return np.zeros_like(xi), 0.0
    if not np.all(np.isfinite(xi)):
        raise InputError("covector must be finite")

    def potential(y):
        return 0.5 * form.value(y) ** 2 - y @ xi

    y = form.initial_guess(xi)
    s = y @ xi
    if s > 0:
        y = y * (s / form.value(y) ** 2)
    else:
        y = xi / form.value(xi) * scale
    res = np.inf
    for _ in range(max_iter):
        g = form.half_sq_grad(y) - xi
        res = np.linalg.norm(g) / scale
        if res <= tol:
            break
        H = form.half_sq_hess(y)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -g
        if step @ g >= 0:
            step = -g
        t = 1.0
        p0 = potential(y)
        gn = np.linalg.norm(g)
        while t > 1e-12:
            cand = y + t * step
            if np.any(cand):
                # near the optimum the potential decrease drowns in rounding;
                # a smaller gradient residual is then the acceptance signal
                if potential(cand) <= p0 + 1e-4 * t * (g @ step):
                    break
                if np.linalg.norm(form.half_sq_grad(cand) - xi) < (1.0 - 1e-4 * t) * gn:
                    break
            t *= 0.5
        y = y + t * step
    else:
        g = form.half_sq_grad(y) - xi
        res = np.linalg.norm(g) / scale
        if res > 1e-8:
            raise NumericalError(f"Legendre inversion did not converge (residual {res:.3e})", residual=res)
    dual = (y @ xi) / form.value(y)
    v = y * (dual / form.value(y))
    return v, float(dual)


@dataclass(frozen=True)
class NormSpec:
    """An asymmetric Minkowski norm on R^dim."""

    dim: int
    variant: str = "euclidean"
    drift: Optional[tuple] = None
    omega: float = 0.0
    _form: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"dimension must be a positive integer, got {self.dim}")
        if self.variant not in VARIANTS:
            raise InputError(f"unknown norm variant {self.variant!r}")
        if self.variant == "randers":
            if self.drift is None or len(self.drift) != self.dim:
                raise InputError("randers drift must have length dim")
            drift = tuple(float(w) for w in self.drift)
            object.__setattr__(self, "drift", drift)
            if np.linalg.norm(drift) >= 1.0:
                raise InputError("randers drift must have Euclidean length < 1")
        elif self.variant == "l1drift":
            if not abs(self.omega) < 1.0:
                raise InputError("l1drift requires |omega| < 1")
        if self.variant != "l1drift":
            b = np.array(self.drift, dtype=float) if self.variant == "randers" else np.zeros(self.dim)
            object.__setattr__(self, "_form", RandersForm(np.eye(self.dim), b))

    @classmethod
    def euclidean(cls, dim):
        return cls(dim=dim, variant="euclidean")

    @classmethod
    def randers(cls, drift):
        drift = tuple(np.atleast_1d(np.asarray(drift, dtype=float)))
        return cls(dim=len(drift), variant="randers", drift=drift)

    @classmethod
    def l1drift(cls, dim, omega):
        return cls(dim=dim, variant="l1drift", omega=float(omega))

    @property
    def smooth(self):
        return self.variant != "l1drift"

    def form(self):
        if not self.smooth:
            raise ModelError("l1drift is not strongly convex; no tensor/Legendre structure")
        return self._form

    def to_json(self):
        out = {"variant": self.variant, "dim": self.dim}
        if self.variant == "randers":
            out["drift"] = list(self.drift)
        if self.variant == "l1drift":
            out["omega"] = self.omega
        return out

    @classmethod
    def from_json(cls, obj):
        try:
            variant = obj["variant"]
            dim = int(obj["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad norm spec: {obj!r}") from exc
        if variant == "randers":
            return cls(dim=dim, variant=variant, drift=tuple(obj.get("drift", ())))
        if variant == "l1drift":
            return cls(dim=dim, variant=variant, omega=float(obj.get("omega", 0.0)))
        return cls(dim=dim, variant=variant)


def _check_vec(spec, v):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] != spec.dim:
        raise InputError(f"expected vectors of length {spec.dim}, got shape {v.shape}")
    return v


def norm(spec: NormSpec, v):
    """F(v); vectorized over leading axes."""
    v = _check_vec(spec, v)
    if spec.variant == "l1drift":
        return np.abs(v).sum(axis=-1) + spec.omega * v.sum(axis=-1)
    return spec._form.value(v)


def reverse_norm(spec: NormSpec, v):
    return norm(spec, -np.asarray(v, dtype=float))


def dual_norm(spec: NormSpec, xi) -> float:
    """F*(xi) = sup_{F(y)=1} <y, xi>."""
    xi = _check_vec(spec, xi)
    if spec.variant == "l1drift":
        # unit ball is the hull of +e_i/(1+omega) and -e_i/(1-omega)
        w = spec.omega
        return float(max(np.max(xi / (1.0 + w)), np.max(-xi / (1.0 - w)), 0.0))
    return solve_legendre(spec.form(), xi)[1]


def legendre_inverse(spec: NormSpec, xi):
    """v with L(v) = xi; F(v) = F*(xi) and <v, xi> = F(v) F*(xi)."""
    xi = _check_vec(spec, xi)
    return solve_legendre(spec.form(), xi)[0]


def reversibility(spec: NormSpec) -> float:
    """sup_{v != 0} F(-v)/F(v)."""
    if spec.variant == "euclidean":
        return 1.0
    if spec.variant == "randers":
        b = np.linalg.norm(spec.drift)
        return (1.0 + b) / (1.0 - b)
    w = abs(spec.omega)
    return (1.0 + w) / (1.0 - w)
