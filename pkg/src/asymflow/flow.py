"""Generalized gradient flows of C^1 potentials on smooth asymmetric models.

A dissipation triple (h, psi, psi*) fixes how the speed of the flow responds
to the slope: the flow velocity at x is h^{-1}(F(g)) g / F(g) with
g = grad(-phi)(x), which saturates the Fenchel-Young inequality. The energy
ledger collected during integration is what :func:`energy_audit` checks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .curves import SampledCurve, Trajectory
from .errors import DomainError, InputError, ModelError, NumericalError
from .norms import solve_legendre

log = logging.getLogger(__name__)

CRITICAL_SLOPE = 1e-12
MAX_HALVINGS = 20
# allowed per-step increase of phi; RK4 can overshoot a minimizer where the field is only continuous
MONOTONE_TOL = 1e-10


class DissipationTriple:
    """Base class: subclasses provide h, h_inv, psi and psi_star on [0, inf)."""

    def h(self, x):
        raise NotImplementedError

    def h_inv(self, y):
        raise NotImplementedError

    def psi(self, x):
        raise NotImplementedError

    def psi_star(self, y):
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLaw(DissipationTriple):
    """h(r) = r^(p-1), psi(x) = x^p/p, psi*(y) = y^q/q."""

    p: float = 2.0

    def __post_init__(self):
        if not self.p > 1:
            raise InputError("power-law exponent must be > 1")

    @property
    def q(self):
        return self.p / (self.p - 1.0)

    def h(self, x):
        return np.power(x, self.p - 1.0)

    def h_inv(self, y):
        return np.power(y, 1.0 / (self.p - 1.0))

    def psi(self, x):
        return np.power(x, self.p) / self.p

    def psi_star(self, y):
        return np.power(y, self.q) / self.q


class MonotoneTable(DissipationTriple):
    """h given by samples (x_k, h_k), 0 = x_0 < x_1 < ..., 0 = h_0 < h_1 < ...

    Monotone cubic (PCHIP) interpolation inside the table and linear
    extrapolation with the last secant slope beyond it. psi is the exact
    antiderivative of that interpolant; h_inv uses bisection.
    """

    def __init__(self, xs, hs):
        xs = np.asarray(xs, dtype=float)
        hs = np.asarray(hs, dtype=float)
        if xs.ndim != 1 or len(xs) < 2 or xs.shape != hs.shape:
            raise InputError("table needs matching 1-d arrays with at least two entries")
        if xs[0] != 0 or hs[0] != 0:
            raise InputError("table must start at (0, 0)")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(hs) <= 0):
            raise InputError("table must be strictly increasing in both columns")
        self.xs, self.hs = xs, hs
        self._interp = PchipInterpolator(xs, hs, extrapolate=False)
        self._anti = self._interp.antiderivative()
        self._x_end = xs[-1]
        self._h_end = hs[-1]
        self._slope = (hs[-1] - hs[-2]) / (xs[-1] - xs[-2])
        self._psi_end = float(self._anti(xs[-1]))

    def h(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.minimum(x, self._x_end)
        out = np.where(x <= self._x_end, self._interp(inside), self._h_end + self._slope * (x - self._x_end))
        return out if out.ndim else float(out)

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.minimum(x, self._x_end)
        dx = np.maximum(x - self._x_end, 0.0)
        out = np.where(
            x <= self._x_end,
            self._anti(inside),
            self._psi_end + self._h_end * dx + 0.5 * self._slope * dx * dx,
        )
        return out if out.ndim else float(out)

    def _h_inv_scalar(self, y):
        if y <= 0:
            return 0.0
        if y >= self._h_end:
            return self._x_end + (y - self._h_end) / self._slope
        return brentq(lambda x: float(self._interp(x)) - y, 0.0, self._x_end, xtol=1e-12, rtol=4 * np.finfo(float).eps)

    def h_inv(self, y):
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            return self._h_inv_scalar(float(y))
        return np.array([self._h_inv_scalar(v) for v in y.ravel()]).reshape(y.shape)

    def psi_star(self, y):
        # the sup defining psi* is attained at x = h^{-1}(y)
        x = self.h_inv(y)
        return x * np.asarray(y, dtype=float) - self.psi(x)


def fenchel_conjugate(triple: DissipationTriple, y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise InputError("psi* is evaluated on y >= 0 only")
    out = triple.psi_star(y)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# potentials


class Potential:
    """phi with differential; subclasses implement value and differential."""

    def value(self, x):
        raise NotImplementedError

    def differential(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


class Quadratic(Potential):
    """phi(x) = <Ax, x>/2 + <b, x> + c."""

    def __init__(self, A, b=None, c=0.0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.T, atol=1e-14):
            raise InputError("A must be a symmetric square matrix")
        self.A = A
        self.b = np.zeros(len(A)) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x) + x @ self.b + self.c

    def differential(self, x):
        return np.asarray(x, dtype=float) @ self.A + self.b


class Linear(Potential):
    """phi(x) = <b, x> + c."""

    def __init__(self, b, c=0.0):
        self.b = np.asarray(b, dtype=float)
        self.c = float(c)

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.b + self.c

    def differential(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.b, x.shape).copy()


class BlackBox(Potential):
    """phi from an evaluator; differential by central differences."""

    def __init__(self, f, dim, step=1e-6, df=None):
        self.f = f
        self.dim = dim
        self.step = step
        self._df = df

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.f(x))
        return np.array([float(self.f(p)) for p in x.reshape(-1, self.dim)]).reshape(x.shape[:-1])

    def differential(self, x):
        x = np.asarray(x, dtype=float)
        if self._df is not None:
            return np.asarray(self._df(x), dtype=float)
        if x.ndim > 1:
            return np.array([self.differential(p) for p in x.reshape(-1, self.dim)]).reshape(x.shape)
        out = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = self.step
            out[i] = (self.f(x + e) - self.f(x - e)) / (2 * self.step)
        return out


# ---------------------------------------------------------------------------
# flow


def _slope(model, phi, x):
    """(g, F(g)) with g = grad(-phi)(x); F(g) = F*(-dphi)."""
    if not model.smooth:
        raise ModelError(f"{model.kind} has no Legendre transformation")
    return solve_legendre(model.tangent_form(x), -phi.differential(x))


def flow_velocity(model, triple: DissipationTriple, phi: Potential, x):
    x = model.check_points(x)
    g, Fg = _slope(model, phi, x)
    if Fg <= CRITICAL_SLOPE:
        return np.zeros_like(x)
    return triple.h_inv(Fg) * g / Fg


def _ledger_terms(model, triple, phi, x):
    """(velocity, F(velocity), phi, psi(F(v)), psi*(F(g))) at x."""
    g, Fg = _slope(model, phi, x)
    if Fg <= CRITICAL_SLOPE:
        return np.zeros_like(x), 0.0, float(phi.value(x)), 0.0, float(triple.psi_star(0.0))
    speed = float(triple.h_inv(Fg))
    v = speed * g / Fg
    # F(v) = speed by homogeneity
    return v, speed, float(phi.value(x)), float(triple.psi(speed)), float(triple.psi_star(Fg))


@dataclass(frozen=True)
class FlowTrajectory(Trajectory):
    """Flow samples plus the energy ledger at each sample and at each step midpoint."""

    speed: np.ndarray = None
    phi: np.ndarray = None
    psi_term: np.ndarray = None
    psistar_term: np.ndarray = None
    mid_dissipation: np.ndarray = None
    status: str = "ok"
    step_residuals: np.ndarray = None

    @property
    def dissipation(self):
        return self.psi_term + self.psistar_term


def arrival_time(trajectory: Trajectory, target, tol=1e-7):
    """First sample time with |x - target| <= tol, or None."""
    r = np.linalg.norm(trajectory.points - np.asarray(target, dtype=float), axis=1)
    hit = np.nonzero(r <= tol)[0]
    return float(trajectory.times[hit[0]]) if hit.size else None


def _rk4_step(vel, x, h):
    k1 = vel(x)
    k2 = vel(x + 0.5 * h * k1)
    k3 = vel(x + 0.5 * h * k2)
    k4 = vel(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_flow(
    model,
    triple: DissipationTriple,
    phi: Potential,
    x0,
    T,
    dt,
    blowup_radius=1e6,
    chain_tol=1e-6,
) -> FlowTrajectory:
    """Classical RK4 on the fixed output grid t_k = k*dt.

    Each output step is split into 2^m equal substeps, with m increased until
    the step's energy residual (composite Simpson rule, Hermite midpoints) is
    at most ``chain_tol`` and phi has not increased by more than 1e-10. More than 20 halvings raise :class:`NumericalError`.
    Integration stops with status "exit" when a stage leaves the domain and
    with status "blowup" when d(x0, x) exceeds ``blowup_radius``.
    """
    if not dt > 0 or not T > 0:
        raise InputError("T and dt must be positive")
    x0 = model.check_points(x0).astype(float)
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise InputError("T must be a whole multiple of dt")

    def vel(x):
        if not model.contains(x):
            raise DomainError("flow left the domain")
        return flow_velocity(model, triple, phi, x)

    v0, s0, p0, a0, b0 = _ledger_terms(model, triple, phi, x0)
    times, pts, vels, speeds, phis, psis, stars, mids, resid = [0.0], [x0], [v0], [s0], [p0], [a0], [b0], [], []
    status = "ok"
    exit_time = None
    x, v = x0, v0
    for k in range(n):
        m = 0
        while True:
            sub = 2**m
            h = dt / sub
            try:
                y, vy, dy, integral = x, v, psis[-1] + stars[-1], 0.0
                for _ in range(sub):
                    yn = _rk4_step(vel, y, h)
                    if not model.contains(yn):
                        raise DomainError("flow left the domain")
                    vn, sy, py, ay, by = _ledger_terms(model, triple, phi, yn)
                    ym = 0.5 * (y + yn) + h * (vy - vn) / 8.0
                    if not model.contains(ym):
                        raise DomainError("flow left the domain")
                    integral += h / 6.0 * (dy + 4 * sum(_ledger_terms(model, triple, phi, ym)[3:]) + ay + by)
                    y, vy, dy = yn, vn, ay + by
                xm = 0.5 * (x + y) + dt * (v - vy) / 8.0
                if not model.contains(xm):
                    raise DomainError("flow left the domain")
                _, _, _, am, bm = _ledger_terms(model, triple, phi, xm)
            except DomainError:
                status = "exit"
                break
            mid = am + bm
            # composite Simpson over the substeps, so halving shrinks the residual
            r = abs(phis[-1] - py - integral)
            if r <= chain_tol and py <= phis[-1] + MONOTONE_TOL:
                break
            m += 1
            if m > MAX_HALVINGS:
                raise NumericalError(f"step control failed at t={times[-1]:.6g}", residual=r)
        if status == "exit":
            exit_time = times[-1]
            log.info("flow left the domain after t=%.6g", exit_time)
            break
        x, v = y, vy
        times.append((k + 1) * dt)
        pts.append(x)
        vels.append(v)
        speeds.append(sy)
        phis.append(py)
        psis.append(ay)
        stars.append(by)
        mids.append(mid)
        resid.append(r)
        if float(model.distance(x0, x)) > blowup_radius:
            status = "blowup"
            exit_time = times[-1]
            break
    if len(times) < 2:
        raise DomainError("flow leaves the domain within the first step")
    return FlowTrajectory(
        np.array(times),
        np.array(pts),
        velocities=np.array(vels),
        exit_time=exit_time,
        speed=np.array(speeds),
        phi=np.array(phis),
        psi_term=np.array(psis),
        psistar_term=np.array(stars),
        mid_dissipation=np.array(mids),
        status=status,
        step_residuals=np.array(resid),
    )


@dataclass
class EnergyReport:
    max_residual: float
    chain_rule_residual: float
    residual_profile: np.ndarray = field(repr=False)

    def to_json(self):
        return {"max_residual": self.max_residual, "chain_rule_residual": self.chain_rule_residual}


def energy_audit(trajectory: FlowTrajectory, model=None, triple=None, phi=None) -> EnergyReport:
    """Residual of the energy identity over every pair of ledger times.

    With D(t) = phi(xi(t)) - phi(xi(0)) + int_0^t (psi + psi*), the residual
    on [s, t] is |D(t) - D(s)|, so the maximum over all pairs is max D - min D.
    Integrals use Simpson's rule with the stored midpoint values. When
    model/triple/phi are given, the ledger is recomputed from the samples
    rather than trusted, and the pointwise chain-rule residual
    |<v, dphi> + psi(F(v)) + psi*(F(g))| is evaluated with v taken from the
    sampled curve by central differences.
    """
    tr = trajectory
    t = tr.times
    if model is not None:
        terms = [_ledger_terms(model, triple, phi, x) for x in tr.points]
        phis = np.array([a[2] for a in terms])
        diss = np.array([a[3] + a[4] for a in terms])
        vel = np.array([a[0] for a in terms])
        xm = 0.5 * (tr.points[1:] + tr.points[:-1]) + np.diff(t)[:, None] * (vel[:-1] - vel[1:]) / 8.0
        mids = np.array([sum(_ledger_terms(model, triple, phi, x)[3:]) for x in xm])
    else:
        phis = tr.phi
        diss = tr.psi_term + tr.psistar_term
        mids = tr.mid_dissipation
    dt = np.diff(t)
    step = dt / 6.0 * (diss[:-1] + 4 * mids + diss[1:])
    D = phis - phis[0] + np.concatenate([[0.0], np.cumsum(step)])
    max_res = float(D.max() - D.min())
    chain = 0.0
    if model is not None and len(t) >= 3:
        chain = chain_rule_check(model, phi, tr, triple=triple).max_saturation_gap
    return EnergyReport(max_res, chain, np.abs(D))


@dataclass
class ChainRuleReport:
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    violations: list
    max_saturation_gap: float

    @property
    def ok(self):
        return not self.violations


def chain_rule_check(model, phi: Potential, curve: SampledCurve, tol=1e-6, triple=None) -> ChainRuleReport:
    """Compare d/dt phi(gamma) with -F(gamma') F(grad(-phi)) at interior samples.

    Both sides use central differences of the samples. A violation is a
    sample where the left side is below the right side by more than ``tol``.
    ``max_saturation_gap`` is max |lhs - rhs|, which is ~0 along a gradient flow.
    If ``triple`` is given the saturated energy form is used instead:
    d/dt phi = -(psi(F(gamma')) + psi*(F(g))).
    """
    if not model.smooth:
        raise ModelError(f"{model.kind} has no tangent structure")
    t = curve.times
    p = curve.points
    if len(t) < 3:
        raise InputError("chain-rule check needs at least three samples")
    span = t[2:] - t[:-2]
    vel = (p[2:] - p[:-2]) / span[:, None]
    lhs = (np.asarray(phi.value(p[2:])) - np.asarray(phi.value(p[:-2]))) / span
    rhs = np.empty_like(lhs)
    for i, (x, v) in enumerate(zip(p[1:-1], vel)):
        _, Fg = _slope(model, phi, x)
        Fv = float(model.metric_value(x, v))
        if triple is None:
            rhs[i] = -Fv * Fg
        else:
            rhs[i] = -(float(triple.psi(Fv)) + float(triple.psi_star(Fg)))
    gap = lhs - rhs
    bad = np.nonzero(gap < -tol)[0]
    violations = [{"i": int(i + 1), "t": float(t[i + 1]), "gap": float(gap[i])} for i in bad]
    return ChainRuleReport(lhs, rhs, violations, float(np.max(np.abs(gap))))
