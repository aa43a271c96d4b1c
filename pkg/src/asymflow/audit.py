"""Seeded property sweep behind ``asymflow audit``.

Each suite gets its own child stream of one SeedSequence, so results do not
depend on the order in which suites run.
"""
from __future__ import annotations

import itertools

import numpy as np

from . import curves, flow, models, paths, transport
from .norms import NormSpec, dual_norm, legendre_inverse, norm


def _random_ball(rng, n, dim=2, radius=0.9):
    u = rng.standard_normal((n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * radius * rng.random((n, 1)) ** (1.0 / dim)


def _random_spec(rng, dim=2):
    kind = rng.integers(3)
    if kind == 0:
        return NormSpec.euclidean(dim)
    if kind == 1:
        w = rng.standard_normal(dim)
        return NormSpec.randers(w / np.linalg.norm(w) * rng.uniform(0, 0.9))
    return NormSpec.l1drift(dim, rng.uniform(-0.9, 0.9))


def suite_norms(rng, n):
    worst = 0.0
    for _ in range(n):
        spec = _random_spec(rng)
        u, v = rng.standard_normal((2, 2))
        lam = rng.uniform(0, 10)
        worst = max(worst, abs(norm(spec, lam * v) - lam * norm(spec, v)) - 1e-12 * (1 + lam * norm(spec, v)))
        worst = max(worst, norm(spec, u + v) - norm(spec, u) - norm(spec, v) - 1e-12)
        if spec.smooth:
            y = legendre_inverse(spec, u)
            worst = max(worst, abs(norm(spec, y) - dual_norm(spec, u)) - 1e-8)
    return worst <= 0, f"max excess {worst:.3e}"


def suite_funk(rng, n):
    F = models.FunkBall(2)
    x, y, z = (_random_ball(rng, n) for _ in range(3))
    tri = np.max(F.distance(x, z) - F.distance(x, y) - F.distance(y, z))
    r = np.linspace(0.1, 0.9, 9)
    pts = np.stack([r, np.zeros_like(r)], axis=1)
    o = np.zeros_like(pts)
    rad = max(np.max(np.abs(F.distance(o, pts) + np.log1p(-r))), np.max(np.abs(F.distance(pts, o) - np.log1p(r))))
    ok = tri <= 1e-9 and rad <= 1e-9
    return ok, f"triangle excess {tri:.3e}, radial error {rad:.3e}"


def suite_ot(rng, n):
    worst = 0.0
    for _ in range(max(1, n // 4)):
        k = int(rng.integers(2, 6))
        C = rng.random((k, k))
        w = np.full(k, 1.0 / k)
        res = transport.solve_ot(C, w, w)
        brute = min(C[np.arange(k), list(s)].sum() for s in itertools.permutations(range(k))) / k
        worst = max(worst, abs(res.value - brute))
    return worst <= 1e-9, f"max gap to brute force {worst:.3e}"


def suite_wasserstein(rng, n):
    F = models.FunkBall(2)
    worst_order = worst_tri = -np.inf
    for _ in range(max(1, n // 10)):
        mu, nu, ups = (transport.DiscreteMeasure.uniform(_random_ball(rng, 4)) for _ in range(3))
        worst_order = max(worst_order, transport.wasserstein(F, mu, nu, 1) - transport.wasserstein(F, mu, nu, 2))
        worst_tri = max(
            worst_tri,
            transport.wasserstein(F, mu, nu, 2) - transport.wasserstein(F, mu, ups, 2) - transport.wasserstein(F, ups, nu, 2),
        )
    ok = worst_order <= 1e-9 and worst_tri <= 1e-9
    return ok, f"W1-W2 max {worst_order:.3e}, triangle excess {worst_tri:.3e}"


def suite_fenchel(rng, n):
    worst = 0.0
    triples = [flow.PowerLaw(1.5), flow.PowerLaw(2.0), flow.PowerLaw(3.0), flow.MonotoneTable([0, 1, 2, 4], [0, 0.5, 2, 3])]
    for tr in triples:
        x = rng.uniform(0, 5, n)
        y = tr.h(x)
        worst = max(worst, float(np.max(np.abs(x * y - tr.psi(x) - tr.psi_star(y)))))
    return worst <= 1e-10, f"max equality defect {worst:.3e}"


def suite_flow(rng, n):
    E = models.MinkowskiSpace(NormSpec.euclidean(2))
    x0 = rng.uniform(-1, 1, 2)
    tr = flow.integrate_flow(E, flow.PowerLaw(2), flow.Quadratic(np.eye(2)), x0, 1.0, 1e-2)
    err = float(np.max(np.abs(tr.points[-1] - x0 * np.exp(-1.0))))
    res = flow.energy_audit(tr).max_residual
    return err <= 1e-6 and res <= 1e-6, f"endpoint error {err:.3e}, energy residual {res:.3e}"


def suite_gluing(rng, n):
    F = models.FunkBall(2)
    worst = 0.0
    for _ in range(max(1, n // 20)):
        N = int(rng.integers(1, 3))
        k = int(rng.integers(1, 5))
        ms = [transport.DiscreteMeasure.normalized(_random_ball(rng, k, radius=0.5), rng.random(k)) for _ in range(2**N + 1)]
        joint = paths.glue_plans(F, paths.CurveOfMeasures(paths.DyadicSchedule(N), ms), 2.0)
        for i, m in enumerate(ms):
            worst = max(worst, float(np.max(np.abs(joint.marginal(i) - m.weights))))
        if paths.step1_inequalities_check(joint, F, 2.0).violations:
            return False, "path shift or moment estimate violated"
    return worst <= 1e-12, f"max marginal error {worst:.3e}"


def suite_curves(rng, n):
    toy = models.ToyHalfLine()
    line = curves.SampledCurve(np.linspace(0, 1, 65), np.linspace(0, 1, 65)[:, None])
    rep = curves.classify_ac(toy, line)
    ok = rep.forward_ok and not rep.backward_ok
    return ok, f"toy line forward_ok={rep.forward_ok} backward_ok={rep.backward_ok}"


SUITES = [
    ("norms", suite_norms),
    ("funk", suite_funk),
    ("ot", suite_ot),
    ("wasserstein", suite_wasserstein),
    ("fenchel", suite_fenchel),
    ("flow", suite_flow),
    ("gluing", suite_gluing),
    ("curves", suite_curves),
]


def run_audit(seed=0, samples=200):
    streams = np.random.SeedSequence(seed).spawn(len(SUITES))
    out = []
    for (name, fn), ss in zip(SUITES, streams):
        passed, detail = fn(np.random.default_rng(ss), samples)
        out.append({"name": name, "passed": bool(passed), "detail": detail})
    return out
