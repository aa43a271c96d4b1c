"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a PASS/FAIL line straight to the terminal (bypassing
capture) before asserting, so the pytest log doubles as an acceptance report.
"""
import itertools
import time

import numpy as np
import pytest
from scipy import integrate

from asymflow import curves, flow, models, paths, transport
from asymflow.norms import NormSpec


@pytest.fixture
def report(capsys):
    def _report(num, ok, detail, started):
        with capsys.disabled():
            status = "PASS" if ok else "FAIL"
            print(f"\n[acceptance {num:>2}] {status} ({time.perf_counter() - started:.2f}s) {detail}")
        assert ok, detail

    return _report


def _unit(rng, n, dim):
    u = rng.standard_normal((n, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _ball(rng, n, dim=2, radius=0.95):
    return _unit(rng, n, dim) * radius * rng.random((n, 1)) ** (1.0 / dim)


def test_01_funk_radial_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    r = np.round(np.arange(1, 10) / 10, 1)
    worst = 0.0
    for dim in (2, 3):
        F = models.FunkBall(dim)
        x = _unit(rng, len(r), dim) * r[:, None]
        o = np.zeros_like(x)
        worst = max(worst, np.max(np.abs(F.distance(o, x) + np.log(1 - r))))
        worst = max(worst, np.max(np.abs(F.distance(x, o) - np.log(1 + r))))
    report(1, worst <= 1e-9, f"max radial error {worst:.2e} (tol 1e-9)", t0)


def test_02_boundary_limit_ln2(report):
    t0 = time.perf_counter()
    F = models.FunkBall(2)
    x = np.array([1 - 1e-6, 0.0])
    err = abs(float(F.distance(x, np.zeros(2))) - np.log(2))
    report(2, err <= 2e-6, f"|d(x,0) - ln 2| = {err:.2e} (tol 2e-6)", t0)


def test_03_closed_form_vs_chord_quadrature(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    F = models.FunkBall(2)
    x, y = _ball(rng, 1000), _ball(rng, 1000)
    worst = 0.0
    for a, b in zip(x, y):
        d = float(F.distance(a, b))
        q, _ = integrate.quad(lambda s: float(F.metric_value(a + s * (b - a), b - a)), 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
        worst = max(worst, abs(q - d) / d)
    report(3, worst <= 1e-6, f"max relative error {worst:.2e} over 1000 pairs (tol 1e-6)", t0)


def _smooth_funk_curves(rng, n):
    out = []
    for _ in range(n):
        c = rng.uniform(-0.2, 0.2, 2)
        a = rng.uniform(-0.3, 0.3, (2, 2))
        w = rng.uniform(1, 4, 2)
        ph = rng.uniform(0, 2 * np.pi, 2)

        def g(t, c=c, a=a, w=w, ph=ph):
            t = t[:, None]
            return c + a[:, 0] * np.sin(w[0] * t + ph[0]) + a[:, 1] * np.cos(w[1] * t + ph[1])

        def dg(t, a=a, w=w, ph=ph):
            t = t[:, None]
            return a[:, 0] * w[0] * np.cos(w[0] * t + ph[0]) - a[:, 1] * w[1] * np.sin(w[1] * t + ph[1])

        out.append((g, dg))
    return out


def test_04_metric_derivative_identity(report):
    t0 = time.perf_counter()
    F = models.FunkBall(2)
    family = _smooth_funk_curves(np.random.default_rng(4), 10)
    meshes = 1e-3 * 2.0 ** -np.arange(4)
    errs = []
    for h in meshes:
        t = np.linspace(0, 1, int(round(1 / h)) + 1)
        e = 0.0
        for g, dg in family:
            prof = curves.metric_derivative(F, curves.SampledCurve(t, g(t)))
            e = max(e, np.max(np.abs(prof.forward - F.metric_value(g(t[:-1]), dg(t[:-1])))))
        errs.append(e)
    errs = np.array(errs)
    slope, icept = np.polyfit(np.log(meshes), np.log(errs), 1)
    resid = np.log(errs) - (slope * np.log(meshes) + icept)
    r2 = 1 - np.sum(resid**2) / np.sum((np.log(errs) - np.log(errs).mean()) ** 2)
    ok = errs[0] <= 1e-2 and slope >= 1.0 and r2 >= 0.99
    report(4, ok, f"error at mesh 1e-3 {errs[0]:.2e}, fitted order {slope:.4f}, R^2 {r2:.6f}", t0)


def test_05_minkowski_drift_derivatives(report):
    t0 = time.perf_counter()
    worst = 0.0
    t = np.linspace(0, 1, 101)
    for omega in (0.1, 0.25, 0.5):
        M = models.MinkowskiSpace(NormSpec.l1drift(1, omega))
        prof = curves.metric_derivative(M, curves.SampledCurve(t, t[:, None]))
        worst = max(worst, np.max(np.abs(prof.forward - (1 + omega))), np.max(np.abs(prof.backward - (1 - omega))))
    report(5, worst <= 1e-12, f"max deviation from 1+-omega {worst:.2e} (tol 1e-12)", t0)


def test_06_toy_half_line_classification(report):
    t0 = time.perf_counter()
    toy = models.ToyHalfLine()
    flags = {}
    for K in (2, 4, 8, 16, 32, 64, 128, 256):
        t = np.linspace(0, 1, K + 1)
        rep = curves.classify_ac(toy, curves.SampledCurve(t, t[:, None]))
        flags[K] = (rep.forward_ok, rep.backward_ok)
    ok = all(f == (True, False) for f in flags.values())
    report(6, ok, f"(FAC, BAC) per resolution K: {flags}", t0)


def test_07_fenchel_young(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    triples = [flow.PowerLaw(1.5), flow.PowerLaw(2.0), flow.PowerLaw(3.0), flow.MonotoneTable([0, 0.5, 1, 2, 4], [0, 0.2, 1, 1.5, 3])]
    eq_worst, strict_worst = 0.0, np.inf
    for tr in triples:
        x = rng.uniform(0.1, 5.0, 1000)
        y = tr.h(x)
        eq_worst = max(eq_worst, np.max(np.abs(x * y - tr.psi(x) - tr.psi_star(y))))
        for f in (0.9, 1.1):
            gap = tr.psi(x) + tr.psi_star(f * y) - x * f * y
            strict_worst = min(strict_worst, np.min(gap))
    ok = eq_worst <= 1e-10 and strict_worst > 1e-12
    report(7, ok, f"equality defect {eq_worst:.2e} (tol 1e-10), smallest off-graph gap {strict_worst:.2e} (> 1e-12)", t0)


def test_08_gradient_flow_benchmarks(report):
    t0 = time.perf_counter()
    E = models.MinkowskiSpace(NormSpec.euclidean(2))
    quad = flow.Quadratic(np.eye(2))
    x0 = np.array([0.6, -0.8])
    tr = flow.integrate_flow(E, flow.PowerLaw(2), quad, x0, 1.0, 1e-3)
    end_err = float(np.max(np.abs(tr.points[-1] - x0 * np.exp(-1))))
    residual = flow.energy_audit(tr, E, flow.PowerLaw(2), quad).max_residual

    tr3 = flow.integrate_flow(E, flow.PowerLaw(3), quad, x0, 2.5, 1e-3)
    arrival = flow.arrival_time(tr3, np.zeros(2))
    arr_err = abs(arrival - 2.0) if arrival is not None else np.inf

    dts = [0.05, 0.025, 0.0125]
    res = [flow.energy_audit(flow.integrate_flow(E, flow.PowerLaw(2), quad, x0, 1.0, h)).max_residual for h in dts]
    order = float(np.polyfit(np.log(dts), np.log(res), 1)[0])

    ok = end_err <= 1e-6 and arr_err <= 1e-3 and residual <= 1e-6 and order >= 3
    detail = (
        f"endpoint error {end_err:.2e}, p=3 arrival {arrival} (error {arr_err:.1e}), "
        f"energy residual {residual:.2e}, residual order {order:.2f} from {['%.1e' % r for r in res]}"
    )
    report(8, ok, detail, t0)


def test_09_ot_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_gap, worst_dual = 0.0, 0.0
    for n in (5, 6):
        perms = np.array(list(itertools.permutations(range(n))))
        w = np.full(n, 1.0 / n)
        for _ in range(200):
            C = rng.random((n, n))
            res = transport.solve_ot(C, w, w)
            brute = C[np.arange(n), perms].sum(axis=1).min() / n
            worst_gap = max(worst_gap, abs(res.value - brute))
            worst_dual = max(worst_dual, transport.certify(res, C, w, w).duality_gap)
    ok = worst_gap <= 1e-9 and worst_dual <= 1e-9
    report(9, ok, f"max |simplex - brute force| {worst_gap:.2e}, max duality gap {worst_dual:.2e} over 400 instances", t0)


def test_10_asymmetric_wasserstein(report):
    t0 = time.perf_counter()
    F = models.FunkBall(2)
    o, x = transport.DiscreteMeasure.dirac([0, 0]), transport.DiscreteMeasure.dirac([0.5, 0])
    e_fwd = abs(transport.wasserstein(F, o, x, 1) - np.log(2))
    e_bwd = abs(transport.wasserstein(F, x, o, 1) - np.log(1.5))
    rng = np.random.default_rng(10)

    def rand_measure():
        return transport.DiscreteMeasure.normalized(_ball(rng, 4, radius=0.9), rng.random(4) + 0.05)

    order_worst = tri_worst = -np.inf
    for _ in range(1000):
        mu, nu, ups = rand_measure(), rand_measure(), rand_measure()
        w1, w2 = transport.wasserstein(F, mu, nu, 1), transport.wasserstein(F, mu, nu, 2)
        order_worst = max(order_worst, w1 - w2)
        tri_worst = max(tri_worst, w2 - transport.wasserstein(F, mu, ups, 2) - transport.wasserstein(F, ups, nu, 2))
    ok = e_fwd <= 1e-9 and e_bwd <= 1e-9 and order_worst <= 1e-9 and tri_worst <= 1e-9
    detail = f"ln2 error {e_fwd:.1e}, ln1.5 error {e_bwd:.1e}, max W1-W2 {order_worst:.2e}, max triangle excess {tri_worst:.2e}"
    report(10, ok, detail, t0)


def test_11_funk_divergence(report):
    t0 = time.perf_counter()
    ms = [2**j for j in range(2, 15)]
    rows = transport.funk_divergence_experiment(ms, [1], p=1.0)
    anchors = {r.m: r.anchor_dist for r in rows}
    big = [m for m in ms if anchors[m] > 10]
    m = big[0] if big else ms[-1]
    fwd = transport.funk_divergence_experiment([m], [m // 2, m], p=1.0)
    fwd_max = max(r.forward_dist for r in fwd)
    monotone = all(anchors[a] < anchors[b] for a, b in zip(ms, ms[1:]))
    ok = bool(big) and fwd_max < 0.01 and monotone
    report(11, ok, f"anchor W1 at m={m}: {anchors[m]:.4f} (> 10), forward W1 for k in {{m/2, m}}: {fwd_max:.2e} (< 0.01)", t0)


def test_12_gluing_construction(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    F = models.FunkBall(2)
    marg_worst = pair_worst = 0.0
    violations = 0
    for _ in range(100):
        N = int(rng.integers(1, 5))
        ms = []
        for _ in range(2**N + 1):
            k = int(rng.integers(1, 9))
            ms.append(transport.DiscreteMeasure.normalized(_ball(rng, k, radius=0.8), rng.random(k) + 0.05))
        curve = paths.CurveOfMeasures(paths.DyadicSchedule(N), tuple(ms))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        joint = paths.glue_plans(F, curve, p)
        for k, m in enumerate(ms):
            marg_worst = max(marg_worst, np.max(np.abs(joint.marginal(k) - m.weights)))
        for k, plan in enumerate(joint.plans):
            pair_worst = max(pair_worst, np.max(np.abs(joint.pair_marginal(k) - plan)))
        violations += paths.step1_inequalities_check(joint, F, p).violations
    ok = marg_worst <= 1e-12 and pair_worst <= 1e-12 and violations == 0
    report(12, ok, f"marginal error {marg_worst:.1e}, pair-marginal error {pair_worst:.1e}, shift and moment bound violations {violations}", t0)


def _translation_curve(model, N, base, weights, b):
    return paths.CurveOfMeasures.from_function(N, lambda t: transport.DiscreteMeasure(base + t * b, weights))


def test_13_continuity_residual(report):
    t0 = time.perf_counter()
    R = models.MinkowskiSpace(NormSpec.randers([0.3, -0.2]))
    base = np.array([[0.0, 0.0], [1.0, 0.5], [-0.5, 2.0]])
    weights = np.array([0.5, 0.3, 0.2])
    b = np.array([0.8, 0.6])
    c = np.array([1.0, 2.0])
    cubic = flow.BlackBox(lambda x: float(x @ c) ** 3, 2, df=lambda x: 3 * (np.asarray(x) @ c)[..., None] ** 2 * c)
    Ns = [1, 2, 3, 4, 5]
    res = []
    for N in Ns:
        curve = _translation_curve(R, N, base, weights, b)
        eta = paths.path_measure(paths.glue_plans(R, curve, 2.0), R, "geodesic")
        res.append(paths.continuity_residual(curve, paths.cell_fields(eta, R), [cubic]).max_residual)
    dts = 2.0 ** -np.array(Ns)
    order = float(np.polyfit(np.log(dts), np.log(res), 1)[0])

    curve = _translation_curve(R, 3, base, weights, b)
    eta = paths.path_measure(paths.glue_plans(R, curve, 2.0), R, "geodesic")
    fields = paths.cell_fields(eta, R)
    for f in fields:
        f.vectors = -f.vectors
    fault = paths.continuity_residual(curve, fields, [flow.Linear(b / np.linalg.norm(b))]).max_residual
    speed = paths.speed_estimate(eta, R, 2.0, 0.5 / 8)
    # the exact residual is s^3 dt^2/4 per cell; the fit is order 2 up to rounding
    ok = order >= 2 - 1e-6 and fault >= 0.1 * speed
    report(13, ok, f"residual order {order:.8f} from {['%.2e' % r for r in res]}; negated-field residual {fault:.3f} vs 0.1*speed {0.1 * speed:.3f}", t0)


def test_14_theta_transfer_randers(report):
    t0 = time.perf_counter()
    R = models.MinkowskiSpace(NormSpec.randers([0.5, 0.0]))
    theta = 3.0
    rng = np.random.default_rng(14)
    violated = 0
    worst = 0.0
    for _ in range(1000):
        mu = transport.DiscreteMeasure.normalized(rng.normal(size=(4, 2)), rng.random(4) + 0.05)
        nu = transport.DiscreteMeasure.normalized(rng.normal(size=(4, 2)), rng.random(4) + 0.05)
        rep = transport.theta_transfer_check(R, mu, nu, 2.0, 2.0, np.zeros(2), theta)
        violated += rep.status != "holds"
        worst = max(worst, rep.lhs / rep.rhs)
    report(14, violated == 0, f"violations {violated} of 1000, max W2(nu,mu)/(3 W2(mu,nu)) = {worst:.4f}", t0)
