import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymflow import curves, flow, models
from asymflow.errors import InputError, NumericalError
from asymflow.norms import NormSpec

FUNK = models.FunkBall(2)
EUC = models.MinkowskiSpace(NormSpec.euclidean(2))
RANDERS = models.MinkowskiSpace(NormSpec.randers([0.3, -0.4]))
QUAD = flow.Quadratic(np.eye(2))
TABLE = flow.MonotoneTable([0, 0.5, 1, 2, 4], [0, 0.2, 1, 1.5, 3])
TRIPLES = [flow.PowerLaw(1.5), flow.PowerLaw(2.0), flow.PowerLaw(3.0), TABLE]


def test_fenchel_conjugate_examples():
    assert flow.fenchel_conjugate(flow.PowerLaw(2), 3) == pytest.approx(4.5)
    assert flow.fenchel_conjugate(flow.PowerLaw(3), 4) == pytest.approx(16 / 3)
    for tr in TRIPLES:
        assert flow.fenchel_conjugate(tr, 0.0) == 0
        x0 = 1.7
        y = tr.h(x0)
        assert x0 * y - tr.psi(x0) == pytest.approx(flow.fenchel_conjugate(tr, y), abs=1e-10)
    with pytest.raises(InputError):
        flow.fenchel_conjugate(flow.PowerLaw(2), -1.0)


def test_fenchel_conjugate_matches_numerical_sup():
    xs = np.linspace(0, 20, 200_001)
    for tr in TRIPLES:
        for y in (0.3, 1.0, 2.5):
            brute = np.max(xs * y - tr.psi(xs))
            assert flow.fenchel_conjugate(tr, y) == pytest.approx(brute, abs=1e-8)


def test_triple_validation():
    with pytest.raises(InputError):
        flow.PowerLaw(1.0)
    with pytest.raises(InputError):
        flow.MonotoneTable([0, 1, 1], [0, 1, 2])
    with pytest.raises(InputError):
        flow.MonotoneTable([0.1, 1], [0, 1])


@pytest.mark.parametrize("tr", TRIPLES)
def test_h_inverse_identity(tr):
    x = np.linspace(0, 8, 301)
    np.testing.assert_allclose(tr.h_inv(tr.h(x)), x, atol=1e-10)
    assert tr.h(0.0) == 0
    assert np.all(np.diff(tr.h(x)) > 0)


def test_table_psi_is_antiderivative():
    x = np.linspace(0.01, 6, 50)
    eps = 1e-6
    deriv = (TABLE.psi(x + eps) - TABLE.psi(x - eps)) / (2 * eps)
    np.testing.assert_allclose(deriv, TABLE.h(x), atol=1e-6)


@settings(max_examples=300)
@given(st.sampled_from(range(len(TRIPLES))), st.floats(0.05, 6.0))
def test_fenchel_young_property(k, x):
    tr = TRIPLES[k]
    y = float(tr.h(x))
    assert abs(x * y - tr.psi(x) - tr.psi_star(y)) <= 1e-10
    for f in (0.9, 1.1):
        assert x * f * y < tr.psi(x) + tr.psi_star(f * y) - 1e-12


def test_potential_differentials_match_finite_differences():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    pots = [flow.Quadratic(A + A.T, [1.0, -2.0, 0.5], 3.0), flow.Linear([0.2, 0.1, -1.0], 1.0)]
    for phi in pots:
        bb = flow.BlackBox(phi.value, 3)
        for x in rng.standard_normal((5, 3)):
            np.testing.assert_allclose(phi.differential(x), bb.differential(x), atol=1e-6)
    with pytest.raises(InputError):
        flow.Quadratic([[1.0, 2.0], [0.0, 1.0]])


def test_flow_velocity_examples():
    x = np.array([0.3, -0.4])
    np.testing.assert_allclose(flow.flow_velocity(EUC, flow.PowerLaw(2), QUAD, x), -x, atol=1e-12)
    np.testing.assert_array_equal(flow.flow_velocity(EUC, flow.PowerLaw(2), QUAD, [0.0, 0.0]), [0.0, 0.0])
    v = flow.flow_velocity(EUC, flow.PowerLaw(3), QUAD, x)
    r = np.linalg.norm(x)
    assert np.linalg.norm(v) == pytest.approx(np.sqrt(r), rel=1e-12)
    assert v @ x < 0


@settings(max_examples=100)
@given(
    st.sampled_from(["funk", "euclidean", "randers"]),
    st.sampled_from(range(len(TRIPLES))),
    st.floats(-0.8, 0.8),
    st.floats(-0.5, 0.5),
)
def test_flow_velocity_saturates_fenchel_young(kind, k, a, b):
    model = {"funk": FUNK, "euclidean": EUC, "randers": RANDERS}[kind]
    tr = TRIPLES[k]
    phi = flow.Quadratic([[2.0, 0.3], [0.3, 1.0]], [0.1, -0.2])
    x = np.array([a, b])
    v = flow.flow_velocity(model, tr, phi, x)
    g = models.gradient(model, x, -phi.differential(x))
    Fv, Fg = float(model.metric_value(x, v)), float(model.metric_value(x, g))
    lhs = v @ (-phi.differential(x))
    assert abs(lhs - (tr.psi(Fv) + tr.psi_star(Fg))) <= 1e-8


def test_integrate_flow_euclidean_quadratic():
    x0 = np.array([1.0, 0.5])
    tr = flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, x0, 1.0, 1e-3)
    np.testing.assert_allclose(tr.points[-1], x0 * np.exp(-1), atol=1e-6)
    assert tr.status == "ok" and not tr.exited
    assert len(tr.speed) == len(tr.phi) == len(tr.psi_term) == len(tr.psistar_term) == len(tr.times)
    assert len(tr.mid_dissipation) == len(tr.times) - 1


def test_integrate_flow_finite_time_arrival():
    tr = flow.integrate_flow(EUC, flow.PowerLaw(3), QUAD, [0.0, 1.0], 3.0, 1e-3)
    assert flow.arrival_time(tr, [0, 0]) == pytest.approx(2.0, abs=1e-3)
    # r(t) = (1 - t/2)^2 before arrival
    k = np.searchsorted(tr.times, 1.0)
    assert np.linalg.norm(tr.points[k]) == pytest.approx(0.25, abs=1e-9)
    np.testing.assert_allclose(tr.points[-1], 0.0, atol=1e-6)


def test_funk_linear_potential_flow():
    tr = flow.integrate_flow(FUNK, flow.PowerLaw(2), flow.Linear([1.0, 0.0]), [0.0, 0.0], 2.0, 1e-2)
    assert tr.status == "ok"
    assert np.all(tr.points[1:, 0] < 0)
    np.testing.assert_allclose(tr.points[:, 1], 0.0, atol=1e-14)
    assert np.all(np.diff(tr.phi) <= 1e-10)


def test_flow_exit_and_blowup():
    tr = flow.integrate_flow(models.ReverseModel(FUNK), flow.PowerLaw(2), flow.Linear([1.0, 0.0]), [0.0, 0.0], 5.0, 1e-2)
    assert tr.status == "exit" and tr.exited and tr.exit_time < 5.0
    assert np.all(np.linalg.norm(tr.points, axis=1) < 1)
    tr = flow.integrate_flow(EUC, flow.PowerLaw(2), flow.Linear([-1.0, 0.0]), [0.0, 0.0], 5.0, 1e-2, blowup_radius=1.0)
    assert tr.status == "blowup" and tr.exit_time == pytest.approx(1.0, abs=1.1e-2)


def test_flow_input_validation():
    with pytest.raises(InputError):
        flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.0], 1.0, 0.3)
    with pytest.raises(InputError):
        flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.0], 1.0, -0.1)


def test_step_control_gives_up(monkeypatch):
    monkeypatch.setattr(flow, "MAX_HALVINGS", 2)
    with pytest.raises(NumericalError) as info:
        flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.0], 1.0, 0.5, chain_tol=0.0)
    assert info.value.residual > 0


def test_step_control_refines_coarse_steps():
    tr = flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.0], 1.0, 0.5)
    assert np.max(tr.step_residuals) <= 1e-6
    np.testing.assert_allclose(tr.points[-1], [np.exp(-1), 0.0], atol=1e-6)


@pytest.mark.parametrize("model", [EUC, RANDERS, FUNK])
def test_phi_nonincreasing_along_flows(model):
    phi = flow.Quadratic([[1.0, 0.2], [0.2, 0.5]], [0.1, 0.0])
    for tr in (flow.PowerLaw(2), flow.PowerLaw(3), TABLE):
        traj = flow.integrate_flow(model, tr, phi, [0.5, -0.4], 1.0, 2e-2)
        assert np.all(np.diff(traj.phi) <= 1e-10)


def test_energy_audit_examples():
    tr = flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.5], 1.0, 1e-3)
    assert flow.energy_audit(tr).max_residual <= 1e-6
    rep = flow.energy_audit(tr, EUC, flow.PowerLaw(2), QUAD)
    assert rep.max_residual <= 1e-6 and rep.chain_rule_residual <= 1e-6
    assert set(rep.to_json()) == {"max_residual", "chain_rule_residual"}
    # a trajectory parked at the critical point
    still = flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [0.0, 0.0], 1.0, 0.1)
    assert flow.energy_audit(still).max_residual == 0.0
    assert flow.energy_audit(still, EUC, flow.PowerLaw(2), QUAD).max_residual == 0.0


def test_energy_audit_detects_noise():
    tr = flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.5], 1.0, 1e-2)
    noisy = curves.SampledCurve(tr.times, tr.points + 1e-2 * np.random.default_rng(1).standard_normal(tr.points.shape))
    fake = flow.FlowTrajectory(noisy.times, noisy.points, velocities=tr.velocities)
    assert flow.energy_audit(fake, EUC, flow.PowerLaw(2), QUAD).max_residual > 1e-4


def test_energy_residual_order_under_halving():
    res = [
        flow.energy_audit(flow.integrate_flow(EUC, flow.PowerLaw(2), QUAD, [1.0, 0.5], 1.0, h)).max_residual
        for h in (0.05, 0.025, 0.0125)
    ]
    assert res[0] / res[1] >= 8 and res[1] / res[2] >= 8


def test_chain_rule_examples():
    # central differences leave an O(dt^2) gap on a saturated trajectory
    gaps = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        tr = flow.integrate_flow(FUNK, flow.PowerLaw(2), QUAD, [0.4, -0.3], 0.25, dt)
        gaps.append(flow.chain_rule_check(FUNK, QUAD, tr).max_saturation_gap)
    assert gaps[-1] <= 1e-6
    assert gaps[0] / gaps[1] > 3.5 and gaps[1] / gaps[2] > 3.5
    # moving along a level set of phi
    t = np.linspace(0, 1, 51)
    circle = curves.SampledCurve(t, 0.5 * np.stack([np.cos(t), np.sin(t)], axis=1))
    rep = flow.chain_rule_check(EUC, QUAD, circle)
    np.testing.assert_allclose(rep.lhs, 0.0, atol=1e-12)
    assert np.all(rep.lhs > rep.rhs)


def test_chain_rule_on_random_funk_curves():
    rng = np.random.default_rng(2)
    phi = flow.Quadratic([[1.0, 0.3], [0.3, 2.0]], [0.2, -0.1])
    for _ in range(5):
        a, b, c = rng.uniform(-0.4, 0.4, (3, 2))
        t = np.linspace(0, 1, 201)
        pts = a + np.outer(np.sin(2 * t), b) + np.outer(t**2, c)
        h = t[1] - t[0]
        rep = flow.chain_rule_check(FUNK, phi, curves.SampledCurve(t, pts), tol=1e-4 / h)
        assert rep.ok
