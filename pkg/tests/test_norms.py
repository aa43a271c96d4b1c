import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from asymflow.errors import InputError, ModelError
from asymflow.norms import NormSpec, dual_norm, legendre_inverse, norm, reverse_norm, reversibility

RANDERS = NormSpec.randers([0.5, 0.0])
L1 = NormSpec.l1drift(2, 0.25)
E2 = NormSpec.euclidean(2)


def test_norm_examples():
    assert norm(E2, [3, 4]) == pytest.approx(5)
    assert norm(RANDERS, [1, 0]) == pytest.approx(1.5)
    assert norm(L1, [1, -1]) == pytest.approx(2.0)


def test_reverse_norm_examples():
    assert reverse_norm(E2, [3, 4]) == pytest.approx(5)
    assert reverse_norm(RANDERS, [1, 0]) == pytest.approx(0.5)
    assert reverse_norm(L1, [1, 0]) == pytest.approx(0.75)


def test_dual_norm_examples():
    assert dual_norm(E2, [0, 2]) == pytest.approx(2)
    assert dual_norm(RANDERS, [1, 0]) == pytest.approx(2 / 3, abs=1e-12)
    for spec in (E2, RANDERS, L1):
        assert dual_norm(spec, [0, 0]) == 0


def test_legendre_examples():
    np.testing.assert_allclose(legendre_inverse(E2, [1, 2]), [1, 2], atol=1e-12)
    np.testing.assert_allclose(legendre_inverse(RANDERS, [1, 0]), [4 / 9, 0], atol=1e-12)
    np.testing.assert_array_equal(legendre_inverse(RANDERS, [0, 0]), [0, 0])


def test_reversibility_examples():
    assert reversibility(E2) == 1
    assert reversibility(RANDERS) == pytest.approx(3)
    assert reversibility(L1) == pytest.approx(5 / 3)


def test_l1drift_has_no_legendre_map():
    with pytest.raises(ModelError):
        legendre_inverse(L1, [1, 0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim=0),
        dict(dim=2, variant="randers", drift=(0.8, 0.6)),
        dict(dim=2, variant="randers", drift=(0.1,)),
        dict(dim=1, variant="l1drift", omega=1.0),
        dict(dim=2, variant="taxicab"),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InputError):
        NormSpec(**kwargs)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        norm(E2, [1, 2, 3])


def test_json_round_trip():
    for spec in (E2, RANDERS, L1):
        back = NormSpec.from_json(spec.to_json())
        assert back == spec
    assert RANDERS.to_json() == {"variant": "randers", "dim": 2, "drift": [0.5, 0.0]}


def test_l1drift_dual_matches_brute_force():
    spec = NormSpec.l1drift(3, -0.4)
    rng = np.random.default_rng(0)
    y = rng.standard_normal((20000, 3))
    y /= norm(spec, y)[:, None]
    for xi in rng.standard_normal((5, 3)):
        assert dual_norm(spec, xi) >= np.max(y @ xi) - 1e-12
        assert dual_norm(spec, xi) <= np.max(y @ xi) + 0.05


# ---------------------------------------------------------------------------
# properties

drifts = arrays(float, 2, elements=st.floats(-0.6, 0.6))
vecs = arrays(float, 2, elements=st.floats(-10, 10))


@st.composite
def specs(draw, smooth_only=False):
    kind = draw(st.sampled_from(["euclidean", "randers"] if smooth_only else ["euclidean", "randers", "l1drift"]))
    if kind == "euclidean":
        return E2
    if kind == "randers":
        return NormSpec.randers(draw(drifts))
    return NormSpec.l1drift(2, draw(st.floats(-0.9, 0.9)))


@given(specs(), vecs, st.floats(0, 100))
def test_positive_homogeneity(spec, v, lam):
    assert abs(norm(spec, lam * v) - lam * norm(spec, v)) <= 1e-12 * (1 + lam * norm(spec, v))


@given(specs(), vecs, vecs)
def test_triangle_inequality(spec, u, v):
    assert norm(spec, u + v) <= norm(spec, u) + norm(spec, v) + 1e-12


@given(specs(), vecs)
def test_positivity(spec, v):
    n = norm(spec, v)
    assert n >= 0
    assert (n == 0) == (not np.any(v))


@settings(max_examples=200)
@given(specs(smooth_only=True), vecs, vecs)
def test_pairing_bound(spec, y, xi):
    assert y @ xi <= norm(spec, y) * dual_norm(spec, xi) + 1e-9


@settings(max_examples=200)
@given(specs(smooth_only=True), vecs)
def test_legendre_certification(spec, xi):
    v = legendre_inverse(spec, xi)
    Fs = dual_norm(spec, xi)
    assert abs(norm(spec, v) - Fs) <= 1e-8
    assert abs(v @ xi - norm(spec, v) * Fs) <= 1e-8


@given(specs(), vecs)
def test_reversibility_dominates_samples(spec, v):
    if np.any(v):
        assert reversibility(spec) >= reverse_norm(spec, v) / norm(spec, v) - 1e-9
