import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cram.errors import ContractError, DegenerateSmootherError
from cram.smoothing import SmootherSpec, build_smoother, default_bandwidth, weight_row_at, weight_rows

from oracles import local_linear_row


@pytest.mark.parametrize("kernel", ["gaussian", "epanechnikov"])
def test_reproduces_constants_and_lines(backend, rng, kernel):
    x = rng.uniform(-2, 2, 40)
    S = build_smoother(x, SmootherSpec(kernel, 0.8))
    np.testing.assert_allclose(S.weights @ np.full(40, 3.5), 3.5, rtol=1e-10)
    np.testing.assert_allclose(S.weights.sum(axis=1), 1.0, atol=1e-8)
    assert np.linalg.norm(S @ x - x) <= 1e-6 * np.linalg.norm(x)


def test_three_point_hand_evaluation(backend):
    # symmetric design: the first local moment vanishes at x=1 and the
    # row reduces to the normalized kernel weights
    S = build_smoother(np.array([0.0, 1.0, 2.0]), SmootherSpec("gaussian", 1.0))
    e = np.exp(-0.5)
    w = e / (1 + 2 * e)
    np.testing.assert_allclose(S.weights[1], [w, 1 - 2 * w, w], atol=1e-15)
    assert S.weights[1, 1] > S.weights[1, 0]


def test_weight_row_matches_smoother_rows(backend, rng):
    x = rng.normal(size=25)
    spec = SmootherSpec("gaussian", 0.5)
    S = build_smoother(x, spec)
    for i in (0, 7, 24):
        np.testing.assert_allclose(weight_row_at(x, spec, x[i]), S.weights[i], atol=1e-15)


def test_far_point_concentrates_on_boundary(backend):
    x = np.linspace(0.0, 1.0, 11)
    w = weight_row_at(x, SmootherSpec("gaussian", 0.05), 50.0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.argmax(np.abs(w)) == 10
    assert np.all(np.isfinite(w))


def test_normal_equation_oracle(backend):
    x = np.array([0.0, 1.0, 2.0, 3.0])
    w = weight_row_at(x, SmootherSpec("gaussian", 0.5), 1.5)
    np.testing.assert_allclose(w, local_linear_row(x, 1.5, 0.5), atol=1e-12)


@pytest.mark.parametrize("kernel", ["gaussian", "epanechnikov"])
def test_rows_match_oracle_on_random_design(backend, rng, kernel):
    x = rng.uniform(0, 5, 30)
    x0 = rng.uniform(0, 5, 6)
    W = weight_rows(x, SmootherSpec(kernel, 1.5), x0)
    for i, v in enumerate(x0):
        np.testing.assert_allclose(W[i], local_linear_row(x, v, 1.5, kernel), atol=1e-10)


def test_epanechnikov_locality(backend, rng):
    x = rng.uniform(-3, 3, 50)
    h = 0.7
    W = weight_rows(x, SmootherSpec("epanechnikov", h), [0.0, 1.3])
    for row, x0 in zip(W, [0.0, 1.3]):
        assert np.all(row[np.abs(x - x0) >= h] == 0.0)


def test_permutation_equivariance(backend, rng):
    x = rng.normal(size=20)
    perm = rng.permutation(20)
    spec = SmootherSpec("gaussian", 0.6)
    S = build_smoother(x, spec).weights
    Sp = build_smoother(x[perm], spec).weights
    np.testing.assert_allclose(Sp, S[np.ix_(perm, perm)], atol=1e-13)


def test_degenerate_window_falls_back_to_local_constant(backend):
    # only the point itself is inside the window for row 0
    x = np.array([0.0, 5.0, 5.1, 5.2])
    W = weight_rows(x, SmootherSpec("epanechnikov", 1.0), [0.0])
    np.testing.assert_allclose(W[0], [1.0, 0.0, 0.0, 0.0])


def test_empty_window_names_row(backend):
    x = np.array([0.0, 1.0, 2.0])
    with pytest.raises(DegenerateSmootherError) as info:
        weight_rows(x, SmootherSpec("epanechnikov", 0.1), [0.0, 10.0])
    assert info.value.row == 1
    assert "row 1" in str(info.value)


def test_spec_validation():
    with pytest.raises(ContractError):
        SmootherSpec("box", 1.0)
    with pytest.raises(ContractError):
        SmootherSpec("gaussian", 0.0)
    with pytest.raises(ContractError):
        build_smoother(np.array([1.0, 2.0]), SmootherSpec())


def test_default_bandwidth(rng):
    x = rng.normal(size=100)
    assert default_bandwidth(x) == pytest.approx(1.06 * np.std(x, ddof=1) * 100 ** -0.2)
    assert build_smoother(x).spec.bandwidth == pytest.approx(default_bandwidth(x))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(3, 60), h=st.floats(0.05, 3.0),
       kernel=st.sampled_from(["gaussian", "epanechnikov"]))
def test_polynomial_reproduction_property(seed, n, h, kernel):
    x = np.random.default_rng(seed).uniform(-2, 2, n)
    try:
        W = build_smoother(x, SmootherSpec(kernel, h)).weights
    except DegenerateSmootherError:
        return
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-8)
    a, b = 0.3, -1.7
    np.testing.assert_allclose(W @ (a + b * x), a + b * x, atol=1e-6 * (abs(a) + abs(b) * 2))
