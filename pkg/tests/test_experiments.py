import numpy as np
import pytest
from scipy.integrate import quad

from cram.core import fit, model_rank
from cram.data import Dataset, standardize
from cram.errors import ContractError
from cram.experiments import (
    SyntheticSpec,
    centering_constants,
    default_lambda_grid,
    fold_assignments,
    generate_synthetic,
    kfold_cv,
    lambda_max,
    risk_scaling_study,
    synthetic_config,
    true_components,
)
from cram.linalg import numerical_rank


def test_centering_constants_match_quadrature():
    for a, b in [(-2.0, 2.0), (0.0, 1.0), (-1.0, 3.0)]:
        c2, c4 = centering_constants(a, b)
        assert c2 == pytest.approx(quad(lambda t: t * t, a, b)[0] / (b - a), rel=1e-12)
        assert c4 == pytest.approx(quad(lambda t: np.exp(-t), a, b)[0] / (b - a), rel=1e-12)
    c2, c4 = centering_constants(-2.0, 2.0)
    assert c2 == pytest.approx(4 / 3)
    assert c4 == pytest.approx(np.sinh(2) / 2)


def test_generation_is_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=11))
    b = generate_synthetic(SyntheticSpec(seed=11))
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert generate_synthetic(SyntheticSpec(seed=12)).x.tobytes() != a.x.tobytes()


def test_true_components_centered_and_rank_one():
    spec = SyntheticSpec(n=4000, sigma=0.0, seed=3)
    d = generate_synthetic(spec)
    comps = true_components(d.x, spec)
    assert np.abs(comps.mean(axis=1)).max() < 4 / np.sqrt(spec.n)
    assert [numerical_rank(c, 1e-8) for c in comps] == [1, 1, 1, 1]
    assert numerical_rank(comps.reshape(-1, 3), 1e-8) == 1
    np.testing.assert_allclose(d.y, comps.sum(axis=0))


def test_spec_validation():
    with pytest.raises(ContractError):
        SyntheticSpec(n=5)
    with pytest.raises(ContractError):
        SyntheticSpec(sigma=-1)
    with pytest.raises(ContractError):
        SyntheticSpec(x_low=1, x_high=1)


def test_noiseless_recovery():
    # local-linear bias is about h^2 |m''| / 2, so a small bandwidth is
    # needed for the 0.05 sup-error bound (sin(2x) has |m''| up to 4)
    spec = SyntheticSpec(n=2000, sigma=0.0, seed=1)
    raw = generate_synthetic(spec)
    model = fit(standardize(raw), synthetic_config("per_component", 0.0, bandwidth=0.07))
    truth = true_components(raw.x, spec)
    for j in range(4):
        target = truth[j] - truth[j].mean(axis=0)
        assert np.abs(model.components[j] - target).max() <= 0.05


def test_lambda_max_is_first_zero_doubling(synth):
    cfg = synthetic_config("joint")
    top = lambda_max(synth, cfg)
    assert all(not c.any() for c in fit(synth, cfg.with_lambda(top)).components)
    assert any(c.any() for c in fit(synth, cfg.with_lambda(top / 2)).components)
    grid = default_lambda_grid(synth, cfg, size=30)
    assert len(grid) == 30 and grid[0] == pytest.approx(1e-3) and grid[-1] == pytest.approx(top)


def test_folds_partition():
    folds = fold_assignments(23, 4, seed=5)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))
    assert [len(f) for f in folds] == [6, 6, 6, 5]
    assert all((a == b).all() for a, b in zip(folds, fold_assignments(23, 4, seed=5)))


def test_cv_single_lambda(synth):
    report = kfold_cv(synth, synthetic_config("joint"), [0.4], k=3)
    assert report.selected == 0.4


def test_cv_error_is_mean_of_folds(synth):
    report = kfold_cv(synth, synthetic_config("joint"), [0.01, 0.1, 1.0], k=5, seed=2)
    assert np.array_equal(report.cv_error, report.fold_errors.mean(axis=0))
    assert np.all(report.cv_error >= 0) and np.all(report.cv_se >= 0)
    assert report.selected in report.lambda_grid


def test_cv_threads_do_not_change_results(synth):
    grid = [0.05, 0.5]
    a = kfold_cv(synth, synthetic_config("joint"), grid, k=4, seed=1, threads=1)
    b = kfold_cv(synth, synthetic_config("joint"), grid, k=4, seed=1, threads=4)
    np.testing.assert_array_equal(a.fold_errors, b.fold_errors)


def test_cv_one_se_rule_not_smaller(synth):
    grid = np.geomspace(1e-3, 2.0, 10)
    a = kfold_cv(synth, synthetic_config("joint"), grid, k=5, seed=0)
    b = kfold_cv(synth, synthetic_config("joint"), grid, k=5, seed=0, rule="1se")
    assert b.selected >= a.selected


def test_cv_validation(synth):
    with pytest.raises(ContractError):
        kfold_cv(synth, synthetic_config(), [], k=5)
    with pytest.raises(ContractError):
        kfold_cv(synth, synthetic_config(), [0.1], k=1)
    with pytest.raises(ContractError):
        kfold_cv(synth, synthetic_config(), [0.1], k=100)


@pytest.mark.slow
def test_cv_prefers_heavy_penalty_on_pure_noise():
    hits = 0
    for r in range(20):
        rng = np.random.default_rng(1000 + r)
        data = standardize(Dataset(rng.uniform(-2, 2, (100, 4)), rng.normal(size=(100, 3))))
        cfg = synthetic_config("joint")
        grid = default_lambda_grid(data, cfg, size=15)
        report = kfold_cv(data, cfg, grid, k=5, seed=r)
        hits += report.selected >= grid[len(grid) * 2 // 3]
    assert hits >= 16


def test_cv_on_synthetic_records_rank(synth):
    cfg = synthetic_config("joint")
    grid = default_lambda_grid(synth, cfg, size=15)
    report = kfold_cv(synth, cfg, grid, k=10, seed=0)
    rank = model_rank(fit(synth, cfg.with_lambda(report.selected)))
    assert 1 <= rank <= 3


@pytest.mark.slow
def test_risk_decreases_without_noise():
    rows = risk_scaling_study(SyntheticSpec(sigma=0.0, seed=4), [50, 150], 5, synthetic_config("joint"))
    assert rows[1].mean_risk < rows[0].mean_risk


@pytest.mark.slow
def test_risk_se_scales_with_repetitions():
    base = SyntheticSpec(sigma=1.0, seed=9)
    few = risk_scaling_study(base, [60], 5, synthetic_config("joint"), grid_size=8)[0]
    many = risk_scaling_study(base, [60], 20, synthetic_config("joint"), grid_size=8)[0]
    ratio = few.se / many.se
    assert 1.0 <= ratio <= 4.0  # expected about sqrt(20/5) = 2


def test_risk_study_validation():
    with pytest.raises(ContractError):
        risk_scaling_study(SyntheticSpec(), [150, 50], 5, synthetic_config())
    with pytest.raises(ContractError):
        risk_scaling_study(SyntheticSpec(), [50], 3, synthetic_config())
