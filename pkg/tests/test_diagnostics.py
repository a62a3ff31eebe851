"""Regularity diagnostics: score tails, spectra, quadratic expansions."""

import math
import warnings

import numpy as np
import pytest

from ebicselect import (
    Dataset,
    Family,
    FitOptions,
    SupportSet,
    ValidationError,
    WhpReport,
    hessian,
    hessian_spectrum_scan,
    mle_radius_check,
    quadratic_bound_check,
    score_bound_check,
    smoothed_selection_curve,
)


def gaussian_zero_noise(seed: int, n: int = 80, p: int = 10):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:2] = [1.0, -0.5]
    y = x @ beta  # no noise: the score vanishes exactly at the truth
    return Dataset(x=x, y=y, family=Family.GAUSSIAN), beta


def test_score_bound_zero_noise_lhs_vanishes():
    data, beta = gaussian_zero_noise(0)
    truth = SupportSet.from_iterable([0, 1])
    supersets = [SupportSet.from_iterable([0, 1, 5]), SupportSet.from_iterable([0, 1, 3, 7])]
    pairs = score_bound_check(data, truth, beta, supersets)
    assert len(pairs) == 2
    for lhs, rhs in pairs:
        assert lhs == pytest.approx(0.0, abs=1e-8)
        assert rhs > 0


def test_score_bound_formula():
    # lhs^2 = s' H^{-1} s at the truth; rhs^2 = 2 |J - J*| (alpha log n +
    # (1 + beta) log p).  Verify both against direct arithmetic.
    rng = np.random.default_rng(3)
    n, p = 60, 8
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[0] = 1.0
    y = x @ beta + rng.standard_normal(n)
    data = Dataset(x=x, y=y, family=Family.GAUSSIAN)
    truth = SupportSet.from_iterable([0])
    sup = SupportSet.from_iterable([0, 4, 6])
    [(lhs, rhs)] = score_bound_check(data, truth, beta, [sup], alpha=1.0, beta=1.0)
    xj = x[:, [0, 4, 6]]
    s = xj.T @ (y - x @ beta)
    h = xj.T @ xj
    assert lhs == pytest.approx(math.sqrt(s @ np.linalg.solve(h, s)), rel=1e-10)
    assert rhs == pytest.approx(math.sqrt(2 * 2 * (math.log(n) + 2 * math.log(p))), rel=1e-12)


def test_score_bound_requires_strict_supersets():
    data, beta = gaussian_zero_noise(1)
    truth = SupportSet.from_iterable([0, 1])
    with pytest.raises(ValidationError):
        score_bound_check(data, truth, beta, [truth])  # not strict
    with pytest.raises(ValidationError):
        score_bound_check(data, truth, beta, [SupportSet.from_iterable([0, 5])])


def test_score_bound_rejects_nonzero_off_support_coeffs():
    data, beta = gaussian_zero_noise(2)
    bad = beta.copy()
    bad[7] = 0.3
    with pytest.raises(ValidationError):
        score_bound_check(
            data, SupportSet.from_iterable([0, 1]), bad,
            [SupportSet.from_iterable([0, 1, 3])],
        )


def test_gaussian_spectrum_is_constant_in_coefficients():
    # The gaussian Hessian does not depend on the evaluation point, so the
    # lambda_3 continuity estimate must be numerically zero.
    rng = np.random.default_rng(5)
    x = rng.standard_normal((50, 6))
    data = Dataset(x=x, y=rng.standard_normal(50), family=Family.GAUSSIAN)
    sups = [SupportSet.from_iterable([0, 2]), SupportSet.from_iterable([1, 3, 5])]
    lam1, lam2, lam3 = hessian_spectrum_scan(data, sups, radius=2.0, grid_size=16)
    eigs = []
    for s in sups:
        xj = x[:, s.as_array()]
        eigs += list(np.linalg.eigvalsh(xj.T @ xj / 50))
    assert lam1 == pytest.approx(min(eigs), rel=1e-10)
    assert lam2 == pytest.approx(max(eigs), rel=1e-10)
    assert lam3 == pytest.approx(0.0, abs=1e-7)


def test_logistic_spectrum_near_origin():
    # At a vanishing radius the logistic Hessian is 0.25 * X'X / n.
    rng = np.random.default_rng(6)
    x = rng.standard_normal((200, 4))
    y = (rng.random(200) < 0.5).astype(float)
    data = Dataset(x=x, y=y, family=Family.LOGISTIC)
    sup = SupportSet.from_iterable([0, 1])
    lam1, lam2, _ = hessian_spectrum_scan(data, [sup], radius=1e-8, grid_size=8)
    xj = x[:, [0, 1]]
    eigs = np.linalg.eigvalsh(0.25 * xj.T @ xj / 200)
    assert lam1 == pytest.approx(eigs[0], rel=1e-6)
    assert lam2 == pytest.approx(eigs[-1], rel=1e-6)


def test_quadratic_bound_zero_noise_zero_tau_no_violations():
    data, beta = gaussian_zero_noise(7, n=100, p=12)
    sups = [
        SupportSet.from_iterable([0, 1]),
        SupportSet.from_iterable([0, 1, 4]),
        SupportSet.from_iterable([0, 1, 6, 9]),
    ]
    violations = quadratic_bound_check(
        data, beta, sups, directions_per_support=25, tau_hat=0.0, seed=0
    )
    assert violations == 0


def test_quadratic_bound_counts_are_reproducible():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((150, 8))
    beta = np.zeros(8)
    beta[0] = 1.0
    y = (rng.random(150) < 1 / (1 + np.exp(-x @ beta))).astype(float)
    data = Dataset(x=x, y=y, family=Family.LOGISTIC)
    sups = [SupportSet.from_iterable([0, 2])]
    a = quadratic_bound_check(data, beta, sups, 10, tau_hat=0.5, seed=3)
    b = quadratic_bound_check(data, beta, sups, 10, tau_hat=0.5, seed=3)
    assert a == b
    assert 0 <= a <= 10


def test_mle_radius_matches_direct_fits():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((120, 6))
    y = x[:, 0] * 1.5 + rng.standard_normal(120)
    data = Dataset(x=x, y=y, family=Family.GAUSSIAN)
    sups = [SupportSet.from_iterable([0]), SupportSet.from_iterable([0, 3])]
    from ebicselect import fit_mle

    expected = max(
        float(np.linalg.norm(fit_mle(data, s).coeffs)) for s in sups
    )
    assert mle_radius_check(data, sups) == pytest.approx(expected, rel=1e-12)


def test_mle_radius_warns_and_skips_failures():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((80, 2))
    y = (x[:, 0] > 0).astype(float)
    data = Dataset(x=x, y=y, family=Family.LOGISTIC)
    sups = [SupportSet.from_iterable([0]), SupportSet.from_iterable([1])]
    with pytest.warns(RuntimeWarning):
        radius = mle_radius_check(data, sups)
    # only the non-separated support contributes
    from ebicselect import fit_mle

    assert radius == pytest.approx(
        float(np.linalg.norm(fit_mle(data, SupportSet.from_iterable([1])).coeffs))
    )


def test_smoothed_curve_hand_value():
    # Gaussian kernel weights at distances 0 and 1 with bandwidth 1:
    # (1 * 1 + e^{-1/2} * 0.7) / (1 + e^{-1/2}).
    values = np.array([0.0, 1.0])
    selected = np.array([1.0, 0.0])
    got = smoothed_selection_curve(values, selected, bandwidth=1.0, query_points=np.array([0.0]))
    w = math.exp(-0.5)
    assert got[0] == pytest.approx(1.0 / (1.0 + w), rel=1e-12)


def test_smoothed_curve_interpolates_indicator_means():
    rng = np.random.default_rng(11)
    values = rng.uniform(0, 10, size=200)
    selected = (values > 5).astype(float)
    q = np.array([1.0, 5.0, 9.0])
    got = smoothed_selection_curve(values, selected, bandwidth=0.5, query_points=q)
    assert got[0] < 0.1 and got[2] > 0.9
    assert np.all((got >= 0.0) & (got <= 1.0))


def test_smoothed_curve_far_query_underflows_to_zero_with_warning():
    values = np.array([0.0, 1.0])
    selected = np.array([1.0, 1.0])
    with pytest.warns(RuntimeWarning):
        got = smoothed_selection_curve(
            values, selected, bandwidth=1e-3, query_points=np.array([500.0])
        )
    assert got[0] == 0.0


def test_smoothed_curve_validates_indicators():
    with pytest.raises(ValidationError):
        smoothed_selection_curve(
            np.array([0.0, 1.0]), np.array([0.5, 1.0]), 1.0, np.array([0.0])
        )
    with pytest.raises(ValidationError):
        smoothed_selection_curve(
            np.array([0.0]), np.array([1.0, 0.0]), 1.0, np.array([0.0])
        )


def test_whp_report_json_round_trip():
    rep = WhpReport(
        score_norm_max=1.2,
        score_bound=3.4,
        mle_radius_max=2.0,
        lambda1_hat=0.5,
        lambda2_hat=4.0,
        lambda3_hat=0.1,
        quad_bound_violations=2,
    )
    import json

    parsed = json.loads(rep.to_json())
    assert parsed["score_norm_max"] == 1.2
    assert parsed["quad_bound_violations"] == 2
    assert list(parsed) == sorted(parsed)
