"""Cumulants, their derivatives, and restricted likelihood quantities.

The score and Hessian are checked against central finite differences of the
log likelihood, which is the independent oracle for both.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebicselect import (
    Dataset,
    Family,
    SupportSet,
    ValidationError,
    cumulant,
    cumulant_derivs,
    hessian,
    log_likelihood,
    score,
)

FAMILIES = [Family.LOGISTIC, Family.POISSON, Family.GAUSSIAN]


def make_data(family: Family, n: int, p: int, rng: np.random.Generator) -> Dataset:
    x = rng.standard_normal((n, p))
    theta = x[:, :2] @ rng.normal(scale=0.7, size=2)
    if family is Family.LOGISTIC:
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-theta))).astype(float)
    elif family is Family.POISSON:
        y = rng.poisson(np.exp(np.clip(theta, None, 5.0))).astype(float)
    else:
        y = theta + rng.standard_normal(n)
    return Dataset(x=x, y=y, family=family)


def fd_score(data: Dataset, support: SupportSet, coeffs: np.ndarray, h: float = 1e-5) -> np.ndarray:
    d = len(coeffs)
    out = np.zeros(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[j] = (
            log_likelihood(data, support, coeffs + e)
            - log_likelihood(data, support, coeffs - e)
        ) / (2.0 * h)
    return out


def fd_hessian(data: Dataset, support: SupportSet, coeffs: np.ndarray, h: float = 1e-5) -> np.ndarray:
    # H = -d(score)/d(coeffs), differentiated column by column.
    d = len(coeffs)
    out = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[:, j] = -(
            score(data, support, coeffs + e) - score(data, support, coeffs - e)
        ) / (2.0 * h)
    return 0.5 * (out + out.T)


# exact values at easy arguments

def test_cumulant_anchors():
    assert cumulant(Family.LOGISTIC, 0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert cumulant(Family.POISSON, 1.0) == pytest.approx(math.e, abs=1e-15)
    assert cumulant(Family.GAUSSIAN, 2.0) == pytest.approx(2.0, abs=1e-15)
    assert cumulant(Family.GAUSSIAN, -3.0) == pytest.approx(4.5, abs=1e-15)


def test_cumulant_deriv_anchors():
    b1, b2, b3 = cumulant_derivs(Family.LOGISTIC, 0.0)
    assert b1 == pytest.approx(0.5, abs=1e-15)
    assert b2 == pytest.approx(0.25, abs=1e-15)
    assert b3 == pytest.approx(0.0, abs=1e-15)
    b1, b2, b3 = cumulant_derivs(Family.GAUSSIAN, 1.7)
    assert (b1, b2, b3) == (1.7, 1.0, 0.0)
    b1, b2, b3 = cumulant_derivs(Family.POISSON, 0.5)
    assert b1 == b2 == b3 == pytest.approx(math.exp(0.5), rel=1e-15)


def test_logistic_cumulant_extreme_arguments():
    # Large positive slope is theta itself, large negative decays to zero;
    # neither may overflow.
    assert cumulant(Family.LOGISTIC, 800.0) == pytest.approx(800.0, rel=1e-12)
    assert cumulant(Family.LOGISTIC, -800.0) == 0.0
    assert np.isfinite(cumulant(Family.LOGISTIC, np.array([-1e4, 0.0, 1e4]))).all()


def test_logistic_cumulant_continuous_at_branch():
    # The piecewise evaluation must agree across the switch point.
    for cut in (35.0, -35.0):
        lo = cumulant(Family.LOGISTIC, cut - 1e-9)
        hi = cumulant(Family.LOGISTIC, cut + 1e-9)
        assert abs(hi - lo) < 1e-8


@pytest.mark.parametrize("family", FAMILIES)
def test_cumulant_derivs_match_fd_of_cumulant(family):
    thetas = np.linspace(-3.0, 3.0, 13)
    h = 1e-5
    b1, b2, _ = cumulant_derivs(family, thetas)
    fd1 = (cumulant(family, thetas + h) - cumulant(family, thetas - h)) / (2 * h)
    fd2 = (
        cumulant(family, thetas + h)
        - 2 * cumulant(family, thetas)
        + cumulant(family, thetas - h)
    ) / h**2
    np.testing.assert_allclose(b1, fd1, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(b2, fd2, rtol=1e-4, atol=1e-4)


@pytest.mark.parametrize("family", FAMILIES)
def test_variance_function_positive(family):
    _, b2, _ = cumulant_derivs(family, np.linspace(-8.0, 8.0, 33))
    assert (np.asarray(b2) > 0).all()
    if family is Family.LOGISTIC:
        assert (np.asarray(b2) <= 0.25 + 1e-15).all()


def test_balanced_null_log_likelihood():
    # At zero coefficients every logistic observation contributes -log 2.
    rng = np.random.default_rng(3)
    n = 40
    x = rng.standard_normal((n, 5))
    y = np.r_[np.ones(n // 2), np.zeros(n // 2)]
    data = Dataset(x=x, y=y, family=Family.LOGISTIC)
    sup = SupportSet.from_iterable([0, 3])
    assert log_likelihood(data, sup, np.zeros(2)) == pytest.approx(-n * math.log(2.0), rel=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
def test_score_matches_finite_differences(family):
    rng = np.random.default_rng(11)
    data = make_data(family, 60, 8, rng)
    sup = SupportSet.from_iterable([0, 2, 5])
    for _ in range(5):
        coeffs = rng.normal(scale=0.5, size=3)
        s = score(data, sup, coeffs)
        np.testing.assert_allclose(s, fd_score(data, sup, coeffs), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_hessian_matches_finite_differences(family):
    rng = np.random.default_rng(12)
    data = make_data(family, 60, 8, rng)
    sup = SupportSet.from_iterable([1, 4, 6])
    for _ in range(5):
        coeffs = rng.normal(scale=0.5, size=3)
        h = hessian(data, sup, coeffs)
        np.testing.assert_allclose(h, fd_hessian(data, sup, coeffs), rtol=1e-5, atol=1e-5)


def test_intercept_shifts_linear_predictor():
    rng = np.random.default_rng(13)
    data = make_data(Family.GAUSSIAN, 30, 4, rng)
    sup = SupportSet.from_iterable([0, 1])
    coeffs = np.array([0.3, -0.2])
    # Appending the intercept as an extra constant column must reproduce it.
    aug = Dataset(
        x=np.hstack([data.x, np.ones((30, 1))]), y=data.y, family=Family.GAUSSIAN
    )
    aug_sup = SupportSet.from_iterable([0, 1, 4])
    lhs = log_likelihood(data, sup, coeffs, intercept=0.7)
    rhs = log_likelihood(aug, aug_sup, np.r_[coeffs, 0.7])
    assert lhs == pytest.approx(rhs, rel=1e-14)


def test_score_restriction_consistency():
    # Zero-padding coefficients outside J leaves the J components unchanged.
    rng = np.random.default_rng(14)
    data = make_data(Family.LOGISTIC, 50, 6, rng)
    full = SupportSet.from_iterable(range(6))
    sub = SupportSet.from_iterable([1, 3])
    coeffs_full = np.zeros(6)
    coeffs_full[[1, 3]] = [0.4, -0.9]
    s_full = score(data, full, coeffs_full)
    s_sub = score(data, sub, np.array([0.4, -0.9]))
    np.testing.assert_allclose(s_full[[1, 3]], s_sub, rtol=1e-14)


def test_gaussian_hessian_is_gram_matrix():
    rng = np.random.default_rng(15)
    data = make_data(Family.GAUSSIAN, 40, 5, rng)
    sup = SupportSet.from_iterable([0, 2, 4])
    xj = data.x[:, [0, 2, 4]]
    np.testing.assert_allclose(
        hessian(data, sup, rng.standard_normal(3)), xj.T @ xj, rtol=1e-12
    )


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(FAMILIES),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_hessian_positive_semidefinite(family, seed):
    rng = np.random.default_rng(seed)
    data = make_data(family, 25, 6, rng)
    size = int(rng.integers(1, 5))
    sup = SupportSet.from_iterable(rng.choice(6, size=size, replace=False).tolist())
    h = hessian(data, sup, rng.normal(scale=0.5, size=size))
    assert np.allclose(h, h.T)
    assert np.linalg.eigvalsh(h).min() > -1e-9


# container validation

def test_support_set_sorts_and_dedups():
    s = SupportSet.from_iterable([4, 1, 4, 2])
    assert s.indices == (1, 2, 4)
    assert list(s) == [1, 2, 4]
    assert 2 in s and 3 not in s
    assert len(SupportSet.empty()) == 0
    assert s.as_array().dtype == np.intp


def test_support_set_rejects_unsorted_tuple():
    with pytest.raises(ValidationError):
        SupportSet((3, 1))
    with pytest.raises(ValidationError):
        SupportSet((1, 1))
    with pytest.raises(ValidationError):
        SupportSet((-1, 2))


def test_support_set_algebra():
    a = SupportSet.from_iterable([0, 2])
    b = SupportSet.from_iterable([2, 5])
    assert a.union(b).indices == (0, 2, 5)
    assert a.issubset(a.union(b))
    assert not a.issubset(b)


def test_dataset_validates_response():
    x = np.zeros((4, 2))
    with pytest.raises(ValidationError):
        Dataset(x=x, y=np.array([0.0, 1.0, 2.0, 0.0]), family=Family.LOGISTIC)
    with pytest.raises(ValidationError):
        Dataset(x=x, y=np.array([0.0, -1.0, 2.0, 0.0]), family=Family.POISSON)
    with pytest.raises(ValidationError):
        Dataset(x=x, y=np.array([0.0, 1.0]), family=Family.GAUSSIAN)


def test_dataset_arrays_read_only():
    data = Dataset(x=np.ones((3, 2)), y=np.zeros(3), family=Family.GAUSSIAN)
    with pytest.raises(ValueError):
        data.x[0, 0] = 5.0
    with pytest.raises(ValueError):
        data.y[0] = 5.0


def test_support_out_of_range_rejected():
    data = Dataset(x=np.ones((3, 2)), y=np.zeros(3), family=Family.GAUSSIAN)
    with pytest.raises(ValidationError):
        log_likelihood(data, SupportSet.from_iterable([0, 2]), np.zeros(2))


def test_family_from_name_aliases():
    assert Family.from_name("logistic") is Family.LOGISTIC
    assert Family.from_name("gaussian") is Family.GAUSSIAN
    assert Family.from_name("gaussian_unit_variance") is Family.GAUSSIAN
    with pytest.raises(ValidationError):
        Family.from_name("probit")
