import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from src.modelling.errors import (
    BothInfinite,
    DimensionConstraint,
    InvalidAlpha,
    NoPair,
    NotAdmissible,
    OutOfRange,
    ZeroData,
)
from src.modelling.laguerre_spherical import zero_spectrum
from src.modelling.spectral_calculus import propagator, rescale_dyadic
from src.services.strichartz_lab import (
    INF,
    as_exponent,
    classify_pair,
    contraction_time_exponent,
    critical_exponents,
    duhamel_quotient,
    find_admissible,
    format_exponent,
    nonlinearity_regularity,
    scaling_sigma,
    strichartz_quotient,
    time_nodes,
    wellposedness_range,
)


@pytest.mark.parametrize(
    "p, q, r, admissible, endpoint",
    [
        (3, 2, "inf", False, False),
        (2, "inf", 2, True, False),
        (7, "inf", 2, True, False),
        (4, 2, 6, True, True),
        (2, 4, "inf", True, False),
        (2, 2, "inf", False, False),
        (2, 4, 2, False, False),
        (3, 4, 4, True, False),
        (5, 2, 4, True, True),
        (1, "inf", 4, True, False),
        (1, 4, "inf", False, False),
        (3, 3, 6, True, False),
        (4, 2, 8, True, False),
        (4, 2, "inf", True, False),
        (2, 8, 8, True, False),
    ],
)
def test_classify_pair(p, q, r, admissible, endpoint):
    pair = classify_pair(q, r, p)
    assert pair.admissible is admissible
    assert pair.endpoint is endpoint
    assert pair.sigma is None


@pytest.mark.parametrize("q, r", [(1, 2), (2, 1.5)])
def test_exponents_below_two_are_rejected(q, r):
    with pytest.raises(OutOfRange):
        classify_pair(q, r, 2)


def test_both_infinite_is_rejected():
    with pytest.raises(BothInfinite):
        classify_pair("inf", "∞", 3)


def test_exponent_parsing():
    assert as_exponent("7/2") == Fraction(7, 2)
    assert as_exponent(0.1) == Fraction(1, 10)
    assert as_exponent(" Infinity ") == INF
    assert as_exponent(math.inf) == INF
    assert format_exponent(INF) == "inf"
    assert format_exponent(Fraction(20, 3)) == "20/3"


@pytest.mark.parametrize("q, r, N, expected", [("inf", 2, 6, 0), (2, "inf", 10, 4), (4, "inf", 8, Fraction(7, 2))])
def test_scaling_sigma(q, r, N, expected):
    assert scaling_sigma(q, r, N) == expected


def test_classification_carries_sigma_when_asked():
    assert classify_pair(4, "inf", 2, N=8).sigma == Fraction(7, 2)


@pytest.mark.parametrize(
    "d, p, alpha, s_c, s_star, branch, term",
    [
        (2, 2, 3, 3, Fraction(7, 2), "p=2, 1<alpha<5", "(N-p+1)/2"),
        (2, 2, 5, Fraction(7, 2), Fraction(7, 2), "p=2, alpha>=5", "s_c"),
        (2, 3, 3, 4, 4, "p=3, alpha>=3", "s_c"),
        (4, 4, 2, 6, 7, "p>=4, 1<alpha<3", "(N-2)/2"),
        (1, 1, 3, 1, 2, "p=1", "(N-p+1)/2"),
    ],
)
def test_critical_exponents(d, p, alpha, s_c, s_star, branch, term):
    report = critical_exponents(d, p, alpha)
    assert report.s_c == s_c
    assert report.s_star == s_star
    assert report.branch == branch
    assert report.term == term
    assert report.to_dict()["s_star"] == str(Fraction(s_star))


@pytest.mark.parametrize("alpha", [1, 0.5, "inf"])
def test_alpha_must_exceed_one(alpha):
    with pytest.raises(InvalidAlpha):
        critical_exponents(2, 2, alpha)


def test_dimensions_are_checked():
    with pytest.raises(DimensionConstraint):
        critical_exponents(1, 2, 3)


@pytest.mark.parametrize("s, delta", [(Fraction(19, 5), Fraction(1, 10)), (3.8, 0.1), ("19/5", "1/10")])
def test_find_admissible_above_threshold(s, delta):
    pair = find_admissible(2, 2, 3, s, delta)
    assert (pair.q, pair.r) == (Fraction(20, 3), Fraction(40))
    assert pair.sigma == Fraction(7, 2)
    assert pair.admissible


def test_find_admissible_at_threshold():
    pair = find_admissible(2, 2, 3, Fraction(7, 2))
    assert (pair.q, pair.r) == (Fraction(4), INF)
    pair = find_admissible(4, 4, 3, 7)
    assert (pair.q, pair.r) == (Fraction(2), INF)
    assert not pair.endpoint


@pytest.mark.parametrize(
    "d, p, alpha, s, delta",
    [
        (2, 3, 3, 4, None),
        (2, 2, 3, 3, None),
        (2, 2, 3, 4, None),
        (2, 2, 3, Fraction(19, 5), Fraction(3, 10)),
        (2, 2, 3, Fraction(7, 2), Fraction(1, 10)),
    ],
)
def test_no_pair(d, p, alpha, s, delta):
    with pytest.raises(NoPair):
        find_admissible(d, p, alpha, s, delta)


def test_wellposedness_range():
    assert wellposedness_range(2, 2, 3) == {
        "threshold": "7/2",
        "strict": False,
        "upper": "4",
        "branch": "p=2, 1<alpha<5",
        "critical_global": False,
    }
    assert wellposedness_range(2, 3, 3)["strict"] is True
    assert wellposedness_range(4, 4, 3)["critical_global"] is True


def test_nonlinearity_regularity():
    assert all(nonlinearity_regularity(3, Fraction(7, 2)).values())
    fractional = nonlinearity_regularity(Fraction(7, 3), Fraction(7, 2))
    assert fractional == {"odd_integer": False, "continuous_dependence": False, "existence_uniqueness": False}
    assert nonlinearity_regularity(Fraction(9, 2), 4)["existence_uniqueness"] is True


@pytest.mark.parametrize("alpha, q, expected", [(5, 4, 0), (3, "inf", 1), (3, 4, Fraction(1, 2))])
def test_contraction_time_exponent(alpha, q, expected):
    assert contraction_time_exponent(alpha, q) == expected


def test_time_nodes_cover_the_horizon():
    nodes, weights, panels, horizons = time_nodes(2.0, 3)
    assert weights.sum() == pytest.approx(2.0, rel=1e-14)
    np.testing.assert_allclose(horizons, [0.25, 0.5, 1.0, 2.0])
    assert np.all((nodes > 0) & (nodes < 2.0))
    assert weights[panels <= 1].sum() == pytest.approx(0.5, rel=1e-14)


def test_energy_pair_quotient_is_one(spectrum22):
    curve = strichartz_quotient(spectrum22, "inf", 2, 0.05, n_t=2)
    assert curve.quotient == pytest.approx(1.0, rel=1e-12)
    assert curve.sigma == 0


def test_inadmissible_pairs_need_exploratory_mode(spectrum22):
    with pytest.raises(NotAdmissible):
        strichartz_quotient(spectrum22, 2, "inf", 0.05)
    curve = strichartz_quotient(spectrum22, 2, "inf", 0.05, n_t=1, exploratory=True)
    assert curve.exploratory and not curve.pair.admissible


def test_quotient_needs_data(layout22):
    with pytest.raises(ZeroData):
        strichartz_quotient(zero_spectrum(layout22), "inf", 2, 0.05)


def test_saturation_curve_grows_with_horizon(spectrum22):
    curve = strichartz_quotient(spectrum22, 8, 8, 0.05, n_t=3)
    assert curve.saturation_curve.size == 4
    assert np.all(np.diff(curve.saturation_curve) >= -1e-12 * curve.quotient)
    assert curve.to_dict()["sigma"] == "11/4"


def test_quotient_is_dilation_invariant(spectrum22):
    base = strichartz_quotient(spectrum22, 8, 8, 0.04, n_t=2)
    scaled = strichartz_quotient(rescale_dyadic(spectrum22, 1), 8, 8, 0.01, n_t=2)
    assert scaled.quotient == pytest.approx(base.quotient, rel=1e-9)


def test_duhamel_quotient_of_free_flight(spectrum22):
    t_nodes = np.linspace(0.0, 0.05, 6)
    path = SimpleNamespace(t_nodes=t_nodes, states=[propagator(spectrum22, t) for t in t_nodes])
    assert duhamel_quotient(path, ("inf", 2), ("inf", 2)) == pytest.approx(1.0, rel=1e-10)


def test_duhamel_quotient_of_zero_source(layout22):
    t_nodes = np.linspace(0.0, 0.05, 4)
    path = SimpleNamespace(t_nodes=t_nodes, states=[zero_spectrum(layout22)] * 4)
    assert duhamel_quotient(path, ("inf", 2), (8, 8)) == 0.0
