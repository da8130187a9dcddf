import math

import numpy as np
import pytest

from src.modelling.errors import (
    DimensionConstraint,
    InvariantViolation,
    OutOfRange,
    SupportViolation,
    ZeroDenominator,
    ZeroTime,
)
from src.modelling.group_core import build_group
from src.modelling.laguerre_spherical import zero_spectrum
from src.modelling.spectral_calculus import DEFAULT_PROFILE, rescale_dyadic
from src.services import dispersive_lab
from src.services.dispersive_lab import (
    DecayFit,
    conjugate_exponent,
    create_dispersive_lab,
    fit_decay,
    freq_split,
    interp_band_ratio,
    split_dispersive_ratio,
    split_threshold,
    transport_profile,
)


@pytest.mark.parametrize("t, expected", [(1.0, 0), (1 / 16, 2), (-1 / 16, 2), (4.0, -1), (0.3, 1)])
def test_split_threshold(t, expected):
    assert split_threshold(t) == expected


def test_split_threshold_needs_nonzero_time():
    with pytest.raises(ZeroTime):
        split_threshold(0.0)


def test_frequency_split_sums_back(spectrum11):
    low, high = freq_split(spectrum11, 0.05)
    np.testing.assert_allclose((low + high).coeffs, spectrum11.coeffs, atol=1e-14)
    assert not low.is_zero() and not high.is_zero()


def test_split_ratio_needs_data(layout11):
    with pytest.raises(ZeroDenominator):
        split_dispersive_ratio(zero_spectrum(layout11), 0.1)


def test_band_ratio_needs_r_at_least_two(spectrum11):
    with pytest.raises(OutOfRange):
        interp_band_ratio(spectrum11, 1, 0.1, 1.5)


@pytest.mark.parametrize("r, expected", [(math.inf, 1.0), (1.0, math.inf), (4.0, 4 / 3), (2.0, 2.0)])
def test_conjugate_exponent(r, expected):
    assert conjugate_exponent(r) == pytest.approx(expected)


def test_decay_fit_recovers_power_law():
    times = np.geomspace(1.0, 100.0, 9)
    exponent, r_squared = fit_decay(times, 3.0 * times**-0.5, (1.0, 100.0))
    assert exponent == pytest.approx(0.5, abs=1e-12)
    assert r_squared == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(OutOfRange):
        fit_decay(times, times, (200.0, 300.0))


def test_decay_fit_frame():
    times = np.array([0.0, 1.0, 4.0])
    fit = DecayFit(times, np.array([1.0, 0.5, 0.25]), 0.5, 1.0, (1.0, 4.0), 0.5)
    frame = fit.to_frame()
    assert list(frame.columns) == ["t", "sup_norm", "bound_value", "ratio"]
    np.testing.assert_allclose(frame["bound_value"], [1.0, 1.0, 0.5])
    with pytest.raises(InvariantViolation):
        DecayFit(times[::-1], np.ones(3), 0.5, 1.0, (1.0, 4.0))


def test_decay_needs_two_dimensional_centre(heisenberg):
    with pytest.raises(DimensionConstraint):
        create_dispersive_lab(heisenberg, M=2, t_max=1.0).kernel_decay([1.0, 2.0])


def test_transport_lives_on_heisenberg_type_groups(group22):
    with pytest.raises(DimensionConstraint):
        create_dispersive_lab(group22).heisenberg_transport(0, [0.0, 1.0])


def test_transport_data_must_sit_on_positive_lambda(heisenberg):
    lab = create_dispersive_lab(heisenberg)
    layout = lab.transport_layout(1)
    with pytest.raises(SupportViolation):
        lab.transport_spectrum(layout, 1, lambda lam: np.exp(-lam**2))
    with pytest.raises(ZeroDenominator):
        lab.transport_spectrum(layout, 1, lambda lam: np.zeros_like(lam))


def test_transport_shift_moves_at_laguerre_speed(heisenberg):
    lab = create_dispersive_lab(heisenberg)
    report = lab.heisenberg_transport(1, np.linspace(0.0, 4.0, 5), transport_profile(2.0, 1.0))
    assert report.expected_slope == 3.0
    assert report.to_dict()["relative_slope_error"] <= 1e-5
    assert list(report.to_frame().columns) == ["t", "sup_norm", "shift"]


@pytest.mark.parametrize("j, t", [(-1, 2.0), (0, 0.5), (1, 0.25), (2, 0.05)])
def test_kernel_scaling_identity_is_exact(heisenberg, j, t):
    lab = create_dispersive_lab(heisenberg, M=4, t_max=1.0)
    assert lab.kernel_scaling_check(j, t) <= 1e-8


def test_kernel_scaling_check_notices_a_mismatched_band(heisenberg, monkeypatch):
    genuine = dispersive_lab.lp_tilde_kernel

    def skewed(layout, j, profile=DEFAULT_PROFILE):
        kernel = genuine(layout, j, profile)
        return 1.01 * kernel if j else kernel

    monkeypatch.setattr(dispersive_lab, "lp_tilde_kernel", skewed)
    lab = create_dispersive_lab(heisenberg, M=4, t_max=1.0)
    assert lab.kernel_scaling_check(1, 0.25) == pytest.approx(0.01 / 1.01, rel=1e-6)


def test_split_ratio_is_linear_in_the_data(spectrum22):
    ratio = split_dispersive_ratio(spectrum22, 0.05)
    assert ratio > 0
    assert split_dispersive_ratio(2.0 * spectrum22, 0.05) == pytest.approx(ratio, rel=1e-12)


@pytest.mark.parametrize("j", [-1, 1])
def test_split_ratio_is_invariant_under_paired_dilation(spectrum22, j):
    ratio = split_dispersive_ratio(spectrum22, 0.05)
    scaled = split_dispersive_ratio(rescale_dyadic(spectrum22, j), 0.05 * 4.0 ** (-j))
    assert scaled == pytest.approx(ratio, rel=1e-6)


def test_band_ratio_on_l2_is_unitarity(spectrum22):
    assert interp_band_ratio(spectrum22, 1, 0.05, 2.0) <= 1 + 1e-6
    assert interp_band_ratio(spectrum22, 1, 0.05, 2.0) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("r", [4.0, math.inf])
def test_band_ratio_is_invariant_under_paired_dilation(spectrum22, r):
    ratio = interp_band_ratio(spectrum22, 1, 0.05, r)
    scaled = interp_band_ratio(rescale_dyadic(spectrum22, 1), 2, 0.05 / 4, r)
    assert scaled == pytest.approx(ratio, rel=1e-6)


@pytest.mark.slow
def test_transport_keeps_sup_norm(heisenberg):
    lab = create_dispersive_lab(heisenberg)
    layout = lab.transport_layout(1, L=256.0, n_s=512)
    report = lab.heisenberg_transport(1, np.linspace(0.0, 10.0, 11), transport_profile(2.0, 1.0), layout)
    assert report.sup_norm_drift <= 1e-6
    assert report.to_dict()["relative_slope_error"] <= 0.01


@pytest.mark.slow
def test_kernel_decay_rate_on_two_dimensional_centre(group22):
    lab = create_dispersive_lab(group22, M=8, t_max=100.0)
    fit = lab.kernel_decay(np.geomspace(1.0, 100.0, 13))
    assert fit.expected_exponent == 0.5
    assert abs(fit.fitted_exponent - 0.5) <= 0.15
    assert fit.r_squared >= 0.98


@pytest.mark.slow
def test_split_ratio_stays_bounded_along_the_kernel_flow(group22):
    lab = create_dispersive_lab(group22, M=4, t_max=16.0)
    kernel = lab.kernel(0)
    ratios = [split_dispersive_ratio(kernel, t, radial=lab.sampling) for t in (1.0, 4.0, 16.0)]
    assert all(np.isfinite(ratios)) and min(ratios) > 0
    assert max(ratios) <= 10 * min(ratios)


@pytest.mark.slow
def test_kernel_decay_rate_on_three_dimensional_centre():
    lab = create_dispersive_lab(build_group(2, 3), M=8, t_max=100.0)
    fit = lab.kernel_decay(np.geomspace(1.0, 100.0, 13))
    assert fit.expected_exponent == 1.0
    assert 0.8 <= fit.fitted_exponent <= 1.2
