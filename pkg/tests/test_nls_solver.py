from fractions import Fraction

import numpy as np
import pytest

from src.cli.utils.helpers import random_band_limited
from src.modelling.errors import (
    AliasingWarning,
    ExponentRelationViolated,
    GridMismatch,
    InputError,
    InvalidAlpha,
    NoPair,
    TimeOutOfRange,
)
from src.modelling.grids import PeriodicCenterGrid
from src.modelling.group_core import build_group
from src.modelling.laguerre_spherical import make_layout, plancherel_norm, zero_spectrum
from src.modelling.spectral_calculus import frac_power, propagator
from src.services.nls_solver import (
    NLSParams,
    SolverPath,
    duhamel,
    free_flight,
    leibniz_ratio,
    linear_xs_ratio,
    mass_drift,
    nonlinearity,
    picard_solve,
    picard_step,
    pointwise_map,
    power_nonlinearity,
    strang_reference,
    xst_norm,
)
from src.services.strichartz_lab import INF, classify_pair


@pytest.fixture
def params(group22):
    return NLSParams.create(group22, 3, 1.0, "19/5", 0.05, n_t=8)


def test_params_pick_the_admissible_pair(params):
    assert params.s_star == Fraction(7, 2)
    assert (params.pair.q, params.pair.r) == (Fraction(40, 7), Fraction(160, 3))
    np.testing.assert_allclose(params.t_nodes, np.linspace(0.0, 0.05, 9))
    assert params.to_dict()["mu"] == [1.0, 0.0]
    assert params.with_horizon(0.1).T == 0.1


@pytest.mark.parametrize(
    "kwargs, error",
    [
        ({"alpha": 2}, InvalidAlpha),
        ({"mu": 0}, InputError),
        ({"T": 0.0}, TimeOutOfRange),
        ({"n_t": 0}, InputError),
        ({"s": 3}, NoPair),
    ],
)
def test_params_are_validated(group22, kwargs, error):
    arguments = {"alpha": 3, "mu": 1.0, "s": "19/5", "T": 0.05, "n_t": 8, **kwargs}
    with pytest.raises(error):
        NLSParams.create(group22, **arguments)


def test_fractional_alpha_needs_opt_in(group22):
    params = NLSParams.create(group22, "7/3", 1.0, "19/5", 0.05, allow_fractional=True)
    assert params.alpha == Fraction(7, 3)


def test_paths_are_validated(spectrum22, spectrum11):
    with pytest.raises(InputError):
        SolverPath([0.1, 0.2], [spectrum22, spectrum22])
    with pytest.raises(InputError):
        SolverPath([0.0, 0.0], [spectrum22, spectrum22])
    with pytest.raises(GridMismatch):
        SolverPath([0.0, 1.0], [spectrum22, spectrum11])


def test_duhamel_of_free_flight_source(spectrum22):
    path = free_flight(spectrum22, np.linspace(0.0, 0.05, 5))
    scale = np.abs(spectrum22.coeffs).max()
    for t in (0.0, 0.0125, 0.02, 0.05):
        expected = t * propagator(spectrum22, t).coeffs
        np.testing.assert_allclose(duhamel(path, t).coeffs, expected, atol=1e-12 * scale)
    for t in (-0.01, 0.06):
        with pytest.raises(TimeOutOfRange):
            duhamel(path, t)


def test_xst_norm_of_free_flight_on_the_energy_pair(spectrum22):
    pair = classify_pair("inf", 2, 2, N=8)
    path = free_flight(spectrum22, np.linspace(0.0, 0.05, 5))
    energy = plancherel_norm(frac_power(spectrum22, 2.0, inhomogeneous=True))
    assert xst_norm(path, 2, pair, 0) == pytest.approx(2.0 * energy, rel=1e-12)
    zero = free_flight(zero_spectrum(spectrum22.layout), np.linspace(0.0, 0.05, 5))
    assert xst_norm(zero, 2, pair, 0) == 0.0


def test_mass_is_conserved_by_free_flight(spectrum22):
    assert mass_drift(free_flight(spectrum22, np.linspace(0.0, 0.2, 9))) <= 1e-12


def test_cubic_nonlinearity_is_homogeneous(spectrum22):
    base = nonlinearity(spectrum22, 3)
    np.testing.assert_allclose(nonlinearity(2.0 * spectrum22, 3).coeffs, 8.0 * base.coeffs, rtol=1e-12, atol=0)
    rotated = nonlinearity(np.exp(0.3j) * spectrum22, 3)
    np.testing.assert_allclose(rotated.coeffs, np.exp(0.3j) * base.coeffs, atol=1e-12 * np.abs(base.coeffs).max())
    assert nonlinearity(zero_spectrum(spectrum22.layout), 3).is_zero()


def test_power_nonlinearity_on_samples():
    values = np.array([1.0 + 1.0j, -2.0, 0.0])
    np.testing.assert_allclose(power_nonlinearity(values, 3, 2.0), 2.0 * np.abs(values) ** 2 * values)


def test_identity_map_reproduces_the_state(spectrum22):
    restored = pointwise_map(spectrum22, lambda u: u, 2)
    error = np.abs(restored.coeffs - spectrum22.coeffs).max() / np.abs(spectrum22.coeffs).max()
    assert error <= 1e-6


def test_fractional_powers_warn_about_aliasing(spectrum22):
    with pytest.warns(AliasingWarning):
        nonlinearity(spectrum22, Fraction(7, 3))


def test_tiny_coupling_reproduces_free_flight(group22, spectrum22):
    params = NLSParams.create(group22, 3, 1e-14, "19/5", 0.05, n_t=4)
    linear = free_flight(spectrum22, params.t_nodes)
    step = picard_step(spectrum22, linear, params)
    scale = np.abs(spectrum22.coeffs).max()
    for a, b in zip(step.states, linear.states):
        np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12 * scale)


def test_picard_iteration_contracts(spectrum22, params):
    path = picard_solve(spectrum22, params, n_iter=10)
    assert path.converged
    assert np.all(path.contraction_ratios() <= 0.5)
    assert mass_drift(path) <= 1e-6
    frame = path.to_frame()
    assert list(frame.columns) == ["iteration", "d_Xs", "d_X0", "mass", "T"]
    assert frame["iteration"].tolist() == list(range(1, len(frame) + 1))


def test_quintic_run_at_the_critical_pair_contracts(group22, spectrum22):
    params = NLSParams.create(group22, 5, 1.0, "7/2", 0.05, n_t=4)
    assert (params.pair.q, params.pair.r) == (Fraction(4), INF)
    path = picard_solve(spectrum22, params, n_iter=10)
    assert path.converged
    assert np.all(path.contraction_ratios() <= 0.5)
    assert mass_drift(path) <= 1e-6


@pytest.mark.slow
def test_cubic_run_on_three_dimensional_centre_contracts(rng):
    group = build_group(2, 3)
    layout = make_layout(group, 2, PeriodicCenterGrid(3, 2 * np.pi, 8))
    u0 = random_band_limited(layout, rng, 2, norm=0.05)
    params = NLSParams.create(group, 3, 1.0, "9/2", 0.05, n_t=4)
    assert (params.pair.q, params.pair.r) == (Fraction(8, 3), Fraction(40))
    path = picard_solve(u0, params, n_iter=10)
    assert path.converged
    assert np.all(path.contraction_ratios() <= 0.5)
    assert mass_drift(path) <= 1e-6


def test_shorter_horizon_contracts_harder(spectrum22, params):
    def first_ratio(run_params):
        return picard_solve(spectrum22, run_params, n_iter=2, tol=0.0).contraction_ratios()[0]

    full, half = first_ratio(params), first_ratio(params.with_horizon(params.T / 2))
    assert 0 < half < 0.75 * full


def test_strang_splitting_agrees_with_picard(spectrum22, params):
    picard = picard_solve(spectrum22, params, n_iter=10)
    strang = strang_reference(spectrum22, params, 8)
    gap = plancherel_norm(picard.states[-1] - strang.states[-1]) / plancherel_norm(spectrum22)
    assert gap <= 1e-6


def test_linear_xs_ratio_is_at_least_one(spectrum22, params):
    assert linear_xs_ratio(spectrum22, params) >= 1.0


def test_holder_endpoint_of_the_leibniz_ratio(spectrum22):
    assert leibniz_ratio(spectrum22, 3, 0, (2, 6, 6)) == pytest.approx(1.0, rel=1e-10)
    assert leibniz_ratio(zero_spectrum(spectrum22.layout), 3, 0, (2, 6, 6)) == 0.0


def test_leibniz_ratio_checks_its_inputs(spectrum22):
    with pytest.raises(ExponentRelationViolated):
        leibniz_ratio(spectrum22, 3, 0, (2, 4, 4))
    with pytest.raises(InvalidAlpha):
        leibniz_ratio(spectrum22, Fraction(7, 3), 4, (Fraction(3, 2), 2, 8))
