"""
Dispersive experiments for the htype-lab application.

Sup-norm decay of evolved Littlewood-Paley kernels, the dyadic scaling identity
of evolved kernels, the low/high frequency split bound, the band-wise L^r bound
and the p = 1 transport counterexample.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from ..modelling.errors import (
    DimensionConstraint,
    InvariantViolation,
    OutOfRange,
    SupportViolation,
    ZeroDenominator,
    ZeroTime,
)
from ..modelling.grids import (
    PeriodicCenterGrid,
    RadialGrid,
    isotropic_grid_for,
    radial_grid,
)
from ..modelling.group_core import HTypeGroup
from ..modelling.laguerre_spherical import (
    SpectralLayout,
    SphericalSpectrum,
    evaluate_at,
    inverse_transform,
    make_layout,
    plancherel_norm,
)
from ..modelling.spectral_calculus import (
    DEFAULT_PROFILE,
    LPProfile,
    besov_norm,
    check_aliasing_window,
    low_project,
    lp_kernel,
    lp_project,
    lp_tilde_kernel,
    lr_norm,
    propagator,
    sup_norm,
)
from .parallel import parallel_map

logger = logging.getLogger(__name__)

SUPPORT_TOLERANCE = 1e-10
SAMPLING_RADIUS = 6.0
SAMPLING_NODES = 24
SHIFT_SCAN_FACTOR = 8


@dataclass(frozen=True)
class DecayFit:
    """Sup norms of an evolved kernel and their log-log fit over a window."""

    times: np.ndarray
    sup_norms: np.ndarray
    fitted_exponent: float
    r_squared: float
    window: tuple[float, float]
    expected_exponent: Optional[float] = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise InvariantViolation("decay times must be strictly increasing")
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise InvariantViolation(f"r_squared outside [0, 1]: {self.r_squared}")

    def to_frame(self) -> pd.DataFrame:
        """Columns t, sup_norm, bound_value (min{1, t^-rate}) and their ratio."""
        rate = self.fitted_exponent if self.expected_exponent is None else self.expected_exponent
        with np.errstate(divide="ignore"):
            bound = np.minimum(1.0, np.where(self.times > 0, self.times ** (-rate), 1.0))
        return pd.DataFrame(
            {"t": self.times, "sup_norm": self.sup_norms, "bound_value": bound, "ratio": self.sup_norms / bound}
        )

    def to_dict(self) -> dict:
        return {
            "fitted_exponent": self.fitted_exponent,
            "expected_exponent": self.expected_exponent,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "n_times": int(self.times.size),
        }


@dataclass(frozen=True)
class TransportReport:
    """Sup norms and measured centre shifts of single-index p = 1 data."""

    times: np.ndarray
    sup_norms: np.ndarray
    shifts: np.ndarray
    sup_norm_drift: float
    measured_shift_slope: float
    expected_slope: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "sup_norm": self.sup_norms, "shift": self.shifts})

    def to_dict(self) -> dict:
        return {
            "sup_norm_drift": self.sup_norm_drift,
            "measured_shift_slope": self.measured_shift_slope,
            "expected_slope": self.expected_slope,
            "relative_slope_error": abs(self.measured_shift_slope - self.expected_slope) / self.expected_slope,
        }


def fit_decay(times: np.ndarray, sup_norms: np.ndarray, window: tuple[float, float]) -> tuple[float, float]:
    """Least-squares slope of log sup-norm against log t inside the window."""
    inside = (times >= window[0]) & (times <= window[1]) & (times > 0)
    if np.count_nonzero(inside) < 2:
        raise OutOfRange(f"fit window {window} holds fewer than two times")
    fit = linregress(np.log(times[inside]), np.log(sup_norms[inside]))
    return -float(fit.slope), float(fit.rvalue**2)


def split_threshold(t: float) -> int:
    """J(t) = ceil(log_2(1 / sqrt|t|))."""
    if t == 0:
        raise ZeroTime("the frequency split needs t != 0")
    return math.ceil(-math.log2(abs(t)) / 2 - 1e-12)


def freq_split(S: SphericalSpectrum, t: float, profile: LPProfile = DEFAULT_PROFILE):
    """
    Split S into sum_{j < J(t)} Delta_j S and sum_{j >= J(t)} Delta_j S.

    Args:
        S: Spectrum
        t: Nonzero time
        profile: Littlewood-Paley profile

    Returns:
        (low, high) with low + high = S
    """
    J = split_threshold(t)
    low = low_project(S, J - 1, profile)
    return low, S - low


def split_dispersive_ratio(S: SphericalSpectrum, t: float, profile: LPProfile = DEFAULT_PROFILE, radial=None) -> float:
    """
    ||e^{itL}u0||_inf / (||low||_{B^N_{1,1}} + |t|^{-(p-1)/2} ||high||_{B^{N-p+1}_{1,1}}).

    Args:
        S: Spectrum of u0
        t: Nonzero time
        profile: Littlewood-Paley profile
        radial: Radial grid for the sup scan (defaults to the layout's)

    Returns:
        The ratio
    """
    if S.is_zero():
        raise ZeroDenominator("the split bound vanishes for zero data")
    N, p = S.group.N, S.group.p
    low, high = freq_split(S, t, profile)
    denominator = 0.0
    if not low.is_zero():
        denominator += besov_norm(low, N, 1, 1, profile=profile)
    if not high.is_zero():
        denominator += abs(t) ** (-(p - 1) / 2) * besov_norm(high, N - p + 1, 1, 1, profile=profile)
    evolved = propagator(S, t)
    check_aliasing_window(evolved)
    return sup_norm(evolved, radial) / denominator


def conjugate_exponent(r: float) -> float:
    if np.isinf(r):
        return 1.0
    return math.inf if r == 1 else r / (r - 1)


def interp_band_ratio(
    S: SphericalSpectrum, j: int, t: float, r: float, profile: LPProfile = DEFAULT_PROFILE, radial=None
) -> float:
    """
    Band-wise L^{r'} -> L^r bound ratio with delta(r) = 1/2 - 1/r.

    ||Delta_j e^{itL} S||_r / (2^{2(N-p+1) delta j} min{2^{2(p-1) delta j}, |t|^{-(p-1) delta}} ||Delta_j S||_{r'})
    """
    if r < 2:
        raise OutOfRange(f"band ratio needs r >= 2, got {r}")
    piece = lp_project(S, j, profile)
    if piece.is_zero():
        raise ZeroDenominator(f"band {j} of the data is empty")
    N, p = S.group.N, S.group.p
    delta = 0.5 - (0.0 if np.isinf(r) else 1.0 / r)
    growth = 2.0 ** (2 * (N - p + 1) * delta * j)
    decay = 2.0 ** (2 * (p - 1) * delta * j)
    if t != 0:
        decay = min(decay, abs(t) ** (-(p - 1) * delta))
    evolved = propagator(piece, t)
    check_aliasing_window(evolved)
    numerator = lr_norm(evolved, r, radial if np.isinf(r) else None)
    return numerator / (growth * decay * lr_norm(piece, conjugate_exponent(r)))


def transport_profile(lambda0: float = 2.0, width: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Smooth bump in lambda on (lambda0 - width, lambda0 + width)."""
    return lambda lam: LPProfile.psi((np.asarray(lam) - lambda0) / width)


class DispersiveLab:
    """Service running the dispersive experiments on one group."""

    def __init__(
        self,
        group: HTypeGroup,
        M: int = 8,
        t_max: float = 100.0,
        profile: LPProfile = DEFAULT_PROFILE,
        sampling: Optional[RadialGrid] = None,
        jobs: int = 1,
    ):
        """Initialize the lab; the isotropic grid resolves transport up to t_max."""
        self.group = group
        self.M = M
        self.t_max = float(t_max)
        self.profile = profile
        self.jobs = jobs
        self.sampling = sampling or radial_grid(group.d, SAMPLING_RADIUS, SAMPLING_NODES)
        self._layout: Optional[SpectralLayout] = None

    @property
    def layout(self) -> SpectralLayout:
        """Isotropic layout covering the kernel joint spectrum [1/4, 4] up to t_max."""
        if self._layout is None:
            center = isotropic_grid_for(self.group.p, self.group.d, self.M, self.t_max)
            self._layout = make_layout(
                self.group, self.M, center, lam_lo=float(center.nodes[0]), lam_hi=float(center.nodes[-1])
            )
            logger.info("dispersive layout: %s", center.describe())
        return self._layout

    def kernel(self, j: int = 0, tilde: bool = False) -> SphericalSpectrum:
        """Phi_j (or Phi_j-tilde) on the lab layout."""
        if tilde:
            return lp_tilde_kernel(self.layout, j, self.profile)
        return lp_kernel(self.layout, j, self.profile)

    def _evolved_sup(self, S: SphericalSpectrum, t: float) -> float:
        evolved = propagator(S, t)
        check_aliasing_window(evolved)
        value = sup_norm(evolved, self.sampling)
        logger.info("t=%.4g: sup norm %.6g", t, value)
        return value

    def kernel_decay(
        self, t_grid: Sequence[float], window: Optional[tuple[float, float]] = None
    ) -> DecayFit:
        """
        Sup norm of e^{itL} Phi_0 at each time and the fitted decay exponent.

        Args:
            t_grid: Increasing nonnegative times
            window: Fit window (defaults to [1, max t])

        Returns:
            DecayFit
        """
        if self.group.p < 2:
            raise DimensionConstraint("dispersive decay needs a centre of dimension p >= 2")
        times = np.asarray(t_grid, dtype=float)
        kernel = self.kernel(0)
        sup_norms = np.array(parallel_map(lambda t: self._evolved_sup(kernel, t), times, self.jobs))
        window = window or (1.0, float(times.max()))
        exponent, r_squared = fit_decay(times, sup_norms, window)
        return DecayFit(times, sup_norms, exponent, r_squared, window, (self.group.p - 1) / 2)

    def kernel_scaling_check(self, j: int, t: float) -> float:
        """
        Residual of e^{itL} Phi~_j (z, s) = 2^{Nj} (e^{i 4^j t L} Phi~_0)(2^j z, 4^j s).

        The left side is inverted on the dilated layout; the right side is
        evaluated pointwise on the base layout at the dilated points.

        Args:
            j: Dyadic exponent
            t: Time

        Returns:
            max |LHS - RHS| over the sampling grid, relative to max |LHS|
        """
        base = self.layout
        lhs = propagator(lp_tilde_kernel(base.scaled(j), j, self.profile), t)
        reference = propagator(lp_tilde_kernel(base, 0, self.profile), 4.0**j * t)
        check_aliasing_window(reference)

        sampling = self.sampling.scaled(2.0 ** (-j))
        samples = lhs.default_samples()
        left = inverse_transform(lhs, sampling, samples).values
        rho = np.repeat(2.0**j * sampling.nodes, samples.size)
        s = np.tile(4.0**j * samples.points, (sampling.size, 1))
        right = 2.0 ** (self.group.N * j) * evaluate_at(reference, rho, s).reshape(left.shape)

        scale = float(np.max(np.abs(left)))
        residual = float(np.max(np.abs(left - right))) / scale if scale > 0 else 0.0
        logger.info("scaling check j=%d t=%.4g: residual %.3e", j, t, residual)
        return residual

    def transport_layout(self, M: int, L: float = 64.0, n_s: int = 128, lam_range=(1.0, 3.0)) -> SpectralLayout:
        """Periodic p = 1 layout for single-index transport data."""
        return make_layout(self.group, M, PeriodicCenterGrid(1, L, n_s), *lam_range)

    def transport_spectrum(
        self, layout: SpectralLayout, m0: int, lambda_profile: Callable[[np.ndarray], np.ndarray]
    ) -> SphericalSpectrum:
        lam = layout.center.lam_points[:, 0]
        values = np.asarray(lambda_profile(lam), dtype=complex)
        total = np.linalg.norm(values)
        if total == 0:
            raise ZeroDenominator("transport profile vanishes on the lattice")
        if np.linalg.norm(values[lam <= 0]) > SUPPORT_TOLERANCE * total:
            raise SupportViolation("transport data must be supported on lambda > 0")
        coeffs = np.zeros(layout.shape, dtype=complex)
        coeffs[m0] = np.where(lam > 0, values, 0.0)
        return SphericalSpectrum(layout, coeffs)

    def heisenberg_transport(
        self,
        m0: int,
        t_grid: Sequence[float],
        lambda_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        layout: Optional[SpectralLayout] = None,
    ) -> TransportReport:
        """
        Evolve single-index p = 1 data and measure sup-norm drift and centre shift.

        Args:
            m0: Laguerre index carrying all the data
            t_grid: Increasing times starting at 0
            lambda_profile: Coefficients as a function of lambda (support in lambda > 0)
            layout: Periodic layout (defaults to transport_layout(m0))

        Returns:
            TransportReport
        """
        if self.group.p != 1:
            raise DimensionConstraint("the transport counterexample lives on p = 1")
        layout = layout or self.transport_layout(m0)
        S0 = self.transport_spectrum(layout, m0, lambda_profile or transport_profile())
        return transport_report(S0, t_grid, self.jobs)


def _single_index(S: SphericalSpectrum) -> int:
    mass = np.sqrt(np.sum(S.layout.plancherel_weights * np.abs(S.coeffs) ** 2, axis=1))
    total = np.linalg.norm(mass)
    m0 = int(np.argmax(mass))
    off_index = np.sqrt(max(total**2 - mass[m0] ** 2, 0.0))
    negative = S.layout.center.lam_points[:, 0] <= 0
    off_sign = plancherel_norm(S.with_coeffs(np.where(negative, S.coeffs, 0.0)))
    if off_index > SUPPORT_TOLERANCE * total or off_sign > SUPPORT_TOLERANCE * total:
        raise SupportViolation("transport data must sit on one Laguerre index and lambda > 0")
    return m0


def _correlation(S0: SphericalSpectrum, St: SphericalSpectrum, tau: np.ndarray) -> np.ndarray:
    """Re <u0(. - tau), u(t)> for every shift tau, computed from coefficients."""
    lam = S0.layout.center.lam_points[:, 0]
    weighted = np.sum(S0.layout.plancherel_weights * np.conj(S0.coeffs) * St.coeffs, axis=0)
    return np.real(np.exp(-1j * np.multiply.outer(np.atleast_1d(tau), lam)) @ weighted)


def measure_shift(S0: SphericalSpectrum, St: SphericalSpectrum) -> float:
    """Centre translation taking u0 to u(t), modulo the box length."""
    center = S0.layout.center
    step = center.L / (center.n * SHIFT_SCAN_FACTOR)
    tau = -center.L / 2 + step * np.arange(center.n * SHIFT_SCAN_FACTOR)
    best = float(tau[np.argmax(_correlation(S0, St, tau))])
    result = minimize_scalar(
        lambda x: -float(_correlation(S0, St, x)[0]),
        bounds=(best - step, best + step),
        method="bounded",
        options={"xatol": 1e-12 * center.L},
    )
    return float(result.x)


def transport_report(S0: SphericalSpectrum, t_grid: Sequence[float], jobs: int = 1) -> TransportReport:
    """Sup-norm drift and fitted centre-shift slope of single-index p = 1 data."""
    m0 = _single_index(S0)
    times = np.asarray(t_grid, dtype=float)
    L = S0.layout.center.L

    def measure(t: float) -> tuple[float, float]:
        evolved = propagator(S0, t)
        return sup_norm(evolved), measure_shift(S0, evolved)

    results = parallel_map(measure, times, jobs)
    sup_norms = np.array([r[0] for r in results])
    shifts = np.array([r[1] for r in results])
    for k in range(1, shifts.size):
        shifts[k] += L * np.round((shifts[k - 1] - shifts[k]) / L)

    reference = sup_norms[0]
    drift = float(np.max(np.abs(sup_norms - reference)) / reference)
    slope = float(linregress(times, shifts).slope) if times.size >= 2 else 0.0
    expected = 2 * m0 + S0.layout.d
    logger.info("transport m0=%d: drift %.3e, slope %.6g (expected %d)", m0, drift, slope, expected)
    return TransportReport(times, sup_norms, shifts, drift, slope, float(expected))


def create_dispersive_lab(group: HTypeGroup, **kwargs) -> DispersiveLab:
    """Factory function to create a dispersive lab."""
    return DispersiveLab(group, **kwargs)

