"""Functions of the sublaplacian as diagonal multipliers on spherical spectra.

The sublaplacian acts on the (m, lambda) coefficient by the joint eigenvalue
x = (2m+d)|lambda|, so propagators, heat flows, fractional powers and
Littlewood-Paley cut-offs are exact pointwise products. Norms that need the
physical field (L^r with r != 2, sup norms) go through inverse_transform.
"""

import logging
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.optimize import minimize

from .errors import (
    AliasingWindowExceeded,
    BandOutOfRange,
    BandTruncationWarning,
    IncompatibleGrids,
    NegativeTime,
    NonFiniteMultiplier,
)
from .grids import CenterSamples, RadialGrid
from .laguerre_spherical import (
    SpectralLayout,
    SphericalSpectrum,
    evaluate_at,
    inverse_transform,
    plancherel_norm,
)

logger = logging.getLogger(__name__)

BAND_TRUNCATION_TOLERANCE = 1e-6
SUP_REFINEMENT = 8
SCAN_POINT_LIMIT = 40_000
HEAT_SAMPLES = 161


def apply_multiplier(S: SphericalSpectrum, theta: Callable[[np.ndarray], np.ndarray]) -> SphericalSpectrum:
    """
    Apply theta(L): c(m, lambda) -> theta((2m+d)|lambda|) c(m, lambda).

    Args:
        S: Spectrum
        theta: Vectorised function of the joint eigenvalue

    Returns:
        The multiplied spectrum

    Raises:
        NonFiniteMultiplier: theta is not finite where S carries mass
    """
    with np.errstate(all="ignore"):
        factor = np.asarray(theta(S.layout.joint), dtype=complex)
    factor = np.broadcast_to(factor, S.layout.shape)
    occupied = S.coeffs != 0
    if not np.all(np.isfinite(factor[occupied])):
        raise NonFiniteMultiplier("multiplier is not finite on the occupied joint spectrum")
    return S.with_coeffs(np.where(occupied, factor * S.coeffs, 0.0))


def propagator(S: SphericalSpectrum, t: float) -> SphericalSpectrum:
    """e^{itL}: multiplier e^{it(2m+d)|lambda|}; advances the transport time by t."""
    evolved = apply_multiplier(S, lambda x: np.exp(1j * t * x))
    return evolved.with_coeffs(evolved.coeffs, S.transport_time + t)


def heat(S: SphericalSpectrum, t: float) -> SphericalSpectrum:
    if t < 0:
        raise NegativeTime(f"heat semigroup needs t >= 0, got {t}")
    return apply_multiplier(S, lambda x: np.exp(-t * x))


def frac_power(S: SphericalSpectrum, s: float, inhomogeneous: bool = False) -> SphericalSpectrum:
    """L^{s/2} (multiplier x^{s/2}) or (1+L)^{s/2} when inhomogeneous."""
    if s == 0:
        return S
    if inhomogeneous:
        return apply_multiplier(S, lambda x: (1.0 + x) ** (s / 2))
    return apply_multiplier(S, lambda x: x ** (s / 2))


def check_aliasing_window(S: SphericalSpectrum) -> None:
    """Raise when S has been transported further than its centre grid represents."""
    mask = S.active_mask()
    if not mask.any() or S.transport_time == 0:
        return
    speed = float(S.layout.speeds[np.any(mask, axis=1)].max())
    limit = S.layout.center.transport_limit(speed)
    if abs(S.transport_time) > limit * (1 + 1e-12):
        raise AliasingWindowExceeded(
            f"transport time {S.transport_time:.4g} exceeds the aliasing-safe window {limit:.4g}"
        )


@dataclass(frozen=True)
class LPProfile:
    """Dyadic partition of unity on (0, inf) in powers of four.

    phi_0(x) = psi(u) / (psi(u - floor u) + psi(u - floor u - 1)), u = log_4 x, with
    the bump psi(u) = exp(-1 / (1 - u^2)) on |u| < 1.
    """

    lower: float = 0.25
    upper: float = 4.0
    plateau: tuple[float, float] = (2**-1.5, 2**1.5)

    @staticmethod
    def psi(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return out

    def phi0(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x > self.lower) & (x < self.upper)
        u = np.log(x[inside]) / np.log(4.0)
        frac = u - np.floor(u)
        out[inside] = self.psi(u) / (self.psi(frac) + self.psi(frac - 1.0))
        return out

    def phi_low(self, x: np.ndarray) -> np.ndarray:
        """Inhomogeneous block sum_{k <= 0} phi_0(4^{-k} x): 1 on [0, 1], 0 beyond 4."""
        x = np.asarray(x, dtype=float)
        return np.where(x <= 1.0, 1.0, self.phi0(x))

    def phi_j(self, j: int, x: np.ndarray) -> np.ndarray:
        return self.phi0(4.0 ** (-j) * np.asarray(x, dtype=float))

    def lower_bound(self, samples: int = 2001) -> float:
        """Sampled minimum of phi_0 on its plateau."""
        grid = np.linspace(*self.plateau, samples)
        return float(self.phi0(grid).min())


DEFAULT_PROFILE = LPProfile()


def joint_range(layout: SpectralLayout) -> tuple[float, float]:
    """Smallest and largest nonzero joint eigenvalue representable on a layout."""
    lam = layout.center.lam_abs[~layout.center.zero_mask]
    return layout.d * float(lam.min()), float(layout.speeds[-1]) * float(lam.max())


def band_range(layout: SpectralLayout) -> list[int]:
    """Every j whose band [4^{j-1}, 4^{j+1}] meets the representable joint range."""
    x_lo, x_hi = joint_range(layout)
    first = int(np.floor(np.log(x_lo) / np.log(4.0) - 1)) + 1
    last = int(np.ceil(np.log(x_hi) / np.log(4.0) + 1)) - 1
    return list(range(first, last + 1))


def _check_band(layout: SpectralLayout, j: int) -> None:
    x_lo, x_hi = joint_range(layout)
    if 4.0 ** (j + 1) <= x_lo or 4.0 ** (j - 1) >= x_hi:
        raise BandOutOfRange(
            f"band j={j} covers [{4.0 ** (j - 1):.4g}, {4.0 ** (j + 1):.4g}], "
            f"grid represents [{x_lo:.4g}, {x_hi:.4g}]"
        )


def lp_kernel(layout: SpectralLayout, j: int, profile: LPProfile = DEFAULT_PROFILE) -> SphericalSpectrum:
    """Spectrum of Phi_j: coefficients phi_0(4^{-j}(2m+d)|lambda|)."""
    _check_band(layout, j)
    return SphericalSpectrum(layout, profile.phi_j(j, layout.joint))


def lp_tilde_kernel(layout: SpectralLayout, j: int, profile: LPProfile = DEFAULT_PROFILE) -> SphericalSpectrum:
    """Spectrum of Phi_{j-1} + Phi_j + Phi_{j+1}, which is one on the support of Phi_j."""
    _check_band(layout, j)
    coeffs = sum(profile.phi_j(k, layout.joint) for k in (j - 1, j, j + 1))
    return SphericalSpectrum(layout, coeffs)


def lp_project(S: SphericalSpectrum, j: int, profile: LPProfile = DEFAULT_PROFILE) -> SphericalSpectrum:
    """Delta_j S = S * Phi_j."""
    _check_band(S.layout, j)
    return S.with_coeffs(profile.phi_j(j, S.layout.joint) * S.coeffs)


def low_project(S: SphericalSpectrum, j: int = 0, profile: LPProfile = DEFAULT_PROFILE) -> SphericalSpectrum:
    """sum_{k <= j} Delta_k S, the multiplier phi(4^{-j} L)."""
    return S.with_coeffs(profile.phi_low(4.0 ** (-j) * S.layout.joint) * S.coeffs)


def occupied_bands(S: SphericalSpectrum) -> list[int]:
    """Representable bands whose projection of S is nonzero."""
    if S.is_zero():
        return []
    x_lo, x_hi = S.joint_support()
    return [j for j in band_range(S.layout) if 4.0 ** (j - 1) < x_hi and 4.0 ** (j + 1) > x_lo]


def rescale_dyadic(
    S: SphericalSpectrum, j: int, target: Optional[SpectralLayout] = None
) -> SphericalSpectrum:
    """
    Exact relabelling realising u -> u(delta_{2^j} .).

    Coefficients are multiplied by 2^{-jN} and carried to the lattice scaled by
    4^j; radial nodes shrink by 2^j and the transport time by 4^j.

    Args:
        S: Spectrum of u
        j: Dyadic exponent
        target: Layout the result must live on (checked, not interpolated to)

    Returns:
        Spectrum of the dilated function
    """
    if int(j) != j:
        raise IncompatibleGrids(f"dyadic rescaling needs an integer exponent, got {j}")
    j = int(j)
    layout = S.layout.scaled(j)
    if target is not None:
        if not target.compatible_with(layout):
            raise IncompatibleGrids("target layout is not the dyadic relabelling of the source layout")
        layout = target
    factor = 2.0 ** (-j * S.group.N)
    return SphericalSpectrum(layout, S.coeffs * factor, S.transport_time * 4.0 ** (-j))


@dataclass(frozen=True)
class SupEstimate:
    value: float
    coarse: float
    rho: float
    s: np.ndarray


class _SupScanner:
    """Coarse maximum, dense local scans, then a bounded Nelder-Mead polish."""

    def __init__(self, S: SphericalSpectrum, radial: RadialGrid, samples: CenterSamples):
        self.S = S
        self.radial = radial
        self.samples = samples
        self.periodic = S.layout.center.is_periodic
        self.p = S.layout.p

    def to_points(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = np.atleast_2d(y)
        if self.periodic:
            return y[:, 0], y[:, 1:]
        s = np.zeros((y.shape[0], self.p))
        s[:, 0] = y[:, 1]
        return y[:, 0], s

    def magnitude(self, y: np.ndarray) -> np.ndarray:
        rho, s = self.to_points(y)
        return np.abs(evaluate_at(self.S, rho, s))

    def box(self, i: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        nodes = self.radial.nodes
        rho_lo = nodes[i - 1] if i > 0 else 0.0
        rho_hi = nodes[i + 1] if i + 1 < nodes.size else nodes[i]
        if self.periodic:
            centre = self.samples.points[k]
            spacing = self.S.layout.center.s_spacing
            return np.r_[rho_lo, centre - spacing], np.r_[rho_hi, centre + spacing]
        axis = self.samples.points[:, 0]
        s_lo = axis[k - 1] if k > 0 else 0.0
        s_hi = axis[k + 1] if k + 1 < axis.size else axis[k]
        return np.array([rho_lo, s_lo]), np.array([rho_hi, s_hi])

    def origin_box(self) -> tuple[np.ndarray, np.ndarray]:
        rho_hi = self.radial.nodes[min(1, self.radial.size - 1)]
        if self.periodic:
            spacing = self.S.layout.center.s_spacing
            return np.r_[0.0, -spacing], np.r_[rho_hi, spacing]
        axis = self.samples.points[:, 0]
        return np.array([0.0, 0.0]), np.array([rho_hi, axis[axis > 0].min()])

    def scan(self, lo: np.ndarray, hi: np.ndarray, refine: int) -> tuple[float, np.ndarray]:
        per_axis = 2 * refine + 1
        while per_axis ** lo.size > SCAN_POINT_LIMIT and per_axis > 3:
            per_axis -= 2
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
        values = self.magnitude(mesh)
        best = int(np.argmax(values))
        return float(values[best]), mesh[best]

    def polish(self, lo: np.ndarray, hi: np.ndarray, start: np.ndarray, value: float) -> float:
        width = np.where(hi > lo, hi - lo, 1.0)

        def objective(x: np.ndarray) -> float:
            return -float(self.magnitude(lo + x * width)[0])

        x0 = np.clip((start - lo) / width, 0.0, 1.0)
        result = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * lo.size,
            options={"xatol": 1e-10, "fatol": 1e-14 * max(value, 1e-300), "maxiter": 200 * lo.size},
        )
        return max(value, -float(result.fun))


def sup_estimate(
    S: SphericalSpectrum,
    radial: Optional[RadialGrid] = None,
    samples: Optional[CenterSamples] = None,
    refine: int = SUP_REFINEMENT,
    polish: bool = True,
) -> SupEstimate:
    """
    Sup norm of the field of S.

    The coarse maximum over the sampling grid is refined by dense scans at
    `refine` times the local node spacing around the coarse argmax and around
    the origin, then polished by a bounded Nelder-Mead search in coordinates
    normalised to the scan box.

    Args:
        S: Spectrum
        radial: Radial sampling nodes (defaults to the layout's quadrature grid)
        samples: Centre samples (defaults to those of inverse_transform)
        refine: Local refinement factor per axis
        polish: Whether to run the Nelder-Mead polish

    Returns:
        SupEstimate with the refined value and the coarse maximum
    """
    if S.is_zero():
        return SupEstimate(0.0, 0.0, 0.0, np.zeros(S.layout.p))
    field = inverse_transform(S, radial, samples)
    magnitude = np.abs(field.values)
    i, k = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    coarse = float(magnitude[i, k])
    scanner = _SupScanner(S, field.radial, field.samples)

    s_coord = field.samples.points[k] if scanner.periodic else field.samples.points[k, :1]
    best_value, best_point = coarse, np.r_[field.radial.nodes[i], s_coord]
    for lo, hi in (scanner.box(i, k), scanner.origin_box()):
        value, point = scanner.scan(lo, hi, refine)
        if polish:
            value = scanner.polish(lo, hi, point, value)
        if value > best_value:
            best_value, best_point = value, point
    logger.debug("sup norm: coarse %.6g, refined %.6g", coarse, best_value)
    rho, s = scanner.to_points(best_point)
    return SupEstimate(best_value, coarse, float(rho[0]), s[0])


def sup_norm(S: SphericalSpectrum, radial: Optional[RadialGrid] = None, **kwargs) -> float:
    return sup_estimate(S, radial, **kwargs).value


def lr_norm(S: SphericalSpectrum, r: float, radial: Optional[RadialGrid] = None) -> float:
    """L^r norm of the field: Plancherel for r = 2, refined sup scan for r = inf."""
    if r == 2:
        return plancherel_norm(S)
    if np.isinf(r):
        return sup_norm(S, radial)
    return inverse_transform(S, radial).lr_norm(r)


def _lq_sum(terms: Sequence[float], q: float) -> float:
    terms = np.asarray(terms, dtype=float)
    if terms.size == 0:
        return 0.0
    if np.isinf(q):
        return float(terms.max())
    return float(np.sum(terms**q) ** (1.0 / q))


def _truncation(S: SphericalSpectrum, reconstruction: np.ndarray) -> float:
    total = plancherel_norm(S)
    if total == 0:
        return 0.0
    return plancherel_norm(S.with_coeffs(S.coeffs - reconstruction)) / total


def besov_report(
    S: SphericalSpectrum,
    s: float,
    r: float,
    q: float,
    homogeneous: bool = True,
    profile: LPProfile = DEFAULT_PROFILE,
    radial: Optional[RadialGrid] = None,
) -> dict:
    """
    Besov norm with its band-truncation diagnostic.

    Homogeneous: (sum_j 4^{js/2 q} ||Delta_j f||_r^q)^{1/q} over the representable
    bands. Inhomogeneous: the phi(L) block followed by the bands j >= 1.

    Args:
        S: Spectrum
        s: Smoothness
        r: Integrability (inf allowed)
        q: Summability (inf allowed)
        homogeneous: Homogeneous or inhomogeneous norm
        profile: Littlewood-Paley profile
        radial: Radial quadrature for r not in {2, inf}

    Returns:
        Record {norm_kind, s, r, q, value, band_truncation}
    """
    bands = occupied_bands(S)
    terms = []
    reconstruction = np.zeros_like(S.coeffs)
    if not homogeneous:
        low = low_project(S, 0, profile)
        reconstruction += low.coeffs
        terms.append(lr_norm(low, r, radial))
        bands = [j for j in bands if j >= 1]
    for j in bands:
        piece = lp_project(S, j, profile)
        reconstruction += piece.coeffs
        terms.append(2.0 ** (j * s) * lr_norm(piece, r, radial))
    truncation = _truncation(S, reconstruction)
    if truncation > BAND_TRUNCATION_TOLERANCE:
        warnings.warn(
            f"{truncation:.2e} of the L^2 mass lies outside the representable bands",
            BandTruncationWarning,
            stacklevel=2,
        )
    return {
        "norm_kind": "besov" if homogeneous else "besov_inhomogeneous",
        "s": s,
        "r": r,
        "q": q,
        "value": _lq_sum(terms, q),
        "band_truncation": truncation,
    }


def besov_norm(
    S: SphericalSpectrum,
    s: float,
    r: float,
    q: float,
    homogeneous: bool = True,
    profile: LPProfile = DEFAULT_PROFILE,
    radial: Optional[RadialGrid] = None,
) -> float:
    return besov_report(S, s, r, q, homogeneous, profile, radial)["value"]


def sobolev_norm(
    S: SphericalSpectrum,
    s: float,
    r: float,
    homogeneous: bool = True,
    radial: Optional[RadialGrid] = None,
) -> float:
    """||L^{s/2} f||_r, or ||(1+L)^{s/2} f||_r when inhomogeneous."""
    return lr_norm(frac_power(S, s, inhomogeneous=not homogeneous), r, radial)


def heat_besov_norm(
    S: SphericalSpectrum,
    s: float,
    r: float,
    q: float,
    k: int,
    radial: Optional[RadialGrid] = None,
    samples: int = HEAT_SAMPLES,
) -> float:
    """
    Heat-semigroup form of the inhomogeneous Besov norm.

    ||e^{-L} f||_r + (int_0^1 xi^{-sq/2} ||(xi L)^{k/2} e^{-xi L} f||_r^q dxi/xi)^{1/q}, k > s.

    Args:
        S: Spectrum
        s: Smoothness
        r: Integrability
        q: Summability
        k: Power of L in the integrand, k > s
        radial: Radial quadrature for r not in {2, inf}
        samples: Log-spaced xi nodes

    Returns:
        The norm value
    """
    if k <= s:
        raise ValueError(f"heat characterisation needs k > s, got k={k}, s={s}")
    if S.is_zero():
        return 0.0
    x_lo, x_hi = S.joint_support()
    xi = np.geomspace(min(1e-3 / x_hi, 1e-2), 1.0, samples)
    values = np.array(
        [
            xi_n ** (-s / 2) * lr_norm(apply_multiplier(S, lambda x, a=xi_n: (a * x) ** (k / 2) * np.exp(-a * x)), r, radial)
            for xi_n in xi
        ]
    )
    low = lr_norm(heat(S, 1.0), r, radial)
    if np.isinf(q):
        return low + float(values.max())
    integral = simpson(values**q, x=np.log(xi))
    return low + float(integral ** (1.0 / q))


def embedding_ratio(S: SphericalSpectrum, s: float, r: float, radial: Optional[RadialGrid] = None) -> float:
    """||f||_{W^{s,r}-dot} / ||f||_{B^s_{r,2}-dot}; both sides scale by 2^{j(s - N/r)} under dilation."""
    if S.is_zero():
        return 0.0
    return sobolev_norm(S, s, r, radial=radial) / besov_norm(S, s, r, 2, radial=radial)


def cumulative_duhamel(states: Sequence[SphericalSpectrum], t_nodes: np.ndarray) -> list[SphericalSpectrum]:
    """
    int_0^{t_k} e^{i(t_k - t')L} F(t') dt' at every node, interaction-picture trapezoid.

    Args:
        states: F sampled at the nodes, all on one layout
        t_nodes: Strictly increasing times starting at 0

    Returns:
        One spectrum per node
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    layout = states[0].layout
    joint = layout.joint
    stacked = np.stack([state.coeffs for state in states])
    pulled_back = np.exp(-1j * t_nodes[:, None, None] * joint) * stacked
    integrals = cumulative_trapezoid(pulled_back, t_nodes, axis=0, initial=0)
    pushed = np.exp(1j * t_nodes[:, None, None] * joint) * integrals
    return [SphericalSpectrum(layout, coeffs, t) for coeffs, t in zip(pushed, t_nodes)]
