"""Spherical Fourier transform of z-radial functions on H-type groups.

A z-radial function f(|z|, s) is expanded as

    f(z, s) = (2 pi)^{-(d+p)} sum_m sum_lambda W e^{-i lambda.s} c(m, lambda) l_m(|lambda||z|^2/2) |lambda|^d

with Laguerre functions l_m = L_m^{(d-1)} e^{-tau/2}. The coefficient array
c(m, lambda) is the canonical representation on which every multiplier acts;
physical samples are produced only for norms, sup-scans and nonlinearities.
"""

import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy.special import binom

from .errors import (
    CutoffTooLarge,
    GridMismatch,
    InvariantViolation,
    NegativeArgument,
    ResolutionInsufficient,
)
from .grids import (
    JOINT_LOWER_EDGE,
    JOINT_UPPER_EDGE,
    CenterGrid,
    CenterSamples,
    RadialGrid,
    center_from_dict,
    center_to_dict,
    radial_grid_for,
)
from .group_core import HTypeGroup

logger = logging.getLogger(__name__)

SPECTRUM_FILE_VERSION = 1
ACTIVE_THRESHOLD = 1e-12
BLOCK_SIZE = 512
KERNEL_ENTRIES = 1 << 21
NODES_PER_OSCILLATION = 8


def laguerre_table(M: int, a: float, tau: np.ndarray) -> np.ndarray:
    """
    Laguerre functions l_0 .. l_M of order a, by the three-term recurrence.

    Args:
        M: Largest index
        a: Laguerre order (> -1)
        tau: Nonnegative arguments of any shape

    Returns:
        Array of shape (M+1, *tau.shape)
    """
    tau = np.asarray(tau, dtype=float)
    if M < 0 or int(M) != M:
        raise NegativeArgument(f"Laguerre index must be a nonnegative integer, got {M}")
    if a <= -1:
        raise NegativeArgument(f"Laguerre order must exceed -1, got {a}")
    if np.any(tau < 0):
        raise NegativeArgument("Laguerre arguments must be nonnegative")

    out = np.empty((int(M) + 1,) + tau.shape)
    out[0] = np.exp(-tau / 2)
    if M >= 1:
        out[1] = (1.0 + a - tau) * out[0]
    for n in range(1, int(M)):
        out[n + 1] = ((2 * n + 1 + a - tau) * out[n] - (n + a) * out[n - 1]) / (n + 1)
    return out


def laguerre_fn(m: int, a: float, tau):
    """l_m^{(a)}(tau) = L_m^{(a)}(tau) e^{-tau/2}; scalar in, scalar out."""
    values = laguerre_table(m, a, tau)[m]
    return float(values) if values.ndim == 0 else values


def inversion_constant(d: int, p: int) -> float:
    return (2.0 * np.pi) ** (-(d + p))


@dataclass(frozen=True, eq=False)
class SpectralLayout:
    """Everything a spectrum shares with the spectra it can be combined with."""

    group: HTypeGroup
    M: int
    radial: RadialGrid
    center: CenterGrid

    def __post_init__(self):
        if self.M < 0:
            raise CutoffTooLarge(f"Laguerre cutoff must be nonnegative, got {self.M}")
        if self.radial.d != self.group.d or self.center.p != self.group.p:
            raise GridMismatch(
                f"grids for d={self.radial.d}, p={self.center.p} do not fit H^{self.group.d}_{self.group.p}"
            )

    @property
    def d(self) -> int:
        return self.group.d

    @property
    def p(self) -> int:
        return self.group.p

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M + 1, self.center.size)

    @cached_property
    def speeds(self) -> np.ndarray:
        """2m + d for every Laguerre index."""
        return 2.0 * np.arange(self.M + 1) + self.d

    @cached_property
    def joint(self) -> np.ndarray:
        """Joint spectrum (2m+d)|lambda| of the sublaplacian, shape (M+1, n_lambda)."""
        return np.outer(self.speeds, self.center.lam_abs)

    @cached_property
    def binomials(self) -> np.ndarray:
        m = np.arange(self.M + 1)
        return binom(m + self.d - 1, m)

    @cached_property
    def plancherel_weights(self) -> np.ndarray:
        """Weights making sum w |c|^2 the squared L^2 norm of the field."""
        lam = self.center.lam_abs
        per_lambda = self.center.lam_weights * lam**self.d
        weights = inversion_constant(self.d, self.p) * np.outer(self.binomials, per_lambda)
        weights[:, self.center.zero_mask] = 0.0
        return weights

    def compatible_with(self, other: "SpectralLayout") -> bool:
        return (
            self is other
            or (
                self.group.d == other.group.d
                and self.group.p == other.group.p
                and self.M == other.M
                and self.radial.same_as(other.radial)
                and self.center.same_as(other.center)
            )
        )

    def scaled(self, j: int) -> "SpectralLayout":
        """Layout of u(delta_{2^j} .): rho divided by 2^j, lambda multiplied by 4^j."""
        return replace(self, radial=self.radial.scaled(2.0 ** (-j)), center=self.center.scaled(j))

    def with_cutoff(self, M: int) -> "SpectralLayout":
        return self if M == self.M else replace(self, M=M)

    def describe(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "M": self.M,
            "radial": self.radial.describe(),
            "center": self.center.describe(),
        }


def make_layout(
    group: HTypeGroup,
    M: int,
    center: CenterGrid,
    lam_lo: Optional[float] = None,
    lam_hi: Optional[float] = None,
    oversample: float = 1.0,
) -> SpectralLayout:
    """
    Layout whose radial grid resolves every Laguerre function on a |lambda| range.

    Args:
        group: The group
        M: Laguerre cutoff
        center: Centre grid
        lam_lo: Smallest |lambda| carried by the data (defaults to the grid's smallest)
        lam_hi: Largest |lambda| carried by the data (defaults to the grid's largest)
        oversample: Radial density factor for nonlinear products

    Returns:
        SpectralLayout
    """
    nonzero = center.lam_abs[~center.zero_mask]
    lam_lo = float(nonzero.min()) if lam_lo is None else lam_lo
    lam_hi = float(nonzero.max()) if lam_hi is None else lam_hi
    radial = radial_grid_for(group.d, M, lam_lo, lam_hi, oversample=oversample)
    logger.info(
        "layout d=%d p=%d M=%d: %d radial nodes, %d centre frequencies",
        group.d, group.p, M, radial.size, center.size,
    )
    return SpectralLayout(group, M, radial, center)


@dataclass(frozen=True, eq=False)
class SphericalSpectrum:
    """Coefficients c(m, lambda), m <= M, on the frequency grid of a layout.

    ``transport_time`` is the accumulated propagation time. It never enters
    the coefficients; it tells isotropic grids where the field lives in |s|.
    """

    layout: SpectralLayout
    coeffs: np.ndarray
    transport_time: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != self.layout.shape:
            raise GridMismatch(f"coefficients of shape {coeffs.shape}, layout expects {self.layout.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InvariantViolation("spectrum coefficients must be finite")
        coeffs[:, self.layout.center.zero_mask] = 0.0
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "transport_time", float(self.transport_time))

    @property
    def group(self) -> HTypeGroup:
        return self.layout.group

    @property
    def M(self) -> int:
        return self.layout.M

    def with_coeffs(self, coeffs: np.ndarray, transport_time: Optional[float] = None) -> "SphericalSpectrum":
        time = self.transport_time if transport_time is None else transport_time
        return SphericalSpectrum(self.layout, coeffs, time)

    def _check(self, other: "SphericalSpectrum") -> None:
        if not self.layout.compatible_with(other.layout):
            raise GridMismatch("spectra live on different layouts")

    def __add__(self, other: "SphericalSpectrum") -> "SphericalSpectrum":
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs, max(self.transport_time, other.transport_time, key=abs))

    def __sub__(self, other: "SphericalSpectrum") -> "SphericalSpectrum":
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs, max(self.transport_time, other.transport_time, key=abs))

    def __mul__(self, factor: complex) -> "SphericalSpectrum":
        return self.with_coeffs(self.coeffs * factor)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def active_mask(self) -> np.ndarray:
        magnitude = np.abs(self.coeffs)
        peak = magnitude.max()
        return magnitude > ACTIVE_THRESHOLD * peak if peak > 0 else np.zeros_like(magnitude, dtype=bool)

    def joint_support(self) -> tuple[float, float]:
        """Smallest and largest (2m+d)|lambda| carrying coefficient mass."""
        mask = self.active_mask()
        if not mask.any():
            return JOINT_LOWER_EDGE, JOINT_UPPER_EDGE
        joint = self.layout.joint[mask]
        return float(joint.min()), float(joint.max())

    def default_samples(self) -> CenterSamples:
        x_lo, x_hi = self.joint_support()
        return self.layout.center.default_samples(
            d=self.layout.d, M=self.M, x_lo=x_lo, x_hi=x_hi, transport_time=self.transport_time
        )


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples f(rho_i, s_k) of a z-radial function with their quadrature weights."""

    layout: SpectralLayout
    values: np.ndarray
    samples: CenterSamples
    radial: Optional[RadialGrid] = field(default=None)

    def __post_init__(self):
        radial = self.radial if self.radial is not None else self.layout.radial
        object.__setattr__(self, "radial", radial)
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (radial.size, self.samples.size):
            raise GridMismatch(
                f"field of shape {values.shape} does not match grids ({radial.size}, {self.samples.size})"
            )
        if not np.all(np.isfinite(values)):
            raise InvariantViolation("field samples must be finite")
        object.__setattr__(self, "values", values)

    @property
    def group(self) -> HTypeGroup:
        return self.layout.group

    def with_values(self, values: np.ndarray) -> "RadialField":
        return RadialField(self.layout, values, self.samples, self.radial)

    def lr_norm(self, r: float) -> float:
        """Quadrature L^r norm on the sample grid (r = inf gives the sample maximum)."""
        magnitude = np.abs(self.values)
        if np.isinf(r):
            return float(magnitude.max()) if magnitude.size else 0.0
        integrand = magnitude**r
        total = self.radial.measure @ integrand @ self.samples.weights
        return float(total ** (1.0 / r))

    def inner(self, other: "RadialField") -> complex:
        """Quadrature inner product <self, other> (conjugate-linear in self)."""
        return complex(self.radial.measure @ (np.conj(self.values) * other.values) @ self.samples.weights)


def _blocks(lam_abs: np.ndarray, bins: np.ndarray):
    for start in range(0, bins.size, BLOCK_SIZE):
        chunk = bins[start : start + BLOCK_SIZE]
        yield chunk, lam_abs[chunk]


def _check_resolution(layout: SpectralLayout, radial: RadialGrid, lam_max: float) -> None:
    """
    Require the radial grid to resolve l_M(|lambda| rho^2 / 2) at the largest |lambda|.

    l_M oscillates on tau < 4M, its turning point, where it has M sign changes,
    i.e. M / 2 full oscillations. The grid must reach tau = 4M and hold
    NODES_PER_OSCILLATION nodes per full oscillation below the turning radius
    rho = sqrt(8M / lam_max), which is 4M nodes.
    """
    M = layout.M
    if M + 1 > radial.size:
        raise CutoffTooLarge(f"M={M} needs at least {M + 1} radial nodes, grid has {radial.size}")
    if M == 0:
        return
    coverage = lam_max * radial.R**2 / 2
    if coverage < 4 * M:
        raise ResolutionInsufficient(
            f"radial grid covers tau <= {coverage:.3g}, Laguerre oscillations need {4 * M}"
        )
    turning = np.sqrt(8.0 * M / lam_max)
    needed = math.ceil(NODES_PER_OSCILLATION * M / 2)
    inside = int(np.count_nonzero(radial.nodes <= turning))
    logger.debug("resolution rule: lam_max=%.4g, %d nodes below rho=%.4g", lam_max, inside, turning)
    if inside < needed:
        raise ResolutionInsufficient(
            f"only {inside} radial nodes below rho={turning:.3g}; {needed} needed for M={M}"
        )


def forward_transform(
    f: RadialField,
    M: Optional[int] = None,
    restrict_to: Optional[SpectralLayout] = None,
) -> SphericalSpectrum:
    """
    Laguerre projection in rho after the Riemann-sum Fourier transform in s.

    Args:
        f: Field sampled on the quadrature nodes of its layout
        M: Laguerre cutoff (defaults to the layout's)
        restrict_to: Coarser periodic layout whose frequencies are kept; the
            projection is computed only on those

    Returns:
        SphericalSpectrum on f's layout (or on restrict_to)
    """
    layout = f.layout.with_cutoff(f.layout.M if M is None else M)
    radial = f.radial
    center = layout.center
    g = center.to_center(f.values, f.samples)

    target = layout
    if restrict_to is not None:
        target = restrict_to.with_cutoff(layout.M)
        g = target.center.restrict(g, center)
    lam_abs = target.center.lam_abs

    coeffs = np.zeros(target.shape, dtype=complex)
    magnitude = np.abs(g).max(axis=0) if g.size else np.zeros(lam_abs.size)
    peak = magnitude.max() if magnitude.size else 0.0
    if peak == 0.0:
        return SphericalSpectrum(target, coeffs)
    active = np.flatnonzero((magnitude > ACTIVE_THRESHOLD * peak) & ~target.center.zero_mask)
    if active.size == 0:
        return SphericalSpectrum(target, coeffs)
    _check_resolution(target, radial, float(lam_abs[active].max()))

    rho_sq = radial.nodes**2 / 2
    weighted = radial.measure[:, None] * g
    for bins, lam in _blocks(lam_abs, active):
        table = laguerre_table(target.M, target.d - 1, np.multiply.outer(rho_sq, lam))
        coeffs[:, bins] = np.einsum("mrb,rb->mb", table, weighted[:, bins])
    coeffs /= target.binomials[:, None]
    return SphericalSpectrum(target, coeffs)


def _radial_profile(S: SphericalSpectrum, rho: np.ndarray) -> np.ndarray:
    """h(rho, lambda) = sum_m c(m, lambda) l_m(|lambda| rho^2/2) |lambda|^d."""
    layout = S.layout
    lam_abs = layout.center.lam_abs
    out = np.zeros((rho.size, lam_abs.size), dtype=complex)
    active = np.flatnonzero(np.any(S.coeffs != 0, axis=0))
    rho_sq = rho**2 / 2
    for bins, lam in _blocks(lam_abs, active):
        table = laguerre_table(layout.M, layout.d - 1, np.multiply.outer(rho_sq, lam))
        out[:, bins] = np.einsum("mb,mrb->rb", S.coeffs[:, bins], table) * lam**layout.d
    return out


def inverse_transform(
    S: SphericalSpectrum,
    radial: Optional[RadialGrid] = None,
    samples: Optional[CenterSamples] = None,
) -> RadialField:
    """
    Evaluate the inversion sum on a radial grid and centre samples.

    Args:
        S: Spectrum
        radial: Radial nodes (defaults to the layout's quadrature grid)
        samples: Centre samples (defaults to the periodic box, or to the
            transport windows of S on isotropic grids)

    Returns:
        RadialField
    """
    layout = S.layout
    radial = layout.radial if radial is None else radial
    samples = S.default_samples() if samples is None else samples
    profile = _radial_profile(S, radial.nodes)
    values = inversion_constant(layout.d, layout.p) * layout.center.from_center(profile, samples)
    return RadialField(layout, values, samples, radial)


def evaluate_at(S: SphericalSpectrum, rho, s) -> np.ndarray:
    """
    Inversion sum at arbitrary physical points (|z|_i, s_i).

    Args:
        S: Spectrum
        rho: Radii |z|, shape (n,)
        s: Centre points, shape (n, p)

    Returns:
        Complex values, shape (n,)
    """
    layout = S.layout
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    s = np.asarray(s, dtype=float).reshape(rho.size, layout.p)
    radii, which = np.unique(rho, return_inverse=True)
    profile = _radial_profile(S, radii)
    out = np.empty(rho.size, dtype=complex)
    step = max(1, KERNEL_ENTRIES // layout.center.size)
    for start in range(0, rho.size, step):
        block = slice(start, start + step)
        kernel = layout.center.kernel(s[block])
        out[block] = np.sum(kernel * profile[which[block]], axis=-1)
    return inversion_constant(layout.d, layout.p) * out


def plancherel_inner(S1: SphericalSpectrum, S2: SphericalSpectrum) -> complex:
    S1._check(S2)
    return complex(np.sum(S1.layout.plancherel_weights * np.conj(S1.coeffs) * S2.coeffs))


def plancherel_norm(S: SphericalSpectrum) -> float:
    """L^2 norm of the field, computed from the coefficients."""
    return float(np.sqrt(np.sum(S.layout.plancherel_weights * np.abs(S.coeffs) ** 2)))


def lr_norm(S: SphericalSpectrum, r: float, radial: Optional[RadialGrid] = None) -> float:
    """Physical L^r norm by quadrature (r = 2 uses the Plancherel form)."""
    if r == 2 and radial is None:
        return plancherel_norm(S)
    return inverse_transform(S, radial).lr_norm(r)


def convolve(S1: SphericalSpectrum, S2: SphericalSpectrum) -> SphericalSpectrum:
    """Group convolution of z-radial functions: pointwise product of coefficients."""
    S1._check(S2)
    return S1.with_coeffs(S1.coeffs * S2.coeffs, S1.transport_time + S2.transport_time)


def unit_spectrum(layout: SpectralLayout) -> SphericalSpectrum:
    """Coefficients identically one: the convolution identity truncated to the layout."""
    return SphericalSpectrum(layout, np.ones(layout.shape))


def zero_spectrum(layout: SpectralLayout) -> SphericalSpectrum:
    return SphericalSpectrum(layout, np.zeros(layout.shape))


def spectrum_from_function(layout: SpectralLayout, func) -> SphericalSpectrum:
    """Coefficients func(m, lambda_points) evaluated on the layout's frequency grid."""
    m = np.arange(layout.M + 1)[:, None]
    return SphericalSpectrum(layout, func(m, layout.center.lam_points))


def save_spectrum(S: SphericalSpectrum, path: Union[str, Path]) -> Path:
    """
    Write a spectrum as one JSON header line followed by little-endian complex128 data.

    Args:
        S: Spectrum
        path: Target file

    Returns:
        The written path
    """
    layout = S.layout
    header = {
        "version": SPECTRUM_FILE_VERSION,
        "endianness": "little",
        "group": layout.group.to_dict(),
        "d": layout.d,
        "p": layout.p,
        "M": layout.M,
        "center": center_to_dict(layout.center),
        "rho": {"nodes": layout.radial.nodes.tolist(), "weights": layout.radial.weights.tolist()},
        "transport_time": S.transport_time,
        "shape": list(layout.shape),
    }
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        handle.write(S.coeffs.astype("<c16").tobytes())
    logger.info("saved spectrum %s (%d x %d)", path, *layout.shape)
    return path


def load_spectrum(path: Union[str, Path]) -> SphericalSpectrum:
    """Read a file written by save_spectrum."""
    raw = Path(path).read_bytes()
    stream = io.BytesIO(raw)
    header = json.loads(stream.readline().decode("utf-8"))
    if header.get("version") != SPECTRUM_FILE_VERSION or header.get("endianness") != "little":
        raise GridMismatch(f"unsupported spectrum file header in {path}")
    group = HTypeGroup.from_dict(header["group"])
    radial = RadialGrid(
        group.d,
        np.asarray(header["rho"]["nodes"], dtype=float),
        np.asarray(header["rho"]["weights"], dtype=float),
    )
    layout = SpectralLayout(group, int(header["M"]), radial, center_from_dict(header["center"]))
    coeffs = np.frombuffer(stream.read(), dtype="<c16").reshape(header["shape"])
    return SphericalSpectrum(layout, coeffs.astype(complex), header["transport_time"])


def spectrum_table(S: SphericalSpectrum, drop_zero: bool = True) -> pd.DataFrame:
    """Long table of |c(m, lambda)| with the joint spectrum value of every entry."""
    layout = S.layout
    m_index, lam_index = np.indices(layout.shape)
    frame = pd.DataFrame(
        {
            "m": m_index.ravel(),
            "abs_lambda": layout.center.lam_abs[lam_index.ravel()],
            "joint": layout.joint.ravel(),
            "magnitude": np.abs(S.coeffs).ravel(),
        }
    )
    for axis in range(layout.p):
        frame.insert(1 + axis, f"lambda_{axis + 1}", layout.center.lam_points[lam_index.ravel(), axis])
    if drop_zero:
        frame = frame[frame["magnitude"] > 0].reset_index(drop=True)
    return frame
