"""Quadrature grids for the radial variable rho = |z| and the centre variable s.

Two centre grids share one interface:

* ``PeriodicCenterGrid`` - a uniform periodic box [-L/2, L/2)^p in s with its
  discrete dual lattice lambda = 2 pi k / L, transformed with numpy FFTs.
* ``IsotropicCenterGrid`` - composite Gauss-Legendre nodes in |lambda| for
  spectra that depend on lambda only through |lambda|. Physical samples in |s|
  are placed in transport windows derived from the spectrum being inverted.

All grids rescale by powers of two, so dyadic relabelling is exact in
floating point.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import pairwise
from typing import Union

import numpy as np
from scipy.special import gamma, jv, roots_legendre

from .errors import GridMismatch

logger = logging.getLogger(__name__)

NODES_PER_PANEL = 16
RADIAL_WAVELENGTHS_PER_PANEL = 2.0
LAMBDA_WAVELENGTHS_PER_PANEL = 2.5
S_WAVELENGTHS_PER_PANEL = 1.25
LAGUERRE_TAIL = 40.0
WINDOW_WIDTH = 4.0
JOINT_LOWER_EDGE = 0.25
JOINT_UPPER_EDGE = 4.0


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * np.pi ** (n / 2) / gamma(n / 2)


def composite_gauss_legendre(
    breaks: np.ndarray, n: int = NODES_PER_PANEL
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule with n nodes on every panel [breaks[i], breaks[i+1]]."""
    x, w = roots_legendre(n)
    nodes, weights = [], []
    for a, b in pairwise(breaks):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        nodes.append(half * x + mid)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _adaptive_breaks(lo: float, hi: float, wavenumber, wavelengths: float) -> np.ndarray:
    """Panel breakpoints whose width covers a fixed number of local wavelengths."""
    breaks = [lo]
    while breaks[-1] < hi:
        start = breaks[-1]
        width = wavelengths * 2.0 * np.pi / max(wavenumber(start), 1e-300)
        breaks.append(min(hi, start + width))
        if hi - breaks[-1] < 1e-9 * (hi - lo):
            breaks[-1] = hi
    return np.asarray(breaks)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature nodes in rho = |z| for the measure omega_{2d-1} rho^{2d-1} d rho."""

    d: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def R(self) -> float:
        return float(self.nodes[-1])

    @cached_property
    def measure(self) -> np.ndarray:
        return sphere_area(2 * self.d) * self.nodes ** (2 * self.d - 1) * self.weights

    def scaled(self, factor: float) -> "RadialGrid":
        """Nodes multiplied by factor (exact for powers of two)."""
        return RadialGrid(self.d, self.nodes * factor, self.weights * factor)

    def same_as(self, other: "RadialGrid") -> bool:
        return (
            self.d == other.d
            and self.size == other.size
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def describe(self) -> dict:
        return {"kind": "gauss-legendre", "d": self.d, "n": self.size, "R": self.R}


def radial_grid(d: int, R: float, n: int) -> RadialGrid:
    """Single-panel Gauss-Legendre rule with n nodes on [0, R]."""
    nodes, weights = composite_gauss_legendre(np.array([0.0, R]), n)
    return RadialGrid(d, nodes, weights)


def radial_grid_for(
    d: int,
    M: int,
    lam_lo: float,
    lam_hi: float,
    nodes_per_panel: int = NODES_PER_PANEL,
    oversample: float = 1.0,
) -> RadialGrid:
    """
    Radial rule resolving Laguerre functions l_m(|lambda| rho^2 / 2), m <= M.

    The outer radius covers the decay of the slowest frequency lam_lo; panel
    widths follow the local wavenumber of products of two Laguerre functions,
    which is constant up to the turning radius of lam_hi and falls like 1/rho
    beyond it.

    Args:
        d: Half horizontal dimension
        M: Laguerre cutoff
        lam_lo: Smallest |lambda| to be resolved
        lam_hi: Largest |lambda| to be resolved
        nodes_per_panel: Gauss-Legendre order of each panel
        oversample: Extra density for products of more than two fields

    Returns:
        RadialGrid on [0, R]
    """
    tau_max = 4 * M + 2 * d + LAGUERRE_TAIL
    nu = 4 * M + 2 * d
    R = np.sqrt(2.0 * tau_max / lam_lo)

    def wavenumber(rho: float) -> float:
        lam_eff = lam_hi if rho <= 0 else min(lam_hi, 2.0 * tau_max / rho**2)
        return oversample * np.sqrt(2.0 * nu * lam_eff)

    breaks = _adaptive_breaks(0.0, R, wavenumber, RADIAL_WAVELENGTHS_PER_PANEL)
    nodes, weights = composite_gauss_legendre(breaks, nodes_per_panel)
    logger.debug("radial grid: R=%.4g, %d panels, %d nodes", R, breaks.size - 1, nodes.size)
    return RadialGrid(d, nodes, weights)


@dataclass(frozen=True, eq=False)
class CenterSamples:
    """Physical sample points in the centre variable with quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class PeriodicCenterGrid:
    """Periodic box of side L with n points per axis and its dual lattice."""

    p: int
    L: float
    n: int

    is_periodic = True

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.p

    @property
    def size(self) -> int:
        return self.n**self.p

    @cached_property
    def _k_points(self) -> np.ndarray:
        k_axis = np.fft.fftfreq(self.n, 1.0 / self.n)
        mesh = np.meshgrid(*([k_axis] * self.p), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def lam_points(self) -> np.ndarray:
        return 2.0 * np.pi * self._k_points / self.L

    @cached_property
    def lam_abs(self) -> np.ndarray:
        return np.linalg.norm(self.lam_points, axis=-1)

    @cached_property
    def lam_weights(self) -> np.ndarray:
        return np.full(self.size, (2.0 * np.pi / self.L) ** self.p)

    @cached_property
    def zero_mask(self) -> np.ndarray:
        return self.lam_abs == 0.0

    @cached_property
    def _sign(self) -> np.ndarray:
        return np.where(np.sum(self._k_points, axis=-1) % 2 == 0, 1.0, -1.0)

    @cached_property
    def samples(self) -> CenterSamples:
        s_axis = -self.L / 2 + np.arange(self.n) * (self.L / self.n)
        mesh = np.meshgrid(*([s_axis] * self.p), indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        weights = np.full(self.size, (self.L / self.n) ** self.p)
        return CenterSamples(points, weights)

    @property
    def s_spacing(self) -> np.ndarray:
        return np.full(self.p, self.L / self.n)

    def _axes(self) -> tuple[int, ...]:
        return tuple(range(-self.p, 0))

    def to_center(self, values: np.ndarray, samples: CenterSamples = None) -> np.ndarray:
        """Riemann-sum transform sum_s ds e^{i lambda.s} f(s) along the last axis."""
        lead = values.shape[:-1]
        cube = values.reshape(lead + self.shape)
        transformed = np.fft.ifftn(cube, axes=self._axes()).reshape(lead + (self.size,))
        return transformed * (self.L**self.p) * self._sign

    def from_center(self, g: np.ndarray, samples: CenterSamples = None) -> np.ndarray:
        """Inverse sum sum_lambda dlambda e^{-i lambda.s} g(lambda) on the box nodes."""
        lead = g.shape[:-1]
        cube = (g * self._sign).reshape(lead + self.shape)
        values = np.fft.fftn(cube, axes=self._axes()).reshape(lead + (self.size,))
        return values * (2.0 * np.pi / self.L) ** self.p

    def kernel(self, s_points: np.ndarray) -> np.ndarray:
        """Weighted inversion kernel dlambda e^{-i lambda.s}, shape (n_points, n_lambda)."""
        phase = np.atleast_2d(s_points) @ self.lam_points.T
        return np.exp(-1j * phase) * self.lam_weights

    def default_samples(self, **_) -> CenterSamples:
        return self.samples

    def scaled(self, j: int) -> "PeriodicCenterGrid":
        """Dual lattice multiplied by 4^j, box divided by 4^j."""
        return PeriodicCenterGrid(self.p, self.L * 4.0 ** (-j), self.n)

    def refined(self, factor: int) -> "PeriodicCenterGrid":
        """Same box sampled factor times more densely (a superset of frequencies)."""
        return PeriodicCenterGrid(self.p, self.L, self.n * int(factor))

    def _flat_indices_in(self, fine: "PeriodicCenterGrid") -> np.ndarray:
        k = np.rint(self._k_points).astype(int) % fine.n
        return np.ravel_multi_index(tuple(k.T), fine.shape)

    def embed(self, coeffs: np.ndarray, fine: "PeriodicCenterGrid") -> np.ndarray:
        """Zero-pad coefficients on this lattice into the lattice of a refined grid."""
        out = np.zeros(coeffs.shape[:-1] + (fine.size,), dtype=complex)
        out[..., self._flat_indices_in(fine)] = coeffs
        return out

    def restrict(self, g_fine: np.ndarray, fine: "PeriodicCenterGrid") -> np.ndarray:
        """Keep only the frequencies of this lattice."""
        return g_fine[..., self._flat_indices_in(fine)]

    def transport_limit(self, speed: float) -> float:
        """Largest |t| keeping transported mass a quarter box away from the boundary."""
        return np.inf if speed <= 0 else self.L / 4.0 / speed

    def same_as(self, other) -> bool:
        return (
            isinstance(other, PeriodicCenterGrid)
            and self.p == other.p
            and self.n == other.n
            and self.L == other.L
        )

    def describe(self) -> dict:
        return {"kind": "periodic", "p": self.p, "L": self.L, "n_s": self.n}


def bessel_kernel(p: int, x: np.ndarray) -> np.ndarray:
    """Spherical mean of e^{-i x omega_1} over S^{p-1}: Gamma(p/2)(2/x)^{p/2-1} J_{p/2-1}(x)."""
    x = np.asarray(x, dtype=float)
    nu = p / 2.0 - 1.0
    out = np.ones_like(x)
    positive = x > 0
    xp = x[positive]
    out[positive] = gamma(p / 2.0) * (2.0 / xp) ** nu * jv(nu, xp)
    return out


@dataclass(frozen=True, eq=False)
class IsotropicCenterGrid:
    """Gauss-Legendre nodes in |lambda| for spectra radial in the centre frequency.

    ``t_design`` is the largest |transport time| the node density resolves.
    """

    p: int
    nodes: np.ndarray
    weights: np.ndarray
    t_design: float
    kappa: float = WINDOW_WIDTH

    is_periodic = False

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def lam_points(self) -> np.ndarray:
        points = np.zeros((self.size, self.p))
        points[:, 0] = self.nodes
        return points

    @property
    def lam_abs(self) -> np.ndarray:
        return self.nodes

    @cached_property
    def lam_weights(self) -> np.ndarray:
        return sphere_area(self.p) * self.nodes ** (self.p - 1) * self.weights

    @cached_property
    def zero_mask(self) -> np.ndarray:
        return np.zeros(self.size, dtype=bool)

    def kernel(self, s_points: np.ndarray) -> np.ndarray:
        s_abs = np.linalg.norm(np.atleast_2d(s_points), axis=-1)
        return bessel_kernel(self.p, np.outer(s_abs, self.nodes)) * self.lam_weights

    def to_center(self, values: np.ndarray, samples: CenterSamples, chunk: int = 256) -> np.ndarray:
        """Radial transform sum_s w_s K(|lambda||s|) f(s) along the last axis."""
        s_abs = np.linalg.norm(samples.points, axis=-1)
        out = np.zeros(values.shape[:-1] + (self.size,), dtype=complex)
        for start in range(0, samples.size, chunk):
            block = slice(start, start + chunk)
            k = bessel_kernel(self.p, np.outer(s_abs[block], self.nodes))
            out += (values[..., block] * samples.weights[block]) @ k
        return out

    def from_center(self, g: np.ndarray, samples: CenterSamples, chunk: int = 256) -> np.ndarray:
        """Inverse sum sum_lambda W K(|lambda||s|) g(lambda) at the sample points."""
        s_abs = np.linalg.norm(samples.points, axis=-1)
        out = np.zeros(g.shape[:-1] + (samples.size,), dtype=complex)
        weighted = g * self.lam_weights
        for start in range(0, samples.size, chunk):
            block = slice(start, start + chunk)
            k = bessel_kernel(self.p, np.outer(s_abs[block], self.nodes))
            out[..., block] = weighted @ k.T
        return out

    def default_samples(
        self, d: int, M: int, x_lo: float, x_hi: float, transport_time: float
    ) -> CenterSamples:
        """
        Quadrature in |s| covering the transport windows of a spectrum.

        Index m travels to |s| = (2m+d)|t| with an envelope of half-width
        kappa (2m+d)/x_lo; the origin window is always included.

        Args:
            d: Half horizontal dimension
            M: Laguerre cutoff
            x_lo: Lower edge of the joint spectrum (2m+d)|lambda| of the data
            x_hi: Upper edge of the joint spectrum of the data
            transport_time: Accumulated propagation time of the data

        Returns:
            CenterSamples with points along the first centre axis
        """
        windows = []
        for m in range(M + 1):
            speed = 2 * m + d
            centre = speed * abs(transport_time)
            half = self.kappa * speed / x_lo
            wavenumber = min(x_hi / speed, float(self.nodes[-1]))
            windows.append([max(0.0, centre - half), centre + half, wavenumber])
        windows.append([0.0, self.kappa * d / x_lo, min(x_hi / d, float(self.nodes[-1]))])
        windows.sort(key=lambda w: w[0])

        merged = [windows[0]]
        for lo, hi, k in windows[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
                merged[-1][2] = max(merged[-1][2], k)
            else:
                merged.append([lo, hi, k])

        nodes, weights = [], []
        for lo, hi, k in merged:
            count = int(np.ceil((hi - lo) * k / (2.0 * np.pi * S_WAVELENGTHS_PER_PANEL)))
            breaks = np.linspace(lo, hi, max(count, 1) + 1)
            x, w = composite_gauss_legendre(breaks)
            nodes.append(x)
            weights.append(w)
        s_abs = np.concatenate(nodes)
        radial_weights = sphere_area(self.p) * s_abs ** (self.p - 1) * np.concatenate(weights)
        points = np.zeros((s_abs.size, self.p))
        points[:, 0] = s_abs
        return CenterSamples(points, radial_weights)

    def scaled(self, j: int) -> "IsotropicCenterGrid":
        factor = 4.0**j
        return IsotropicCenterGrid(
            self.p, self.nodes * factor, self.weights * factor, self.t_design / factor, self.kappa
        )

    def transport_limit(self, speed: float) -> float:
        return self.t_design

    def same_as(self, other) -> bool:
        return (
            isinstance(other, IsotropicCenterGrid)
            and self.p == other.p
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def describe(self) -> dict:
        return {
            "kind": "isotropic",
            "p": self.p,
            "n_lambda": self.size,
            "lambda_range": [float(self.nodes[0]), float(self.nodes[-1])],
            "t_design": self.t_design,
        }


CenterGrid = Union[PeriodicCenterGrid, IsotropicCenterGrid]


def isotropic_grid_for(
    p: int,
    d: int,
    M: int,
    t_max: float,
    x_lo: float = JOINT_LOWER_EDGE,
    x_hi: float = JOINT_UPPER_EDGE,
    kappa: float = WINDOW_WIDTH,
) -> IsotropicCenterGrid:
    """
    Isotropic lambda-rule for data with joint spectrum inside [x_lo, x_hi].

    The |lambda| range is [x_lo/(2M+d), x_hi/d]. Panel widths resolve the
    propagation phase (2m+d)|lambda| t, the kernel oscillation K(|lambda||s|)
    on every transport window up to t_max, and the Laguerre phase in rho.

    Args:
        p: Centre dimension
        d: Half horizontal dimension
        M: Laguerre cutoff
        t_max: Largest |time| to be resolved
        x_lo: Lower edge of the joint spectrum
        x_hi: Upper edge of the joint spectrum
        kappa: Envelope width factor of the transport windows

    Returns:
        IsotropicCenterGrid
    """
    if p < 1 or M < 0 or t_max < 0:
        raise GridMismatch("isotropic grids need p >= 1, M >= 0 and t_max >= 0")
    lam_lo, lam_hi = x_lo / (2 * M + d), x_hi / d
    top_speed = 2 * M + d
    s_max = top_speed * t_max + kappa * top_speed / x_lo
    transport = top_speed * t_max + s_max
    tau_max = 4 * M + 2 * d + LAGUERRE_TAIL
    laguerre = np.sqrt((4 * M + 2 * d) * tau_max)

    def wavenumber(r: float) -> float:
        return transport + laguerre / r

    breaks = _adaptive_breaks(lam_lo, lam_hi, wavenumber, LAMBDA_WAVELENGTHS_PER_PANEL)
    nodes, weights = composite_gauss_legendre(breaks)
    logger.debug(
        "isotropic grid p=%d: |lambda| in [%.4g, %.4g], %d nodes, t_max=%.4g",
        p, lam_lo, lam_hi, nodes.size, t_max,
    )
    return IsotropicCenterGrid(p, nodes, weights, float(t_max), kappa)


def center_to_dict(center: CenterGrid) -> dict:
    """JSON-ready description from which center_from_dict rebuilds the grid."""
    payload = center.describe()
    if not center.is_periodic:
        payload.update(
            nodes=center.nodes.tolist(), weights=center.weights.tolist(), kappa=center.kappa
        )
    return payload


def center_from_dict(payload: dict) -> CenterGrid:
    if payload["kind"] == "periodic":
        return PeriodicCenterGrid(int(payload["p"]), float(payload["L"]), int(payload["n_s"]))
    if payload["kind"] == "isotropic":
        return IsotropicCenterGrid(
            int(payload["p"]),
            np.asarray(payload["nodes"], dtype=float),
            np.asarray(payload["weights"], dtype=float),
            float(payload["t_design"]),
            float(payload.get("kappa", WINDOW_WIDTH)),
        )
    raise GridMismatch(f"unknown centre grid kind {payload['kind']!r}")
