"""
Duhamel/Picard solver for i u_t + L u = mu |u|^{alpha-1} u on H-type groups.

States are spherical spectra on a periodic centre grid. The nonlinearity is
evaluated pointwise on a grid refined by the degree of the nonlinearity and
projected back onto the lattice of the state, so odd integer powers are
computed without aliasing.
"""

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from ..modelling.errors import (
    AliasingWarning,
    DivergenceDetected,
    ExponentRelationViolated,
    GridMismatch,
    InputError,
    InvalidAlpha,
    TimeOutOfRange,
)
from ..modelling.group_core import HTypeGroup
from ..modelling.laguerre_spherical import (
    SpectralLayout,
    SphericalSpectrum,
    forward_transform,
    inverse_transform,
    make_layout,
    plancherel_norm,
)
from ..modelling.spectral_calculus import cumulative_duhamel, frac_power, lr_norm, propagator
from .parallel import parallel_map
from .strichartz_lab import (
    INF,
    AdmissiblePair,
    Exponent,
    as_exponent,
    critical_exponents,
    find_admissible,
    reciprocal,
    to_float,
)

logger = logging.getLogger(__name__)

CONVERGENCE_TOLERANCE = 1e-10
DIVERGENCE_STREAK = 3
FRACTIONAL_OVERSAMPLING = 2


def is_odd_integer(alpha) -> bool:
    alpha = as_exponent(alpha)
    return alpha != INF and alpha.denominator == 1 and alpha.numerator % 2 == 1


@dataclass(frozen=True)
class NLSParams:
    """Nonlinearity, regularity and horizon of one solver run."""

    alpha: Fraction
    mu: complex
    s: Fraction
    T: float
    n_t: int
    pair: AdmissiblePair
    s_star: Fraction
    allow_fractional: bool = False

    @classmethod
    def create(
        cls,
        group: HTypeGroup,
        alpha,
        mu: complex,
        s,
        T: float,
        n_t: int = 16,
        delta=None,
        allow_fractional: bool = False,
    ) -> "NLSParams":
        """
        Validate the run parameters and pick the admissible pair for (s, alpha).

        Args:
            group: The group
            alpha: Nonlinearity degree
            mu: Coupling constant, nonzero
            s: Regularity, at least s_*
            T: Horizon
            n_t: Number of uniform time steps
            delta: Slack passed to find_admissible
            allow_fractional: Accept alpha that is not an odd integer

        Returns:
            NLSParams
        """
        alpha = as_exponent(alpha)
        if not is_odd_integer(alpha) and not allow_fractional:
            raise InvalidAlpha(f"alpha={alpha} is not an odd integer; pass allow_fractional to run it anyway")
        if complex(mu) == 0:
            raise InputError("mu must be nonzero")
        if not T > 0:
            raise TimeOutOfRange(f"horizon must be positive, got T={T}")
        if n_t < 1:
            raise InputError(f"n_t must be at least 1, got {n_t}")
        report = critical_exponents(group.d, group.p, alpha)
        pair = find_admissible(group.d, group.p, alpha, s, delta)
        return cls(alpha, complex(mu), as_exponent(s), float(T), int(n_t), pair, report.s_star, allow_fractional)

    @property
    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    def with_horizon(self, T: float) -> "NLSParams":
        return NLSParams(self.alpha, self.mu, self.s, float(T), self.n_t, self.pair, self.s_star, self.allow_fractional)

    def to_dict(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "mu": [self.mu.real, self.mu.imag],
            "s": str(self.s),
            "T": self.T,
            "n_t": self.n_t,
            "pair": self.pair.to_dict(),
            "s_star": str(self.s_star),
        }


@dataclass(frozen=True, eq=False)
class SolverPath:
    """States u(t_k) on strictly increasing nodes starting at 0."""

    t_nodes: np.ndarray
    states: list[SphericalSpectrum]
    diagnostics: list[dict] = field(default_factory=list)
    converged: bool = False

    def __post_init__(self):
        t_nodes = np.asarray(self.t_nodes, dtype=float)
        if t_nodes.ndim != 1 or t_nodes.size != len(self.states) or t_nodes.size == 0:
            raise InputError("a path needs one state per time node")
        if t_nodes[0] != 0.0 or np.any(np.diff(t_nodes) <= 0):
            raise InputError("time nodes must start at 0 and increase strictly")
        first = self.states[0].layout
        if any(not first.compatible_with(state.layout) for state in self.states[1:]):
            raise GridMismatch("path states live on different layouts")
        object.__setattr__(self, "t_nodes", t_nodes)
        object.__setattr__(self, "states", list(self.states))

    @property
    def T(self) -> float:
        return float(self.t_nodes[-1])

    @property
    def layout(self) -> SpectralLayout:
        return self.states[0].layout

    def map(self, func: Callable[[SphericalSpectrum], SphericalSpectrum]) -> "SolverPath":
        return SolverPath(self.t_nodes, [func(state) for state in self.states])

    def __sub__(self, other: "SolverPath") -> "SolverPath":
        if not np.array_equal(self.t_nodes, other.t_nodes):
            raise GridMismatch("paths have different time nodes")
        return SolverPath(self.t_nodes, [a - b for a, b in zip(self.states, other.states)])

    def contraction_ratios(self) -> np.ndarray:
        distances = np.array([row["d_Xs"] for row in self.diagnostics])
        if distances.size < 2:
            return np.array([])
        with np.errstate(divide="ignore", invalid="ignore"):
            return distances[1:] / distances[:-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.diagnostics, columns=["iteration", "d_Xs", "d_X0", "mass", "T"])


def free_flight(u0: SphericalSpectrum, t_nodes) -> SolverPath:
    """e^{itL} u0 on the nodes."""
    return SolverPath(t_nodes, [propagator(u0, float(t)) for t in t_nodes])


@lru_cache(maxsize=16)
def _product_layout(layout: SpectralLayout, factor: int, oversample: float) -> SpectralLayout:
    """Refined periodic layout carrying pointwise products of states on layout."""
    center = layout.center
    nonzero = center.lam_abs[~center.zero_mask]
    radial = make_layout(
        layout.group, layout.M, center, float(nonzero.min()), float(nonzero.max()), oversample=oversample
    ).radial
    return SpectralLayout(layout.group, layout.M, radial, center.refined(factor))


def _refinement(alpha: Fraction) -> int:
    if alpha.denominator == 1:
        return int(alpha.numerator)
    warnings.warn(
        f"alpha={alpha} is not an integer; |u|^(alpha-1) u is sampled with oversampling "
        f"{FRACTIONAL_OVERSAMPLING} and may alias",
        AliasingWarning,
        stacklevel=3,
    )
    return FRACTIONAL_OVERSAMPLING


def pointwise_map(
    S: SphericalSpectrum, func: Callable[[np.ndarray], np.ndarray], factor: int
) -> SphericalSpectrum:
    """
    Project func(u) back onto the layout of S, evaluating u on a refined grid.

    Args:
        S: Spectrum of u on a periodic centre grid
        func: Pointwise map of complex samples
        factor: Refinement of the centre grid and of the radial density

    Returns:
        Spectrum of func(u) on S's layout
    """
    layout = S.layout
    if not getattr(layout.center, "is_periodic", False):
        raise GridMismatch("pointwise products need a periodic centre grid")
    if S.is_zero():
        return S.with_coeffs(np.zeros(layout.shape), 0.0)
    fine = _product_layout(layout, factor, float(factor))
    embedded = SphericalSpectrum(fine, layout.center.embed(S.coeffs, fine.center))
    u = inverse_transform(embedded)
    return forward_transform(u.with_values(func(u.values)), restrict_to=layout)


def power_nonlinearity(values: np.ndarray, alpha, mu: complex = 1.0) -> np.ndarray:
    """mu |u|^{alpha-1} u on samples."""
    alpha = float(as_exponent(alpha))
    return mu * np.abs(values) ** (alpha - 1) * values


def nonlinearity(S: SphericalSpectrum, alpha, mu: complex = 1.0) -> SphericalSpectrum:
    """
    Spectrum of mu |u|^{alpha-1} u.

    Args:
        S: Spectrum of u
        alpha: Nonlinearity degree
        mu: Coupling constant

    Returns:
        Spectrum on S's layout
    """
    alpha = as_exponent(alpha)
    factor = _refinement(alpha)
    return pointwise_map(S, lambda u: power_nonlinearity(u, alpha, mu), factor)


def duhamel(Fpath: SolverPath, t: float) -> SphericalSpectrum:
    """
    int_0^t e^{i(t-t')L} F(t') dt' by the interaction-picture trapezoid rule.

    Between nodes the pulled-back integrand e^{-it'L} F(t') is interpolated
    linearly.

    Raises:
        TimeOutOfRange: t outside [0, T]
    """
    t_nodes = Fpath.t_nodes
    if t < 0 or t > Fpath.T * (1 + 1e-12):
        raise TimeOutOfRange(f"t={t} lies outside [0, {Fpath.T}]")
    t = min(float(t), Fpath.T)
    joint = Fpath.layout.joint
    last = int(np.searchsorted(t_nodes, t, side="right")) - 1
    pulled = [np.exp(-1j * tk * joint) * state.coeffs for tk, state in zip(t_nodes[: last + 2], Fpath.states)]

    total = np.zeros_like(pulled[0])
    for k in range(last):
        total += 0.5 * (t_nodes[k + 1] - t_nodes[k]) * (pulled[k] + pulled[k + 1])
    remainder = t - t_nodes[last]
    if remainder > 0:
        step = t_nodes[last + 1] - t_nodes[last]
        at_t = pulled[last] + (remainder / step) * (pulled[last + 1] - pulled[last])
        total += 0.5 * remainder * (pulled[last] + at_t)
    return SphericalSpectrum(Fpath.layout, np.exp(1j * t * joint) * total, t)


def _time_norm(values: np.ndarray, t_nodes: np.ndarray, q) -> float:
    if q == INF or t_nodes.size == 1:
        return float(values.max())
    q = float(q)
    return float(trapezoid(values**q, t_nodes) ** (1.0 / q))


def xst_norm(path: SolverPath, s, pair: AdmissiblePair, s_star, radial=None, jobs: int = 1) -> float:
    """
    ||u||_{L^inf H^s} + ||u||_{L^q W^{s-s_*, r}} over the path.

    Args:
        path: Sampled solution
        s: Regularity
        pair: Admissible pair (q, r)
        s_star: Critical regularity
        radial: Radial sampling grid for r != 2
        jobs: Parallel time nodes

    Returns:
        The norm (trapezoid rule in time)
    """
    s, s_star = float(as_exponent(s)), float(as_exponent(s_star))
    r = to_float(pair.r)
    energy = parallel_map(lambda u: plancherel_norm(frac_power(u, s, inhomogeneous=True)), path.states, jobs)
    strichartz = parallel_map(
        lambda u: lr_norm(frac_power(u, s - s_star, inhomogeneous=True), r, radial), path.states, jobs
    )
    return float(max(energy)) + _time_norm(np.array(strichartz), path.t_nodes, pair.q)


def picard_step(u0: SphericalSpectrum, path: SolverPath, params: NLSParams, jobs: int = 1) -> SolverPath:
    """Phi_{u0}[u](t) = e^{itL} u0 - i int_0^t e^{i(t-t')L} mu |u|^{alpha-1} u dt'."""
    sources = parallel_map(lambda u: nonlinearity(u, params.alpha, params.mu), path.states, jobs)
    integrals = cumulative_duhamel(sources, path.t_nodes)
    states = [propagator(u0, float(t)) - 1j * D for t, D in zip(path.t_nodes, integrals)]
    return SolverPath(path.t_nodes, states)


def picard_solve(
    u0: SphericalSpectrum,
    params: NLSParams,
    n_iter: int = 20,
    tol: float = CONVERGENCE_TOLERANCE,
    radial=None,
    jobs: int = 1,
) -> SolverPath:
    """
    Iterate the Duhamel map from the free flight of u0.

    Args:
        u0: Initial data on a periodic layout
        params: Run parameters
        n_iter: Maximum number of iterations
        tol: Stop once d(u_n, u_{n+1}) <= tol ||u_{n+1}||_{X^s_T}
        radial: Radial sampling grid for Strichartz norms
        jobs: Parallel time nodes

    Returns:
        The last iterate, with per-iteration distances in X^s_T and X^0_T

    Raises:
        DivergenceDetected: Distances grew for DIVERGENCE_STREAK consecutive iterations
    """
    current = free_flight(u0, params.t_nodes)
    initial_mass = plancherel_norm(u0)
    diagnostics: list[dict] = []
    streak = 0
    converged = False

    for iteration in range(1, n_iter + 1):
        following = picard_step(u0, current, params, jobs)
        difference = following - current
        d_xs = xst_norm(difference, params.s, params.pair, params.s_star, radial, jobs)
        d_x0 = xst_norm(difference, 0, params.pair, 0, radial, jobs)
        size = xst_norm(following, params.s, params.pair, params.s_star, radial, jobs)
        diagnostics.append({
            "iteration": iteration,
            "d_Xs": d_xs,
            "d_X0": d_x0,
            "mass": _relative_drift(following, initial_mass),
            "T": params.T,
        })
        logger.info("Picard iteration %d: d_Xs=%.3e d_X0=%.3e", iteration, d_xs, d_x0)
        current = following

        if len(diagnostics) > 1 and d_xs > diagnostics[-2]["d_Xs"]:
            streak += 1
        else:
            streak = 0
        if streak >= DIVERGENCE_STREAK:
            raise DivergenceDetected(
                f"Picard distances grew for {DIVERGENCE_STREAK} iterations (last {d_xs:.3e}); shorten T"
            )
        if d_xs <= tol * max(size, np.finfo(float).tiny):
            converged = True
            break

    return SolverPath(current.t_nodes, current.states, diagnostics, converged)


def _relative_drift(path: SolverPath, reference: float) -> float:
    if reference == 0:
        return 0.0
    masses = np.array([plancherel_norm(state) for state in path.states])
    return float(np.max(np.abs(masses - reference)) / reference)


def mass_drift(path: SolverPath) -> float:
    """max_t | ||u(t)||_2 - ||u(0)||_2 | / ||u(0)||_2."""
    return _relative_drift(path, plancherel_norm(path.states[0]))


def _flow_exponent_relation(alpha: Fraction, exponents) -> tuple[Exponent, Exponent, Exponent]:
    p_, q_, r_ = (as_exponent(value) for value in exponents)
    if reciprocal(p_) != reciprocal(q_) + (alpha - 1) * reciprocal(r_):
        raise ExponentRelationViolated(
            f"1/p = 1/q + (alpha-1)/r fails for (p, q, r) = ({p_}, {q_}, {r_}), alpha={alpha}"
        )
    return p_, q_, r_


def leibniz_ratio(S: SphericalSpectrum, alpha, s, exponents, radial=None) -> float:
    """
    ||F(u)||_{W^{s,p}-dot} / (||u||_{L^r}^{alpha-1} ||u||_{W^{s,q}-dot}) for F(u) = |u|^{alpha-1} u.

    Args:
        S: Spectrum of u on a periodic layout
        alpha: Nonlinearity degree
        s: Derivative order
        exponents: (p, q, r) with 1/p = 1/q + (alpha-1)/r
        radial: Radial sampling grid for the L^r norms

    Returns:
        The ratio (0.0 for u = 0)
    """
    alpha, s = as_exponent(alpha), as_exponent(s)
    p_, q_, r_ = _flow_exponent_relation(alpha, exponents)
    if not is_odd_integer(alpha) and alpha < np.ceil(float(s)):
        raise InvalidAlpha(f"alpha={alpha} is not smooth enough for s={s}")
    if S.is_zero():
        return 0.0

    if s == 0:
        u = inverse_transform(S, radial)
        power = u.with_values(power_nonlinearity(u.values, alpha))
        numerator = power.lr_norm(to_float(p_))
        denominator = u.lr_norm(to_float(r_)) ** float(alpha - 1) * u.lr_norm(to_float(q_))
    else:
        F = nonlinearity(S, alpha)
        numerator = lr_norm(frac_power(F, float(s)), to_float(p_), radial)
        denominator = lr_norm(S, to_float(r_), radial) ** float(alpha - 1) * lr_norm(
            frac_power(S, float(s)), to_float(q_), radial
        )
    return numerator / denominator


def _nonlinear_phase(values: np.ndarray, alpha: Fraction, mu: complex, dt: float) -> np.ndarray:
    """Exact flow of u_t = -i mu |u|^{alpha-1} u over dt, pointwise."""
    a0 = np.abs(values) ** float(alpha - 1)
    growth = float(alpha - 1) * mu.imag
    if growth == 0:
        phase = a0 * dt
    else:
        phase = -np.log1p(-growth * a0 * dt) / growth
    return values * np.exp(-1j * mu * phase)


def strang_reference(u0: SphericalSpectrum, params: NLSParams, n_steps: int) -> SolverPath:
    """
    Strang splitting: half linear step, exact pointwise nonlinear step, half linear step.

    Args:
        u0: Initial data on a periodic layout
        params: Run parameters (T, alpha, mu)
        n_steps: Number of uniform steps

    Returns:
        Path on the uniform step nodes
    """
    factor = _refinement(params.alpha)
    dt = params.T / n_steps
    t_nodes = np.linspace(0.0, params.T, n_steps + 1)
    states = [u0]
    current = u0
    for _ in range(n_steps):
        half = propagator(current, dt / 2)
        kicked = pointwise_map(half, lambda u: _nonlinear_phase(u, params.alpha, params.mu, dt), factor)
        current = propagator(kicked.with_coeffs(kicked.coeffs, half.transport_time), dt / 2)
        states.append(current)
    return SolverPath(t_nodes, states)


def linear_xs_ratio(u0: SphericalSpectrum, params: NLSParams, radial=None, jobs: int = 1) -> float:
    """||e^{itL} u0||_{X^s_T} / ||u0||_{H^s}: the constant of the free flight."""
    path = free_flight(u0, params.t_nodes)
    base = plancherel_norm(frac_power(u0, float(params.s), inhomogeneous=True))
    return xst_norm(path, params.s, params.pair, params.s_star, radial, jobs) / base

