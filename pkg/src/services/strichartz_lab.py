"""
Admissibility arithmetic and truncated Strichartz quotients for the htype-lab application.

Exponents are exact: rationals are fractions.Fraction, infinity is math.inf.
Float inputs are converted through their shortest decimal representation, so
0.1 becomes 1/10.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import roots_legendre

from ..modelling.errors import (
    BothInfinite,
    DimensionConstraint,
    InvalidAlpha,
    NoPair,
    NotAdmissible,
    OutOfRange,
    ZeroData,
)
from ..modelling.laguerre_spherical import SphericalSpectrum, plancherel_norm
from ..modelling.spectral_calculus import (
    check_aliasing_window,
    cumulative_duhamel,
    frac_power,
    lr_norm,
    propagator,
)
from .parallel import parallel_map

logger = logging.getLogger(__name__)

Exponent = Union[Fraction, float]

INF = math.inf
TIME_PANEL_NODES = 6


def as_exponent(value) -> Exponent:
    """Exact exponent from an int, Fraction, float, or the strings 'inf'/'∞'."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in {"inf", "infinity", "∞"}:
            return INF
        return Fraction(text)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if math.isinf(value):
        return INF
    return Fraction(repr(float(value)))


def reciprocal(value: Exponent) -> Fraction:
    return Fraction(0) if value == INF else 1 / Fraction(value)


def format_exponent(value) -> str:
    return "inf" if value == INF else str(value)


def to_float(value) -> float:
    return INF if value == INF else float(value)


@dataclass(frozen=True)
class AdmissiblePair:
    """(q, r) with its admissibility and endpoint flags and scaling loss."""

    q: Exponent
    r: Exponent
    p: int
    admissible: bool
    endpoint: bool
    sigma: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "q": format_exponent(self.q),
            "r": format_exponent(self.r),
            "p": self.p,
            "admissible": self.admissible,
            "endpoint": self.endpoint,
            "sigma": None if self.sigma is None else str(self.sigma),
        }


@dataclass(frozen=True)
class ExponentReport:
    """Critical exponents s_c, s_* of |u|^{alpha-1}u on H^d_p."""

    d: int
    p: int
    alpha: Fraction
    N: int
    s_c: Fraction
    s_star: Fraction
    branch: str
    term: str

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "alpha": str(self.alpha),
            "N": self.N,
            "s_c": str(self.s_c),
            "s_star": str(self.s_star),
            "s_star_float": float(self.s_star),
            "branch": self.branch,
            "term": self.term,
        }


def _check_range(q: Exponent, r: Exponent) -> None:
    if q < 2 or r < 2:
        raise OutOfRange(f"exponents must lie in [2, inf], got q={format_exponent(q)}, r={format_exponent(r)}")
    if q == INF and r == INF:
        raise BothInfinite("(q, r) = (inf, inf) is excluded")


def scaling_sigma(q, r, N: int) -> Fraction:
    """sigma = N (1/2 - 1/r) - 2/q."""
    q, r = as_exponent(q), as_exponent(r)
    _check_range(q, r)
    return N * (Fraction(1, 2) - reciprocal(r)) - 2 * reciprocal(q)


def classify_pair(q, r, p: int, N: Optional[int] = None) -> AdmissiblePair:
    """
    Admissibility 2/q <= (p-1)(1/2 - 1/r), excluding (2, inf) at p = 3.

    Args:
        q: Time exponent in [2, inf]
        r: Space exponent in [2, inf]
        p: Centre dimension
        N: Homogeneous dimension, when the scaling loss is wanted

    Returns:
        AdmissiblePair
    """
    q, r = as_exponent(q), as_exponent(r)
    _check_range(q, r)
    admissible = 2 * reciprocal(q) <= (p - 1) * (Fraction(1, 2) - reciprocal(r))
    if q == 2 and r == INF and p == 3:
        admissible = False
    endpoint = p > 3 and q == 2 and r == Fraction(2 * (p - 1), p - 3)
    sigma = scaling_sigma(q, r, N) if N is not None else None
    return AdmissiblePair(q, r, p, admissible, endpoint, sigma)


def _check_dimensions(d: int, p: int) -> None:
    if d < 1 or p < 1 or p + 1 > 2 * d:
        raise DimensionConstraint(f"H^{d}_{p} needs d >= 1, p >= 1 and p + 1 <= 2d")


def critical_exponents(d: int, p: int, alpha) -> ExponentReport:
    """
    s_c = N/2 - 2/(alpha-1) and s_* = max{(N-p+1)/2, (N-2)/2, s_c}.

    Args:
        d: Half horizontal dimension
        p: Centre dimension
        alpha: Nonlinearity degree, > 1

    Returns:
        ExponentReport naming the active branch
    """
    _check_dimensions(d, p)
    alpha = as_exponent(alpha)
    if alpha == INF or alpha <= 1:
        raise InvalidAlpha(f"alpha must be a finite number > 1, got {format_exponent(alpha)}")
    N = 2 * d + 2 * p
    s_c = Fraction(N, 2) - 2 / (alpha - 1)
    candidates = {"(N-p+1)/2": Fraction(N - p + 1, 2), "(N-2)/2": Fraction(N - 2, 2)}

    if p == 1:
        branch, term = "p=1", "(N-p+1)/2"
    elif p == 2:
        branch, term = ("p=2, alpha>=5", "s_c") if alpha >= 5 else ("p=2, 1<alpha<5", "(N-p+1)/2")
    else:
        label = "p=3" if p == 3 else "p>=4"
        branch, term = (f"{label}, alpha>=3", "s_c") if alpha >= 3 else (f"{label}, 1<alpha<3", "(N-2)/2")
    s_star = max([*candidates.values(), s_c])
    return ExponentReport(d, p, alpha, N, s_c, s_star, branch, term)


def find_admissible(d: int, p: int, alpha, s, delta=None) -> AdmissiblePair:
    """
    Explicit admissible pair with scaling loss s_* for regularity s.

    For s_* < s < N/2: q = 4/(N - 2s + 2 delta), r = N/(s - s_* - delta) with
    0 < delta < s - s_* (default (s - s_*)/2). For s = s_*: q = 4/(N - 2 s_*), r = inf.

    Args:
        d: Half horizontal dimension
        p: Centre dimension
        alpha: Nonlinearity degree
        s: Regularity
        delta: Slack below s - s_*

    Returns:
        AdmissiblePair with sigma = s_*

    Raises:
        NoPair: No admissible pair exists for these inputs
    """
    report = critical_exponents(d, p, alpha)
    N, s_star = report.N, report.s_star
    s = as_exponent(s)

    if s == s_star:
        if delta not in (None, 0):
            raise NoPair("the critical case s = s_* takes no slack delta")
        gap = N - 2 * s_star
        if gap <= 0:
            raise NoPair(f"s_* = N/2 leaves no admissible pair on H^{d}_{p}")
        q, r = Fraction(4) / gap, INF
    elif s > s_star:
        if s >= Fraction(N, 2):
            raise NoPair(f"s = {s} is not below N/2 = {Fraction(N, 2)}")
        delta = (s - s_star) / 2 if delta is None else as_exponent(delta)
        if not 0 < delta < s - s_star:
            raise NoPair(f"delta = {delta} must lie strictly between 0 and s - s_* = {s - s_star}")
        q = Fraction(4) / (N - 2 * s + 2 * delta)
        r = Fraction(N) / (s - s_star - delta)
    else:
        raise NoPair(f"s = {s} lies below s_* = {s_star}")

    if q == INF and r == INF:
        raise NoPair("the pair (inf, inf) is excluded")
    if q < 2 or r < 2:
        raise NoPair(f"pair ({format_exponent(q)}, {format_exponent(r)}) leaves [2, inf]")
    pair = classify_pair(q, r, p, N)
    if not pair.admissible:
        raise NoPair(f"pair ({format_exponent(q)}, {format_exponent(r)}) is not admissible for p={p}")
    if pair.sigma != s_star:
        raise NoPair(f"pair has scaling loss {pair.sigma}, expected {s_star}")
    if s > s_star and not q > report.alpha - 1:
        raise NoPair(f"q = {q} does not exceed alpha - 1 = {report.alpha - 1}")
    logger.debug("admissible pair for s=%s: (%s, %s)", s, format_exponent(q), format_exponent(r))
    return pair


def wellposedness_range(d: int, p: int, alpha) -> dict:
    """Regularities covered by the contraction argument and the critical global flag."""
    report = critical_exponents(d, p, alpha)
    try:
        find_admissible(d, p, alpha, report.s_star)
        strict = False
    except NoPair:
        strict = True
    has_range = report.s_star < Fraction(report.N, 2)
    alpha_ = report.alpha
    critical_global = (p == 2 and alpha_ >= 5) or (p == 3 and alpha_ > 3) or (p >= 4 and alpha_ >= 3)
    return {
        "threshold": str(report.s_star) if has_range else None,
        "strict": strict,
        "upper": str(Fraction(report.N, 2)),
        "branch": report.branch,
        "critical_global": bool(critical_global),
    }


def nonlinearity_regularity(alpha, s) -> dict:
    """Which conclusions the smoothness of |u|^{alpha-1}u supports at regularity s."""
    alpha, s = as_exponent(alpha), as_exponent(s)
    odd = alpha.denominator == 1 and alpha.numerator % 2 == 1
    ceiling = math.ceil(s)
    return {
        "odd_integer": odd,
        "continuous_dependence": odd or alpha >= ceiling + 1,
        "existence_uniqueness": odd or alpha >= ceiling,
    }


def contraction_time_exponent(alpha, q) -> Fraction:
    """Power of T in the contraction factor: 1 - (alpha-1)/q."""
    alpha, q = as_exponent(alpha), as_exponent(q)
    return 1 - (alpha - 1) * reciprocal(q)


def time_nodes(T: float, n_panels: int, per_panel: int = TIME_PANEL_NODES):
    """
    Gauss-Legendre nodes on [0, T] with geometric panels [T/2^{k+1}, T/2^k].

    The innermost panel [0, T/2^{n_panels}] is linear. Returns nodes, weights and
    the panel index of every node (0 = innermost), so partial sums over
    panels <= k give the integral over [0, T / 2^{n_panels-1-k}].
    """
    x, w = roots_legendre(per_panel)
    edges = [0.0] + [T / 2.0**k for k in range(n_panels, -1, -1)]
    nodes, weights, panels = [], [], []
    for index, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        nodes.append(half * x + mid)
        weights.append(half * w)
        panels.append(np.full(per_panel, index))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(panels), np.array(edges[1:])


@dataclass(frozen=True)
class QuotientCurve:
    """Truncated Strichartz quotient with its dependence on the horizon."""

    quotient: float
    horizons: np.ndarray
    saturation_curve: np.ndarray
    sigma: Fraction
    pair: AdmissiblePair
    exploratory: bool = False
    extras: dict = field(default_factory=dict)

    def last_doubling_change(self) -> float:
        if self.saturation_curve.size < 2 or self.saturation_curve[-1] == 0:
            return 0.0
        return abs(self.saturation_curve[-1] - self.saturation_curve[-2]) / self.saturation_curve[-1]

    def to_dict(self) -> dict:
        return {
            "quotient": self.quotient,
            "horizons": self.horizons.tolist(),
            "saturation_curve": self.saturation_curve.tolist(),
            "sigma": str(self.sigma),
            "pair": self.pair.to_dict(),
            "exploratory": self.exploratory,
            "last_doubling_change": self.last_doubling_change(),
            **self.extras,
        }


def _resolve_pair(q, r, S: SphericalSpectrum, exploratory: bool) -> AdmissiblePair:
    pair = classify_pair(q, r, S.group.p, S.group.N)
    if (not pair.admissible or pair.endpoint) and not exploratory:
        raise NotAdmissible(
            f"({format_exponent(pair.q)}, {format_exponent(pair.r)}) is not a non-endpoint admissible pair "
            f"for p={S.group.p}"
        )
    return pair


def _time_norm(values: np.ndarray, weights: np.ndarray, q: Exponent) -> float:
    if q == INF:
        return float(values.max()) if values.size else 0.0
    return float(np.sum(weights * values ** float(q)) ** (1.0 / float(q)))


def strichartz_quotient(
    S0: SphericalSpectrum,
    q,
    r,
    T: float,
    n_t: int = 6,
    exploratory: bool = False,
    radial=None,
    jobs: int = 1,
) -> QuotientCurve:
    """
    ||e^{itL} u0||_{L^q([-T, T]; L^r)} / ||u0||_{H^sigma-dot}, sigma = scaling_sigma(q, r, N).

    Args:
        S0: Initial data
        q: Time exponent
        r: Space exponent
        T: Horizon
        n_t: Number of geometric time panels (each with TIME_PANEL_NODES nodes)
        exploratory: Allow inadmissible pairs
        radial: Radial sampling grid for sup norms
        jobs: Parallel time nodes

    Returns:
        QuotientCurve whose saturation curve lists the quotient on [-T_k, T_k]
    """
    if S0.is_zero():
        raise ZeroData("the Strichartz quotient is undefined for zero data")
    pair = _resolve_pair(q, r, S0, exploratory)
    sigma = pair.sigma
    denominator = plancherel_norm(frac_power(S0, float(sigma)))

    nodes, weights, panels, horizons = time_nodes(T, n_t)
    signed = np.concatenate([nodes, -nodes])

    def space_norm(t: float) -> float:
        evolved = propagator(S0, t)
        check_aliasing_window(evolved)
        return lr_norm(evolved, to_float(pair.r), radial)

    check_aliasing_window(propagator(S0, T))
    check_aliasing_window(propagator(S0, -T))
    norms = np.array(parallel_map(space_norm, signed, jobs))
    both = norms.reshape(2, -1)

    curve = []
    for k in range(horizons.size):
        inside = panels <= k
        if pair.q == INF:
            value = max(float(both[:, inside].max()), lr_norm(S0, to_float(pair.r), radial))
        else:
            value = _time_norm(both[:, inside].ravel(), np.tile(weights[inside], 2), pair.q)
        curve.append(value / denominator)
    curve = np.array(curve)
    logger.info(
        "Strichartz quotient (%s, %s) on [-%.4g, %.4g]: %.6g",
        format_exponent(pair.q), format_exponent(pair.r), T, T, curve[-1],
    )
    return QuotientCurve(float(curve[-1]), horizons, curve, sigma, pair, exploratory)


def duhamel_quotient(path, pair1, pair2, radial=None, jobs: int = 1) -> float:
    """
    ||int_0^t e^{i(t-t')L} F(t') dt'||_{L^{q1} L^{r1}} / ||F||_{L^{q2'} W^{sigma1+sigma2, r2'}-dot}.

    Args:
        path: Object with t_nodes and states (F sampled on [0, T])
        pair1: (q1, r1) or AdmissiblePair
        pair2: (q2, r2) or AdmissiblePair
        radial: Radial sampling grid for sup norms
        jobs: Parallel time nodes

    Returns:
        The quotient (0.0 for F = 0)
    """
    states: Sequence[SphericalSpectrum] = path.states
    t_nodes = np.asarray(path.t_nodes, dtype=float)
    first = states[0]
    pairs = []
    for pair in (pair1, pair2):
        q, r = (pair.q, pair.r) if isinstance(pair, AdmissiblePair) else pair
        pairs.append(_resolve_pair(q, r, first, exploratory=False))
    (q1, r1, sigma1), (q2, r2, sigma2) = ((pr.q, pr.r, pr.sigma) for pr in pairs)

    if all(state.is_zero() for state in states):
        return 0.0

    q2_dual = 1.0 if q2 == INF else float(q2) / (float(q2) - 1)
    r2_dual = 1.0 if r2 == INF else float(r2) / (float(r2) - 1)
    smoothing = float(sigma1 + sigma2)

    source = np.array(
        parallel_map(lambda F: lr_norm(frac_power(F, smoothing), r2_dual, radial), states, jobs)
    )
    denominator = float(trapezoid(source**q2_dual, t_nodes) ** (1.0 / q2_dual))

    integrals = cumulative_duhamel(states, t_nodes)
    response = np.array(parallel_map(lambda D: lr_norm(D, to_float(r1), radial), integrals, jobs))
    if q1 == INF:
        numerator = float(response.max())
    else:
        numerator = float(trapezoid(response ** float(q1), t_nodes) ** (1.0 / float(q1)))
    if denominator == 0:
        raise ZeroData("the source norm vanishes while the response does not")
    return numerator / denominator
