"""H-type groups: construction, group law, dilations and left-invariant fields.

The groups are realised on R^{2d+p} with the law

    (z, eta) o (z', eta') = (z + z', eta + eta' + 1/2 [z, z'])

where [z, z']_j = <z, U^j z'> and U^1..U^p are skew-symmetric orthogonal
2d x 2d matrices that pairwise anticommute. The finite-difference fields and
sublaplacian below are an independent oracle for the spectral calculus; they
are never used for time evolution.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Optional

import numpy as np

from .errors import (
    DimensionConstraint,
    DimensionMismatch,
    GridTooCoarse,
    InvariantViolation,
    NoCliffordModule,
    NonpositiveScale,
)

logger = logging.getLogger(__name__)

CLIFFORD_CONVENTION = "clifford-v1"
MATRIX_TOLERANCE = 1e-12

_EPSILON = np.array([[0.0, 1.0], [-1.0, 0.0]])
_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_IDENTITY_2 = np.eye(2)

# Smallest real module of p anticommuting complex structures (Radon-Hurwitz).
CLIFFORD_MODULE_DIMENSION = {1: 2, 2: 4, 3: 4, 4: 8, 5: 8, 6: 8, 7: 8}


@dataclass(frozen=True)
class GroupPoint:
    """A point (z, eta) of an H-type group."""

    z: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        if z.ndim != 1 or eta.ndim != 1:
            raise DimensionMismatch("group points take one-dimensional z and eta")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(eta))):
            raise ValueError("group point entries must be finite")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "eta", eta)

    def as_vector(self) -> np.ndarray:
        """Concatenated coordinates (z, eta)."""
        return np.concatenate([self.z, self.eta])


@dataclass(frozen=True, eq=False)
class HTypeGroup:
    """An H-type group H^d_p with its structure matrices U^1..U^p."""

    d: int
    p: int
    U: tuple[np.ndarray, ...]
    convention: str = CLIFFORD_CONVENTION

    @property
    def N(self) -> int:
        """Homogeneous dimension 2d + 2p."""
        return 2 * self.d + 2 * self.p

    @property
    def dim(self) -> int:
        """Topological dimension 2d + p."""
        return 2 * self.d + self.p

    @cached_property
    def U_stack(self) -> np.ndarray:
        return np.stack(self.U)

    def identity(self) -> GroupPoint:
        return GroupPoint(np.zeros(2 * self.d), np.zeros(self.p))

    def to_dict(self) -> dict:
        """JSON-serialisable descriptor."""
        return {
            "d": self.d,
            "p": self.p,
            "U": [matrix.tolist() for matrix in self.U],
            "convention": self.convention,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "HTypeGroup":
        """Rebuild a group from its descriptor, re-verifying every invariant."""
        d, p = int(payload["d"]), int(payload["p"])
        matrices = tuple(np.asarray(m, dtype=float) for m in payload["U"])
        is_valid, errors = check_structure_matrices(matrices, d, p)
        if not is_valid:
            raise InvariantViolation("; ".join(errors))
        return cls(d, p, matrices, payload.get("convention", CLIFFORD_CONVENTION))


def _octonion_left_multiplications() -> list[np.ndarray]:
    """Left multiplication by e_1..e_7 on the octonions R^8.

    Imaginary units multiply along the Fano triples (i, i+1, i+3) mod 7.
    """
    table = {}
    for i in range(7):
        a, b, c = i + 1, (i + 1) % 7 + 1, (i + 3) % 7 + 1
        for x, y, w in ((a, b, c), (b, c, a), (c, a, b)):
            table[(x, y)] = (1.0, w)
            table[(y, x)] = (-1.0, w)

    def multiply(x: int, y: int) -> tuple[float, int]:
        if x == 0:
            return 1.0, y
        if y == 0:
            return 1.0, x
        if x == y:
            return -1.0, 0
        return table[(x, y)]

    matrices = []
    for unit in range(1, 8):
        matrix = np.zeros((8, 8))
        for column in range(8):
            sign, row = multiply(unit, column)
            matrix[row, column] = sign
        matrices.append(matrix)
    return matrices


def _clifford_generators(p: int) -> list[np.ndarray]:
    """Irreducible skew-orthogonal anticommuting generators for p <= 7."""
    if p == 1:
        return [_EPSILON.copy()]
    if p in (2, 3):
        quaternionic = [
            np.kron(_EPSILON, _IDENTITY_2),
            np.kron(_SIGMA_X, _EPSILON),
            np.kron(_SIGMA_Z, _EPSILON),
        ]
        return quaternionic[:p]
    return _octonion_left_multiplications()[:p]


def check_structure_matrices(
    matrices: Sequence[np.ndarray], d: int, p: int, tol: float = MATRIX_TOLERANCE
) -> tuple[bool, list[str]]:
    """
    Verify the H-type axioms for a list of structure matrices.

    Args:
        matrices: Candidate U^1..U^p
        d: Half horizontal dimension
        p: Centre dimension
        tol: Entrywise tolerance

    Returns:
        Tuple of (is_valid, error_messages)
    """
    errors = []
    if p + 1 > 2 * d:
        errors.append(f"p + 1 = {p + 1} exceeds 2d = {2 * d}")
    if len(matrices) != p:
        errors.append(f"expected {p} matrices, got {len(matrices)}")
    identity = np.eye(2 * d)
    for j, matrix in enumerate(matrices, start=1):
        if matrix.shape != (2 * d, 2 * d):
            errors.append(f"U^{j} has shape {matrix.shape}")
            continue
        if np.max(np.abs(matrix.T + matrix)) > tol:
            errors.append(f"U^{j} is not skew-symmetric")
        if np.max(np.abs(matrix.T @ matrix - identity)) > tol:
            errors.append(f"U^{j} is not orthogonal")
    for i, j in product(range(len(matrices)), repeat=2):
        if i >= j or matrices[i].shape != matrices[j].shape:
            continue
        anticommutator = matrices[i] @ matrices[j] + matrices[j] @ matrices[i]
        if np.max(np.abs(anticommutator)) > tol:
            errors.append(f"U^{i + 1} and U^{j + 1} do not anticommute")
    return len(errors) == 0, errors


def build_group(d: int, p: int) -> HTypeGroup:
    """
    Construct H^d_p with a fixed Clifford-module representation.

    Args:
        d: Half horizontal dimension (>= 1)
        p: Centre dimension (>= 1)

    Returns:
        HTypeGroup whose matrices satisfy every H-type axiom
    """
    if d < 1 or p < 1:
        raise DimensionConstraint(f"d and p must be positive, got d={d}, p={p}")
    if p + 1 > 2 * d:
        raise DimensionConstraint(f"p + 1 <= 2d is violated for d={d}, p={p}")
    module = CLIFFORD_MODULE_DIMENSION.get(p)
    if module is None:
        raise NoCliffordModule(f"centre dimension p={p} is not supported (p <= 7)")
    if (2 * d) % module:
        raise NoCliffordModule(
            f"2d = {2 * d} is not a multiple of the Clifford module dimension {module}"
        )

    copies = np.eye(2 * d // module)
    matrices = tuple(np.kron(copies, gamma) for gamma in _clifford_generators(p))
    is_valid, errors = check_structure_matrices(matrices, d, p)
    if not is_valid:
        raise InvariantViolation("; ".join(errors))

    logger.debug("built H-type group d=%d p=%d (module dimension %d)", d, p, module)
    return HTypeGroup(d, p, matrices)


def _check_point(G: HTypeGroup, g: GroupPoint) -> None:
    if g.z.shape != (2 * G.d,) or g.eta.shape != (G.p,):
        raise DimensionMismatch(
            f"point of shape ({g.z.size}, {g.eta.size}) on H^{G.d}_{G.p}"
        )


def bracket(G: HTypeGroup, z: np.ndarray, z_prime: np.ndarray) -> np.ndarray:
    """Centre-valued form [z, z']_j = <z, U^j z'>."""
    return np.einsum("i,kij,j->k", z, G.U_stack, z_prime)


def group_mul(G: HTypeGroup, g1: GroupPoint, g2: GroupPoint) -> GroupPoint:
    """Group law (z + z', eta + eta' + 1/2 [z, z'])."""
    _check_point(G, g1)
    _check_point(G, g2)
    return GroupPoint(g1.z + g2.z, g1.eta + g2.eta + 0.5 * bracket(G, g1.z, g2.z))


def group_inv(G: HTypeGroup, g: GroupPoint) -> GroupPoint:
    _check_point(G, g)
    return GroupPoint(-g.z, -g.eta)


def dilate(G: HTypeGroup, lam: float, g: GroupPoint) -> GroupPoint:
    """Dilation delta_lam(z, eta) = (lam z, lam^2 eta)."""
    _check_point(G, g)
    if not np.isfinite(lam) or lam <= 0:
        raise NonpositiveScale(f"dilation factor must be positive, got {lam}")
    return GroupPoint(lam * g.z, lam**2 * g.eta)


@dataclass(frozen=True, eq=False)
class EuclideanPatch:
    """A function sampled on a uniform cube of side (n-1)h around a centre."""

    center: np.ndarray
    h: float
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def coordinates(self, index: tuple[int, ...]) -> np.ndarray:
        offset = np.asarray(index) - (self.n - 1) / 2
        return self.center + self.h * offset

    def index_of(self, point: GroupPoint) -> tuple[int, ...]:
        """Grid index of a node, which must coincide with the point."""
        offset = (point.as_vector() - self.center) / self.h + (self.n - 1) / 2
        index = np.rint(offset)
        if np.max(np.abs(offset - index)) > 1e-6:
            raise ValueError("point is not a node of the patch")
        return tuple(int(i) for i in index)


def sample_patch(
    G: HTypeGroup,
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    center: GroupPoint,
    h: float,
    n: int = 5,
) -> EuclideanPatch:
    """
    Sample func(z, eta) on an n^{2d+p} cube of spacing h centred at a point.

    Args:
        G: Group fixing the coordinate layout
        func: Vectorised callable taking z of shape (..., 2d) and eta of shape (..., p)
        center: Cube centre
        h: Grid spacing
        n: Points per axis (odd)

    Returns:
        EuclideanPatch holding the samples
    """
    _check_point(G, center)
    if n % 2 == 0 or n < 3:
        raise GridTooCoarse(f"patches need an odd number >= 3 of points per axis, got {n}")
    axis = h * (np.arange(n) - (n - 1) / 2)
    mesh = np.meshgrid(*([axis] * G.dim), indexing="ij")
    coords = np.stack(mesh, axis=-1) + center.as_vector()
    values = np.asarray(func(coords[..., : 2 * G.d], coords[..., 2 * G.d :]))
    return EuclideanPatch(center.as_vector(), float(h), values)


def _parse_field(G: HTypeGroup, which: str) -> tuple[str, int]:
    kind, index = which[0].upper(), int(which[1:].lstrip("_"))
    limit = G.p if kind == "S" else G.d
    if kind not in "XYS" or not 1 <= index <= limit:
        raise ValueError(f"unknown vector field {which!r} on H^{G.d}_{G.p}")
    return kind, index


def _field_terms(G: HTypeGroup, which: str, z: np.ndarray) -> list[tuple[int, float]]:
    """(axis, coefficient) pairs of the first-order operator at horizontal point z."""
    kind, index = _parse_field(G, which)
    if kind == "S":
        return [(2 * G.d + index - 1, 1.0)]
    column = index - 1 if kind == "X" else G.d + index - 1
    terms = [(column, 1.0)]
    coefficients = 0.5 * np.einsum("l,klc->kc", z, G.U_stack)[:, column]
    terms.extend((2 * G.d + k, float(a)) for k, a in enumerate(coefficients) if a != 0.0)
    return terms


def _apply_at(
    G: HTypeGroup,
    which: str,
    sampler: Callable[[tuple[int, ...]], complex],
    patch: EuclideanPatch,
    index: tuple[int, ...],
) -> complex:
    z = patch.coordinates(index)[: 2 * G.d]
    total = 0.0
    for axis, coefficient in _field_terms(G, which, z):
        plus, minus = list(index), list(index)
        plus[axis] += 1
        minus[axis] -= 1
        if minus[axis] < 0 or plus[axis] >= patch.n:
            raise GridTooCoarse("central-difference stencil leaves the sampled patch")
        total += coefficient * (sampler(tuple(plus)) - sampler(tuple(minus))) / (2 * patch.h)
    return total


def vector_field_apply(
    G: HTypeGroup, which: str, F: EuclideanPatch, point: Optional[GroupPoint] = None
) -> complex:
    """
    Apply X_j, Y_j or S_i by second-order central differences.

    Args:
        G: Group
        which: Field name such as "X1", "Y2" or "S1"
        F: Sampled function
        point: Node at which to evaluate (defaults to the patch centre)

    Returns:
        The derivative value at the node
    """
    index = F.index_of(point) if point is not None else (F.n // 2,) * G.dim
    return _apply_at(G, which, lambda i: F.values[i], F, index)


def sublaplacian_fd(G: HTypeGroup, F: EuclideanPatch, point: Optional[GroupPoint] = None) -> complex:
    """-sum_i (X_i^2 + Y_i^2) F at a node, composing the first-order stencils."""
    index = F.index_of(point) if point is not None else (F.n // 2,) * G.dim
    total = 0.0
    for kind, j in product("XY", range(1, G.d + 1)):
        which = f"{kind}{j}"

        def first(i: tuple[int, ...], which=which) -> complex:
            return _apply_at(G, which, lambda k: F.values[k], F, i)

        total += _apply_at(G, which, first, F, index)
    return -total
