import numpy as np
import pytest

from src.modelling.errors import (
    DimensionConstraint,
    DimensionMismatch,
    GridTooCoarse,
    InvariantViolation,
    NoCliffordModule,
    NonpositiveScale,
)
from src.modelling.group_core import (
    GroupPoint,
    HTypeGroup,
    bracket,
    build_group,
    check_structure_matrices,
    dilate,
    group_inv,
    group_mul,
    sample_patch,
    sublaplacian_fd,
    vector_field_apply,
)


@pytest.mark.parametrize("d, p", [(1, 1), (2, 1), (2, 2), (2, 3), (4, 4), (4, 7)])
def test_constructed_groups_satisfy_the_axioms(d, p):
    G = build_group(d, p)
    is_valid, errors = check_structure_matrices(G.U, d, p)
    assert is_valid, errors
    assert G.N == 2 * d + 2 * p
    assert G.dim == 2 * d + p


@pytest.mark.parametrize("d, p, error", [(1, 2, DimensionConstraint), (0, 1, DimensionConstraint), (3, 2, NoCliffordModule), (8, 8, NoCliffordModule)])
def test_unbuildable_groups_are_rejected(d, p, error):
    with pytest.raises(error):
        build_group(d, p)


def test_group_law_identities():
    G = build_group(2, 3)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        g1, g2, g3 = (GroupPoint(rng.standard_normal(4), rng.standard_normal(3)) for _ in range(3))
        left = group_mul(G, group_mul(G, g1, g2), g3)
        right = group_mul(G, g1, group_mul(G, g2, g3))
        np.testing.assert_allclose(left.as_vector(), right.as_vector(), atol=1e-12)
        np.testing.assert_allclose(group_mul(G, g1, group_inv(G, g1)).as_vector(), 0.0, atol=1e-12)
        lam = 1.7
        np.testing.assert_allclose(
            dilate(G, lam, group_mul(G, g1, g2)).as_vector(),
            group_mul(G, dilate(G, lam, g1), dilate(G, lam, g2)).as_vector(),
            atol=1e-12,
        )


def test_bracket_is_antisymmetric(group22):
    rng = np.random.default_rng(1)
    z, w = rng.standard_normal(4), rng.standard_normal(4)
    np.testing.assert_allclose(bracket(group22, z, w), -bracket(group22, w, z), atol=1e-14)
    np.testing.assert_allclose(bracket(group22, z, z), 0.0, atol=1e-14)


def test_dilation_needs_positive_factor(group22):
    with pytest.raises(NonpositiveScale):
        dilate(group22, 0.0, group22.identity())


def test_points_must_match_the_group(group22):
    with pytest.raises(DimensionMismatch):
        group_mul(group22, GroupPoint(np.zeros(2), np.zeros(1)), group22.identity())


def test_descriptor_roundtrip_reverifies_matrices(group22):
    restored = HTypeGroup.from_dict(group22.to_dict())
    assert all(np.array_equal(a, b) for a, b in zip(group22.U, restored.U))
    payload = group22.to_dict()
    payload["U"][0][0][1] = 0.5
    with pytest.raises(InvariantViolation):
        HTypeGroup.from_dict(payload)


def test_first_order_fields_on_linear_functions(heisenberg):
    point = GroupPoint([0.3, -0.2], [0.1])
    patch = sample_patch(heisenberg, lambda z, eta: eta[..., 0] + 2 * z[..., 0], point, h=0.1)
    # X1 carries -y/2 d/ds on H^1_1.
    assert vector_field_apply(heisenberg, "S1", patch) == pytest.approx(1.0, abs=1e-10)
    assert vector_field_apply(heisenberg, "X1", patch) == pytest.approx(2.1, abs=1e-10)


@pytest.mark.parametrize("d, p", [(1, 1), (2, 1)])
def test_sublaplacian_of_horizontal_quadratic(d, p):
    G = build_group(d, p)
    point = GroupPoint(np.full(2 * d, 0.1), np.zeros(p))
    patch = sample_patch(G, lambda z, eta: np.sum(z**2, axis=-1), point, h=0.05)
    assert sublaplacian_fd(G, patch).real == pytest.approx(-4.0 * d, rel=1e-9)


def test_patches_need_an_odd_stencil(heisenberg):
    with pytest.raises(GridTooCoarse):
        sample_patch(heisenberg, lambda z, eta: z[..., 0], heisenberg.identity(), h=0.1, n=4)


def test_horizontal_fields_commute_with_left_translation(group22):
    G = group22
    g = GroupPoint([0.4, -0.3, 0.2, 0.7], [0.5, -0.1])
    x = GroupPoint([0.1, 0.2, -0.3, 0.05], [0.2, 0.3])

    def f(z, eta):
        return np.exp(0.3 * z[..., 0] - 0.2 * z[..., 3]) * np.cos(eta[..., 0] + 0.5 * eta[..., 1]) + z[..., 1] * eta[..., 1]

    def translated(z, eta):
        shift = 0.5 * np.einsum("i,kij,...j->...k", g.z, G.U_stack, z)
        return f(g.z + z, g.eta + eta + shift)

    left = sample_patch(G, translated, x, h=5e-4)
    right = sample_patch(G, f, group_mul(G, g, x), h=5e-4)
    for which in ("X1", "X2", "Y1", "Y2", "S1", "S2"):
        assert vector_field_apply(G, which, left) == pytest.approx(vector_field_apply(G, which, right), abs=1e-6)
