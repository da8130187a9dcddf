"""Group and transform calibration commands for the htype-lab application."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ...modelling.errors import AcceptanceCheckFailed
from ...modelling.grids import PeriodicCenterGrid
from ...modelling.group_core import (
    GroupPoint,
    HTypeGroup,
    build_group,
    check_structure_matrices,
    dilate,
    group_inv,
    group_mul,
)
from ...modelling.laguerre_spherical import (
    forward_transform,
    inverse_transform,
    make_layout,
    plancherel_norm,
)
from ...services.parallel import parallel_map
from ..utils.constants import TOLERANCES
from ..utils.helpers import (
    artifact_metadata,
    band_limits,
    random_band_limited,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)


def _random_point(G: HTypeGroup, rng: np.random.Generator) -> GroupPoint:
    return GroupPoint(rng.standard_normal(2 * G.d), rng.standard_normal(G.p))


def _distance(g1: GroupPoint, g2: GroupPoint) -> float:
    return float(np.max(np.abs(g1.as_vector() - g2.as_vector())))


def group_invariants(G: HTypeGroup, rng: np.random.Generator, n_points: int) -> dict:
    """
    Largest residuals of the group-law identities on random points.

    Args:
        G: The group
        rng: Random generator
        n_points: Number of random triples

    Returns:
        Dictionary of residuals and the structure-matrix check
    """
    matrices_ok, matrix_errors = check_structure_matrices(G.U, G.d, G.p)
    associativity = inverse = dilation = 0.0
    identity = G.identity()
    for _ in range(n_points):
        g1, g2, g3 = (_random_point(G, rng) for _ in range(3))
        lam = float(rng.uniform(0.5, 2.0))
        left = group_mul(G, group_mul(G, g1, g2), g3)
        right = group_mul(G, g1, group_mul(G, g2, g3))
        associativity = max(associativity, _distance(left, right))
        inverse = max(inverse, _distance(group_mul(G, g1, group_inv(G, g1)), identity))
        product = dilate(G, lam, group_mul(G, g1, g2))
        dilation = max(dilation, _distance(product, group_mul(G, dilate(G, lam, g1), dilate(G, lam, g2))))
    restored = HTypeGroup.from_dict(G.to_dict())
    return {
        "structure_matrices": matrices_ok,
        "structure_errors": matrix_errors,
        "associativity": associativity,
        "inverse": inverse,
        "dilation_automorphism": dilation,
        "descriptor_roundtrip": all(np.array_equal(a, b) for a, b in zip(G.U, restored.U)),
    }


def run_group_check(config: dict, outdir: Path) -> dict:
    """Build H^d_p and write group_check.json."""
    G = build_group(config["d"], config["p"])
    rng = np.random.default_rng(config["seed"])
    report = group_invariants(G, rng, config["n_points"])
    tolerance = TOLERANCES["group_axioms"]
    acceptance = {
        "structure_matrices": report["structure_matrices"],
        "associativity": report["associativity"] <= tolerance,
        "inverse": report["inverse"] <= tolerance,
        "dilation_automorphism": report["dilation_automorphism"] <= tolerance,
        "descriptor_roundtrip": report["descriptor_roundtrip"],
    }
    result = {"group": G.to_dict(), "N": G.N, "report": report, "acceptance": acceptance}
    write_json(outdir, "group_check", result, artifact_metadata("group-check", config))
    if not all(acceptance.values()):
        raise AcceptanceCheckFailed(f"group invariants failed: {acceptance}")
    return result


def run_transform_roundtrip(config: dict, outdir: Path) -> dict:
    """
    Round-trip random band-limited spectra through the physical grids.

    Writes transform_roundtrip.csv (trial, roundtrip_error, plancherel_gap)
    and transform_roundtrip.json.
    """
    G = build_group(config["d"], config["p"])
    center = PeriodicCenterGrid(G.p, config["L"], config["n_s"])
    lam_lo, lam_hi = band_limits(center, config["band"])
    layout = make_layout(G, config["M"], center, lam_lo, lam_hi)
    rng = np.random.default_rng(config["seed"])
    spectra = [random_band_limited(layout, rng, config["band"]) for _ in range(config["trials"])]

    def trial(S):
        field = inverse_transform(S)
        back = forward_transform(field)
        norm = plancherel_norm(S)
        error = plancherel_norm(back - S) / norm
        gap = abs(field.lr_norm(2) - norm) / norm
        return error, gap

    rows = parallel_map(trial, spectra, config["jobs"])
    frame = pd.DataFrame(
        {
            "trial": np.arange(len(rows)),
            "roundtrip_error": [row[0] for row in rows],
            "plancherel_gap": [row[1] for row in rows],
        }
    )
    acceptance = {
        "roundtrip": bool(frame["roundtrip_error"].max() <= TOLERANCES["roundtrip"]),
        "plancherel": bool(frame["plancherel_gap"].max() <= TOLERANCES["plancherel_gap"]),
    }
    result = {
        "layout": layout.describe(),
        "max_roundtrip_error": float(frame["roundtrip_error"].max()),
        "max_plancherel_gap": float(frame["plancherel_gap"].max()),
        "acceptance": acceptance,
    }
    metadata = artifact_metadata("transform-roundtrip", config)
    write_csv(outdir, "transform_roundtrip", frame, metadata)
    write_json(outdir, "transform_roundtrip", result, metadata)
    logger.info("transform round trip: max error %.3e", result["max_roundtrip_error"])
    if not all(acceptance.values()):
        raise AcceptanceCheckFailed(f"transform calibration failed: {acceptance}")
    return result
