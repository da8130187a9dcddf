"""Admissibility and Strichartz commands for the htype-lab application."""

import logging
from fractions import Fraction
from pathlib import Path

import pandas as pd

from ...modelling.errors import AcceptanceCheckFailed, NoPair
from ...modelling.group_core import build_group
from ...services.dispersive_lab import create_dispersive_lab
from ...services.strichartz_lab import (
    INF,
    as_exponent,
    classify_pair,
    contraction_time_exponent,
    critical_exponents,
    find_admissible,
    format_exponent,
    nonlinearity_regularity,
    strichartz_quotient,
    wellposedness_range,
)
from ..utils.constants import TOLERANCES
from ..utils.helpers import artifact_metadata, write_csv, write_json

logger = logging.getLogger(__name__)


def _pair_row(pair) -> dict:
    row = pair.to_dict()
    return {key: row[key] for key in ("q", "r", "admissible", "endpoint", "sigma")}


def run_admissible(config: dict, outdir: Path) -> dict:
    """Classify (q, r) for centre dimension p; writes admissible.csv."""
    N = None if config.get("d") is None else 2 * config["d"] + 2 * config["p"]
    pair = classify_pair(config["q"], config["r"], config["p"], N)
    metadata = artifact_metadata("admissible", config)
    write_csv(outdir, "admissible", pd.DataFrame([_pair_row(pair)]), metadata)
    result = pair.to_dict()
    write_json(outdir, "admissible", result, metadata)
    return result


def run_exponents(config: dict, outdir: Path) -> dict:
    """Critical exponents, well-posedness range and nonlinearity smoothness."""
    d, p, alpha = config["d"], config["p"], config["alpha"]
    report = critical_exponents(d, p, alpha)
    result = {
        **report.to_dict(),
        "wellposedness": wellposedness_range(d, p, alpha),
        "regularity_at_s_star": nonlinearity_regularity(alpha, report.s_star),
    }
    try:
        pair = find_admissible(d, p, alpha, report.s_star)
        result["critical_pair"] = pair.to_dict()
        result["contraction_time_exponent"] = str(contraction_time_exponent(alpha, pair.q))
    except NoPair as error:
        result["critical_pair"] = None
        result["critical_pair_reason"] = str(error)
    write_json(outdir, "exponents", result, artifact_metadata("exponents", config))
    return result


def _scan_values(s_star: Fraction, N: int, n_values: int) -> list[Fraction]:
    upper = Fraction(N, 2)
    return [s_star + (upper - s_star) * Fraction(k, n_values) for k in range(n_values)]


def run_pair_search(config: dict, outdir: Path) -> dict:
    """Admissible pairs for one regularity or a scan of [s_*, N/2); writes pair_search.csv."""
    d, p, alpha = config["d"], config["p"], config["alpha"]
    report = critical_exponents(d, p, alpha)
    if config.get("s") is not None:
        values = [as_exponent(config["s"])]
    else:
        values = _scan_values(report.s_star, report.N, config["n_values"])

    rows = []
    for s in values:
        try:
            pair = find_admissible(d, p, alpha, s, config.get("delta"))
            rows.append({"s": str(s), **_pair_row(pair)})
        except NoPair as error:
            logger.info("s=%s: %s", s, error)
            rows.append({"s": str(s), "q": None, "r": None, "admissible": False, "endpoint": False, "sigma": None})

    frame = pd.DataFrame(rows, columns=["s", "q", "r", "admissible", "endpoint", "sigma"])
    result = {"s_star": str(report.s_star), "branch": report.branch, "pairs": rows}
    metadata = artifact_metadata("pair-search", config)
    write_csv(outdir, "pair_search", frame, metadata)
    write_json(outdir, "pair_search", result, metadata)
    return result


def run_strichartz_scan(config: dict, outdir: Path) -> dict:
    """Truncated quotient of the evolved kernel Phi_0 with its saturation curve."""
    G = build_group(config["d"], config["p"])
    lab = create_dispersive_lab(G, M=config["M"], t_max=config["T"], jobs=config["jobs"])
    curve = strichartz_quotient(
        lab.kernel(0),
        config["q"],
        config["r"],
        config["T"],
        n_t=config["n_t"],
        exploratory=config["exploratory"],
        radial=lab.sampling,
        jobs=config["jobs"],
    )

    acceptance = {}
    if curve.pair.q != INF and curve.pair.admissible and not curve.exploratory:
        acceptance["saturation"] = curve.last_doubling_change() <= TOLERANCES["saturation"]
    result = {**curve.to_dict(), "acceptance": acceptance}
    frame = pd.DataFrame({"T": curve.horizons, "quotient": curve.saturation_curve})
    metadata = artifact_metadata("strichartz-scan", config)
    write_csv(outdir, "strichartz_scan", frame, metadata)
    write_json(outdir, "strichartz_scan", result, metadata)
    if not all(acceptance.values()):
        raise AcceptanceCheckFailed(
            f"quotient for ({format_exponent(curve.pair.q)}, {format_exponent(curve.pair.r)}) "
            f"has not saturated: last doubling changed it by {curve.last_doubling_change():.2%}"
        )
    return result
