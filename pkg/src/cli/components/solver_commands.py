"""Nonlinear solver command for the htype-lab application."""

import logging
from pathlib import Path

import numpy as np

from ...modelling.errors import AcceptanceCheckFailed
from ...modelling.grids import PeriodicCenterGrid
from ...modelling.group_core import build_group
from ...modelling.laguerre_spherical import make_layout, save_spectrum
from ...services.nls_solver import NLSParams, linear_xs_ratio, mass_drift, picard_solve
from ..utils.constants import TOLERANCES
from ..utils.helpers import artifact_metadata, random_band_limited, write_csv, write_json

logger = logging.getLogger(__name__)


def run_solve_nls(config: dict, outdir: Path) -> dict:
    """
    Picard iteration from random band-limited data of the given L^2 norm.

    Writes solve_nls.csv (iteration, d_Xs, d_X0, mass, T), solve_nls.json and
    one spectrum file per time node under solve_nls_states/.
    """
    G = build_group(config["d"], config["p"])
    mu = complex(*config["mu"])
    params = NLSParams.create(
        G,
        config["alpha"],
        mu,
        config["s"],
        config["T"],
        n_t=config["n_t"],
        delta=config.get("delta"),
        allow_fractional=config["allow_fractional"],
    )
    layout = make_layout(G, config["M"], PeriodicCenterGrid(G.p, config["L"], config["n_s"]))
    rng = np.random.default_rng(config["seed"])
    u0 = random_band_limited(layout, rng, config["band"], norm=config["amplitude"])

    path = picard_solve(u0, params, n_iter=config["n_iter"], tol=TOLERANCES["picard"], jobs=config["jobs"])
    metadata = artifact_metadata("solve-nls", config)
    states_dir = Path(outdir) / "solve_nls_states"
    states_dir.mkdir(parents=True, exist_ok=True)
    for k, state in enumerate(path.states):
        save_spectrum(state, states_dir / f"u_{k:04d}.spec")

    ratios = path.contraction_ratios()
    drift = mass_drift(path)
    acceptance = {
        "converged": path.converged,
        "contraction": bool(np.all(ratios <= TOLERANCES["contraction_ratio"])),
        "mass_drift": drift <= TOLERANCES["mass_drift"],
    }
    result = {
        "params": params.to_dict(),
        "layout": layout.describe(),
        "iterations": len(path.diagnostics),
        "converged": path.converged,
        "mass_drift": drift,
        "contraction_ratios": ratios.tolist(),
        "linear_xs_ratio": linear_xs_ratio(u0, params, jobs=config["jobs"]),
        "acceptance": acceptance,
    }
    write_csv(outdir, "solve_nls", path.to_frame(), metadata)
    write_json(outdir, "solve_nls", result, metadata)
    if not all(acceptance.values()):
        failed = ", ".join(key for key, passed in acceptance.items() if not passed)
        raise AcceptanceCheckFailed(f"Picard run failed {failed} after {len(path.diagnostics)} iterations")
    return result
