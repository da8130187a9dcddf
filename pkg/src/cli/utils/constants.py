"""Constants and configuration for the htype-lab application."""

import math

# Project information
APP_NAME = "htype-lab"
VERSION = "0.1.0"
DESCRIPTION = (
    "Numerical laboratory for Schrödinger evolution on H-type groups: group checks, "
    "spherical transform calibration, dispersive and Strichartz ratios, Picard solver."
)

# Output
OUTDIR_ENV = "HTYPE_LAB_OUT"
DEFAULT_OUTDIR = "htype_lab_out"
REPORT_MARKDOWN = "report.md"
REPORT_CSV = "report.csv"

# Logging
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Acceptance thresholds recorded in every artifact
TOLERANCES = {
    "group_axioms": 1e-12,
    "roundtrip": 1e-6,
    "plancherel_gap": 1e-4,
    "decay_exponent_p2": 0.15,
    "decay_exponent": 0.2,
    "decay_r_squared": 0.98,
    "kernel_scaling": 1e-8,
    "transport_drift": 1e-6,
    "transport_slope": 0.01,
    "saturation": 0.01,
    "picard": 1e-10,
    "contraction_ratio": 0.5,
    "mass_drift": 1e-6,
}

# Default configuration per command
DEFAULTS = {
    "group-check": {"d": 2, "p": 3, "n_points": 20, "seed": 0},
    "transform-roundtrip": {
        "d": 2,
        "p": 2,
        "M": 32,
        "n_s": 64,
        "L": 2 * math.pi,
        "band": 4,
        "trials": 20,
        "seed": 0,
        "jobs": 1,
    },
    "dispersive-fit": {"d": 2, "p": 2, "M": 8, "t_max": 100.0, "n_times": 13, "jobs": 1},
    "scaling-check": {"d": 2, "p": 2, "M": 8, "j_max": 2, "times": [0.25, 1.0, 4.0], "jobs": 1},
    "transport-demo": {
        "d": 1,
        "m0": 1,
        "t_max": 10.0,
        "n_times": 11,
        "L": 256.0,
        "n_s": 512,
        "lambda0": 2.0,
        "width": 1.0,
        "jobs": 1,
    },
    "admissible": {"p": 3, "q": "2", "r": "inf", "d": None},
    "exponents": {"d": 2, "p": 2, "alpha": "3"},
    "pair-search": {"d": 2, "p": 2, "alpha": "3", "s": None, "delta": None, "n_values": 8},
    "strichartz-scan": {
        "d": 2,
        "p": 2,
        "M": 8,
        "q": "4",
        "r": "inf",
        "T": 32.0,
        "n_t": 6,
        "exploratory": False,
        "jobs": 1,
    },
    "solve-nls": {
        "d": 2,
        "p": 2,
        "alpha": "3",
        "mu": [1.0, 0.0],
        "s": "7/2",
        "delta": None,
        "T": 0.05,
        "n_t": 8,
        "M": 4,
        "L": 2 * math.pi,
        "n_s": 16,
        "band": 2,
        "amplitude": 0.1,
        "n_iter": 30,
        "allow_fractional": False,
        "seed": 0,
        "jobs": 1,
    },
    "report": {},
}

# Command help
COMMAND_HELP = {
    "group-check": "Build H^d_p and verify the structure-matrix and group-law invariants.",
    "transform-roundtrip": "Calibrate the spherical transform on random band-limited spectra.",
    "dispersive-fit": "Fit the sup-norm decay exponent of the evolved Littlewood-Paley kernel.",
    "scaling-check": "Check the dyadic scaling identity of evolved kernels.",
    "transport-demo": "Evolve single-index data on p = 1 and measure drift and centre shift.",
    "admissible": "Classify one exponent pair (q, r) for centre dimension p.",
    "exponents": "Critical exponents s_c, s_* and the well-posedness range for |u|^(alpha-1) u.",
    "pair-search": "Admissible pairs with scaling loss s_* for a range of regularities.",
    "strichartz-scan": "Truncated Strichartz quotient of the evolved kernel with its saturation curve.",
    "solve-nls": "Picard iteration of the Duhamel map with contraction and mass diagnostics.",
    "report": "Aggregate every JSON summary in the output directory.",
}

# CSV columns per command, shown in --help
CSV_COLUMNS = {
    "transform-roundtrip": ["trial", "roundtrip_error", "plancherel_gap"],
    "dispersive-fit": ["t", "sup_norm", "bound_value", "ratio"],
    "scaling-check": ["j", "t", "residual"],
    "transport-demo": ["t", "sup_norm", "shift"],
    "admissible": ["q", "r", "admissible", "endpoint", "sigma"],
    "pair-search": ["s", "q", "r", "admissible", "endpoint", "sigma"],
    "strichartz-scan": ["T", "quotient"],
    "solve-nls": ["iteration", "d_Xs", "d_X0", "mass", "T"],
    "report": ["artifact", "command", "config_hash", "passed"],
}
