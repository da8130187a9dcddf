"""Helper utilities for the htype-lab application."""

import hashlib
import json
import logging
import math
import os
from collections.abc import Callable
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from ...modelling.errors import EXIT_OK, ConfigInvalid, HTypeLabError
from ...modelling.laguerre_spherical import SpectralLayout, SphericalSpectrum, plancherel_norm
from ..utils.constants import APP_NAME, DEFAULT_OUTDIR, LOG_FORMAT, OUTDIR_ENV, TOLERANCES, VERSION

logger = logging.getLogger(__name__)


def setup_logging(verbosity: int = 0) -> None:
    """Install one stream handler on the root logger (-v INFO, -vv DEBUG)."""
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)


def _json_default(value: Any):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _finite(value: Any):
    """Replace non-finite floats by their text so the JSON stays standard."""
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else "-inf" if value < 0 else "nan"
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    return value


def canonical_json(payload: Any, indent: Optional[int] = None) -> str:
    normalised = json.loads(json.dumps(payload, default=_json_default))
    return json.dumps(_finite(normalised), sort_keys=True, indent=indent, allow_nan=False)


def config_hash(command: str, config: dict) -> str:
    """SHA-256 of the canonical JSON of the validated config."""
    text = canonical_json({"command": command, "config": config})
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def artifact_metadata(command: str, config: dict) -> dict:
    return {
        "application": APP_NAME,
        "version": VERSION,
        "command": command,
        "config": config,
        "config_hash": config_hash(command, config),
        "tolerances": TOLERANCES,
    }


def resolve_outdir(flag: Optional[str] = None) -> Path:
    """Artifact directory: the flag, then HTYPE_LAB_OUT, then ./htype_lab_out."""
    path = Path(flag or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(outdir: Path, name: str, payload: dict, metadata: dict) -> Path:
    path = Path(outdir) / f"{name}.json"
    path.write_text(canonical_json({"metadata": metadata, "result": payload}, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def write_csv(outdir: Path, name: str, frame: pd.DataFrame, metadata: dict) -> Path:
    """CSV preceded by '#' lines carrying the config hash and version."""
    path = Path(outdir) / f"{name}.csv"
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# {APP_NAME} {metadata['version']} {metadata['command']}\n")
        handle.write(f"# config_hash={metadata['config_hash']}\n")
        frame.to_csv(handle, index=False, float_format="%.12g")
    logger.info("wrote %s", path)
    return path


def load_config_file(path: Optional[str]) -> dict:
    """Read a JSON config file; it must hold one object."""
    if not path:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as error:
        raise ConfigInvalid("config", f"cannot read {path}: {error}") from error
    if not isinstance(payload, dict):
        raise ConfigInvalid("config", f"{path} must contain a JSON object")
    return payload


def random_band_limited(
    layout: SpectralLayout, rng: np.random.Generator, band: int, norm: Optional[float] = None
) -> SphericalSpectrum:
    """
    Random coefficients on m <= M and lattice indices 0 < |k|_inf <= band.

    Laguerre indices are damped by 2^{-m} so every trial keeps most mass in
    low m.
    """
    center = layout.center
    k = np.rint(center.lam_points * center.L / (2 * np.pi))
    inside = np.max(np.abs(k), axis=-1) <= band
    shape = layout.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    damping = 2.0 ** (-np.arange(layout.M + 1))[:, None]
    S = SphericalSpectrum(layout, np.where(inside, noise * damping, 0.0))
    if norm is not None:
        S = S * (norm / plancherel_norm(S))
    return S


def band_limits(center, band: int) -> tuple[float, float]:
    """Smallest and largest nonzero |lambda| with |k|_inf <= band."""
    step = 2 * np.pi / center.L
    return step, step * band * np.sqrt(center.p)


def execute_command(func: Callable[..., dict], *args, **kwargs) -> tuple[int, Optional[dict], Optional[str]]:
    """
    Run a command and map domain errors to exit codes.

    Returns:
        Tuple of (exit_code, result, error_message)
    """
    try:
        result = func(*args, **kwargs)
        return EXIT_OK, result, None
    except HTypeLabError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return error.exit_code, None, f"{type(error).__name__}: {error}"
