"""Configuration validation utilities for the htype-lab application."""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, Optional

from ...modelling.errors import ConfigInvalid
from ...services.strichartz_lab import as_exponent, format_exponent
from ..utils.constants import DEFAULTS

Rule = Callable[[Any], Optional[str]]


@dataclass(frozen=True)
class ConfigField:
    """One config key: how to coerce it, which values are allowed, how its flag looks."""

    coerce: Callable[[Any], Any]
    rule: Optional[Rule] = None
    help: str = ""
    kind: str = "scalar"  # scalar, flag or list


def as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"1", "true", "yes", "on"}:
        return True
    if text in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def as_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("booleans are not integers")
    number = float(value)
    if number != int(number):
        raise ValueError(f"not an integer: {value!r}")
    return int(number)


def as_float_list(value) -> list[float]:
    items = value if isinstance(value, (list, tuple)) else str(value).replace(",", " ").split()
    return [float(item) for item in items]


def as_exponent_text(value) -> str:
    """Canonical text of an exact exponent: '7/2', '4', 'inf'."""
    return format_exponent(as_exponent(value))


def at_least(bound) -> Rule:
    return lambda value: None if value >= bound else f"must be at least {bound}"


def positive(value) -> Optional[str]:
    return None if value > 0 else "must be positive"


def between(lo, hi) -> Rule:
    return lambda value: None if lo <= value <= hi else f"must lie in [{lo}, {hi}]"


def exponent_at_least(bound) -> Rule:
    return lambda value: None if as_exponent(value) >= bound else f"must be at least {bound}"


def alpha_rule(value) -> Optional[str]:
    alpha = as_exponent(value)
    return None if alpha != float("inf") and alpha > 1 else "must be a finite number > 1"


def pair_of_floats(value) -> Optional[str]:
    return None if len(value) == 2 else "must be [re, im]"


def nonempty(value) -> Optional[str]:
    return None if len(value) > 0 else "must not be empty"


_D = ConfigField(as_int, at_least(1), "half horizontal dimension d")
_P = ConfigField(as_int, between(1, 7), "centre dimension p")
_M = ConfigField(as_int, at_least(0), "Laguerre cutoff M")
_JOBS = ConfigField(as_int, at_least(1), "parallel workers for independent time nodes")
_SEED = ConfigField(as_int, at_least(0), "seed of numpy.random.default_rng")
_ALPHA = ConfigField(as_exponent_text, alpha_rule, "nonlinearity degree alpha (exact, e.g. 3 or 7/3)")
_EXPONENT = ConfigField(as_exponent_text, exponent_at_least(2), "Lebesgue exponent in [2, inf]")

SCHEMAS: dict[str, dict[str, ConfigField]] = {
    "group-check": {
        "d": _D,
        "p": _P,
        "n_points": ConfigField(as_int, at_least(1), "random points for the group-law checks"),
        "seed": _SEED,
    },
    "transform-roundtrip": {
        "d": _D,
        "p": _P,
        "M": _M,
        "n_s": ConfigField(as_int, at_least(2), "centre samples per axis"),
        "L": ConfigField(float, positive, "centre box side"),
        "band": ConfigField(as_int, at_least(1), "largest lattice index |k|_inf carried by the data"),
        "trials": ConfigField(as_int, at_least(1), "random spectra"),
        "seed": _SEED,
        "jobs": _JOBS,
    },
    "dispersive-fit": {
        "d": _D,
        "p": ConfigField(as_int, between(2, 7), "centre dimension p (>= 2)"),
        "M": _M,
        "t_max": ConfigField(float, at_least(1.0), "largest time of the fit"),
        "n_times": ConfigField(as_int, at_least(3), "geometric times in [1, t_max]"),
        "jobs": _JOBS,
    },
    "scaling-check": {
        "d": _D,
        "p": _P,
        "M": _M,
        "j_max": ConfigField(as_int, between(0, 4), "dyadic exponents j in [-j_max, j_max]"),
        "times": ConfigField(as_float_list, nonempty, "times t", kind="list"),
        "jobs": _JOBS,
    },
    "transport-demo": {
        "d": _D,
        "m0": ConfigField(as_int, at_least(0), "Laguerre index carrying the data"),
        "t_max": ConfigField(float, positive, "largest time"),
        "n_times": ConfigField(as_int, at_least(2), "uniform times in [0, t_max]"),
        "L": ConfigField(float, positive, "centre box side"),
        "n_s": ConfigField(as_int, at_least(2), "centre samples"),
        "lambda0": ConfigField(float, positive, "centre of the lambda bump"),
        "width": ConfigField(float, positive, "half width of the lambda bump"),
        "jobs": _JOBS,
    },
    "admissible": {
        "p": _P,
        "q": _EXPONENT,
        "r": _EXPONENT,
        "d": ConfigField(as_int, at_least(1), "half horizontal dimension, for the scaling loss"),
    },
    "exponents": {"d": _D, "p": _P, "alpha": _ALPHA},
    "pair-search": {
        "d": _D,
        "p": _P,
        "alpha": _ALPHA,
        "s": ConfigField(as_exponent_text, None, "single regularity (default: scan [s_*, N/2))"),
        "delta": ConfigField(as_exponent_text, None, "slack delta (default (s - s_*)/2)"),
        "n_values": ConfigField(as_int, at_least(1), "regularities in the scan"),
    },
    "strichartz-scan": {
        "d": _D,
        "p": ConfigField(as_int, between(2, 7), "centre dimension p (>= 2)"),
        "M": _M,
        "q": _EXPONENT,
        "r": _EXPONENT,
        "T": ConfigField(float, positive, "time horizon"),
        "n_t": ConfigField(as_int, at_least(1), "geometric time panels"),
        "exploratory": ConfigField(as_bool, None, "allow inadmissible pairs", kind="flag"),
        "jobs": _JOBS,
    },
    "solve-nls": {
        "d": _D,
        "p": ConfigField(as_int, between(2, 7), "centre dimension p (>= 2)"),
        "alpha": _ALPHA,
        "mu": ConfigField(as_float_list, pair_of_floats, "coupling constant as re im", kind="list"),
        "s": ConfigField(as_exponent_text, None, "regularity s >= s_*"),
        "delta": ConfigField(as_exponent_text, None, "slack delta for the admissible pair"),
        "T": ConfigField(float, positive, "time horizon"),
        "n_t": ConfigField(as_int, at_least(1), "uniform time steps"),
        "M": _M,
        "L": ConfigField(float, positive, "centre box side"),
        "n_s": ConfigField(as_int, at_least(2), "centre samples per axis"),
        "band": ConfigField(as_int, at_least(1), "largest lattice index |k|_inf of the data"),
        "amplitude": ConfigField(float, positive, "L^2 norm of the initial data"),
        "n_iter": ConfigField(as_int, at_least(1), "maximum Picard iterations"),
        "allow_fractional": ConfigField(as_bool, None, "accept alpha that is not an odd integer", kind="flag"),
        "seed": _SEED,
        "jobs": _JOBS,
    },
    "report": {},
}


def find_errors(command: str, config: dict) -> tuple[dict, list[tuple[str, str]]]:
    """Coerce every key of a config and collect (key, message) problems."""
    schema = SCHEMAS[command]
    coerced, errors = {}, []
    for key, value in config.items():
        if key not in schema:
            errors.append((key, "unknown key"))
            continue
        if value is None:
            coerced[key] = None
            continue
        spec = schema[key]
        try:
            coerced[key] = spec.coerce(value)
        except (TypeError, ValueError, ZeroDivisionError) as error:
            errors.append((key, f"invalid value {value!r} ({error})"))
            continue
        if spec.rule is not None:
            message = spec.rule(coerced[key])
            if message:
                errors.append((key, message))
    return coerced, errors


def validate_config(command: str, config: dict) -> tuple[bool, list[str]]:
    """
    Validate a command configuration.

    Args:
        command: Sub-command name
        config: Raw configuration

    Returns:
        Tuple of (is_valid, error_messages)
    """
    _, errors = find_errors(command, config)
    return len(errors) == 0, [f"{key}: {message}" for key, message in errors]


def build_config(command: str, file_config: Optional[dict] = None, flags: Optional[dict] = None) -> dict:
    """
    Merge defaults, a JSON config and command-line flags (flags win) and validate.

    Raises:
        ConfigInvalid: Naming the first offending key
    """
    merged = dict(DEFAULTS[command])
    merged.update(file_config or {})
    merged.update({key: value for key, value in (flags or {}).items() if value is not None})
    coerced, errors = find_errors(command, merged)
    if errors:
        key = errors[0][0]
        raise ConfigInvalid(key, "; ".join(f"{k}: {m}" for k, m in errors) if len(errors) > 1 else errors[0][1])
    return coerced
