"""Plain-text experiment configuration: ``key = value`` lines onto SimConfig.

The schema is exactly the :class:`~tethersim.sim.SimConfig` field list
(names carry units); unknown keys are rejected, missing keys fall back to
the nominal defaults.  Controller-dependent defaults (outer-loop poles,
trajectory endpoints) are resolved when the controller key differs from the
default one, so a one-line ``controller = gammaAPrime`` config is valid.

Lines starting with ``#`` and blank lines are ignored.  Tuple-valued keys
(pole lists, observer roots) take comma-separated numbers.
"""

from __future__ import annotations

from dataclasses import fields
from importlib import resources

from .sim import ConfigError, SimConfig

# controller-specific defaults applied when the key is absent from the file
_CONTROLLER_DEFAULTS: dict[str, dict[str, str]] = {
    "gammaB": {},
    "gammaAPrime": {
        "poles_y1": "-0.5,-1,-1.5",
        "poles_y2": "-0.5,-1",
        "phi_start_deg": "10",
        "phi_end_deg": "50",
    },
    "gammaA": {
        "poles_y1": "-0.5,-1",
        "poles_y2": "-0.5,-1",
        "phi_start_deg": "10",
        "phi_end_deg": "50",
    },
}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a string map (no coercion yet)."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _coerce(key: str, value: str):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype in ("float", float):
            return float(value)
        if ftype in ("int", int):
            return int(value)
        if ftype in ("str", str):
            return value
        # remaining fields are tuples of floats
        return tuple(float(v) for v in value.split(","))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {value!r}") from exc


def build_sim_config(pairs: dict[str, str]) -> SimConfig:
    """Coerce parsed pairs into a validated SimConfig."""
    unknown = set(pairs) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(pairs)
    controller = merged.get("controller", "gammaB")
    for key, default in _CONTROLLER_DEFAULTS.get(controller, {}).items():
        merged.setdefault(key, default)
    kwargs = {k: _coerce(k, v) for k, v in merged.items()}
    try:
        return SimConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path: str) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return build_sim_config(parse_config_text(text))


def bundled_config_names() -> list[str]:
    root = resources.files("tethersim") / "configs"
    return sorted(p.name.removesuffix(".cfg") for p in root.iterdir() if p.name.endswith(".cfg"))


def load_bundled_config(name: str) -> SimConfig:
    """Load one of the packaged experiment configurations by name."""
    res = resources.files("tethersim") / "configs" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError(
            f"unknown bundled config {name!r}; available: {bundled_config_names()}"
        )
    return build_sim_config(parse_config_text(res.read_text(encoding="utf-8")))


def bundled_config_pairs(name: str) -> dict[str, str]:
    res = resources.files("tethersim") / "configs" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError(
            f"unknown bundled config {name!r}; available: {bundled_config_names()}"
        )
    return parse_config_text(res.read_text(encoding="utf-8"))


def apply_overrides(cfg: SimConfig, overrides: dict[str, str]) -> SimConfig:
    """Re-coerce and apply ``--set key=value`` style overrides."""
    unknown = set(overrides) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg.with_params(**{k: _coerce(k, v) for k, v in overrides.items()})


# convenience scenario constructors used by tests and demos


def scenario_gamma_b(**overrides) -> SimConfig:
    """Nominal (elevation, link force) tracking scenario."""
    return SimConfig().with_params(**overrides)


def scenario_gamma_a_prime(**overrides) -> SimConfig:
    """Nominal (elevation, attitude) tracking scenario."""
    base = build_sim_config({"controller": "gammaAPrime"})
    return base.with_params(**overrides)
