"""Run configuration: every tunable default in one place, overridable from JSON."""
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import SchemaError


@dataclass(frozen=True)
class MappingParams:
    pixel_radius: float = 20.0
    min_features: int = 3
    border_margin: float = 10.0
    dedup_threshold: float = 0.5
    keyframe_spacing: float = 0.1


@dataclass(frozen=True)
class RepeatParams:
    lookahead: float = 1.0
    goal_tolerance: float = 0.05
    heading_deadband_deg: float = 5.0
    v_max: float = 0.5
    omega_max: float = 1.0
    k_lin: float = 1.0
    k_ang: float = 1.0
    step_budget: int = 20000
    dt: float = 0.05

    @property
    def heading_deadband(self):
        return math.radians(self.heading_deadband_deg)


@dataclass(frozen=True)
class BootstrapParams:
    omega: float = 0.5
    min_unique: int = 3
    # run the whole scripted turn rather than stopping at min_unique objects
    full_sweep: bool = True


@dataclass(frozen=True)
class VTRConfig:
    mapping: MappingParams = field(default_factory=MappingParams)
    repeat: RepeatParams = field(default_factory=RepeatParams)
    bootstrap: BootstrapParams = field(default_factory=BootstrapParams)
    # optional overrides applied on top of the world file's own sections
    camera: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _merge(obj, raw, path):
    if not isinstance(raw, dict):
        raise SchemaError(path, "expected object")
    names = {f.name: f for f in fields(obj)}
    updates = {}
    for key, value in raw.items():
        if key not in names:
            raise SchemaError(f"{path}.{key}", "unknown field")
        current = getattr(obj, key)
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise SchemaError(f"{path}.{key}", "expected boolean")
        elif isinstance(current, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"{path}.{key}", "expected number")
            if isinstance(current, int) and not isinstance(current, bool):
                value = int(value) if float(value).is_integer() else value
        updates[key] = value
    return replace(obj, **updates)


def config_from_dict(raw):
    cfg = VTRConfig()
    if not isinstance(raw, dict):
        raise SchemaError("$", "expected object")
    for key, value in raw.items():
        if key in ("mapping", "repeat", "bootstrap"):
            cfg = replace(cfg, **{key: _merge(getattr(cfg, key), value, key)})
        elif key in ("camera", "noise"):
            if not isinstance(value, dict):
                raise SchemaError(key, "expected object")
            cfg = replace(cfg, **{key: dict(value)})
        else:
            raise SchemaError(key, "unknown section")
    return cfg


def load_config(path=None):
    if path is None:
        return VTRConfig()
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return config_from_dict(raw)
