"""Mission config files: flat INI sections mirroring the config dataclasses.

Unknown keys are errors so a typo cannot silently change the physics.
See README for the documented key set.
"""

from __future__ import annotations

import configparser
from dataclasses import replace

from .battery import BatteryParams, BatteryVariant
from .mission import Durations, MissionConfig


class ConfigError(ValueError):
    pass


_MISSION_KEYS = {
    "grid_width": int, "grid_height": int, "base_x": int, "base_y": int,
    "safe_t": float, "p_wsp_c": float, "variant": str,
    "appointment_rule": str, "consumption_mode": str, "quantum_ah": float,
    "max_recharges": int, "safety_margin_base": str, "state_cap": int,
}

_BATTERY_KEYS = {
    "c_new": float, "e_spec": float, "v_high": float, "v_med": float,
    "v_low": float, "soc_hi_threshold": float, "soc_lo_threshold": float,
    "fade_rate": float, "t_normal": float, "t_high": float,
}

_DURATION_KEYS = {
    "take_off": float, "land": float, "transit_per_cell": float,
    "inspect": float, "recharge": float, "wait": float,
}


def load_config(path: str) -> MissionConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from err
    except configparser.Error as err:
        raise ConfigError(f"malformed config {path!r}: {err}") from err

    for section in parser.sections():
        if section not in ("mission", "battery", "durations"):
            raise ConfigError(f"unknown config section [{section}]")

    cfg = MissionConfig()
    try:
        cfg.battery = _apply(parser, "battery", _BATTERY_KEYS, cfg.battery)
        cfg.durations = _apply(parser, "durations", _DURATION_KEYS, cfg.durations)
        if parser.has_section("mission"):
            for key in parser["mission"]:
                if key not in _MISSION_KEYS:
                    raise ConfigError(f"unknown key {key!r} in [mission]")
                raw = parser["mission"][key]
                try:
                    value = _MISSION_KEYS[key](raw)
                except ValueError as err:
                    raise ConfigError(f"[mission] {key}: {err}") from err
                if key == "variant":
                    try:
                        value = BatteryVariant(value)
                    except ValueError as err:
                        raise ConfigError(f"[mission] variant: {err}") from err
                setattr(cfg, key, value)
        cfg.__post_init__()
    except (ValueError, TypeError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err
    return cfg


def _apply(parser, section, keys, obj):
    if not parser.has_section(section):
        return obj
    updates = {}
    for key in parser[section]:
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        try:
            updates[key] = keys[key](parser[section][key])
        except ValueError as err:
            raise ConfigError(f"[{section}] {key}: {err}") from err
    return replace(obj, **updates)


def dump_config(cfg: MissionConfig) -> str:
    """Render a config back to the file format (all keys explicit)."""
    lines = ["[mission]"]
    for key in _MISSION_KEYS:
        value = getattr(cfg, key)
        if key == "variant":
            value = value.value
        lines.append(f"{key} = {value}")
    lines.append("")
    lines.append("[battery]")
    for key in _BATTERY_KEYS:
        lines.append(f"{key} = {getattr(cfg.battery, key)}")
    lines.append("")
    lines.append("[durations]")
    for key in _DURATION_KEYS:
        lines.append(f"{key} = {getattr(cfg.durations, key)}")
    return "\n".join(lines) + "\n"
