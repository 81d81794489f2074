"""Flat INI-style experiment configs.

Sections are `[channel] [code] [protocol] [sweep] [verify]` with `key = value`
lines.  Inside `[channel]`, the two transition matrices appear as blocks of
whitespace-separated decimal rows under `main:` and `degrading:` headers.
Parse errors always name the offending line.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import Dmc, WiretapChannelSpec
from .errors import ConfigError, KeybufError
from .protocol import ProtocolConfig

SWEEP_VARIABLES = ("M", "n", "N1", "num_slots", "eve_noise")


@dataclass
class ExperimentConfig:
    channels: WiretapChannelSpec | None = None
    grid_step: float = 1e-3
    protocol: ProtocolConfig | None = None
    sweep_variable: str | None = None
    sweep_values: list = field(default_factory=list)
    verify_instance: str = "toy"  # "toy" | "config"
    shielded_slots: tuple = ()


def _parse_sections(text: str):
    """Split into sections, keeping (line_number, line) pairs."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.strip().startswith("[") and line.strip().endswith("]"):
            current = line.strip()[1:-1]
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", lineno)
            sections[current] = []
            continue
        if current is None:
            raise ConfigError(f"content before any [section]: {line.strip()!r}", lineno)
        sections[current].append((lineno, line.strip()))
    return sections


def _parse_channel(lines) -> tuple[WiretapChannelSpec, float]:
    matrices = {}
    grid_step = 1e-3
    block = None
    for lineno, line in lines:
        if line in ("main:", "degrading:"):
            block = line[:-1]
            matrices[block] = []
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            if key != "grid_step":
                raise ConfigError(f"unknown channel key {key!r}", lineno)
            grid_step = _parse_float(value, lineno)
            block = None
            continue
        if block is None:
            raise ConfigError(f"matrix row outside main:/degrading: block", lineno)
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError:
            raise ConfigError(f"malformed matrix row {line!r}", lineno) from None
        matrices[block].append((lineno, row))
    for name in ("main", "degrading"):
        if name not in matrices or not matrices[name]:
            raise ConfigError(f"[channel] is missing the {name}: matrix")
    built = {}
    for name, rows in matrices.items():
        widths = {len(r) for _, r in rows}
        if len(widths) != 1:
            raise ConfigError(
                f"{name}: rows have inconsistent lengths", rows[-1][0]
            )
        try:
            built[name] = Dmc(np.array([r for _, r in rows]))
        except KeybufError as exc:
            raise ConfigError(f"{name}: {exc}", rows[0][0]) from None
    try:
        spec = WiretapChannelSpec(main=built["main"], degrading=built["degrading"])
    except KeybufError as exc:
        raise ConfigError(str(exc)) from None
    return spec, grid_step


def _parse_float(value: str, lineno: int) -> float:
    try:
        return float(value.strip())
    except ValueError:
        raise ConfigError(f"expected a number, got {value.strip()!r}", lineno) from None


def _parse_int(value: str, lineno: int) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {value.strip()!r}", lineno) from None


def _parse_bool(value: str, lineno: int) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected true/false, got {value.strip()!r}", lineno)


def _kv(lines):
    for lineno, line in lines:
        if "=" not in line:
            raise ConfigError(f"expected `key = value`, got {line!r}", lineno)
        key, _, value = line.partition("=")
        yield lineno, key.strip(), value.strip()


_PROTOCOL_INTS = {
    "n",
    "M",
    "N1",
    "num_slots",
    "C_over_Rs",
    "message_bits",
    "seed",
    "codewords_per_bin",
    "otp_repeats",
}


def _parse_protocol(proto_lines, code_lines) -> ProtocolConfig:
    kwargs = {}
    for lineno, key, value in list(_kv(proto_lines)) + list(_kv(code_lines)):
        if key in _PROTOCOL_INTS:
            kwargs[key] = _parse_int(value, lineno)
        elif key == "buffer_capacity":
            kwargs[key] = None if value == "unbounded" else _parse_int(value, lineno)
        elif key == "genie_mode":
            kwargs[key] = _parse_bool(value, lineno)
        elif key == "input_dist":
            if value not in ("secrecy", "main", "uniform"):
                raise ConfigError(f"unknown input_dist {value!r}", lineno)
            kwargs[key] = value
        elif key == "grid_step":
            kwargs[key] = _parse_float(value, lineno)
        else:
            raise ConfigError(f"unknown protocol key {key!r}", lineno)
    try:
        return ProtocolConfig(**kwargs)
    except KeybufError as exc:
        raise ConfigError(str(exc)) from None


def load_experiment(path) -> ExperimentConfig:
    with open(path) as fh:
        text = fh.read()
    sections = _parse_sections(text)
    known = {"channel", "code", "protocol", "sweep", "verify"}
    for name in sections:
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")
    config = ExperimentConfig()
    if "channel" in sections:
        config.channels, config.grid_step = _parse_channel(sections["channel"])
    if "protocol" in sections or "code" in sections:
        config.protocol = _parse_protocol(
            sections.get("protocol", []), sections.get("code", [])
        )
    if "sweep" in sections:
        variable = None
        tokens = []
        values_line = None
        for lineno, key, value in _kv(sections["sweep"]):
            if key == "variable":
                if value not in SWEEP_VARIABLES:
                    raise ConfigError(
                        f"sweep variable must be one of {SWEEP_VARIABLES}", lineno
                    )
                variable = value
            elif key == "values":
                tokens = value.split()
                values_line = lineno
                if not tokens:
                    raise ConfigError("sweep values list is empty", lineno)
            else:
                raise ConfigError(f"unknown sweep key {key!r}", lineno)
        if variable is None or not tokens:
            raise ConfigError("[sweep] needs both `variable` and `values`")
        try:
            if variable == "eve_noise":
                values = [float(t) for t in tokens]
            else:
                values = [int(t) for t in tokens]
        except ValueError:
            raise ConfigError("malformed sweep values", values_line) from None
        config.sweep_variable = variable
        config.sweep_values = values
    if "verify" in sections:
        for lineno, key, value in _kv(sections["verify"]):
            if key == "instance":
                if value not in ("toy", "config"):
                    raise ConfigError("verify instance must be `toy` or `config`", lineno)
                config.verify_instance = value
            elif key == "shielded_slots":
                config.shielded_slots = tuple(
                    _parse_int(tok, lineno) for tok in value.split()
                )
            else:
                raise ConfigError(f"unknown verify key {key!r}", lineno)
    return config
