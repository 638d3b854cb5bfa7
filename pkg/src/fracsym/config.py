"""Scenario files: bracketed sections of ``key = value`` lines with a fixed schema."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence


class ConfigError(ValueError):
    """Invalid scenario: unknown key, bad value or failed validation."""


def parse_float(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def parse_floats(text: str) -> tuple[float, ...]:
    return tuple(parse_float(t) for t in text.replace(";", ",").split(",") if t.strip())


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_words(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


_F = parse_float
_I = int
_S = str.strip
_L = parse_floats
_B = parse_bool
_W = parse_words

_NONLIN = {"kind": (_S, "zero"), "a": (_F, 0.0), "b": (_F, 0.0), "p": (_F, 2.0), "q": (_F, 0.5),
           "coef": (_F, 1.0)}
_SOURCE = {"kind": (_S, "zero"), "value": (_F, 1.0), "radii": (_L, ()), "values": (_L, ()),
           "axis": (_I, 0), "center": (_L, ())}


def _prefixed(prefix: str, table: dict) -> dict:
    out = {}
    for k, v in table.items():
        out[prefix if k == "kind" else f"{prefix}_{k}"] = v
    return out


SCHEMA: dict[str, dict[str, tuple[Callable, object]]] = {
    "grid": {"dim": (_I, 2), "h": (_F, 1 / 32), "pad": (_I, 2)},
    "domain": {"shape": (_S, "ball"), "radius": (_F, 1.0), "center": (_L, ()), "lo": (_L, ()), "hi": (_L, ()),
               "half_length": (_F, 0.5)},
    "kernel": {"type": (_S, "riesz"), "alpha": (_F, 0.5), "mu": (_F, 1.0), "alpha1": (_F, 0.5),
               "alpha2": (_F, 0.5), "r": (_F, 1.0), "theta": (_S, "")},
    "problem": {**_prefixed("f", _NONLIN), **_prefixed("g", _SOURCE)},
    "system": {"alpha1": (_F, 0.5), "alpha2": (_F, 0.5), "mode": (_S, "jacobi"),
               **_prefixed("f1", _NONLIN), **_prefixed("f2", _NONLIN),
               **_prefixed("g1", _SOURCE), **_prefixed("g2", _SOURCE)},
    "wholespace": {**_prefixed("f", _NONLIN), "radii": (_L, (4.0, 8.0)), "seed_amplitude": (_F, 1.0),
                   "seed_width": (_F, 1.5), "agreement_tol": (_F, 1e-2), "continuation_steps": (_I, 10),
                   "window": (_L, (0.5, 0.85))},
    "solver": {"tol": (_F, 1e-10), "max_iter": (_I, 50), "damping": (_F, 1.0), "fallback": (_S, "picard"),
               "initial": (_S, "zero"), "positivity_floor": (_F, 1e-8)},
    "diagnostics": {"checks": (_W, ()), "lambdas": (_L, ()), "axis": (_I, 0), "c_tol": (_F, 0.1),
                    "symmetry_tol": (_F, 2e-2), "gamma": (_F, 2.0), "scan_target": (_S, "solution"),
                    "bumps": (_I, 10), "seed": (_I, 0), "abp_radii": (_L, (0.25, 0.5, 1.0)),
                    "ratio_spread": (_F, 3.0), "slope_tol": (_F, 0.25), "phi_bound": (_F, 1.0), "probe_radii": (_L, (0.125, 0.25, 0.375, 0.5)),
                    "h_list": (_L, (1 / 64, 1 / 128, 1 / 256)), "min_order": (_F, 1.0),
                    "support_radius": (_F, 6.0), "eval_radius": (_F, 2.0), "r_min": (_F, 0.05),
                    "r_max": (_F, 4.0), "samples": (_I, 200)},
    "output": {"dir": (_S, "out"), "binary": (_B, False)},
}

SECTION_ORDER = list(SCHEMA)


@dataclass
class ScenarioConfig:
    """Raw string values per section (only keys that were given) plus typed access."""

    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def has(self, section: str) -> bool:
        return section in self.raw

    def get(self, section: str, key: str):
        parser, default = SCHEMA[section][key]
        if section in self.raw and key in self.raw[section]:
            text = self.raw[section][key]
            try:
                return parser(text)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
        return default

    def resolved(self) -> dict[str, dict[str, object]]:
        return {s: {k: self.get(s, k) for k in sorted(self.raw[s])} for s in SECTION_ORDER if s in self.raw}

    def echo(self) -> list[str]:
        """INI text of the given keys in canonical order (re-parses to an equal config)."""
        lines = []
        for s in SECTION_ORDER:
            if s not in self.raw:
                continue
            lines.append(f"[{s}]")
            for k in sorted(self.raw[s]):
                lines.append(f"{k} = {self.raw[s][k]}")
        return lines


def _validate_keys(raw: dict[str, dict[str, str]]) -> None:
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for k in keys:
            if k not in SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {k!r}")


def parse_text(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario file: {exc}") from exc
    raw = {s: {k: v.strip() for k, v in cp.items(s)} for s in cp.sections()}
    _validate_keys(raw)
    cfg = ScenarioConfig(raw)
    for s in raw:
        for k in raw[s]:
            cfg.get(s, k)
    return cfg


def load(path: str | Path | None, overrides: Sequence[str] = ()) -> ScenarioConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_text(text)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        _validate_keys({section: {key: value}})
        cfg.raw.setdefault(section, {})[key] = value.strip()
        cfg.get(section, key)
    return cfg


def from_echo(lines: Sequence[str]) -> ScenarioConfig:
    """Rebuild a config from echo lines, with or without the ``# `` prefix."""
    body = [ln[2:] if ln.startswith("# ") else ln.lstrip("#") for ln in lines]
    return parse_text("\n".join(body))
