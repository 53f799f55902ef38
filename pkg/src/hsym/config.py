"""Experiment configuration: strict TOML parsing and a canonical hash.

Every key is checked against a per-section schema and unknown keys are
rejected outright, so a typo cannot silently fall back to a default.
The fully resolved configuration (defaults applied, overrides folded
in) is hashed canonically; the hash names the output directory and is
stamped into every manifest, which is what makes reruns and resumes
comparable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ConfigError(Exception):
    """Configuration file or override rejected."""


MODEL_KINDS = (
    "spin-su2-floquet",
    "spin-su2-random",
    "spin-u1-floquet",
    "spin-u1-random",
    "spin-recursive",
    "clock-kicked",
    "hoti",
)

INITIAL_KINDS = ("haar-sector", "clock-product", "hoti-edge", "hoti-eigenstate")

OBSERVABLE_SETS = ("spin", "clock", "hoti", "none")

_MODEL_KEYS = {
    "spin-su2-floquet": {"kind", "L", "J", "J_prime", "delta_x", "epsilon", "boundary"},
    "spin-su2-random": {"kind", "L", "J", "J_prime", "delta_x", "epsilon", "boundary"},
    "spin-u1-floquet": {"kind", "L", "J", "delta_x", "epsilon", "boundary"},
    "spin-u1-random": {"kind", "L", "J", "delta_x", "epsilon", "boundary"},
    "spin-recursive": {"kind", "L", "J", "J_prime", "delta_x", "epsilon", "boundary"},
    "clock-kicked": {
        "kind", "L", "j_range", "g_range", "h_range", "b_range", "eta", "phi",
        "boundary",
    },
    "hoti": {"kind", "L", "M", "J", "delta0", "delta1", "delta2", "broken"},
}

_SECTION_KEYS = {
    "model": None,  # per-kind, see _MODEL_KEYS
    "sequence": {"T", "order"},
    "evolution": {
        "n_periods_max", "realizations", "seed", "method", "precision",
        "samples_per_decade", "sample_times",
    },
    "observables": {"set", "participation_sectors"},
    "initial": {"kind", "n_down", "theta", "n", "index"},
    "output": {"dir"},
}

_DEFAULT_INITIAL = {
    "spin-su2-floquet": "haar-sector",
    "spin-su2-random": "haar-sector",
    "spin-u1-floquet": "haar-sector",
    "spin-u1-random": "haar-sector",
    "spin-recursive": "haar-sector",
    "clock-kicked": "clock-product",
    "hoti": "hoti-edge",
}

_DEFAULT_OBSERVABLES = {
    "spin-su2-floquet": "spin",
    "spin-su2-random": "spin",
    "spin-u1-floquet": "spin",
    "spin-u1-random": "spin",
    "spin-recursive": "spin",
    "clock-kicked": "clock",
    "hoti": "hoti",
}


def _require(table, section, key, kind=None):
    if key not in table:
        raise ConfigError(f"[{section}] is missing required key {key!r}")
    value = table[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"[{section}] {key} has wrong type {type(value).__name__}")
    return value


def _reject_unknown(table, section, allowed):
    extra = set(table) - set(allowed)
    if extra:
        raise ConfigError(
            f"[{section}] has unknown keys: {', '.join(sorted(extra))}"
        )


def _as_float_list(value, section, key):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list) and value and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return [float(v) for v in value]
    raise ConfigError(f"[{section}] {key} must be a number or list of numbers")


def _as_pair(value, section, key):
    vals = _as_float_list(value, section, key)
    if len(vals) != 2:
        raise ConfigError(f"[{section}] {key} must be a two-element range")
    return (vals[0], vals[1])


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment description."""

    model: dict
    sequence: dict
    evolution: dict
    observables: dict
    initial: dict
    output: dict

    @property
    def kind(self):
        return self.model["kind"]

    @property
    def periods(self):
        return list(self.sequence["T"])

    def resolved(self):
        return {
            "model": self.model,
            "sequence": self.sequence,
            "evolution": self.evolution,
            "observables": self.observables,
            "initial": self.initial,
            "output": self.output,
        }

    def canonical_json(self):
        return json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]

    @property
    def output_root(self):
        return Path(self.output["dir"]) / self.config_hash


def parse_overrides(pairs):
    """``section.key=value`` strings to a nested override mapping."""
    out = {}
    for raw in pairs or ():
        if "=" not in raw:
            raise ConfigError(f"override {raw!r} is not of the form section.key=value")
        dotted, text = raw.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        out.setdefault(parts[0], {})[parts[1]] = value
    return out


def load_config(path, overrides=None):
    """Parse, merge overrides, validate, and resolve defaults."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    if overrides:
        for section, table in overrides.items():
            if not isinstance(table, dict):
                raise ConfigError(f"override section {section!r} must map keys")
            data.setdefault(section, {}).update(table)
    return validate_config(data)


def validate_config(data):
    if not isinstance(data, dict):
        raise ConfigError("top level must be a table")
    _reject_unknown(data, "top level", _SECTION_KEYS)
    for section in ("model", "sequence", "evolution"):
        if section not in data:
            raise ConfigError(f"missing required section [{section}]")
    for section, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")

    model = dict(data["model"])
    kind = _require(model, "model", "kind", str)
    if kind not in MODEL_KINDS:
        raise ConfigError(
            f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}"
        )
    _reject_unknown(model, "model", _MODEL_KEYS[kind])
    L = _require(model, "model", "L", int)
    if L < 1:
        raise ConfigError("[model] L must be positive")
    model = _resolve_model(kind, L, model)

    seq_table = dict(data["sequence"])
    _reject_unknown(seq_table, "sequence", _SECTION_KEYS["sequence"])
    periods = _as_float_list(_require(seq_table, "sequence", "T"), "sequence", "T")
    if any(T <= 0 for T in periods):
        raise ConfigError("[sequence] periods must be positive")
    sequence = {"T": periods}
    if kind == "spin-recursive":
        order = _require(seq_table, "sequence", "order", int)
        if order not in (1, 2, 3):
            raise ConfigError("[sequence] order must be 1, 2 or 3")
        sequence["order"] = order
    elif "order" in seq_table:
        raise ConfigError("[sequence] order only applies to spin-recursive")

    evo = dict(data["evolution"])
    _reject_unknown(evo, "evolution", _SECTION_KEYS["evolution"])
    evolution = {
        "n_periods_max": _require(evo, "evolution", "n_periods_max", int),
        "realizations": int(evo.get("realizations", 1)),
        "seed": _require(evo, "evolution", "seed", int),
        "method": str(evo.get("method", "auto")),
        "precision": str(evo.get("precision", "double")),
        "samples_per_decade": int(evo.get("samples_per_decade", 40)),
    }
    if evolution["n_periods_max"] < 1:
        raise ConfigError("[evolution] n_periods_max must be positive")
    if evolution["realizations"] < 1:
        raise ConfigError("[evolution] realizations must be positive")
    if evolution["samples_per_decade"] < 1:
        raise ConfigError("[evolution] samples_per_decade must be positive")
    if evolution["precision"] not in ("double", "single"):
        raise ConfigError("[evolution] precision must be 'double' or 'single'")
    from .propagate import canonical_method

    try:
        canonical_method(evolution["method"])
    except ValueError as exc:
        raise ConfigError(f"[evolution] {exc}")
    if "sample_times" in evo:
        times = evo["sample_times"]
        if not isinstance(times, list) or not all(isinstance(t, int) for t in times):
            raise ConfigError("[evolution] sample_times must be an integer list")
        evolution["sample_times"] = times

    obs_table = dict(data.get("observables", {}))
    _reject_unknown(obs_table, "observables", _SECTION_KEYS["observables"])
    obs_set = obs_table.get("set", _DEFAULT_OBSERVABLES[kind])
    if obs_set not in OBSERVABLE_SETS:
        raise ConfigError(f"unknown observable set {obs_set!r}")
    observables = {"set": obs_set}
    if "participation_sectors" in obs_table:
        sectors = obs_table["participation_sectors"]
        if not isinstance(sectors, list) or not all(
            isinstance(s, int) and 0 <= s <= L for s in sectors
        ):
            raise ConfigError(
                "[observables] participation_sectors must be ints within 0..L"
            )
        observables["participation_sectors"] = sectors

    init_table = dict(data.get("initial", {}))
    _reject_unknown(init_table, "initial", _SECTION_KEYS["initial"])
    init_kind = init_table.get("kind", _DEFAULT_INITIAL[kind])
    if init_kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial state kind {init_kind!r}")
    initial = {"kind": init_kind}
    if init_kind == "haar-sector":
        initial["n_down"] = int(init_table.get("n_down", L // 2))
        initial["theta"] = float(init_table.get("theta", math.pi / 16.0))
    elif init_kind == "clock-product":
        initial["n"] = int(init_table.get("n", 3))
        if initial["n"] not in range(4):
            raise ConfigError("[initial] clock product n must be 0..3")
    elif init_kind == "hoti-eigenstate":
        if "index" in init_table:
            initial["index"] = int(init_table["index"])

    out_table = dict(data.get("output", {}))
    _reject_unknown(out_table, "output", _SECTION_KEYS["output"])
    output = {"dir": str(out_table.get("dir", "out"))}

    return ExperimentConfig(
        model=model,
        sequence=sequence,
        evolution=evolution,
        observables=observables,
        initial=initial,
        output=output,
    )


def _resolve_model(kind, L, table):
    out = {"kind": kind, "L": L}
    if kind.startswith("spin"):
        out["J"] = float(table.get("J", 1.0))
        if "J_prime" in _MODEL_KEYS[kind]:
            out["J_prime"] = float(table.get("J_prime", 5.0))
        out["delta_x"] = float(table.get("delta_x", 10.0))
        out["epsilon"] = float(table.get("epsilon", 6.0))
        out["boundary"] = str(table.get("boundary", "open"))
    elif kind == "clock-kicked":
        out["j_range"] = _as_pair(table.get("j_range", [0.5, 1.5]), "model", "j_range")
        out["g_range"] = _as_pair(table.get("g_range", [0.0, 0.3]), "model", "g_range")
        out["h_range"] = _as_pair(table.get("h_range", [0.0, 0.6]), "model", "h_range")
        out["b_range"] = _as_pair(table.get("b_range", [0.0, 2.5]), "model", "b_range")
        out["eta"] = float(table.get("eta", 0.35))
        out["phi"] = float(table.get("phi", math.pi / 3.0))
        out["boundary"] = str(table.get("boundary", "open"))
    elif kind == "hoti":
        out["M"] = float(table.get("M", 1.0))
        out["J"] = float(table.get("J", 1.0))
        out["delta0"] = float(table.get("delta0", 1.0))
        out["delta1"] = float(table.get("delta1", 7.0))
        out["delta2"] = float(table.get("delta2", 12.0))
        out["broken"] = bool(table.get("broken", False))
    if out.get("boundary", "open") not in ("open", "periodic"):
        raise ConfigError("[model] boundary must be 'open' or 'periodic'")
    return out
