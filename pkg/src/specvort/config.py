"""Run configuration: a versioned JSON document with dotted-path overrides.

The canonical form (sorted keys, fixed separators) is what gets hashed, so
two semantically identical files share a config hash.
"""

from __future__ import annotations

import copy
import hashlib
import json

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "M": 6,                      # field truncation |l| <= M
    "theta": {"kind": "shell", "N": 4, "gamma": 1.0},
    "nu": 5.0,                   # noise intensity parameter (C = sqrt(3 nu / 2))
    "R": 100.0,                  # cutoff threshold on the H^{-delta} norm
    "R0": 1.0,                   # initial-data ball radius
    "delta": 0.25,               # negative Sobolev exponent, in (0, 1/2)
    "dt": 1e-3,
    "T": 0.5,
    "seed": 0,
    "samples": 20,
    "N_ladder": [4, 16],
    "C0": 1.0,                   # Sobolev-embedding constant (not pinned; config input)
    "output": {"root": None},
    "scheme": {"store_every": 1, "parallelism": 1},
}


class ConfigError(ValueError):
    """Invalid configuration; .errors lists field-level diagnostics."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _merge(base: dict, patch: dict, path=""):
    out = copy.deepcopy(base)
    for key, val in patch.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError([f"{here}: unknown key"])
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError([f"{here}: expected an object"])
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


class SimConfig:
    """Validated simulation parameters (thin wrapper over the nested dict)."""

    def __init__(self, data: dict | None = None):
        self.data = _merge(DEFAULTS, data or {})
        errors = self.validate()
        if errors:
            raise ConfigError(errors)

    def __getitem__(self, dotted: str):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def validate(self) -> list:
        d = self.data
        errs = []
        if d["schema_version"] != SCHEMA_VERSION:
            errs.append(f"schema_version: expected {SCHEMA_VERSION}, "
                        f"got {d['schema_version']}")
        if not (isinstance(d["M"], int) and d["M"] >= 1):
            errs.append(f"M: must be an integer >= 1, got {d['M']!r}")
        if d["theta"]["kind"] not in ("shell", "ball", "none"):
            errs.append(f"theta.kind: must be shell|ball|none, "
                        f"got {d['theta']['kind']!r}")
        if not (isinstance(d["theta"]["N"], int) and d["theta"]["N"] >= 1):
            errs.append(f"theta.N: must be an integer >= 1, got {d['theta']['N']!r}")
        if d["theta"]["gamma"] < 0:
            errs.append(f"theta.gamma: must be >= 0, got {d['theta']['gamma']!r}")
        if d["nu"] < 0:
            errs.append(f"nu: must be >= 0, got {d['nu']!r}")
        if not 0 < d["delta"] < 0.5:
            errs.append(f"delta: must lie in (0, 1/2), got {d['delta']!r}")
        if not d["dt"] > 0:
            errs.append(f"dt: must be > 0, got {d['dt']!r}")
        if not d["T"] > 0:
            errs.append(f"T: must be > 0, got {d['T']!r}")
        for key in ("R", "R0", "C0"):
            if not d[key] > 0:
                errs.append(f"{key}: must be > 0, got {d[key]!r}")
        if not (isinstance(d["samples"], int) and d["samples"] >= 1):
            errs.append(f"samples: must be an integer >= 1, got {d['samples']!r}")
        ladder = d["N_ladder"]
        if (not isinstance(ladder, list) or not ladder
                or any(not isinstance(n, int) or n < 1 for n in ladder)):
            errs.append(f"N_ladder: must be a non-empty list of integers >= 1, "
                        f"got {ladder!r}")
        if not (isinstance(d["scheme"]["store_every"], int)
                and d["scheme"]["store_every"] >= 1):
            errs.append("scheme.store_every: must be an integer >= 1")
        if not (isinstance(d["scheme"]["parallelism"], int)
                and d["scheme"]["parallelism"] >= 1):
            errs.append("scheme.parallelism: must be an integer >= 1")
        return errs

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, overrides) -> "SimConfig":
        """Apply dotted-path overrides like 'theta.N=8' or 'nu=2.5'."""
        data = copy.deepcopy(self.data)
        for item in overrides:
            if "=" not in item:
                raise ConfigError([f"override {item!r}: expected key.path=value"])
            path, _, raw = item.partition("=")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw  # bare strings stay strings
            node = data
            parts = path.split(".")
            for part in parts[:-1]:
                if not isinstance(node.get(part), dict):
                    raise ConfigError([f"override {path!r}: unknown key"])
                node = node[part]
            if parts[-1] not in node:
                raise ConfigError([f"override {path!r}: unknown key"])
            node[parts[-1]] = value
        return SimConfig(data)

    @classmethod
    def from_file(cls, path) -> "SimConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
        if not isinstance(data, dict):
            raise ConfigError([f"{path}: top level must be an object"])
        return cls(data)
