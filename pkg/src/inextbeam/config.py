"""TOML experiment definitions.

Numbers are parsed as exact decimals and rounded once to float. Unknown
keys anywhere are rejected. A minimal file::

    n_modes = 4

    [beam]
    k2 = 0.05
    sigma = 1
    iota = 1

    [integrator]
    dt = 5e-4

    [run]
    t_final = 10.0

    [[initial]]
    mode = 1
    q0 = 0.1

See README.md for the full schema.
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .assembly import BeamParameters, ParameterError, require_simulable
from .dynamics import ModalState
from .forcing import FORCING_KINDS, Forcing, ForcingError
from .integrators import SCHEMES, IntegratorConfig
from .quadrature import MAX_POINTS_PER_PANEL


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


REQUIRED = object()

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "beam": {"D": (float, 1.0), "L": (float, 1.0), "k2": (float, 0.0), "sigma": (int, 1), "iota": (int, 0)},
    "quadrature": {"panels": (int, 16), "points_per_panel": (int, 16)},
    "integrator": {"scheme": (str, "implicit-midpoint"), "dt": (float, REQUIRED),
                   "newton_tol": (float, 1e-10), "newton_max_iter": (int, 25)},
    "run": {"t_final": (float, REQUIRED), "record_every": (int, 1), "blowup_threshold": (float, 1e8),
            "snapshot_every": (int, 0), "grid_points": (int, 201)},
    "forcing": {"kind": (str, "zero"), "amplitude": (float, 0.0), "frequency": (float, 0.0),
                "profile": (list, [])},
    "decay": {"t_start": (float, 0.0), "t_end": (float, REQUIRED), "floor": (float, 0.0)},
    "sweep": {"parameter": (str, REQUIRED), "values": (list, None), "random": (dict, None)},
}
TOP_LEVEL = {"n_modes": (int, REQUIRED), "seed": (int, 0), "allow_undamped_inertia": (bool, False)}
INITIAL_KEYS = {"mode": (int, REQUIRED), "q0": (float, 0.0), "v0": (float, 0.0)}
RANDOM_KEYS = {"low": (float, REQUIRED), "high": (float, REQUIRED), "count": (int, REQUIRED)}
OPTIONAL_SECTIONS = ("decay", "sweep")
DEFAULT_SECTIONS = ("beam", "quadrature", "forcing")


def _coerce(value, kind: type, key: str):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, Decimal)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, Decimal)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return int(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key)
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"expected an array, got {value!r}", key)
        return [float(v) if isinstance(v, Decimal) else v for v in value]
    if kind is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"expected a table, got {value!r}", key)
        return value
    raise TypeError(kind)


def _fill(table: dict, schema: dict, prefix: str) -> dict:
    unknown = sorted(set(table) - set(schema))
    if unknown:
        raise ConfigError("unrecognized key", f"{prefix}{unknown[0]}")
    out = {}
    for key, (kind, default) in schema.items():
        if key in table:
            out[key] = _coerce(table[key], kind, prefix + key)
        elif default is REQUIRED:
            raise ConfigError("required key missing", prefix + key)
        elif default is not None:
            out[key] = copy.deepcopy(default)
    return out


def resolve(raw: dict) -> dict:
    """Validate a parsed TOML tree and fill every default; returns a plain dict of floats/ints/strs."""
    known = set(TOP_LEVEL) | set(SCHEMA) | {"initial"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError("unrecognized key", unknown[0])
    top = {k: raw[k] for k in TOP_LEVEL if k in raw}
    res = _fill(top, TOP_LEVEL, "")
    for section in SCHEMA:
        if section in raw:
            if not isinstance(raw[section], dict):
                raise ConfigError("expected a table", section)
            res[section] = _fill(raw[section], SCHEMA[section], section + ".")
        elif section in DEFAULT_SECTIONS:
            res[section] = _fill({}, SCHEMA[section], section + ".")
        elif section not in OPTIONAL_SECTIONS:
            raise ConfigError("required section missing", section)

    initial = raw.get("initial", [])
    if not isinstance(initial, list):
        raise ConfigError("expected an array of tables [[initial]]", "initial")
    res["initial"] = []
    for i, entry in enumerate(initial):
        if not isinstance(entry, dict):
            raise ConfigError("expected a table", f"initial.{i}")
        res["initial"].append(_fill(entry, INITIAL_KEYS, f"initial.{i}."))

    if "sweep" in res:
        sw = res["sweep"]
        if ("values" in sw) == ("random" in sw):
            raise ConfigError("give exactly one of 'values' or 'random'", "sweep")
        if "random" in sw:
            sw["random"] = _fill(sw["random"], RANDOM_KEYS, "sweep.random.")
        else:
            sw["values"] = [_coerce(v, float, "sweep.values") for v in sw["values"]]
    _validate(res)
    return res


def _validate(res: dict) -> None:
    n = res["n_modes"]
    if n < 1:
        raise ConfigError("must be >= 1", "n_modes")
    try:
        params = BeamParameters(**res["beam"])
        require_simulable(params, res["allow_undamped_inertia"])
    except ParameterError as exc:
        raise ConfigError(str(exc), "beam") from exc
    q = res["quadrature"]
    if q["panels"] < 1:
        raise ConfigError("must be >= 1", "quadrature.panels")
    if not 2 <= q["points_per_panel"] <= MAX_POINTS_PER_PANEL:
        raise ConfigError(f"must be in [2, {MAX_POINTS_PER_PANEL}]", "quadrature.points_per_panel")
    integ = res["integrator"]
    if integ["scheme"] not in SCHEMES:
        raise ConfigError(f"unknown scheme; expected one of {SCHEMES}", "integrator.scheme")
    for key in ("dt", "newton_tol"):
        if not integ[key] > 0:
            raise ConfigError("must be positive", f"integrator.{key}")
    if integ["newton_max_iter"] < 1:
        raise ConfigError("must be >= 1", "integrator.newton_max_iter")
    run = res["run"]
    if run["t_final"] < 0:
        raise ConfigError("must be >= 0", "run.t_final")
    if run["record_every"] < 1:
        raise ConfigError("must be >= 1", "run.record_every")
    if not run["blowup_threshold"] > 0:
        raise ConfigError("must be positive", "run.blowup_threshold")
    if run["snapshot_every"] < 0:
        raise ConfigError("must be >= 0", "run.snapshot_every")
    if run["grid_points"] < 2:
        raise ConfigError("must be >= 2", "run.grid_points")
    seen = set()
    for i, entry in enumerate(res["initial"]):
        if not 1 <= entry["mode"] <= n:
            raise ConfigError(f"mode index {entry['mode']} outside 1..{n}",f"initial.{i}.mode")
        if entry["mode"] in seen:
            raise ConfigError(f"mode {entry['mode']} given twice", f"initial.{i}.mode")
        seen.add(entry["mode"])
    f = res["forcing"]
    if f["kind"] not in FORCING_KINDS:
        raise ConfigError(f"unknown preset; expected one of {FORCING_KINDS}", "forcing.kind")
    if len(f["profile"]) > n:
        raise ConfigError(f"profile longer than n_modes={n}", "forcing.profile")
    try:
        Forcing(kind=f["kind"], amplitude=f["amplitude"], frequency=f["frequency"],
                profile=tuple(float(x) for x in f["profile"]))
    except (ForcingError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "forcing") from exc
    if "decay" in res and not res["decay"]["t_end"] > res["decay"]["t_start"]:
        raise ConfigError("t_end must exceed t_start", "decay.t_end")
    if "sweep" in res:
        sw = res["sweep"]
        values = sw.get("values")
        if values is not None and not values:
            raise ConfigError("sweep value list is empty", "sweep.values")
        rnd = sw.get("random")
        if rnd is not None and (rnd["count"] < 1 or not rnd["high"] > rnd["low"]):
            raise ConfigError("need count >= 1 and high > low", "sweep.random")


@dataclass(frozen=True)
class SimulationConfig:
    resolved: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulationConfig":
        return cls(resolve(raw))

    @property
    def n_modes(self) -> int:
        return self.resolved["n_modes"]

    @property
    def seed(self) -> int:
        return self.resolved["seed"]

    @property
    def allow_undamped_inertia(self) -> bool:
        return self.resolved["allow_undamped_inertia"]

    @property
    def beam(self) -> BeamParameters:
        return BeamParameters(**self.resolved["beam"])

    @property
    def quadrature(self) -> dict:
        return dict(self.resolved["quadrature"])

    @property
    def integrator(self) -> IntegratorConfig:
        i = self.resolved["integrator"]
        return IntegratorConfig(scheme=i["scheme"], dt=i["dt"], newton_tol=i["newton_tol"],
                                newton_max_iter=i["newton_max_iter"],
                                blowup_threshold=self.resolved["run"]["blowup_threshold"])

    @property
    def run(self) -> dict:
        return dict(self.resolved["run"])

    @property
    def forcing(self) -> Forcing:
        f = self.resolved["forcing"]
        return Forcing(kind=f["kind"], amplitude=f["amplitude"], frequency=f["frequency"],
                       profile=tuple(float(x) for x in f["profile"]))

    @property
    def decay(self) -> dict | None:
        return dict(self.resolved["decay"]) if "decay" in self.resolved else None

    @property
    def sweep(self) -> dict | None:
        return copy.deepcopy(self.resolved["sweep"]) if "sweep" in self.resolved else None

    def initial_state(self) -> ModalState:
        q = np.zeros(self.n_modes)
        v = np.zeros(self.n_modes)
        for entry in self.resolved["initial"]:
            q[entry["mode"] - 1] = entry["q0"]
            v[entry["mode"] - 1] = entry["v0"]
        return ModalState(0.0, q, v)

    def replace(self, path: str, value) -> "SimulationConfig":
        """Copy with the scalar at dotted ``path`` (e.g. ``beam.k2``, ``initial.0.q0``) set to ``value``."""
        raw = copy.deepcopy(self.resolved)
        raw.pop("sweep", None)
        parts = path.split(".")
        node = raw
        for part in parts[:-1]:
            if isinstance(node, list):
                if not part.isdigit() or int(part) >= len(node):
                    raise ConfigError("sweep path does not address an existing entry", path)
                node = node[int(part)]
            elif isinstance(node, dict) and part in node:
                node = node[part]
            else:
                raise ConfigError("sweep path does not address an existing entry", path)
        last = parts[-1]
        if not isinstance(node, dict) or last not in node:
            raise ConfigError("sweep path does not address an existing scalar", path)
        if isinstance(node[last], (dict, list)):
            raise ConfigError("sweep path addresses a table or array, not a scalar", path)
        old = node[last]
        if isinstance(old, bool):
            raise ConfigError("cannot sweep a boolean", path)
        if isinstance(old, int) and float(value) == int(value):
            value = int(value)
        node[last] = value
        return SimulationConfig.from_dict(raw)

    def to_json(self) -> str:
        return json.dumps(self.resolved, indent=2, sort_keys=True)


def loads_config(text: str, allow_undamped_inertia: bool = False) -> SimulationConfig:
    """Parse and validate; ``allow_undamped_inertia`` overrides the file's setting when true."""
    try:
        raw = tomllib.loads(text, parse_float=Decimal)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    if allow_undamped_inertia:
        raw["allow_undamped_inertia"] = True
    return SimulationConfig.from_dict(raw)


def load_config(path, allow_undamped_inertia: bool = False) -> SimulationConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return loads_config(path.read_text(), allow_undamped_inertia)
