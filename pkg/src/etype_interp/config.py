"""Experiment configuration: JSON schema, defaults, canonical serialization."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import jsonschema
import numpy as np

from . import quadrature as qd
from .errors import ConfigError
from .interp import TruncationPolicy
from .systems import Family, HBSystem
from .targets import TargetFunction, bump, constant, gaussian, kernel_section, rational, sinc_function, zero

SCHEMA_VERSION = 1

EXPERIMENTS = (
    "nodes",
    "interp",
    "mz",
    "reproduce",
    "converge-lagrange",
    "converge-hermite",
    "converge-hbweight",
    "selftest",
)

TARGET_IDS = ("gaussian", "rational", "bump", "zero", "constant", "kernel", "sinc")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"enum": [f.value for f in Family]},
                "tau": _pos,
                "nu": _num,
                "alpha": _num,
                "w": {"enum": ["exp", "linear"]},
                "tau0": _pos,
            },
        },
        "taus": {"type": "array", "items": _pos, "minItems": 1},
        "reference_tau": _opt_pos,
        "p": _num,
        "target": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {
                "id": {"enum": list(TARGET_IDS)},
                "a": _pos,
                "center": _num,
                "power": _num,
                "radius": _pos,
                "c": _num,
                "w0": _num,
                "shift": _num,
            },
        },
        "weight_mode": {"enum": ["smoothed", "target"]},
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "node_window": {"type": ["integer", "null"], "minimum": 8},
                "radius": _opt_pos,
                "near_threshold": _opt_pos,
                "tail_mode": {"enum": ["direct_sum", "holder_bound"]},
                "probe_ring": {"type": "integer", "minimum": 1},
                "holder_p": _num,
                "safe_fraction": {"type": ["number", "null"], "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "X": _opt_pos,
                "points_per_panel": {"type": "integer", "minimum": 8},
                "unit_window": _opt_pos,
            },
        },
        "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "z": {
            "oneOf": [
                {"type": "array", "items": _num, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "num"],
                    "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}},
                },
            ]
        },
        "w0": _num,
        "test_function": {"enum": ["kernel", "sinc"]},
        "criteria": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "uniformity_factor": _pos,
                "reference_factor": _pos,
                "final_error_max": _opt_pos,
                "origin_threshold": _opt_pos,
                "damping_range": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "reproduce_tol": _pos,
                "pi_tol": _pos,
            },
        },
        "output": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
}

_DEFAULT_SYSTEM = {
    "nodes": {"family": "bessel", "nu": 0.0, "alpha": 0.5, "tau": 1.0},
    "interp": {"family": "sinc", "tau": 8.0},
    "mz": {"family": "sinc"},
    "reproduce": {"family": "sinc", "tau": 4.0},
    "converge-lagrange": {"family": "sinc"},
    "converge-hermite": {"family": "sinc"},
    "converge-hbweight": {"family": "expw", "w": "linear", "tau0": 1.0},
    "selftest": {"family": "sinc", "tau": 1.0},
}

_TARGET_PARAMS = {
    "gaussian": {"a": 16.0, "center": 0.0},
    "rational": {"power": 2.0},
    "bump": {"radius": 1.0},
    "zero": {},
    "constant": {"c": 1.0},
    "kernel": {"w0": 0.37},
    "sinc": {"shift": 0.0},
}


@dataclass
class ExperimentConfig:
    experiment: str
    system: dict
    taus: list = field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    reference_tau: float | None = None
    p: float = 2.0
    target: dict = field(default_factory=lambda: {"id": "gaussian", "a": 16.0, "center": 0.0})
    weight_mode: str = "target"
    policy: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    window: list = field(default_factory=lambda: [-50.0, 50.0])
    z: dict | list = field(default_factory=lambda: {"start": -2.0, "stop": 2.0, "num": 101})
    w0: float = 0.37
    test_function: str = "kernel"
    criteria: dict = field(default_factory=dict)
    output: str = "out"
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    # -- derived objects
    def system_obj(self, tau: float | None = None) -> HBSystem:
        d = dict(self.system)
        if tau is not None:
            d["tau"] = tau
        try:
            return HBSystem.from_dict(d)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid system description: {exc}") from exc

    def policy_obj(self) -> TruncationPolicy:
        return TruncationPolicy(**self.policy)

    def target_obj(self, sys: HBSystem | None = None) -> TargetFunction:
        t = dict(self.target)
        name = t.pop("id")
        if name == "kernel":
            if sys is None:
                raise ConfigError("kernel-section targets need a concrete system")
            return kernel_section(sys, t["w0"])
        if name == "sinc":
            if sys is None:
                raise ConfigError("sinc targets need a concrete tau")
            return sinc_function(sys.tau, t["shift"])
        return {"gaussian": gaussian, "rational": rational, "bump": bump, "zero": zero, "constant": constant}[name](**t)

    def z_values(self):
        if isinstance(self.z, list):
            return np.asarray(self.z, dtype=float)
        return np.linspace(self.z["start"], self.z["stop"], self.z["num"])

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {"schema_version": SCHEMA_VERSION, **d}
        return d


def _fill(d: dict, defaults: dict) -> dict:
    out = dict(defaults)
    out.update(d)
    return out


def _as_float(x):
    return None if x is None else float(x)


def parse(raw: dict, experiment: str | None = None) -> ExperimentConfig:
    """Validate a raw JSON object and fill defaults. Raises ConfigError."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    exp = raw.get("experiment")
    if experiment is not None:
        if exp is not None and exp != experiment:
            raise ConfigError(f"config is for experiment '{exp}', not '{experiment}'")
        exp = experiment
    if exp is None:
        raise ConfigError("config does not name an experiment")

    system = dict(raw["system"]) if "system" in raw else dict(_DEFAULT_SYSTEM[exp])
    fam = Family(system["family"])
    system.setdefault("tau", 1.0)
    if fam is Family.BESSEL:
        system.setdefault("alpha", 0.0)
        if "nu" not in system:
            raise ConfigError("bessel system needs 'nu'")
    elif fam is Family.EXPW:
        system.setdefault("w", "linear")
        system.setdefault("tau0", 1.0)
        for k in ("nu", "alpha"):
            if k in system:
                raise ConfigError(f"'{k}' is not a parameter of the expw family")
    else:
        for k in ("nu", "alpha", "w", "tau0"):
            if k in system:
                raise ConfigError(f"'{k}' is not a parameter of the sinc family")
    system = {k: (float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v) for k, v in system.items()}
    system = HBSystem.from_dict(system).to_dict()

    target = dict(raw.get("target", {"id": "gaussian"}))
    target = _fill(target, {"id": target["id"], **_TARGET_PARAMS[target["id"]]})
    extra = set(target) - {"id"} - set(_TARGET_PARAMS[target["id"]])
    if extra:
        raise ConfigError(f"target '{target['id']}' does not take {sorted(extra)}")
    target = {k: (v if k == "id" else float(v)) for k, v in target.items()}

    policy = _fill(raw.get("policy", {}), {})
    for k in ("radius", "near_threshold", "holder_p", "safe_fraction"):
        if k in policy:
            policy[k] = _as_float(policy[k])
    quad = _fill(raw.get("quadrature", {}), {"X": None, "points_per_panel": 16, "unit_window": None})
    quad["X"] = _as_float(quad["X"])
    quad["unit_window"] = _as_float(quad["unit_window"])

    crit = _fill(
        raw.get("criteria", {}),
        {
            "uniformity_factor": 10.0,
            "reference_factor": 2.0,
            "final_error_max": None,
            "origin_threshold": None,
            "damping_range": [0.3, 0.7],
            "reproduce_tol": 1e-6,
            "pi_tol": 1e-6,
        },
    )
    crit = {k: (None if v is None else ([float(x) for x in v] if isinstance(v, list) else float(v))) for k, v in crit.items()}

    z = raw.get("z", {"start": -2.0, "stop": 2.0, "num": 101})
    z = [float(x) for x in z] if isinstance(z, list) else {"start": float(z["start"]), "stop": float(z["stop"]), "num": int(z["num"])}

    cfg = ExperimentConfig(
        experiment=exp,
        system=system,
        taus=sorted(float(t) for t in raw.get("taus", [8, 16, 32, 64])),
        reference_tau=_as_float(raw.get("reference_tau")),
        p=float(raw.get("p", 2.0)),
        target=target,
        weight_mode=raw.get("weight_mode", "smoothed" if exp == "converge-hermite" else "target"),
        policy=policy,
        quadrature=quad,
        window=[float(x) for x in raw.get("window", [-50.0, 50.0])],
        z=z,
        w0=float(raw.get("w0", 0.37)),
        test_function=raw.get("test_function", "kernel"),
        criteria=crit,
        output=raw.get("output", "out"),
        workers=int(raw.get("workers", os.cpu_count() or 1)),
    )
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg: ExperimentConfig) -> None:
    qd.LpExponent(cfg.p)
    sysd = cfg.system
    if sysd["family"] == "bessel":
        qd.check_admissible(cfg.p, sysd["nu"])
    if not cfg.window[0] < cfg.window[1]:
        raise ConfigError("window must satisfy lo < hi")
    cfg.policy_obj()
    if cfg.experiment == "converge-hbweight" and sysd["family"] != "expw":
        raise ConfigError("converge-hbweight needs an expw system")
    if cfg.experiment == "converge-hermite" and cfg.target["id"] in ("kernel", "sinc"):
        raise ConfigError("convergence sweeps take a fixed target (gaussian, rational, bump, zero, constant)")
    if cfg.experiment in ("converge-lagrange", "converge-hbweight") and cfg.target["id"] in ("kernel", "sinc"):
        raise ConfigError("convergence sweeps take a fixed target (gaussian, rational, bump, zero, constant)")
    if cfg.experiment == "converge-hbweight" and min(cfg.taus) < sysd.get("tau0", 1.0):
        raise ConfigError("converge-hbweight needs every tau >= tau0")
    lo, hi = cfg.criteria["damping_range"]
    if not lo < hi:
        raise ConfigError("damping_range must satisfy lo < hi")
    if not all(math.isfinite(t) for t in cfg.taus):
        raise ConfigError("taus must be finite")


def load(path: str, experiment: str | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config '{path}' is not valid JSON: {exc}") from None
    return parse(raw, experiment)


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
