"""Scenario documents (JSON, ``"schema": 1``) and deterministic JSON output."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import EpiParams, EpiState
from .errors import ScenarioError
from .netflux import COLUMN_SUM_TOL, ZoneNetwork, read_commuter_csv

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_VEC_OR_NUM = {"oneOf": [_NUM, _VEC]}

SCHEMA = {
    "type": "object",
    "required": ["schema", "sigma", "params"],
    "properties": {
        "schema": {"const": 1},
        "name": {"type": "string"},
        "zone_ids": {"type": "array", "items": {"type": ["string", "integer"]}},
        "commuter": {"type": "array", "items": _VEC},
        "commuter_csv": {"type": "string"},
        "sigma": _VEC,
        "params": {
            "type": "object",
            "required": ["mu", "beta", "nu", "kappa", "gamma", "p"],
            "properties": {
                "mu": _NUM,
                "beta": _VEC_OR_NUM,
                "nu": _VEC_OR_NUM,
                "kappa": _NUM,
                "gamma": _NUM,
                "p": _NUM,
            },
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "required": ["S", "I", "R"],
            "properties": {"S": _VEC, "I": _VEC, "R": _VEC},
            "additionalProperties": False,
        },
        "total_population": {"type": "number", "exclusiveMinimum": 0},
        "controls": {
            "type": "object",
            "properties": {
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "stride": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "oneOf": [{"required": ["commuter"]}, {"required": ["commuter_csv"]}],
}

DEFAULT_CONTROLS = {"t_end": 100.0, "stride": 1.0, "rtol": 1e-8, "atol": 1e-10}


def _pointer(parts):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _schema_error(err):
    path = list(err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            return ScenarioError(f"missing required field {missing[0]!r}", _pointer(path + [missing[0]]))
    if err.validator == "oneOf" and not path and isinstance(err.instance, dict):
        if "commuter" in err.instance and "commuter_csv" in err.instance:
            return ScenarioError("give either 'commuter' or 'commuter_csv', not both", "/commuter_csv")
        if "commuter" not in err.instance and "commuter_csv" not in err.instance:
            return ScenarioError("missing required field 'commuter' (or 'commuter_csv')", "/commuter")
    return ScenarioError(err.message, _pointer(path))


@dataclass(frozen=True)
class Scenario:
    network: ZoneNetwork
    params: EpiParams
    initial: EpiState | None = None
    explicit_population: float | None = None
    controls: dict = field(default_factory=lambda: dict(DEFAULT_CONTROLS))
    name: str = ""

    @property
    def total_population(self):
        if self.explicit_population is not None:
            return self.explicit_population
        if self.initial is not None:
            return self.initial.total
        return None


def parse_scenario(doc, base_dir=".", tol=COLUMN_SUM_TOL):
    """Build a :class:`Scenario` from a decoded JSON document.

    Raises
    ------
    ScenarioError
        Schema violation; ``pointer`` locates the offending node.
    ValidationError
        The network or parameters violate a model assumption.
    """
    validator = jsonschema.Draft202012Validator(SCHEMA)
    # the deepest error names the most precise field
    err = max(validator.iter_errors(doc), key=lambda e: len(e.absolute_path), default=None)
    if err is not None:
        raise _schema_error(err)

    if "commuter_csv" in doc:
        ids, commuter = read_commuter_csv(Path(base_dir) / doc["commuter_csv"])
        ids = doc.get("zone_ids", ids)
    else:
        commuter = np.asarray(doc["commuter"], dtype=float)
        ids = doc.get("zone_ids")
    n = len(doc["sigma"])
    if commuter.ndim != 2 or commuter.shape != (n, n):
        raise ScenarioError(f"commuter matrix must be {n}x{n} to match sigma", "/commuter")
    if ids is not None and len(ids) != n:
        raise ScenarioError(f"expected {n} zone ids, got {len(ids)}", "/zone_ids")
    net = ZoneNetwork(commuter, doc["sigma"], ids, tol)

    pd = doc["params"]
    for key in ("beta", "nu"):
        if isinstance(pd[key], list) and len(pd[key]) != n:
            raise ScenarioError(f"expected {n} entries, got {len(pd[key])}", f"/params/{key}")
    params = EpiParams(mu=pd["mu"], beta=pd["beta"], nu=pd["nu"], kappa=pd["kappa"], gamma=pd["gamma"], p=pd["p"])

    initial = None
    if "initial" in doc:
        for key in "SIR":
            if len(doc["initial"][key]) != n:
                raise ScenarioError(f"expected {n} entries, got {len(doc['initial'][key])}", f"/initial/{key}")
            if min(doc["initial"][key]) < 0:
                raise ScenarioError("initial state must be nonnegative", f"/initial/{key}")
        initial = EpiState(doc["initial"]["S"], doc["initial"]["I"], doc["initial"]["R"])
    controls = dict(DEFAULT_CONTROLS)
    controls.update(doc.get("controls", {}))
    return Scenario(net, params, initial, doc.get("total_population"), controls, doc.get("name", ""))


def load_scenario(path, tol=COLUMN_SUM_TOL):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (line {exc.lineno})", "") from exc
    return parse_scenario(doc, path.parent, tol)


def scenario_to_dict(sc: Scenario):
    net, pr = sc.network, sc.params
    doc = {
        "schema": 1,
        "zone_ids": list(net.zone_ids),
        "commuter": net.commuter.tolist(),
        "sigma": net.sigma.tolist(),
        "params": {"mu": pr.mu, "beta": pr.beta.tolist(), "nu": pr.nu.tolist(), "kappa": pr.kappa,
                   "gamma": pr.gamma, "p": pr.p},
        "controls": dict(sc.controls),
    }
    if sc.name:
        doc["name"] = sc.name
    if sc.initial is not None:
        doc["initial"] = {"S": sc.initial.S.tolist(), "I": sc.initial.I.tolist(), "R": sc.initial.R.tolist()}
    if sc.explicit_population is not None:
        doc["total_population"] = sc.explicit_population
    return doc


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """JSON text with round-trip float formatting and a trailing newline."""
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"

