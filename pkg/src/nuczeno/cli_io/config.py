"""TOML configuration documents.

A document has a top-level ``schema_version`` and the sections listed in
:data:`SCHEMA`. Unknown sections or keys, wrong value types and missing
required keys raise :class:`~nuczeno.errors.ConfigError` naming the key.
Energies are in ueV, times in ns and rates in 1/ns.
"""
from __future__ import annotations

import copy
import json
import sys
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..measurement import NoiseSpec
from ..optics import OpticalParams
from ..spin_bath import SpinBathSpec
from ..trajectory import BathEnsemble, RunConfig

SCHEMA_VERSION = 1
RESULT_MARKER = "# nuczeno result"

REQUIRED = object()
NUM = (int, float)
OPT_NUM = (int, float, str)  # numbers or "none"

#: section -> key -> (accepted types, default)
SCHEMA: dict = {
    "bath": {
        "couplings": (list, REQUIRED),
        "zeeman": (list, REQUIRED),
        "electron_zeeman": (NUM, 40.0),
        "flip_flop": (bool, True),
        "convention": (str, "pauli"),
    },
    "ensemble": {
        "n_spins": (int, 8),
        "mean_a": (NUM, 0.5),
        "sd_a": (NUM, 0.25),
        "mean_w": (NUM, 0.5),
        "sd_w": (NUM, 0.01),
        "electron_zeeman": (NUM, 4.0),
        "flip_flop": (bool, True),
        "truncate": (bool, False),
    },
    "optics": {
        "omega_c": (NUM, 0.0),
        "omega_0": (NUM, 0.0),
        "omega_L": (NUM, 0.0),
        "kappa": (NUM, 4000.0),
        "g": (NUM, 30.0),
    },
    "noise": {
        "sigma_s": (NUM, 0.0),
        "mean_s": (NUM, 0.0),
        "n_quad": (int, 21),
        "mode": (str, "per_event_sample"),
    },
    "run": {
        "rates": (list, [0.0]),
        "tau_max": (NUM, 100.0),
        "tau_points": (int, 101),
        "n_trajectories": (int, 100),
        "n_bath_draws": (int, 1),
        "seed": (int, 0),
        "estimator": (str, "nonselective"),
        "method": (str, "density"),
        "normalization": (str, "pooled"),
        "record_factor": (NUM, 20.0),
    },
    "povm": {
        "delta_min": (NUM, -1.0),
        "delta_max": (NUM, 1.0),
        "n_points": (int, 2001),
    },
    "sawtooth": {
        "i": (int, 2),
        "j": (int, 1),
        "dt_events": (list, ["none", 5.0, 2.0]),
        "t_max": (NUM, 10.0),
        "steps": (int, 400),
    },
    "zeno": {
        "tau_max": (NUM, 1.0),
        "tau_points": (int, 101),
    },
    "validity": {
        "t_fluc": (NUM, 1.0e6),
        "threshold": (NUM, 100.0),
    },
}

#: sections whose presence switches a feature on; absent means "not configured"
OPTIONAL_SECTIONS = {"bath", "ensemble"}


def _type_ok(value, types) -> bool:
    if isinstance(value, bool):
        return types is bool or (isinstance(types, tuple) and bool in types)
    if types is bool:
        return False
    return isinstance(value, types)


def _type_name(types) -> str:
    if isinstance(types, tuple):
        return " or ".join(t.__name__ for t in types)
    return types.__name__


def resolve(doc: dict) -> dict:
    """Validate a parsed document and fill in defaults.

    Returns a new nested dict; optional sections that are absent stay absent.
    """
    if not isinstance(doc, dict):
        raise ConfigError("document must be a table", key="<root>")
    if "schema_version" not in doc:
        raise ConfigError("required key is missing", key="schema_version")
    version = doc["schema_version"]
    if isinstance(version, bool) or not isinstance(version, int):
        raise ConfigError("must be an integer", key="schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported version {version}, expected {SCHEMA_VERSION}", key="schema_version")
    out: dict = {"schema_version": version}
    for name, section in doc.items():
        if name == "schema_version":
            continue
        if name not in SCHEMA:
            raise ConfigError("unknown section", key=name)
        if not isinstance(section, dict):
            raise ConfigError("must be a table", key=name)
    for name, fields in SCHEMA.items():
        given = doc.get(name)
        if given is None and name in OPTIONAL_SECTIONS:
            continue
        given = given or {}
        for key in given:
            if key not in fields:
                raise ConfigError("unknown key", key=f"{name}.{key}")
        resolved = {}
        for key, (types, default) in fields.items():
            full = f"{name}.{key}"
            if key in given:
                value = given[key]
                if not _type_ok(value, types):
                    raise ConfigError(f"expected {_type_name(types)}, got {type(value).__name__}", key=full)
                resolved[key] = value
            elif default is REQUIRED:
                raise ConfigError("required key is missing", key=full)
            else:
                resolved[key] = copy.deepcopy(default)
        out[name] = resolved
    _check_lists(out)
    return out


def _check_lists(cfg: dict) -> None:
    def numbers(key, values, allow_none=False):
        for v in values:
            if allow_none and v == "none":
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError("list entries must be numbers", key=key)

    if "bath" in cfg:
        numbers("bath.couplings", cfg["bath"]["couplings"])
        numbers("bath.zeeman", cfg["bath"]["zeeman"])
    numbers("run.rates", cfg["run"]["rates"])
    if not cfg["run"]["rates"]:
        raise ConfigError("at least one rate is required", key="run.rates")
    numbers("sawtooth.dt_events", cfg["sawtooth"]["dt_events"], allow_none=True)


def load(path) -> dict:
    """Read and resolve a TOML file, or the configuration embedded in a result file."""
    path = Path(path)
    text = path.read_text()
    stripped = text.lstrip()
    if stripped.startswith(RESULT_MARKER):
        return resolve(_embedded_from_csv(text, path))
    if stripped.startswith("{"):
        try:
            return resolve(json.loads(text)["metadata"]["config"])
        except (KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"not a result document: {exc}", key=str(path)) from exc
    return loads(text)


def loads(text: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}", key="<document>") from exc
    return resolve(doc)


def _embedded_from_csv(text: str, path) -> dict:
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        if line.startswith("# config: "):
            return json.loads(line[len("# config: ") :])
    raise ConfigError("result file carries no embedded config", key=str(path))


def default_config() -> dict:
    return resolve({"schema_version": SCHEMA_VERSION})


def set_value(cfg: dict, dotted: str, value: Any) -> None:
    """Override one resolved value (used for command-line flags), re-checking its type."""
    section, key = dotted.split(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError("unknown key", key=dotted)
    types, _ = SCHEMA[section][key]
    if not _type_ok(value, types):
        raise ConfigError(f"expected {_type_name(types)}", key=dotted)
    cfg.setdefault(section, {})[key] = value
    _check_lists(cfg)


# ------------------------------------------------------------------- builders


def _wrap(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key=getattr(fn, "__name__", "config")) from exc


def bath_spec(cfg: dict) -> Optional[SpinBathSpec]:
    b = cfg.get("bath")
    if b is None:
        return None
    return _wrap(
        SpinBathSpec,
        tuple(b["couplings"]),
        tuple(b["zeeman"]),
        electron_zeeman=b["electron_zeeman"],
        flip_flop=b["flip_flop"],
        convention=b["convention"],
    )


def ensemble_spec(cfg: dict) -> Optional[BathEnsemble]:
    e = cfg.get("ensemble")
    if e is None:
        return None
    return _wrap(BathEnsemble, **e)


def optics(cfg: dict) -> OpticalParams:
    return _wrap(OpticalParams, **cfg["optics"])


def noise(cfg: dict) -> Optional[NoiseSpec]:
    n = cfg["noise"]
    try:
        spec = NoiseSpec(**n)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), key="noise.mode") from exc
    return None if spec.is_trivial else spec


def run_configs(cfg: dict, threads: int = 1):
    """One :class:`RunConfig` per configured rate (same seed for every rate)."""
    r = cfg["run"]
    bath, ens = bath_spec(cfg), ensemble_spec(cfg)
    if bath is None and ens is None:
        raise ConfigError("a [bath] or [ensemble] section is required", key="bath")
    out = []
    for rate in r["rates"]:
        try:
            out.append(
                RunConfig(
                    bath=bath,
                    optics=optics(cfg),
                    noise=noise(cfg),
                    rate=float(rate),
                    tau_max=float(r["tau_max"]),
                    tau_points=r["tau_points"],
                    n_trajectories=r["n_trajectories"],
                    n_bath_draws=r["n_bath_draws"],
                    seed=r["seed"],
                    estimator=r["estimator"],
                    method=r["method"],
                    normalization=r["normalization"],
                    ensemble=ens,
                    record_factor=float(r["record_factor"]),
                    threads=threads,
                )
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), key="run") from exc
    return out
