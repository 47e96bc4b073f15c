"""JSON scenario files.

Complex matrices are written as rows of ``[re, im]`` pairs (a bare number is
read as a real entry).  A file holds exactly one scenario, either a preset

    {"preset": "szilard", "steps": 64, "unit_dim": 8, "temperature": 1.0}

or an explicit description

    {
      "name": "demo",
      "system": {"hamiltonian": M, "temperature": 1.0},
      "baths": [{"label": "B", "hamiltonian": M, "temperature": 1.0}],
      "u_init": [STEP, ...],
      "measurement": {"preset": "cnot"},
      "feedback": [null, {"labels": ["S"], "matrix": M}],
      "u_fin": [STEP, ...],
      "final_temperature": null
    }

with ``STEP`` one of ``{"quench": "S", "hamiltonian": M}``,
``{"evolve": {"labels": [...], "matrix": M}}`` or
``{"collide": {"hamiltonian": M, "temperature": T, "unitary": {...},
"reservoir": "C", "unit_label": "C"}}``.  Measurement presets are ``cnot``,
``weak`` (key ``eta``), ``haar`` (key ``seed``) and ``appendix-optimal``
(key ``interaction``); alternatively give ``interaction``, ``projectors``
and optionally ``probe_dim``.  An optional ``"sweep"`` block
(``check``, ``trials``, ``seed``) runs a property sweep instead.
Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .optmeas import MeasurementModel, optimal_probe_measurement
from .qcore import PureState, SystemLayout, UnitaryOp, apply_unitary, haar_unitary, purify, tensor
from .thermo.constructions import (
    PROBE,
    SP_LAYOUT,
    cnot_measurement,
    null_scenario,
    probe_ground,
    random_measurement,
    random_scenario,
    szilard_scenario,
    theorem4_scenario,
    weak_measurement,
)
from .thermo.process import state_before_measurement
from .thermo.scenario import Bath, Collide, Evolve, Quench, ThermoScenario


class ConfigError(ValueError):
    """The configuration cannot be turned into a scenario."""


def _keys(d: dict, where: str, required=(), optional=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = set(required) | set(optional)
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")


def parse_matrix(rows, where: str = "matrix") -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError(f"{where}: expected a list of rows")
    out = []
    for row in rows:
        vals = []
        for x in row:
            if isinstance(x, (int, float)) and not isinstance(x, bool):
                vals.append(complex(x))
            elif isinstance(x, list) and len(x) == 2 and all(isinstance(y, (int, float)) for y in x):
                vals.append(complex(x[0], x[1]))
            else:
                raise ConfigError(f"{where}: entries must be numbers or [re, im] pairs")
        out.append(vals)
    if len({len(r) for r in out}) != 1:
        raise ConfigError(f"{where}: ragged rows")
    return np.array(out, dtype=complex)


def dump_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _unitary(d: dict, dims: dict, where: str) -> UnitaryOp:
    _keys(d, where, ("labels", "matrix"))
    labels = d["labels"]
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ConfigError(f"{where}: labels must be a list of strings")
    try:
        layout = SystemLayout(tuple((lab, dims[lab]) for lab in labels))
    except KeyError as exc:
        raise ConfigError(f"{where}: unknown factor {exc.args[0]!r}") from None
    return UnitaryOp(layout, parse_matrix(d["matrix"], where))


def _dump_unitary(u: UnitaryOp) -> dict:
    return {"labels": list(u.layout.labels), "matrix": dump_matrix(u.matrix)}


def _step(d: dict, dims: dict, where: str):
    if "quench" in d:
        _keys(d, where, ("quench", "hamiltonian"))
        return Quench(d["quench"], parse_matrix(d["hamiltonian"], where))
    if "evolve" in d:
        _keys(d, where, ("evolve",))
        return Evolve(_unitary(d["evolve"], dims, where))
    if "collide" in d:
        _keys(d, where, ("collide",))
        c = d["collide"]
        _keys(c, where, ("hamiltonian", "temperature", "unitary"), ("reservoir", "unit_label"))
        unit = c.get("unit_label", "C")
        h = parse_matrix(c["hamiltonian"], where)
        u = _unitary(c["unitary"], {**dims, unit: h.shape[0]}, where)
        return Collide(h, float(c["temperature"]), u, c.get("reservoir", "C"), unit)
    raise ConfigError(f"{where}: step must be quench, evolve or collide")


def _dump_step(s) -> dict:
    if isinstance(s, Quench):
        return {"quench": s.target, "hamiltonian": dump_matrix(s.hamiltonian)}
    if isinstance(s, Evolve):
        return {"evolve": _dump_unitary(s.unitary)}
    return {"collide": {"hamiltonian": dump_matrix(s.hamiltonian), "temperature": s.temperature,
                        "unitary": _dump_unitary(s.unitary), "reservoir": s.reservoir,
                        "unit_label": s.unit_label}}


def _measurement(d: dict, dims: dict, sc_without: ThermoScenario | None) -> MeasurementModel:
    where = "measurement"
    preset = d.get("preset")
    if preset == "cnot":
        _keys(d, where, ("preset",))
        return cnot_measurement()
    if preset == "weak":
        _keys(d, where, ("preset", "eta"))
        return weak_measurement(float(d["eta"]))
    if preset == "haar":
        _keys(d, where, ("preset", "seed"))
        return random_measurement(np.random.default_rng(int(d["seed"])))
    if preset == "appendix-optimal":
        _keys(d, where, ("preset", "interaction"))
        u = _unitary(d["interaction"], {**dims, PROBE: 2}, where)
        if u.layout.dims != (2, 2) or set(u.layout.labels) != {"S", PROBE}:
            raise ConfigError("appendix-optimal needs a qubit system and a qubit probe")
        rho1 = state_before_measurement(sc_without)
        if rho1.layout.labels != ("S",):
            raise ConfigError("appendix-optimal needs a scenario without baths")
        psi = apply_unitary(tensor(probe_ground(), purify(rho1, "R1", reference_dim=2)), u)
        om = optimal_probe_measurement(psi, (PROBE, "S", "R1"))
        return MeasurementModel(probe_ground(), u, om.projectors)
    if preset is not None:
        raise ConfigError(f"unknown measurement preset {preset!r}")
    _keys(d, where, ("interaction", "projectors"), ("probe_dim",))
    dp = int(d.get("probe_dim", 2))
    u = _unitary(d["interaction"], {**dims, PROBE: dp}, where)
    projs = tuple(parse_matrix(p, "projector") for p in d["projectors"])
    return MeasurementModel(PureState.basis(SystemLayout.of((PROBE, dp)), 0), u, projs)


PRESETS = {
    "null": ("temperature", "omega"),
    "szilard": ("steps", "unit_dim", "temperature", "x_max"),
    "theorem4": ("temperature", "omega", "interaction", "seed"),
    "random": ("seed", "bath"),
}

_SCENARIO_KEYS = ("name", "system", "baths", "u_init", "measurement", "feedback", "u_fin",
                  "final_temperature", "seed")


def _preset(d: dict) -> ThermoScenario:
    name = d["preset"]
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    _keys(d, "preset", ("preset",), PRESETS[name])
    kw = {k: v for k, v in d.items() if k != "preset"}
    if name == "null":
        return null_scenario(**kw)
    if name == "szilard":
        return szilard_scenario(**kw)
    if name == "random":
        return random_scenario(np.random.default_rng(int(kw.get("seed", 0))), kw.get("bath"))
    t = float(kw.get("temperature", 1.0))
    if "interaction" in kw:
        u = _unitary(kw["interaction"], {"S": 2, PROBE: 2}, "preset")
    else:
        u = UnitaryOp(SP_LAYOUT, haar_unitary(4, np.random.default_rng(int(kw.get("seed", 0)))))
    sc, _ = theorem4_scenario(t, u, float(kw.get("omega", 1.0)))
    return sc


def scenario_from_dict(d: dict) -> ThermoScenario:
    """Build a scenario; every failure is reported as :class:`ConfigError`."""
    try:
        return _scenario_from_dict(d)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _scenario_from_dict(d: dict) -> ThermoScenario:
    if not isinstance(d, dict):
        raise ConfigError("scenario must be an object")
    if "preset" in d:
        return _preset(d)
    _keys(d, "scenario", ("system",), _SCENARIO_KEYS)
    sysd = d["system"]
    _keys(sysd, "system", ("hamiltonian", "temperature"))
    h = parse_matrix(sysd["hamiltonian"], "system.hamiltonian")
    baths = []
    for i, b in enumerate(d.get("baths", [])):
        _keys(b, f"baths[{i}]", ("label", "hamiltonian", "temperature"))
        baths.append(Bath(b["label"], parse_matrix(b["hamiltonian"], f"baths[{i}]"), float(b["temperature"])))
    dims = {"S": h.shape[0], **{b.label: b.dim for b in baths}}
    u_init = tuple(_step(s, dims, f"u_init[{i}]") for i, s in enumerate(d.get("u_init", [])))
    u_fin = tuple(_step(s, dims, f"u_fin[{i}]") for i, s in enumerate(d.get("u_fin", [])))
    base = dict(h_system=h, temperature=float(sysd["temperature"]), baths=tuple(baths),
                u_init=u_init, u_fin=u_fin, name=str(d.get("name", "scenario")),
                final_temperature=d.get("final_temperature"), meta={"seed": d.get("seed")})
    meas = None
    if d.get("measurement") is not None:
        meas = _measurement(d["measurement"], dims, ThermoScenario(**base))
    feedback = tuple(None if f is None else _unitary(f, dims, f"feedback[{i}]")
                     for i, f in enumerate(d.get("feedback", [])))
    return ThermoScenario(measurement=meas, feedback=feedback, **base)


def scenario_to_dict(sc: ThermoScenario) -> dict:
    """Explicit (preset-free) description that rebuilds ``sc``."""
    out: dict[str, Any] = {
        "name": sc.name,
        "system": {"hamiltonian": dump_matrix(sc.h_system), "temperature": sc.temperature},
        "baths": [{"label": b.label, "hamiltonian": dump_matrix(b.hamiltonian),
                   "temperature": b.temperature} for b in sc.baths],
        "u_init": [_dump_step(s) for s in sc.u_init],
        "u_fin": [_dump_step(s) for s in sc.u_fin],
        "final_temperature": sc.final_temperature,
    }
    if sc.measurement is not None:
        m = sc.measurement
        out["measurement"] = {"interaction": _dump_unitary(m.interaction),
                              "projectors": [dump_matrix(p) for p in m.probe_projectors],
                              "probe_dim": m.probe_init.layout.dim}
    out["feedback"] = [None if u is None else _dump_unitary(u) for u in sc.feedback]
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
