"""Randomised property sweeps behind the ``sweep`` command and the acceptance suite.

Each check draws independent trials from ``SeedSequence(seed).spawn(n)`` so
a trial is reproducible from ``(check, seed, index)`` alone.  Trials may run
on a thread pool (``QITHERMO_THREADS``); results are always assembled in
index order, so reports do not depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .config import scenario_to_dict
from .entanglement import (
    EnsembleDecomposition,
    eof_2q,
    eof_convex_roof,
    relative_entropy,
    schmidt_coefficients,
    entanglement_entropy,
    von_neumann_entropy,
)
from .optmeas import MeasurementModel, measurement_outcomes, optimal_probe_measurement, probe_basis_from_ensemble
from .qcore import (
    DensityMatrix,
    PureState,
    SystemLayout,
    UnitaryOp,
    apply_unitary,
    haar_state,
    haar_unitary,
    partial_trace,
    purify,
    random_density,
    reorder,
    tensor,
)
from .thermo.constructions import (
    S_LAYOUT,
    SP_LAYOUT,
    probe_ground,
    random_probe_basis,
    random_scenario,
    theorem4_scenario,
    theorem5_witness,
)
from .thermo.info import i_e, i_qc_forms
from .thermo.process import check_inequalities, run_process

THREADS_ENV = "QITHERMO_THREADS"
TOL_SLACK = 1e-7

PSR1 = SystemLayout.of(("P", 2), ("S", 2), ("R1", 2))


@dataclass
class Trial:
    index: int
    metrics: dict
    passed: bool
    replay: dict = field(default_factory=dict)


@dataclass
class Report:
    check: str
    seed: int
    trials: list
    tool_version: str = __version__

    @property
    def violations(self) -> list:
        return [t for t in self.trials if not t.passed]

    def aggregate(self) -> dict:
        names = sorted({k for t in self.trials for k in t.metrics})
        out = {}
        for n in names:
            vals = [t.metrics[n] for t in self.trials if t.metrics.get(n) is not None]
            if vals:
                out[n] = {"min": float(min(vals)), "max": float(max(vals))}
        return out

    def to_dict(self, per_trial: bool = True) -> dict:
        d = {
            "tool": "qithermo",
            "tool_version": self.tool_version,
            "check": self.check,
            "seed": self.seed,
            "trials": len(self.trials),
            "aggregate": self.aggregate(),
            "violations": [{"trial": t.index, "metrics": t.metrics,
                            "replay": {"check": self.check, "seed": self.seed, "trial": t.index, **t.replay}}
                           for t in self.violations],
        }
        if per_trial:
            d["per_trial"] = [{"trial": t.index, **t.metrics} for t in self.trials]
        return d


# --- individual checks ------------------------------------------------------------

def _process_trial(rng, check: str) -> tuple:
    sc = random_scenario(rng)
    led = run_process(sc)
    rep = check_inequalities(led)
    metrics = {"slack_new": rep.new, "slack_old": rep.old, "slack_conventional": rep.conventional,
               "lemma1": rep.lemma1, "first_law_residual": rep.first_law_residual,
               "entropy_1_minus_i": abs(led.entropy_1 - led.entropy_initial)}
    first_ok = rep.first_law_residual <= 1e-9
    if check == "new2ndlaw":
        ok = rep.new >= -TOL_SLACK and first_ok
    elif check == "old2ndlaw":
        ok = rep.old >= -TOL_SLACK and first_ok
    else:
        ok = rep.lemma1 >= -TOL_SLACK
    return metrics, ok, {"scenario": scenario_to_dict(sc)}


def check_lemma1(rng):
    """I_E - I_QC for a random qubit process (bath absent or one qubit)."""
    return _process_trial(rng, "lemma1")


def check_new2ndlaw(rng):
    return _process_trial(rng, "new2ndlaw")


def check_old2ndlaw(rng):
    return _process_trial(rng, "old2ndlaw")


def check_appendix(rng):
    """Optimal probe readout on a Haar-random three-qubit state."""
    psi = haar_state(PSR1, rng)
    om = optimal_probe_measurement(psi)
    target = eof_2q(reorder(partial_trace(psi, ["S", "R1"]), ["S", "R1"]))
    completeness = float(np.max(np.abs(sum(om.projectors) - np.eye(2))))
    idem = max(float(np.max(np.abs(p @ p - p))) for p in om.projectors)
    e_err, spectra = 0.0, []
    for pk, st in measurement_outcomes(psi, om.projectors, "P"):
        if st is None:
            continue
        sr = PureState.normalized(SystemLayout.of(("S", 2), ("R1", 2)),
                                  _sr_vector(st))
        e_err = max(e_err, abs(entanglement_entropy(sr, ["S"]) - target))
        spectra.append(schmidt_coefficients(sr, ["S"]))
    lu = float(np.max(np.abs(spectra[0] - spectra[1]))) if len(spectra) == 2 else 0.0
    metrics = {"completeness": completeness, "idempotency": idem, "lu_spectrum_diff": lu,
               "e_mismatch": e_err, "a": om.a}
    ok = completeness <= 1e-9 and idem <= 1e-9 and lu <= 1e-8 and e_err <= 1e-7
    return metrics, ok, {"state": [[float(x.real), float(x.imag)] for x in psi.amplitudes],
                         "method": om.method}


def _sr_vector(st: PureState) -> np.ndarray:
    """S-R1 part of a (probe) x (S R1) product state."""
    t = reorder(st, ["P", "S", "R1"]).amplitudes.reshape(2, 4)
    u, s, vh = np.linalg.svd(t)
    return vh[0] * s[0]


def check_identities(rng):
    """Feedback-mixing identity and the two forms of the QC-mutual information."""
    d = int(rng.integers(2, 4))
    n = int(rng.integers(2, 4))
    lay = SystemLayout.of(("S", d))
    p = rng.dirichlet(np.ones(n))
    states = [random_density(lay, rng, rank=int(rng.integers(1, d + 1))) for _ in range(n)]
    rot = [apply_unitary(s, UnitaryOp(lay, haar_unitary(d, rng))) for s in states]
    mix = DensityMatrix(lay, sum(pk * r.matrix for pk, r in zip(p, rot)))
    lhs = von_neumann_entropy(mix)
    rhs = sum(pk * von_neumann_entropy(s) for pk, s in zip(p, states)) \
        + sum(pk * relative_entropy(r, mix) for pk, r in zip(p, rot))
    eq33 = abs(lhs - rhs)

    dp = int(rng.integers(2, 4))
    lay_sp = SystemLayout.of(("S", d), ("P", dp))
    m = MeasurementModel(PureState.basis(SystemLayout.of(("P", dp)), 0),
                         UnitaryOp(lay_sp, haar_unitary(d * dp, rng)), random_probe_basis(rng, dp))
    qc = i_qc_forms(random_density(lay, rng), m)
    metrics = {"eq33_residual": eq33, "qc_form_residual": qc.residual}
    return metrics, eq33 <= 1e-10 and qc.residual <= 1e-10, {}


SB = SystemLayout.of(("S", 2), ("B", 2))
SP4 = SystemLayout.of(("S", 2), ("P", 4))


def _embed_probe_qubit(u2: np.ndarray) -> UnitaryOp:
    """System-qubit-probe unitary acting on the first two levels of a four-level probe."""
    u = np.eye(8, dtype=complex)
    idx = [s * 4 + p for s in range(2) for p in range(2)]
    u[np.ix_(idx, idx)] = u2
    return UnitaryOp(SP4, u)


def theorem3_exact(rng, with_bath: bool):
    """I_QC with the ensemble-steered probe basis against the exact I_E."""
    rho_s = random_density(S_LAYOUT, rng)
    u = UnitaryOp(SP_LAYOUT, haar_unitary(4, rng))
    psi_sr = purify(rho_s, "R1", reference_dim=2)
    out_sr = apply_unitary(tensor(probe_ground(), psi_sr), u)
    rho_sr = partial_trace(out_sr, ["S", "R1"])
    _, wit = eof_convex_roof(rho_sr, ["S"], ensemble_size=2, restarts=16, seed=int(rng.integers(2**31)))
    if with_bath:
        rho_b = random_density(SystemLayout.of(("B", 2)), rng)
        psi_br = purify(rho_b, "R2", reference_dim=2)
        total = tensor(out_sr, psi_br)
        members = tuple(tensor(mem, psi_br) for mem in wit.members)
        wit = EnsembleDecomposition(wit.weights, members)
        rho1 = tensor(rho_s, rho_b)
    else:
        total = out_sr
        rho1 = rho_s
    basis = probe_basis_from_ensemble(total, wit, "P")
    m = MeasurementModel.from_basis(probe_ground(), u, basis)
    info = i_e(purify(rho1, "R"), u, probe_ground(), "R")
    qc = i_qc_forms(rho1, m)
    return {"diff": abs(qc.value - info.value), "i_e": info.value, "i_qc": qc.value,
            "method": info.method}


def theorem3_roof(rng):
    """Correlated system-bath state: I_E only available from the convex roof."""
    rho1 = random_density(SB, rng)
    u = _embed_probe_qubit(haar_unitary(4, rng))
    p4 = PureState.basis(SystemLayout.of(("P", 4)), 0)
    psi = purify(rho1, "R")
    total = apply_unitary(tensor(p4, psi), u)
    rho_sbr = partial_trace(total, ["S", "B", "R"])
    _, wit = eof_convex_roof(rho_sbr, ["S", "B"], ensemble_size=4, restarts=32,
                             seed=int(rng.integers(2**31)))
    basis = probe_basis_from_ensemble(total, wit, "P")
    m = MeasurementModel.from_basis(p4, u, basis)
    info = i_e(psi, u, p4, "R", roof_budget={"seed": int(rng.integers(2**31))})
    qc = i_qc_forms(rho1, m)
    return {"diff": abs(qc.value - info.value), "i_e": info.value, "i_qc": qc.value,
            "method": info.method}


def check_theorem3(rng):
    kind = int(rng.integers(3))
    if kind == 2:
        r = theorem3_roof(rng)
        tol = 1e-4
    else:
        r = theorem3_exact(rng, with_bath=bool(kind))
        tol = 1e-6
    metrics = {"diff": r["diff"], "i_e": r["i_e"], "i_qc": r["i_qc"]}
    return metrics, r["diff"] <= tol, {"method": r["method"]}


def check_theorem4(rng):
    u = UnitaryOp(SP_LAYOUT, haar_unitary(4, rng))
    sc, led = theorem4_scenario(1.0, u)
    slack = check_inequalities(led).new
    return {"slack_new": slack}, -1e-7 <= slack <= 1e-6, {"scenario": scenario_to_dict(sc)}


def check_theorem5(rng):
    """Random two-outcome qubit measurement: the searched gap never undercuts
    the exact infimum, vanishes for equal post-measurement spectra, and the
    mixing identity holds on every candidate."""
    m = MeasurementModel(probe_ground(), UnitaryOp(SP_LAYOUT, haar_unitary(4, rng)),
                         random_probe_basis(rng))
    rho1 = random_density(S_LAYOUT, rng)
    c = theorem5_witness(m, rho1, grid=12, refine=3)
    consistent = c.gap >= c.lower_bound - 1e-10 and c.gap - c.lower_bound <= 1e-6
    metrics = {"lower_bound": c.lower_bound, "gap": c.gap, "identity_residual": c.max_identity_residual,
               "gap_minus_bound": c.gap - c.lower_bound}
    ok = consistent and c.max_identity_residual <= 1e-10 and (not c.lu_equivalent or c.gap <= 1e-6)
    return metrics, ok, {}


CHECKS: dict[str, Callable] = {
    "lemma1": check_lemma1,
    "new2ndlaw": check_new2ndlaw,
    "old2ndlaw": check_old2ndlaw,
    "theorem3": check_theorem3,
    "theorem4": check_theorem4,
    "theorem5": check_theorem5,
    "appendix": check_appendix,
    "identities": check_identities,
}


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_trial(check: str, seed: int, index: int, trials: int | None = None) -> Trial:
    """Replay one trial.  ``trials`` only needs to be at least ``index + 1``."""
    fn = CHECKS[check]
    child = np.random.SeedSequence(seed).spawn(max(index + 1, trials or 0))[index]
    metrics, ok, replay = fn(np.random.default_rng(child))
    return Trial(index, {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                         for k, v in metrics.items()}, bool(ok), replay if not ok else {})


def sweep(check: str, trials: int = 100, seed: int = 0, threads: int | None = None) -> Report:
    """Run ``trials`` independent instances of ``check``."""
    if check not in CHECKS:
        raise KeyError(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")
    children = np.random.SeedSequence(seed).spawn(trials)
    fn = CHECKS[check]

    def one(i):
        metrics, ok, replay = fn(np.random.default_rng(children[i]))
        metrics = {k: (float(v) if isinstance(v, (int, float, np.floating)) else v) for k, v in metrics.items()}
        return Trial(i, metrics, bool(ok), replay if not ok else {})

    n = _threads(threads)
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(i) for i in range(trials)]
    return Report(check, seed, results)
