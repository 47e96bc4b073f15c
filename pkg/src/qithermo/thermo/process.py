"""Run a measurement-feedback process and book energies, heats, work and information."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..entanglement import von_neumann_entropy
from ..qcore import (
    DensityMatrix,
    PureState,
    SystemLayout,
    _dm,
    apply_unitary,
    embed_operator,
    partial_trace,
    purify,
    reorder,
    tensor,
)
from .info import (
    P_DROP,
    canonical_cross_entropy,
    canonical_state,
    energy,
    free_energy,
    i_e,
    i_qc_forms,
    log_partition,
    matching_beta,
)
from .scenario import SYSTEM, Collide, Evolve, Quench, ThermoScenario

REFERENCE = "R"
TOL_NEW = 1e-7
TOL_FIRST_LAW = 1e-9


class _Hamiltonian:
    """Mutable bookkeeping of the current Hamiltonian on the S + baths layout."""

    def __init__(self, sc: ThermoScenario):
        self.layout = sc.layout
        self.system = sc.h_system
        self.baths = {b.label: b.hamiltonian for b in sc.baths}
        self.couplings: dict = {}

    def system_term(self) -> np.ndarray:
        return embed_operator(self.system, self.layout.subset([SYSTEM]), self.layout)

    def interaction_term(self) -> np.ndarray:
        out = np.zeros((self.layout.dim, self.layout.dim), dtype=complex)
        for lab, h in self.couplings.items():
            out += embed_operator(h, self.layout.subset([SYSTEM, lab]), self.layout)
        return out

    def bath_term(self, label: str) -> np.ndarray:
        return embed_operator(self.baths[label], self.layout.subset([label]), self.layout)

    def total(self) -> np.ndarray:
        out = self.system_term() + self.interaction_term()
        for lab in self.baths:
            out = out + self.bath_term(lab)
        return out

    def set(self, step: Quench):
        if step.target == SYSTEM:
            self.system = step.hamiltonian
        else:
            self.couplings[step.target[len(SYSTEM) + 1:]] = step.hamiltonian


@dataclass
class ProcessLedger:
    """Write-once record of one process run.

    Energies are in units with ``k_B = 1``; entropies and informations in nats.
    ``heats`` maps each reservoir (a bath factor or a family of collision
    units) to the energy it lost; ``reservoir_temperatures`` gives its
    temperature.
    """

    name: str
    temperature: float
    final_beta: float | None
    final_temperature: float
    states: dict
    probabilities: tuple
    outcome_states: tuple
    u_system: float
    u_system_final: float
    f_system: float
    f_system_final: float
    heats: dict
    reservoir_temperatures: dict
    work: float
    work_by_stage: dict
    delta_u_interaction: float
    entropy_initial: float
    entropy_1: float
    entropy_2_avg: float
    entropy_3: float
    i_e: float
    i_e_method: str
    i_qc: float
    i_qc_alternative: float
    initial_term: float
    final_term: float
    measured: bool
    flags: tuple = field(default_factory=tuple)

    @property
    def heat_term(self) -> float:
        return float(sum(q / self.reservoir_temperatures[r] for r, q in self.heats.items()))

    @property
    def total_heat(self) -> float:
        return float(sum(self.heats.values()))

    def summary(self) -> dict:
        return {
            "name": self.name,
            "W_ext": self.work,
            "Q": dict(self.heats),
            "U_S": self.u_system,
            "U_S_final": self.u_system_final,
            "F_S": self.f_system,
            "F_S_final": self.f_system_final,
            "T": self.temperature,
            "T_final": self.final_temperature,
            "I_E": self.i_e,
            "I_E_method": self.i_e_method,
            "I_QC": self.i_qc,
            "p": list(self.probabilities),
            "S_i": self.entropy_initial,
            "S_1": self.entropy_1,
            "S_2_avg": self.entropy_2_avg,
            "S_3": self.entropy_3,
            "flags": list(self.flags),
        }


def _run_steps(state: DensityMatrix, steps, ham: _Hamiltonian, heats: dict, temps: dict):
    work = 0.0
    for step in steps:
        if isinstance(step, Quench):
            before = ham.total()
            ham.set(step)
            work += energy(state, before - ham.total())
        elif isinstance(step, Evolve):
            h = ham.total()
            new = apply_unitary(state, step.unitary)
            work += energy(state, h) - energy(new, h)
            state = new
        elif isinstance(step, Collide):
            unit_layout = SystemLayout.of((step.unit_label, step.hamiltonian.shape[0]))
            unit = canonical_state(step.hamiltonian, step.temperature, unit_layout)
            h = ham.total()
            joint = apply_unitary(tensor(state, unit), step.unitary)
            new = partial_trace(joint, state.layout.labels)
            unit_after = partial_trace(joint, [step.unit_label])
            q = energy(unit, step.hamiltonian) - energy(unit_after, step.hamiltonian)
            work += energy(state, h) - energy(new, h) + q
            known = temps.setdefault(step.reservoir, step.temperature)
            if abs(known - step.temperature) > 1e-12:
                raise ValueError(f"reservoir {step.reservoir!r} used at two temperatures")
            heats[step.reservoir] = heats.get(step.reservoir, 0.0) + q
            state = new
        else:
            raise TypeError(f"unknown schedule step {type(step).__name__}")
    return state, work


def _measure(sc: ThermoScenario, rho1: DensityMatrix):
    """Outcome probabilities, normalised post-measurement states and the purification."""
    m = sc.measurement
    psi = purify(rho1, REFERENCE)
    probe = m.probe_label
    joint = apply_unitary(tensor(m.probe_init, psi), m.interaction)
    layout = joint.layout
    keep = list(rho1.layout.labels)
    probs, posts = [], []
    for proj in m.probe_projectors:
        v = embed_operator(proj, layout.subset([probe]), layout) @ joint.amplitudes
        pk = float(np.real(np.vdot(v, v)))
        probs.append(pk)
        if pk <= P_DROP:
            posts.append(None)
            continue
        post = PureState.normalized(layout, v)
        posts.append(reorder(partial_trace(post, keep), keep))
    return psi, probs, posts


def initial_state(sc: ThermoScenario) -> DensityMatrix:
    """Product of the canonical system and bath states."""
    layout = sc.layout
    rho = canonical_state(sc.h_system, sc.temperature, layout.subset([SYSTEM]))
    for b in sc.baths:
        rho = tensor(rho, canonical_state(b.hamiltonian, b.temperature, layout.subset([b.label])))
    return rho


def state_before_measurement(sc: ThermoScenario) -> DensityMatrix:
    """State after the initial schedule."""
    rho, _ = _run_steps(initial_state(sc), sc.u_init, _Hamiltonian(sc), {}, {})
    return rho


def run_process(sc: ThermoScenario) -> ProcessLedger:
    """Execute the scenario and return the full ledger.

    Work is the energy drop of system plus baths (plus any collision unit)
    over every step: Hamiltonian quenches, unitary evolution, the probe
    interaction and the feedback.
    """
    layout = sc.layout
    flags = []
    ham = _Hamiltonian(sc)
    rho_i = initial_state(sc)
    h_s_init = sc.h_system
    e_bath_i = {b.label: energy(rho_i, ham.bath_term(b.label)) for b in sc.baths}
    heats: dict = {}
    temps: dict = {}
    work_stage = {}

    rho1, work_stage["init"] = _run_steps(rho_i, sc.u_init, ham, heats, temps)
    h_now = ham.total()

    if sc.measurement is None:
        probs, posts = [1.0], [rho1]
        info_e = None
        qc = None
    else:
        psi, probs, posts = _measure(sc, rho1)
        info_e = i_e(psi, sc.measurement.interaction, sc.measurement.probe_init, REFERENCE)
        qc = i_qc_forms(rho1, sc.measurement)
    total_p = sum(probs)
    probs = [p / total_p for p in probs]
    avg = sum(p * r.matrix for p, r in zip(probs, posts) if r is not None)
    rho_meas = _dm(layout, avg)
    work_stage["measurement"] = energy(rho1, h_now) - energy(rho_meas, h_now)

    feedback = sc.feedback or (None,) * len(probs)
    after_fb = []
    for r, u in zip(posts, feedback):
        if r is None:
            after_fb.append(None)
        else:
            after_fb.append(r if u is None else apply_unitary(r, u))
    rho3 = _dm(layout, sum(p * r.matrix for p, r in zip(probs, after_fb) if r is not None))
    work_stage["feedback"] = energy(rho_meas, h_now) - energy(rho3, h_now)

    rho_f, work_stage["final"] = _run_steps(rho3, sc.u_fin, ham, heats, temps)

    for b in sc.baths:
        heats[b.label] = e_bath_i[b.label] - energy(rho_f, ham.bath_term(b.label))
        temps[b.label] = b.temperature

    rho_f_s = partial_trace(rho_f, [SYSTEM])
    rho_i_s = partial_trace(rho_i, [SYSTEM])
    h_s_final = ham.system
    if sc.final_temperature is not None:
        beta_f = 1.0 / sc.final_temperature
    else:
        beta_f = matching_beta(rho_f_s, h_s_final)
        if beta_f is None:
            flags.append("final_hamiltonian_degenerate")
    t_final = sc.temperature if beta_f is None else (math.inf if beta_f == 0 else
                                                     (0.0 if math.isinf(beta_f) else 1.0 / beta_f))
    if beta_f is not None and math.isinf(beta_f):
        flags.append("final_ground_state")
    beta_eval = 1.0 / sc.temperature if beta_f is None else beta_f
    final_term = canonical_cross_entropy(rho_f_s, h_s_final, beta_eval)

    if math.isinf(beta_eval) or beta_eval == 0:
        f_final = float(np.linalg.eigvalsh(h_s_final)[0]) if math.isinf(beta_eval) else -math.inf
    else:
        f_final = -log_partition(h_s_final, beta_eval) / beta_eval

    beta = 1.0 / sc.temperature
    initial_term = beta * energy(rho_i_s, h_s_init) + log_partition(h_s_init, beta)
    h_int_f = ham.interaction_term()

    s_posts = [von_neumann_entropy(r) if r is not None else 0.0 for r in posts]
    if info_e is None:
        ie, ie_method, iqc, iqc_alt = 0.0, "none", 0.0, 0.0
    else:
        ie, ie_method = info_e.value, info_e.method
        iqc, iqc_alt = qc.value, qc.alternative

    return ProcessLedger(
        name=sc.name,
        temperature=sc.temperature,
        final_beta=beta_f,
        final_temperature=t_final,
        states={"i": rho_i, "1": rho1, "1'": rho_meas, "3": rho3, "f": rho_f},
        probabilities=tuple(probs),
        outcome_states=tuple(posts),
        u_system=energy(rho_i_s, h_s_init),
        u_system_final=energy(rho_f_s, h_s_final),
        f_system=free_energy(h_s_init, sc.temperature),
        f_system_final=f_final,
        heats=heats,
        reservoir_temperatures=temps,
        work=float(sum(work_stage.values())),
        work_by_stage=work_stage,
        delta_u_interaction=energy(rho_f, h_int_f),
        entropy_initial=von_neumann_entropy(rho_i),
        entropy_1=von_neumann_entropy(rho1),
        entropy_2_avg=float(sum(p * s for p, s in zip(probs, s_posts))),
        entropy_3=von_neumann_entropy(rho3),
        i_e=ie,
        i_e_method=ie_method,
        i_qc=iqc,
        i_qc_alternative=iqc_alt,
        initial_term=initial_term,
        final_term=final_term,
        measured=sc.measurement is not None,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class SlackReport:
    """Slacks (RHS minus LHS) of the second-law inequalities for one ledger.

    ``conventional`` is the inequality without any information term; it may
    be negative when feedback is used.  ``isothermal`` is ``None`` unless all
    reservoirs and the final state share the preparation temperature.
    """

    new: float
    old: float
    conventional: float
    isothermal: float | None
    lemma1: float
    first_law_residual: float
    qc_form_residual: float
    ok: bool

    def as_dict(self) -> dict:
        return {
            "new": self.new,
            "old": self.old,
            "conventional": self.conventional,
            "isothermal": self.isothermal,
            "lemma1": self.lemma1,
            "first_law_residual": self.first_law_residual,
            "qc_form_residual": self.qc_form_residual,
            "ok": self.ok,
        }


def check_inequalities(led: ProcessLedger, tol: float = TOL_NEW) -> SlackReport:
    """Evaluate every inequality recorded by the ledger.

    With ``A = (U - F)/T + sum_m Q_m / T_m`` and
    ``B = -tr[rho_f^S log gamma']`` (which equals ``(U' - F')/T'``), the
    slacks are ``B + I_E - A`` (new), ``B + I_QC - A`` (old) and ``B - A``
    (conventional).
    """
    lhs = led.initial_term + led.heat_term
    rhs = led.final_term
    new = rhs + led.i_e - lhs
    old = rhs + led.i_qc - lhs
    conventional = rhs - lhs

    d_us = led.u_system_final - led.u_system
    first = abs(led.work - (led.total_heat - d_us - led.delta_u_interaction))

    iso = None
    same_t = all(abs(t - led.temperature) <= 1e-12 for t in led.reservoir_temperatures.values())
    if same_t and ("final_hamiltonian_degenerate" in led.flags
                   or abs(led.final_temperature - led.temperature) <= 1e-9 * led.temperature):
        # W_ext <= -dF + T I_E, with any coupling energy left at the end on the work side
        t = led.temperature
        iso = -(led.f_system_final - led.f_system) + t * led.i_e - led.work - led.delta_u_interaction

    lemma = led.i_e - led.i_qc
    qc_res = abs(led.i_qc - led.i_qc_alternative)
    ok = new >= -tol and old >= -tol and lemma >= -tol and first <= TOL_FIRST_LAW * max(1.0, abs(led.work))
    return SlackReport(new, old, conventional, iso, lemma, first, qc_res, bool(ok))
