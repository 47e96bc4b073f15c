"""Ready-made scenarios: null process, Szilard engine, random processes,
the equality-attaining construction for a qubit and the feedback-gap witness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..entanglement import _entropy_of_spectrum, von_neumann_entropy
from ..optmeas import MeasurementModel, optimal_probe_measurement
from ..qcore import (
    DensityMatrix,
    PureState,
    SystemLayout,
    UnitaryOp,
    apply_unitary,
    embed_operator,
    haar_unitary,
    partial_trace,
    purify,
    random_hermitian,
    reorder,
    tensor,
)
from .info import P_DROP, canonical_state
from .process import ProcessLedger, run_process
from .scenario import SYSTEM, Bath, Collide, Evolve, Quench, ThermoScenario

PROBE = "P"
S_LAYOUT = SystemLayout.of((SYSTEM, 2))
P_LAYOUT = SystemLayout.of((PROBE, 2))
SP_LAYOUT = SystemLayout.of((SYSTEM, 2), (PROBE, 2))
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
CNOT_SP = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def probe_ground(dim: int = 2) -> PureState:
    return PureState.basis(SystemLayout.of((PROBE, dim)), 0)


def computational_projectors(dim: int = 2) -> tuple:
    return tuple(np.diag(np.eye(dim)[k]).astype(complex) for k in range(dim))


def cnot_measurement() -> MeasurementModel:
    """CNOT with the system as control, read out in the computational basis."""
    return MeasurementModel(probe_ground(), UnitaryOp(SP_LAYOUT, CNOT_SP), computational_projectors())


def weak_measurement(eta: float) -> MeasurementModel:
    """Two-outcome measurement with Kraus operators ``diag(1, cos eta)`` and
    ``diag(0, sin eta)``, realised by a system-probe unitary."""
    k0 = np.diag([1.0, math.cos(eta)])
    k1 = np.diag([0.0, math.sin(eta)])
    u = np.zeros((4, 4), dtype=complex)
    # column (s, p=0) carries sum_k K_k|s> |k>; the (s, p=1) columns complete the unitary
    for s in range(2):
        e = np.eye(2)[s]
        u[:, 2 * s] = np.kron(k0 @ e, [1.0, 0.0]) + np.kron(k1 @ e, [0.0, 1.0])
    q, _ = np.linalg.qr(np.concatenate([u[:, [0, 2]], np.eye(4)], axis=1))
    u[:, [1, 3]] = q[:, 2:4]
    return MeasurementModel(probe_ground(), UnitaryOp(SP_LAYOUT, u), computational_projectors())


def null_scenario(temperature: float = 1.0, omega: float = 1.0) -> ThermoScenario:
    """Qubit left alone: no control, no measurement."""
    return ThermoScenario(np.diag([0.0, omega]), temperature, name="null")


# --- Szilard engine -------------------------------------------------------------

def ladder_gaps(steps: int, temperature: float = 1.0, x_max: float = 8.0) -> np.ndarray:
    """Decreasing level spacings for the isothermal expansion ladder.

    ``E_j = -2 T log tan(u_j)`` with ``u_j`` evenly spaced from
    ``arctan(exp(-x_max/2))`` towards ``pi/4``.  The spacing is uniform in
    the thermodynamic length of a thermal qubit, which keeps the
    dissipation per step equal along the ladder.
    """
    u = np.linspace(math.atan(math.exp(-x_max / 2.0)), math.pi / 4.0, steps, endpoint=False)
    return -2.0 * temperature * np.log(np.tan(u))


def exchange_unitary(unit_dim: int, labels=(SYSTEM, "C")) -> UnitaryOp:
    """Energy-conserving exchange ``|0, n> <-> |1, n-1>`` of a qubit and an
    equally spaced ``unit_dim``-level unit."""
    d = unit_dim
    perm = np.zeros((2 * d, 2 * d))
    for n in range(d):
        src0, src1 = n, d + n
        perm[(d + n - 1) if n >= 1 else 0, src0] = 1.0
        perm[n + 1 if n <= d - 2 else d + d - 1, src1] = 1.0
    layout = SystemLayout.of((labels[0], 2), (labels[1], d))
    return UnitaryOp(layout, perm)


def szilard_scenario(steps: int = 64, unit_dim: int = 8, temperature: float = 1.0,
                     x_max: float = 8.0) -> ThermoScenario:
    """Single-particle Szilard engine.

    The system is a degenerate qubit at temperature ``T``.  A CNOT copies
    its state into the probe; outcome 1 is undone with a flip so the system
    ends in ``|0>``.  Work is then extracted along a ladder of ``steps``
    level splittings: each rung is a quench followed by an exchange with a
    fresh ``unit_dim``-level thermal unit of the same spacing.
    """
    gaps = ladder_gaps(steps, temperature, x_max)
    unit = exchange_unitary(unit_dim)
    u_fin = []
    for e in gaps:
        u_fin.append(Quench(SYSTEM, np.diag([0.0, e])))
        u_fin.append(Collide(np.diag(e * np.arange(unit_dim)), temperature, unit, reservoir="ladder"))
    u_fin.append(Quench(SYSTEM, np.zeros((2, 2))))
    feedback = (None, UnitaryOp(S_LAYOUT, PAULI_X))
    return ThermoScenario(np.zeros((2, 2)), temperature, measurement=cnot_measurement(),
                          feedback=feedback, u_fin=tuple(u_fin), name=f"szilard(N={steps},d={unit_dim})",
                          meta={"steps": steps, "unit_dim": unit_dim, "x_max": x_max})


# --- random processes ------------------------------------------------------------

def random_probe_basis(rng: np.random.Generator, dim: int = 2) -> tuple:
    u = haar_unitary(dim, rng)
    return tuple(np.outer(u[:, k], u[:, k].conj()) for k in range(dim))


def random_measurement(rng: np.random.Generator) -> MeasurementModel:
    """Haar interaction on system and probe, readout in a Haar-random basis."""
    return MeasurementModel(probe_ground(), UnitaryOp(SP_LAYOUT, haar_unitary(4, rng)),
                            random_probe_basis(rng))


def _random_spectrum_hamiltonian(rng, dim=2, scale=1.0):
    return random_hermitian(dim, rng, scale)


def random_scenario(rng: np.random.Generator, bath: bool | None = None) -> ThermoScenario:
    """Random qubit process, optionally with a one-qubit bath.

    The system is rotated before the measurement, measured through a Haar
    probe interaction, fed back with Haar unitaries on system plus bath, and
    finally coupled to the bath, evolved and quenched to a random
    Hamiltonian.  The pre-measurement state stays a product of system and
    bath, so the entanglement information is exact.
    """
    if bath is None:
        bath = bool(rng.integers(2))
    temp = float(rng.uniform(0.3, 3.0))
    h_s = _random_spectrum_hamiltonian(rng)
    baths = ()
    if bath:
        baths = (Bath("B", _random_spectrum_hamiltonian(rng), float(rng.uniform(0.3, 3.0))),)
    layout = SystemLayout(((SYSTEM, 2),) + tuple((b.label, b.dim) for b in baths))
    u_init = (Quench(SYSTEM, _random_spectrum_hamiltonian(rng)),
              Evolve(UnitaryOp(S_LAYOUT, haar_unitary(2, rng))))
    meas = random_measurement(rng)
    feedback = tuple(UnitaryOp(layout, haar_unitary(layout.dim, rng)) for _ in range(meas.n_outcomes))
    u_fin = []
    if bath:
        u_fin.append(Quench("S:B", _random_spectrum_hamiltonian(rng, 4, 0.5)))
        u_fin.append(Evolve(UnitaryOp(layout, haar_unitary(layout.dim, rng))))
        u_fin.append(Quench("S:B", np.zeros((4, 4))))
    else:
        u_fin.append(Evolve(UnitaryOp(layout, haar_unitary(layout.dim, rng))))
    u_fin.append(Quench(SYSTEM, _random_spectrum_hamiltonian(rng)))
    return ThermoScenario(h_s, temp, baths=baths, u_init=u_init, measurement=meas,
                          feedback=feedback, u_fin=tuple(u_fin), name="random")


# --- equality construction ---------------------------------------------------------

def theorem4_scenario(temperature: float, u_sp: UnitaryOp, omega: float = 1.0,
                      bath: Bath | None = None) -> tuple[ThermoScenario, ProcessLedger]:
    """Qubit process whose entanglement-information inequality is an equality.

    The system ``H = diag(0, omega)`` starts canonical at ``temperature``
    and is measured with the two-outcome probe readout that leaves each
    outcome with exactly the entanglement of formation between system and
    reference.  Both outcomes then share one spectrum ``(l0, l1)``; the
    feedback rotates each post-measurement state onto ``diag(l0, l1)``,
    which is canonical for ``H`` at ``beta' = log(l0/l1)/omega``.  Nothing
    else is done, and an optional bath is left untouched.

    When the outcomes are product states the final state is the ground
    state (``beta' = inf``); the ledger is flagged ``zero_entanglement_outcome``.
    """
    if u_sp.layout.labels != (SYSTEM, PROBE) or u_sp.layout.dims != (2, 2):
        raise ValueError("u_sp must act on (S, P) qubits in that order")
    h = np.diag([0.0, float(omega)])
    rho_s = canonical_state(h, temperature, S_LAYOUT)
    psi_sr = purify(rho_s, "R1", reference_dim=2)
    psi = apply_unitary(tensor(probe_ground(), psi_sr), u_sp)
    om = optimal_probe_measurement(psi, (PROBE, SYSTEM, "R1"))
    meas = MeasurementModel(probe_ground(), u_sp, om.projectors)
    feedback, spectra = [], []
    for proj in om.projectors:
        v = embed_operator(proj, psi.layout.subset([PROBE]), psi.layout) @ psi.amplitudes
        pk = float(np.real(np.vdot(v, v)))
        if pk <= P_DROP:
            feedback.append(None)
            continue
        post = partial_trace(PureState.normalized(psi.layout, v), [SYSTEM])
        w, vecs = np.linalg.eigh(post.matrix)
        w, vecs = w[::-1], vecs[:, ::-1]
        spectra.append(w)
        feedback.append(UnitaryOp(S_LAYOUT, vecs.conj().T))
    baths = (bath,) if bath is not None else ()
    flags = {"method": om.method, "measurement_flags": om.flags}
    if min(s[-1] for s in spectra) <= 1e-12:
        flags["zero_entanglement_outcome"] = True
    sc = ThermoScenario(h, temperature, baths=baths, measurement=meas, feedback=tuple(feedback),
                        name="theorem4", meta=flags)
    led = run_process(sc)
    if flags.get("zero_entanglement_outcome"):
        led.flags = led.flags + ("zero_entanglement_outcome",)
    return sc, led


# --- feedback gap witness ------------------------------------------------------------

def _zyz(angles: np.ndarray) -> np.ndarray:
    """Batch of ``Rz(a) Ry(b) Rz(c)``; ``angles`` has shape (..., 3)."""
    a, b, c = angles[..., 0], angles[..., 1], angles[..., 2]
    cb, sb = np.cos(b / 2), np.sin(b / 2)
    u = np.empty(angles.shape[:-1] + (2, 2), dtype=complex)
    u[..., 0, 0] = np.exp(-0.5j * (a + c)) * cb
    u[..., 0, 1] = -np.exp(-0.5j * (a - c)) * sb
    u[..., 1, 0] = np.exp(0.5j * (a - c)) * sb
    u[..., 1, 1] = np.exp(0.5j * (a + c)) * cb
    return u


def _batch_entropy(m: np.ndarray) -> np.ndarray:
    w = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
    return -t.sum(-1)


def _batch_relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """``D(rho || sigma)`` for stacks of 2x2 matrices (``inf`` on support violation)."""
    w, v = np.linalg.eigh(sigma)
    w = np.clip(w, 0.0, None)
    pops = np.real(np.einsum("...ia,...ij,...ja->...a", v.conj(), rho, v))
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(pops > 1e-14, -pops * np.log(np.where(w > 0, w, 1.0)), 0.0)
        bad = np.any((pops > 1e-14) & (w <= 1e-300), axis=-1)
    out = cross.sum(-1) - _batch_entropy(rho)
    return np.where(bad, np.inf, out)


@dataclass(frozen=True)
class GapCertificate:
    """Outcome of the feedback-gap search for a two-outcome qubit measurement.

    ``lower_bound`` is the exact infimum over all feedback unitaries,
    ``H(sum_k p_k spec_k) - sum_k p_k S(rho_k)`` with spectra sorted
    descending.  ``grid_min`` and ``gap`` are the best values found by the
    grid and by local refinement; both are upper bounds on the infimum.
    """

    probabilities: tuple
    spectra: tuple
    lu_equivalent: bool
    lower_bound: float
    grid_min: float
    gap: float
    best_unitary: np.ndarray
    max_identity_residual: float
    candidates: int

    @property
    def deterministic(self) -> bool:
        return self.lu_equivalent


def _post_states(m: MeasurementModel, rho1: DensityMatrix):
    if m.system_layout.labels != rho1.layout.labels:
        rho1 = reorder(rho1, m.system_layout.labels)
    probs, states = [], []
    for fam in m.kraus:
        x = sum(k @ rho1.matrix @ k.conj().T for k in fam)
        pk = float(np.real(np.trace(x)))
        probs.append(pk)
        states.append(x / pk if pk > P_DROP else None)
    return probs, states


def theorem5_witness(m: MeasurementModel, rho1: DensityMatrix, grid: int = 24,
                     refine: int = 5) -> GapCertificate:
    """Smallest feedback penalty ``sum_k p_k D(U_k rho_k U_k^dagger || rho_3)``.

    ``U_0`` is fixed to the identity (a common rotation does not change the
    penalty) and ``U_1`` ranges over a ``grid**3`` ZYZ-angle grid, then the
    ``refine`` best grid points are polished with Nelder-Mead.  On every
    candidate the penalty is compared with ``S(rho_3) - sum_k p_k S(rho_k)``.
    """
    if rho1.layout.dim != 2 or m.n_outcomes != 2:
        raise ValueError("the witness needs a two-outcome measurement on a qubit")
    probs, states = _post_states(m, rho1)
    live = [k for k, s in enumerate(states) if s is not None]
    spectra = tuple(np.sort(np.clip(np.linalg.eigvalsh(states[k]), 0, None))[::-1] for k in live)
    p = np.array([probs[k] for k in live])
    p = p / p.sum()
    s_avg = float(sum(pk * von_neumann_entropy(DensityMatrix(rho1.layout, states[k]))
                      for pk, k in zip(p, live)))
    lower = max(0.0, _entropy_of_spectrum(sum(pk * s for pk, s in zip(p, spectra))) - s_avg)
    lu = bool(len(live) < 2 or np.max(np.abs(spectra[0] - spectra[1])) <= 1e-8)
    if len(live) < 2:
        return GapCertificate(tuple(probs), spectra, True, 0.0, 0.0, 0.0, np.eye(2), 0.0, 0)

    r0, r1 = states[live[0]], states[live[1]]
    p0, p1 = p

    def evaluate(us: np.ndarray):
        rot = us @ r1 @ np.conj(np.swapaxes(us, -1, -2))
        rho3 = p0 * r0 + p1 * rot
        gap = p0 * _batch_relative_entropy(np.broadcast_to(r0, rot.shape), rho3) \
            + p1 * _batch_relative_entropy(rot, rho3)
        resid = np.abs(_batch_entropy(rho3) - s_avg - gap)
        return gap, resid

    axis = [np.linspace(0, 2 * np.pi, grid, endpoint=False), np.linspace(0, np.pi, grid),
            np.linspace(0, 2 * np.pi, grid, endpoint=False)]
    ang = np.stack(np.meshgrid(*axis, indexing="ij"), axis=-1).reshape(-1, 3)
    gaps, resid = evaluate(_zyz(ang))
    max_resid = float(np.max(resid[np.isfinite(gaps)], initial=0.0))
    grid_min = float(np.min(gaps))
    best_val, best_ang = grid_min, ang[int(np.argmin(gaps))]
    count = len(ang)

    def f(x):
        g, _ = evaluate(_zyz(np.asarray(x)[None, :]))
        return float(g[0])

    for idx in np.argsort(gaps)[:refine]:
        res = minimize(f, ang[idx], method="Nelder-Mead",
                       options=dict(xatol=1e-10, fatol=1e-14, maxiter=2000))
        g, r = evaluate(_zyz(np.asarray(res.x)[None, :]))
        count += res.nfev
        max_resid = max(max_resid, float(r[0]))
        if g[0] < best_val:
            best_val, best_ang = float(g[0]), np.asarray(res.x)
    return GapCertificate(tuple(probs), spectra, lu, lower, grid_min, best_val,
                          _zyz(best_ang[None, :])[0], max_resid, count)
