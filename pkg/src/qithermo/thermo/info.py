"""Canonical states and the two information measures of a probe measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..entanglement import (
    eof_2q,
    eof_convex_roof,
    shannon_entropy,
    von_neumann_entropy,
)
from ..optmeas import MeasurementModel
from ..qcore import (
    DensityMatrix,
    LayoutError,
    PureState,
    StateError,
    SystemLayout,
    UnitaryOp,
    apply_unitary,
    embed_operator,
    matrix_sqrt_psd,
    partial_trace,
    purify,
    reorder,
    tensor,
)

P_DROP = 1e-12
MAX_ROOF_RANK = 4


def _check_temperature(t: float) -> float:
    if not (t > 0) or math.isinf(t):
        raise ValueError(f"temperature must be positive and finite, got {t}")
    return float(t)


def canonical_state(h: np.ndarray, t: float, layout: SystemLayout | None = None) -> DensityMatrix:
    """``exp(-H/T) / Z``."""
    beta = 1.0 / _check_temperature(t)
    return canonical_state_beta(h, beta, layout)


def canonical_state_beta(h: np.ndarray, beta: float, layout: SystemLayout | None = None) -> DensityMatrix:
    """Canonical state at inverse temperature ``beta`` (``inf`` gives the ground projector)."""
    h = np.asarray(h, dtype=complex)
    layout = layout if layout is not None else SystemLayout.of(("S", h.shape[0]))
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    if math.isinf(beta):
        p = (w <= w[0] + 1e-12).astype(float)
        p /= p.sum()
    else:
        logp = -beta * w
        p = np.exp(logp - logsumexp(logp))
    return DensityMatrix(layout, (v * p) @ v.conj().T)


def log_partition(h: np.ndarray, beta: float) -> float:
    w = np.linalg.eigvalsh(np.asarray(h, dtype=complex))
    return float(logsumexp(-beta * w))


def free_energy(h: np.ndarray, t: float) -> float:
    """``-T log Z``."""
    t = _check_temperature(t)
    return -t * log_partition(h, 1.0 / t)


def energy(rho: DensityMatrix | np.ndarray, h: np.ndarray) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    return float(np.real(np.trace(m @ h)))


def canonical_cross_entropy(rho: DensityMatrix, h: np.ndarray, beta: float) -> float:
    """``-tr[rho log gamma_beta]`` for ``gamma_beta`` canonical for ``h``.

    For ``beta = inf`` this is ``log g`` (``g`` the ground degeneracy) when
    ``rho`` lives on the ground space and ``inf`` otherwise.
    """
    w, v = np.linalg.eigh(np.asarray(h, dtype=complex))
    pops = np.real(np.einsum("ia,ij,ja->a", v.conj(), rho.matrix, v))
    if math.isinf(beta):
        ground = w <= w[0] + 1e-12
        if np.sum(pops[~ground]) > 1e-12:
            return math.inf
        return math.log(int(np.sum(ground)))
    return float(beta * np.dot(pops, w) + logsumexp(-beta * w))


def matching_beta(rho: DensityMatrix, h: np.ndarray, tol: float = 1e-12) -> float | None:
    """Inverse temperature minimising ``-tr[rho log gamma_beta]`` over ``beta >= 0``.

    This is the energy-matching value ``<H>_gamma = <H>_rho``.  Returns
    ``None`` when ``h`` is degenerate (every ``beta`` gives the same
    canonical state) and ``inf`` when ``rho`` sits in the ground space.
    """
    w = np.linalg.eigvalsh(np.asarray(h, dtype=complex))
    if w[-1] - w[0] <= tol:
        return None
    u = energy(rho, h)
    if u <= w[0] + tol:
        return math.inf
    if u >= float(np.mean(w)):
        return 0.0

    def mean_energy(beta):
        logp = -beta * w
        p = np.exp(logp - logsumexp(logp))
        return float(np.dot(p, w))

    lo, hi = 0.0, 1.0
    while mean_energy(hi) > u:
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_energy(mid) > u:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# --- QC-mutual information -----------------------------------------------------

def _effects_on(rho: DensityMatrix, m: MeasurementModel):
    sys = m.system_layout
    for lab in sys.labels:
        if lab not in rho.layout:
            raise LayoutError(f"measured factor {lab!r} not in state layout {rho.layout.labels}")
    return [embed_operator(d, sys, rho.layout) for d in m.effects]


@dataclass(frozen=True)
class QCInfo:
    value: float
    alternative: float
    probabilities: tuple

    @property
    def residual(self) -> float:
        return abs(self.value - self.alternative)


def i_qc_forms(rho1: DensityMatrix, m: MeasurementModel) -> QCInfo:
    """Both expressions of the QC-mutual information.

    ``value = S(rho) + H(p) + sum_k tr[X_k log X_k]`` and
    ``alternative = S(rho) - sum_k p_k S(X_k / p_k)`` with
    ``X_k = sqrt(D_k) rho sqrt(D_k)``.
    """
    effects = _effects_on(rho1, m)
    resid = np.max(np.abs(sum(effects) - np.eye(rho1.layout.dim)))
    if resid > 1e-9:
        raise StateError(f"effects are incomplete (residual {resid:.3g})")
    s1 = von_neumann_entropy(rho1)
    probs, xlogx, cond = [], 0.0, 0.0
    for d in effects:
        r = matrix_sqrt_psd(d)
        x = r @ rho1.matrix @ r
        pk = float(np.real(np.trace(x)))
        probs.append(max(pk, 0.0))
        if pk <= P_DROP:
            continue
        w = np.linalg.eigvalsh((x + x.conj().T) / 2)
        w = w[w > 0]
        xlogx += float(np.sum(w * np.log(w)))
        q = w / pk
        cond += pk * float(-np.sum(q * np.log(q)))
    kept = [p for p in probs if p > P_DROP]
    total = sum(kept)
    h = shannon_entropy([p / total for p in kept]) if total > 0 else 0.0
    return QCInfo(s1 + h + xlogx, s1 - cond, tuple(probs))


def i_qc(rho1: DensityMatrix, m: MeasurementModel) -> float:
    """QC-mutual information of measuring ``rho1`` with the probe model ``m``."""
    return i_qc_forms(rho1, m).value


# --- entanglement information -------------------------------------------------

@dataclass(frozen=True)
class EntanglementInfo:
    value: float
    s1: float
    eof_before: float
    eof_after: float
    method: str


def _probe_output(psi_sbr: PureState, u_sp: UnitaryOp, probe_init: PureState) -> PureState:
    joint = tensor(probe_init, psi_sbr)
    return apply_unitary(joint, u_sp)


def _is_product(rho: DensityMatrix, a: list, b: list, tol: float = 1e-10) -> bool:
    ra = partial_trace(rho, a)
    rb = partial_trace(rho, b)
    prod = reorder(tensor(ra, rb), rho.layout.labels)
    return float(np.max(np.abs(prod.matrix - rho.matrix))) <= tol


def i_e(psi_sbr: PureState, u_sp: UnitaryOp, probe_init: PureState, reference: str = "R",
        roof_budget: dict | None = None) -> EntanglementInfo:
    """Entanglement information ``S(rho_1) - E_F^{SB-R}(rho_SBR)``.

    ``psi_sbr`` purifies ``rho_1`` with the factor ``reference``.  The
    entanglement of formation after the probe interaction is evaluated

    * through the product split ``E_F(S-R1) + S(rho_B)`` when ``rho_1`` is a
      product of a qubit system and the rest, and the probe interaction acts
      only on the system and the probe ("split");
    * with the two-qubit closed form when system and reference are both
      qubits ("two_qubit");
    * otherwise with the convex-roof optimiser ("convex_roof"); this is
      only attempted for rank at most 4 and gives an upper bound on E_F, so
      the returned value is then a lower bound on the exact one.
    """
    if reference not in psi_sbr.layout:
        raise LayoutError(f"reference {reference!r} not in purification layout")
    probe = probe_init.layout.labels[0]
    if probe not in u_sp.layout:
        raise LayoutError("probe interaction does not act on the probe")
    sb = list(psi_sbr.layout.complement([reference]))
    rho1 = partial_trace(psi_sbr, sb)
    s1 = von_neumann_entropy(rho1)
    measured = [lab for lab in u_sp.layout.labels if lab != probe]
    rest = [lab for lab in sb if lab not in measured]
    ref_dim = psi_sbr.layout.dim_of([reference])

    if ref_dim == 1 or s1 <= 1e-14:
        # pure rho_1: the reference is decoupled before and after
        return EntanglementInfo(s1, s1, 0.0, 0.0, "pure")

    if (rest and len(measured) == 1 and rho1.layout.dim_of(measured) == 2
            and _is_product(rho1, measured, rest)):
        rho_s = partial_trace(rho1, measured)
        rho_b = partial_trace(rho1, rest)
        psi_sr = purify(rho_s, "_R1", reference_dim=2)
        out = _probe_output(psi_sr, u_sp, probe_init)
        rho_sr = reorder(partial_trace(out, measured + ["_R1"]), measured + ["_R1"])
        after = eof_2q(rho_sr) + von_neumann_entropy(rho_b)
        before = s1
        method = "split"
    else:
        out = _probe_output(psi_sbr, u_sp, probe_init)
        rho_sbr = partial_trace(out, sb + [reference])
        before = s1
        if len(sb) == 1 and rho1.layout.dim == 2 and ref_dim == 2:
            after = eof_2q(reorder(rho_sbr, sb + [reference]))
            method = "two_qubit"
        else:
            rank = rho_sbr.rank(1e-12)
            if rank > MAX_ROOF_RANK:
                raise ValueError(f"rank {rank} above {MAX_ROOF_RANK}: entanglement of formation not attempted")
            budget = dict(restarts=64, seed=0)
            budget.update(roof_budget or {})
            after, _ = eof_convex_roof(rho_sbr, sb, **budget)
            method = "convex_roof"
    return EntanglementInfo(before - after, s1, before, after, method)
