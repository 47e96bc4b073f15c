"""Probe-induced measurements and constructions of good probe readouts.

* :func:`kraus_from_interaction` turns a probe interaction plus probe
  readout into Kraus operators on the measured system.
* :func:`optimal_probe_measurement` gives, for a three-qubit pure state on
  probe/system/reference, a two-outcome projective probe readout whose two
  outcomes are LU-equivalent and each carry exactly the entanglement of
  formation of the system-reference marginal.
* :func:`probe_basis_from_ensemble` finds the probe basis that steers the
  system side onto a prescribed pure-state ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .entanglement import EnsembleDecomposition, eof_2q
from .qcore import (
    TOL_UNITARY,
    LayoutError,
    PureState,
    StateError,
    SystemLayout,
    UnitaryOp,
    embed_operator,
    matrix_sqrt_psd,
    partial_trace,
    reorder,
)
from .schmidt import DEFAULT_LABELS, AppendixParams, GSDecomposition, appendix_params, gsd

TOL_DENOM = 1e-12
TOL_GRAM = 1e-8


class EnsembleMismatch(ValueError):
    """The ensemble does not decompose the reduced state of the given vector."""


def _projector_families(projectors: Sequence[np.ndarray], dim: int, tol: float = TOL_UNITARY):
    mats = [np.asarray(p, dtype=complex) for p in projectors]
    for p in mats:
        if p.shape != (dim, dim):
            raise StateError(f"probe projector of shape {p.shape}, probe dim is {dim}")
    if np.max(np.abs(sum(mats) - np.eye(dim))) > tol:
        raise StateError("probe projectors do not sum to the identity")
    for i, p in enumerate(mats):
        for j, q in enumerate(mats):
            target = p if i == j else np.zeros_like(p)
            if np.max(np.abs(p @ q - target)) > tol:
                raise StateError("probe projectors are not orthogonal idempotents")
    families = []
    for p in mats:
        w, v = np.linalg.eigh((p + p.conj().T) / 2)
        families.append([v[:, i] for i in range(dim) if w[i] > 0.5])
    return families


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Probe initial state, system-probe interaction and projective probe readout.

    Derived on construction: ``kraus[k]`` (one operator per vector in the
    spectral family of ``P_(k)``) and ``effects[k] = sum_i M_ki^dagger M_ki``,
    all acting on ``system_layout`` (the interaction support minus the probe).
    """

    probe_init: PureState
    interaction: UnitaryOp
    probe_projectors: tuple
    kraus: tuple = field(init=False, repr=False)
    effects: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.probe_init.layout) != 1:
            raise LayoutError("probe must be a single factor")
        probe = self.probe_label
        if probe not in self.interaction.layout:
            raise LayoutError(f"interaction does not act on the probe {probe!r}")
        dp = self.probe_init.layout.dim
        object.__setattr__(self, "probe_projectors",
                           tuple(np.asarray(p, dtype=complex) for p in self.probe_projectors))
        families = _projector_families(self.probe_projectors, dp)
        kraus = kraus_from_interaction(self.probe_init, self.interaction, families)
        effects = tuple(sum(m.conj().T @ m for m in fam) for fam in kraus)
        resid = np.max(np.abs(sum(effects) - np.eye(effects[0].shape[0])))
        if resid > TOL_UNITARY:
            raise StateError(f"induced effects are incomplete (residual {resid:.3g})")
        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(self, "effects", effects)

    @property
    def probe_label(self) -> str:
        return self.probe_init.layout.labels[0]

    @property
    def system_layout(self) -> SystemLayout:
        return self.interaction.layout.subset(self.interaction.layout.complement([self.probe_label]))

    @property
    def n_outcomes(self) -> int:
        return len(self.probe_projectors)

    @classmethod
    def from_basis(cls, probe_init: PureState, interaction: UnitaryOp, basis: np.ndarray) -> "MeasurementModel":
        """Rank-one readout in the orthonormal columns of ``basis``."""
        basis = np.asarray(basis, dtype=complex)
        projs = [np.outer(basis[:, k], basis[:, k].conj()) for k in range(basis.shape[1])]
        return cls(probe_init, interaction, tuple(projs))


def kraus_from_interaction(probe_init: PureState, interaction: UnitaryOp, families):
    """``M_(k,i) = <k,i_P| U |0_P>`` as operators on the non-probe support.

    ``families[k]`` lists the orthonormal probe vectors spanning ``P_(k)``.
    """
    probe = probe_init.layout.labels[0]
    rest = interaction.layout.complement([probe])
    u = reorder(interaction, [probe] + list(rest))
    dp = probe_init.layout.dim
    dr = u.layout.dim // dp
    ut = u.matrix.reshape(dp, dr, dp, dr)
    # contract the probe input with |0_P>
    u0 = np.einsum("aibj,b->aij", ut, probe_init.amplitudes)
    kraus = []
    for fam in families:
        kraus.append(tuple(np.einsum("a,aij->ij", np.conj(np.asarray(v)), u0) for v in fam))
    return tuple(kraus)


# --- optimal two-outcome probe readout for three qubits ------------------------

@dataclass(frozen=True, eq=False)
class OptimalMeasurement:
    """Readout ``{P~_(0), P~_(1)}`` on the probe and the numbers defining it.

    ``projectors`` act on the probe in the input basis; ``projectors_gsd`` in
    the canonical-form basis.  ``method`` is ``"closed_form"``,
    ``"decoupled"`` (probe in a product state, any readout is optimal) or
    ``"numerical"`` (closed form singular but probe not decoupled).
    """

    a: float
    b: float
    k: float
    theta: float
    projectors: tuple
    projectors_gsd: tuple
    decomposition: GSDecomposition
    params: AppendixParams
    method: str = "closed_form"
    flags: tuple = ()


def readout_matrix(a: float, theta: float) -> np.ndarray:
    """``[[a, k e^{-i theta}], [k e^{i theta}, 1-a]]`` with ``k = sqrt(a(1-a))``."""
    k = math.sqrt(max(0.0, a * (1.0 - a)))
    return np.array([[a, k * np.exp(-1j * theta)], [k * np.exp(1j * theta), 1.0 - a]], dtype=complex)


def measurement_parameters(params: AppendixParams):
    """(a, theta, sign) from the invariants; ``a`` is ``None`` when singular."""
    sign = -params.q_e if params.q_e != 0 else -1
    c2 = params.c_sr1 ** 2
    inner = params.k5 ** 2 - params.k_ps * params.k_pr1 * c2
    denom = 2.0 * params.k_sr1 * math.sqrt(max(0.0, inner))
    theta = -params.phi5
    if denom <= TOL_DENOM:
        return None, theta, sign
    num = params.k5 * params.tau + sign * math.sqrt(max(0.0, params.delta_j)) * c2
    a = 0.5 - num / denom
    if -1e-10 <= a < 0.0:
        a = 0.0
    elif 1.0 < a <= 1.0 + 1e-10:
        a = 1.0
    return a, theta, sign


def _outcome_entanglements(canon: np.ndarray, proj: np.ndarray):
    out = []
    for p in (proj, np.eye(2) - proj):
        v = (np.kron(p, np.eye(4)) @ canon).reshape(2, 4)
        w = np.linalg.svd(v, compute_uv=False)
        if w[0] ** 2 <= 1e-14:
            continue
        # rank-1 probe projector leaves a product with the probe: take the SR1 part
        _, _, vh = np.linalg.svd(v)
        s = np.linalg.svd(vh[0].reshape(2, 2), compute_uv=False) ** 2
        s = s[s > 0]
        out.append(float(-np.sum(s * np.log(s))))
    return out


def _numerical_readout(canon: np.ndarray, target: float):
    def loss(x):
        a = 0.5 * (1.0 + math.cos(x[0]))
        ents = _outcome_entanglements(canon, readout_matrix(a, x[1]))
        return sum((e - target) ** 2 for e in ents)

    best = None
    for t0 in np.linspace(0.1, math.pi - 0.1, 7):
        for p0 in np.linspace(-math.pi, math.pi, 8, endpoint=False):
            r = minimize(loss, [t0, p0], method="Nelder-Mead",
                         options=dict(xatol=1e-12, fatol=1e-24, maxiter=4000))
            if best is None or r.fun < best.fun:
                best = r
    return 0.5 * (1.0 + math.cos(best.x[0])), float(best.x[1])


def optimal_probe_measurement(psi: PureState, labels: Sequence[str] = DEFAULT_LABELS) -> OptimalMeasurement:
    """Two-outcome probe readout attaining the S-R1 entanglement of formation.

    ``labels`` names (probe, system, reference) inside ``psi``.
    """
    g = gsd(psi, labels)
    params = appendix_params(g)
    a, theta, _ = measurement_parameters(params)
    flags = list(params.flags)
    canon = g.canonical_vector()
    if a is not None:
        method = "closed_form"
    else:
        rho_p = partial_trace(psi, [labels[0]]).matrix
        if 4.0 * float(np.real(np.linalg.det(rho_p))) <= 1e-10:
            method = "decoupled"
            a, theta = 1.0, 0.0
        else:
            method = "numerical"
            target = eof_2q(reorder(partial_trace(psi, labels[1:]), labels[1:]))
            a, theta = _numerical_readout(canon, target)
        flags.append("singular_denominator")
    p0 = matrix_sqrt_psd(readout_matrix(a, theta), cutoff=TOL_DENOM)
    p1 = matrix_sqrt_psd(np.eye(2) - readout_matrix(a, theta), cutoff=TOL_DENOM)
    up = g.local_unitaries[0]
    orig = tuple(up.conj().T @ p @ up for p in (p0, p1))
    k = math.sqrt(max(0.0, a * (1.0 - a)))
    return OptimalMeasurement(a, 1.0 - a, k, theta, orig, (p0, p1), g, params, method, tuple(flags))


def measurement_outcomes(psi: PureState, projectors: Sequence[np.ndarray], probe: str, tol: float = 1e-12):
    """``(p_k, normalised P_(k)|psi>)`` for each probe projector (``None`` if p_k <= tol)."""
    layout = psi.layout
    out = []
    for p in projectors:
        v = embed_operator(np.asarray(p, dtype=complex), layout.subset([probe]), layout) @ psi.amplitudes
        pk = float(np.real(np.vdot(v, v)))
        out.append((pk, PureState.normalized(layout, v) if pk > tol else None))
    return out


# --- probe basis from an ensemble ---------------------------------------------

def probe_basis_from_ensemble(psi_total: PureState, witness: EnsembleDecomposition,
                              probe: str = "P", tol: float = TOL_GRAM) -> np.ndarray:
    """Orthonormal probe basis ``{|k_P>}`` (columns) with
    ``|psi> = sum_k sqrt(q_k) |k_P> |phi_k>`` for the ensemble members.

    Members ``k < len(witness)`` correspond to columns ``k``; any extra
    columns complete the basis and carry zero probability.  Raises
    :class:`EnsembleMismatch` if the ensemble is not a decomposition of the
    reduced state or has more members than the probe dimension.
    """
    layout = psi_total.layout
    rest = layout.complement([probe])
    dp = layout.dim_of([probe])
    m = len(witness.members)
    if m > dp:
        raise EnsembleMismatch(f"{m} ensemble members exceed probe dimension {dp}")
    rest_layout = layout.subset(rest)
    for mem in witness.members:
        if mem.layout != rest_layout:
            raise EnsembleMismatch(f"ensemble layout {mem.layout.labels} does not match {rest}")
    ordered = reorder(psi_total, [probe] + list(rest))
    # column p of x is <p_P|psi>
    x = ordered.amplitudes.reshape(dp, -1).T
    phi = np.stack([math.sqrt(q) * mem.amplitudes for q, mem in zip(witness.weights, witness.members)], axis=1)
    gram_err = np.max(np.abs(x @ x.conj().T - phi @ phi.conj().T))
    if gram_err > tol:
        raise EnsembleMismatch(f"ensemble does not reproduce the reduced state (error {gram_err:.3g})")

    # X = U S W^dagger (rank r); Phi = U S Z^dagger; C = W Z^dagger + W_perp Y Z_perp^dagger
    u, s, wh = np.linalg.svd(x, full_matrices=True)
    r = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
    w = wh.conj().T
    w_r, w_perp = w[:, :r], w[:, r:]
    zh = (u[:, :r].conj().T @ phi) / s[:r, None]
    z = zh.conj().T
    # orthonormal complement of the columns of z inside C^m
    q_full, _ = np.linalg.qr(np.concatenate([z, np.eye(m, dtype=complex)], axis=1))
    z_perp = q_full[:, r:m]
    c = w_r @ zh + w_perp[:, : m - r] @ z_perp.conj().T
    # complete to a full orthonormal basis of C^dp
    if m < dp:
        q2, _ = np.linalg.qr(np.concatenate([c, np.eye(dp, dtype=complex)], axis=1))
        extra = q2[:, m:dp]
        c = np.concatenate([c, extra], axis=1)
    # <k_P| = c_k^T  so  |k_P> = conj(c_k)
    basis = c.conj()
    return basis
