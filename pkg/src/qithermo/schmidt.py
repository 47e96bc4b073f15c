"""Canonical form of three-qubit pure states and derived local invariants.

The canonical form is

    lam0|000> + lam1 e^{i phi}|100> + lam2|101> + lam3|110> + lam4|111>,

with ``lam_i >= 0`` and ``0 <= phi <= pi``.  It is computed with the
Acin-Andrianov-Jane-Tarrach construction: rotate the first qubit so that the
``|0>`` slice of the coefficient tensor becomes singular, diagonalise that
slice with local unitaries on the other two qubits, then fix the remaining
phases.  The quadratic for the first-qubit rotation has two roots; each gives
a candidate form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .entanglement import concurrence_2q
from .qcore import LayoutError, PureState, SystemLayout, partial_trace, reorder

TOL_ZERO = 1e-12
TOL_PHASE = 1e-10
DEFAULT_LABELS = ("P", "S", "R1")


@dataclass(frozen=True, eq=False)
class GSDecomposition:
    """Canonical-form coefficients plus the local unitaries that produce them.

    ``(u_P x u_S x u_R1) |psi_in> == canonical_vector()``.
    """

    lambdas: np.ndarray
    phase: float
    local_unitaries: tuple
    labels: tuple = DEFAULT_LABELS
    alternatives: int = 1

    def canonical_vector(self) -> np.ndarray:
        l0, l1, l2, l3, l4 = self.lambdas
        v = np.zeros(8, dtype=complex)
        v[0] = l0
        v[4] = l1 * cmath.exp(1j * self.phase)
        v[5], v[6], v[7] = l2, l3, l4
        return v

    def canonical_state(self) -> PureState:
        layout = SystemLayout(tuple((lab, 2) for lab in self.labels))
        return PureState.normalized(layout, self.canonical_vector())

    def local_operator(self) -> np.ndarray:
        up, us, ur = self.local_unitaries
        return np.kron(up, np.kron(us, ur))

    def reconstruct(self) -> np.ndarray:
        """Input vector recovered from the canonical form."""
        return self.local_operator().conj().T @ self.canonical_vector()


@dataclass(frozen=True)
class AppendixParams:
    """Local invariants of a canonical three-qubit state.

    ``phi5`` is undefined when ``lam2 lam3 - lam1 lam4 e^{i phi}`` vanishes;
    it is then set to 0 and ``phi5_degenerate`` is raised.
    """

    tau: float
    c_ps: float
    c_pr1: float
    c_sr1: float
    k_ps: float
    k_pr1: float
    k_sr1: float
    j5: float
    k5: float
    delta_j: float
    phi5: float
    q_e: int
    phi5_degenerate: bool = False
    flags: tuple = field(default_factory=tuple)


def _three_qubit_vector(psi: PureState, labels: Sequence[str]) -> np.ndarray:
    if len(psi.layout) != 3 or psi.layout.dims != (2, 2, 2):
        raise LayoutError(f"expected three qubits, got dims {psi.layout.dims}")
    labels = tuple(labels) if labels is not None else psi.layout.labels
    return reorder(psi, labels).amplitudes


def _first_qubit_rotations(t0: np.ndarray, t1: np.ndarray):
    """Unit vectors (alpha, beta) with det(alpha T0 + beta T1) = 0."""
    c0 = np.linalg.det(t0)
    c2 = np.linalg.det(t1)
    c1 = t0[0, 0] * t1[1, 1] + t1[0, 0] * t0[1, 1] - t0[0, 1] * t1[1, 0] - t1[0, 1] * t0[1, 0]
    scale = max(abs(c0), abs(c1), abs(c2))
    if scale < TOL_ZERO:
        pairs = [(1.0, 0.0), (0.0, 1.0)]
    elif abs(c2) >= abs(c0) and abs(c2) > TOL_ZERO * scale:
        pairs = [(1.0, x) for x in np.roots([c2, c1, c0])]
    elif abs(c0) > TOL_ZERO * scale:
        pairs = [(y, 1.0) for y in np.roots([c0, c1, c2])]
    else:
        # c0 = c2 = 0: roots at x = 0 and x = infinity
        pairs = [(1.0, 0.0), (0.0, 1.0)]
    out = []
    for a, b in pairs:
        n = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        out.append((complex(a) / n, complex(b) / n))
    return out


def _phase_angles(s: np.ndarray):
    """Phases (a0, a1, b, c) making s0, s5, s6, s7 real and non-negative.

    a0/a1 multiply the P=0/P=1 blocks, b the S=1 block, c the R1=1 block.
    When one of lam1..lam4 vanishes the leftover freedom sets phi to 0.
    """
    mag = np.abs(s)
    ph = np.angle(s)
    nz = mag > TOL_ZERO
    a0 = -ph[0] if nz[0] else 0.0
    if nz[5] and nz[6] and nz[7] and nz[4]:
        a1 = ph[7] - ph[5] - ph[6]
        b = -ph[6] - a1
        c = -ph[5] - a1
        return a0, a1, b, c
    a1 = -ph[4] if nz[4] else 0.0
    b = c = 0.0
    if nz[5]:
        c = -ph[5] - a1
    if nz[6]:
        b = -ph[6] - a1
    if nz[7]:
        if nz[5] and not nz[6]:
            b = -ph[7] - a1 - c
        elif nz[6] and not nz[5]:
            c = -ph[7] - a1 - b
        elif not nz[5] and not nz[6]:
            c = -ph[7] - a1
        else:
            # lam1 = 0 with lam2, lam3, lam4 all present: phi is irrelevant
            a1 = ph[7] - ph[5] - ph[6]
            b = -ph[6] - a1
            c = -ph[5] - a1
    return a0, a1, b, c


def _candidate(s: np.ndarray, alpha: complex, beta: complex):
    ua = np.array([[alpha, beta], [-np.conj(beta), np.conj(alpha)]])
    s1 = np.kron(ua, np.eye(4)) @ s
    t = s1.reshape(2, 2, 2)
    block = t[0] if np.linalg.norm(t[0]) > TOL_ZERO else t[1]
    u, _, vh = np.linalg.svd(block)
    us = u.conj().T
    ur = vh.conj()
    s2 = np.kron(np.eye(2), np.kron(us, ur)) @ s1
    a0, a1, b, c = _phase_angles(s2)
    dp = np.diag([cmath.exp(1j * a0), cmath.exp(1j * a1)])
    ds = np.diag([1.0, cmath.exp(1j * b)])
    dr = np.diag([1.0, cmath.exp(1j * c)])
    up, us, ur = dp @ ua, ds @ us, dr @ ur
    s3 = np.kron(up, np.kron(us, ur)) @ s
    lambdas = np.abs(s3[[0, 4, 5, 6, 7]])
    phi = cmath.phase(s3[4]) if lambdas[1] > TOL_ZERO else 0.0
    if phi <= -math.pi + TOL_PHASE:
        # -pi and pi are the same phase
        phi += 2 * math.pi
    return lambdas, phi, (up, us, ur), s3


def gsd_candidates(psi: PureState, labels: Sequence[str] = DEFAULT_LABELS):
    """All canonical-form candidates with ``phi`` in [0, pi] (usually one or two)."""
    s = _three_qubit_vector(psi, labels)
    found = []
    for alpha, beta in _first_qubit_rotations(s[:4].reshape(2, 2), s[4:].reshape(2, 2)):
        lambdas, phi, us, s3 = _candidate(s, alpha, beta)
        if -TOL_PHASE <= phi <= math.pi + TOL_PHASE or lambdas[1] <= TOL_ZERO:
            phi = min(max(phi, 0.0), math.pi)
            if lambdas[1] <= TOL_ZERO:
                phi = 0.0
            found.append(GSDecomposition(lambdas, phi, us, tuple(labels)))
    return found


def gsd(psi: PureState, labels: Sequence[str] = DEFAULT_LABELS) -> GSDecomposition:
    """Canonical form of a three-qubit pure state.

    When two candidates both satisfy ``0 <= phi <= pi`` (this is what happens
    when ``Q_e = 0``) the one with the larger ``lam0`` is returned.
    """
    found = gsd_candidates(psi, labels)
    if not found:
        raise ArithmeticError("no canonical form with phase in [0, pi] was found")
    best = max(found, key=lambda g: g.lambdas[0])
    return GSDecomposition(best.lambdas, best.phase, best.local_unitaries, best.labels, len(found))


def tangle_3q(psi: PureState, labels: Sequence[str] | None = None) -> float:
    """Residual (CKW) tangle ``C^2_{P(SR1)} - C^2_{PS} - C^2_{PR1}``.

    The first label is the focus qubit.
    """
    labels = tuple(labels) if labels is not None else psi.layout.labels
    if len(labels) != 3 or psi.layout.dims != (2, 2, 2):
        raise LayoutError("tangle needs three qubits")
    p, a, b = labels
    rho_p = partial_trace(psi, [p]).matrix
    c_p_rest_sq = 4.0 * float(np.real(np.linalg.det(rho_p)))
    c_pa = concurrence_2q(reorder(partial_trace(psi, [p, a]), [p, a]))
    c_pb = concurrence_2q(reorder(partial_trace(psi, [p, b]), [p, b]))
    return max(0.0, c_p_rest_sq - c_pa ** 2 - c_pb ** 2)


def _sgn(x: float, tol: float = TOL_ZERO) -> int:
    if abs(x) <= tol:
        return 0
    return 1 if x > 0 else -1


def appendix_params(g: GSDecomposition) -> AppendixParams:
    """The invariants K_PS, K_PR1, K_SR1, J5, K5, Delta_J, phi5, Q_e (and tau)."""
    l0, l1, l2, l3, l4 = (float(x) for x in g.lambdas)
    phi = float(g.phase)
    e = cmath.exp(1j * phi)
    tau = 4.0 * l0 ** 2 * l4 ** 2
    c_ps = 2.0 * l0 * l3
    c_pr1 = 2.0 * l0 * l2
    z = l2 * l3 - l1 * l4 * e
    c_sr1 = 2.0 * abs(z)
    k_ps = c_ps ** 2 + tau
    k_pr1 = c_pr1 ** 2 + tau
    k_sr1 = c_sr1 ** 2 + tau
    j5 = 4.0 * l0 ** 2 * (abs(l1 * l4 * e - l2 * l3) ** 2 + l2 ** 2 * l3 ** 2 - l1 ** 2 * l4 ** 2)
    k5 = j5 + tau
    delta_j = k5 ** 2 - k_ps * k_pr1 * k_sr1
    flags = []
    degenerate = abs(z) <= TOL_ZERO
    if degenerate:
        phi5 = 0.0
        flags.append("phi5_undefined")
    else:
        phi5 = -cmath.phase(z)
        if phi5 <= -math.pi:
            phi5 += 2 * math.pi
    if k_sr1 <= TOL_ZERO:
        q_e = 0
        flags.append("q_e_undefined")
    else:
        q_e = _sgn(math.sin(phi) * (l0 ** 2 - (tau + j5) / (2.0 * k_sr1)))
    return AppendixParams(tau, c_ps, c_pr1, c_sr1, k_ps, k_pr1, k_sr1, j5, k5, delta_j,
                          phi5, q_e, degenerate, tuple(flags))
