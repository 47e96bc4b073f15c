"""Entropies, divergences and entanglement measures (all in nats)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qcore import (
    TOL_REC,
    TOL_TRACE,
    DensityMatrix,
    LayoutError,
    PureState,
    SystemLayout,
    StateError,
    clamp_psd,
    eig_hermitian,
    reorder,
)

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
YY = np.kron(SIGMA_Y, SIGMA_Y)
TOL_SCHMIDT = 1e-8


def _entropy_of_spectrum(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """``-tr[rho log rho]``."""
    return max(0.0, _entropy_of_spectrum(rho.eigvals()))


def shannon_entropy(p: Sequence[float]) -> float:
    p = np.asarray(p, dtype=float)
    if p.size and p.min() < -TOL_TRACE:
        raise ValueError("negative probability")
    if abs(p.sum() - 1.0) > TOL_TRACE:
        raise ValueError(f"probabilities sum to {p.sum()!r}")
    return max(0.0, _entropy_of_spectrum(np.clip(p, 0, None)))


def binary_entropy(x: float) -> float:
    """``h(x) = -x log x - (1-x) log(1-x)``."""
    return _entropy_of_spectrum([x, 1.0 - x])


def schmidt_coefficients(psi: PureState, cut: Iterable[str]) -> np.ndarray:
    """Squared Schmidt coefficients across ``cut | rest``, descending."""
    cut = psi.layout.check_labels(cut)
    rest = psi.layout.complement(cut)
    ordered = reorder(psi, list(cut) + list(rest)) if rest else psi
    mat = ordered.amplitudes.reshape(psi.layout.dim_of(cut), -1)
    s = np.linalg.svd(mat, compute_uv=False)
    return s * s


def entanglement_entropy(psi: PureState, cut: Iterable[str]) -> float:
    """Entropy of entanglement between ``cut`` and its complement."""
    cut = tuple(cut)
    if not cut or set(cut) == set(psi.layout.labels):
        raise LayoutError("cut must be a proper, non-empty subset of the layout")
    return max(0.0, _entropy_of_spectrum(schmidt_coefficients(psi, cut)))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix, tol: float = 1e-12) -> float:
    """``tr[rho (log rho - log sigma)]``; ``inf`` when supp(rho) is not inside supp(sigma)."""
    if rho.layout != sigma.layout:
        raise LayoutError("relative entropy of states on different layouts")
    wr, vr = eig_hermitian(rho.matrix)
    ws, vs = eig_hermitian(sigma.matrix)
    wr, ws = clamp_psd(wr), clamp_psd(ws)
    # overlap |<r_i|s_j>|^2 between eigenbases
    ov = np.abs(vr.conj().T @ vs) ** 2
    pos_r = wr > tol
    ker_s = ws <= tol
    if np.any(wr[pos_r, None] * ov[np.ix_(pos_r, ker_s)] > tol):
        return float("inf")
    log_s = np.zeros_like(ws)
    log_s[~ker_s] = np.log(ws[~ker_s])
    term1 = np.sum(wr[pos_r] * np.log(wr[pos_r]))
    term2 = np.sum(wr[pos_r, None] * ov[pos_r] * log_s[None, :])
    return max(0.0, float(term1 - term2))


# --- two-qubit entanglement of formation --------------------------------------

def _two_qubit_matrix(rho) -> np.ndarray:
    if isinstance(rho, PureState):
        rho = rho.dm()
    if isinstance(rho, DensityMatrix):
        if rho.layout.dims != (2, 2):
            raise LayoutError(f"expected two qubits, got dims {rho.layout.dims}")
        return rho.matrix
    m = np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise LayoutError(f"expected a 4x4 matrix, got shape {m.shape}")
    return m


def concurrence_2q(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    The values ``mu_i`` (square roots of the eigenvalues of
    ``rho (Y x Y) rho* (Y x Y)``) are the singular values of ``X^T (Y x Y) X``
    for any factorisation ``rho = X X^dagger``, so only a Hermitian
    eigensolver and an SVD are needed.
    """
    m = _two_qubit_matrix(rho)
    w, v = eig_hermitian(m)
    w = clamp_psd(w)
    x = v * np.sqrt(w)
    mu = np.linalg.svd(x.T @ YY @ x, compute_uv=False)
    return float(min(1.0, max(0.0, mu[0] - mu[1:].sum())))


def eof_from_concurrence(c: float) -> float:
    c = min(1.0, max(0.0, c))
    return binary_entropy((1.0 + np.sqrt(max(0.0, 1.0 - c * c))) / 2.0)


def eof_2q(rho) -> float:
    """Entanglement of formation of a two-qubit state (closed form)."""
    return eof_from_concurrence(concurrence_2q(rho))


def lu_equivalent_pure_2q(psi1: PureState, psi2: PureState, tol: float = TOL_SCHMIDT) -> bool:
    """Two-qubit pure states are LU-equivalent iff their Schmidt spectra agree."""
    for psi in (psi1, psi2):
        if psi.layout.dims != (2, 2):
            raise LayoutError(f"expected two qubits, got dims {psi.layout.dims}")
    a = schmidt_coefficients(psi1, psi1.layout.labels[:1])
    b = schmidt_coefficients(psi2, psi2.layout.labels[:1])
    return bool(np.max(np.abs(a - b)) <= tol)


# --- convex roof --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnsembleDecomposition:
    """Pure-state ensemble ``{q_j, |phi_j>}``."""

    weights: np.ndarray
    members: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size != len(self.members):
            raise StateError("weights and members differ in length")
        if w.size and w.min() < -TOL_TRACE:
            raise StateError("negative ensemble weight")
        if abs(w.sum() - 1.0) > TOL_TRACE:
            raise StateError(f"ensemble weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", np.clip(w, 0, None))
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def layout(self) -> SystemLayout:
        return self.members[0].layout

    def density_matrix(self) -> np.ndarray:
        return sum(q * np.outer(m.amplitudes, m.amplitudes.conj()) for q, m in zip(self.weights, self.members))

    def average_entanglement(self, cut: Iterable[str]) -> float:
        cut = tuple(cut)
        return float(sum(q * entanglement_entropy(m, cut) for q, m in zip(self.weights, self.members) if q > 0))

    def reproduces(self, rho: DensityMatrix, tol: float = TOL_REC) -> bool:
        return bool(np.max(np.abs(self.density_matrix() - rho.matrix)) <= tol)

    def nonzero(self, tol: float = 1e-14) -> "EnsembleDecomposition":
        keep = [i for i, q in enumerate(self.weights) if q > tol]
        w = self.weights[keep]
        return EnsembleDecomposition(w / w.sum(), tuple(self.members[i] for i in keep))


def _roof_objective(u: np.ndarray, x: np.ndarray):
    """Average entanglement and its Euclidean gradient for a batch of ensembles.

    ``u`` has shape (restarts, m, r); member ``j`` of a batch entry is the
    unnormalised vector ``sum_i u[j, i] x[i]`` where ``x[i]`` (reshaped to
    dA x dB) are the weighted eigenvectors of the target state.
    """
    v = np.einsum("Rji,iab->Rjab", u, x)
    w, s, zh = np.linalg.svd(v, full_matrices=False)
    s2 = s * s
    q = s2.sum(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ls = np.where(s2 > 0, np.log(np.where(s2 > 0, s2, 1.0)), 0.0)
        lq = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), 0.0)
    f = (-(s2 * ls).sum(-1) + q * lq).sum(-1)
    coef = 2.0 * (lq[..., None] - ls) * s
    gv = np.einsum("Rjak,Rjk,Rjkb->Rjab", w, coef, zh)
    grad = np.einsum("iab,Rjab->Rji", x.conj(), gv)
    return f, grad


def _polar(a: np.ndarray) -> np.ndarray:
    w, _, zh = np.linalg.svd(a, full_matrices=False)
    return w @ zh


def _stiefel_descent(u, x, iters, gtol):
    f, g = _roof_objective(u, x)
    step = np.full(u.shape[0], 0.1)
    for _ in range(iters):
        uhg = np.conj(np.swapaxes(u, -1, -2)) @ g
        rg = g - u @ ((uhg + np.conj(np.swapaxes(uhg, -1, -2))) / 2)
        gn = np.sum(np.abs(rg) ** 2, axis=(-1, -2))
        if np.all(gn < gtol):
            break
        un = _polar(u - step[:, None, None] * rg)
        fn, gnew = _roof_objective(un, x)
        ok = fn <= f - 1e-4 * step * gn
        u = np.where(ok[:, None, None], un, u)
        f = np.where(ok, fn, f)
        g = np.where(ok[:, None, None], gnew, g)
        step = np.clip(np.where(ok, step * 1.5, step * 0.5), 1e-12, 10.0)
    return u, f


def eof_convex_roof(rho: DensityMatrix, cut: Iterable[str], ensemble_size: int | None = None,
                    restarts: int = 64, seed=None, iters: int = 600, gtol: float = 1e-14):
    """Numerical entanglement of formation across ``cut | rest``.

    Every size-``m`` ensemble of a rank-``r`` state is
    ``phi_j ~ sum_i U[j, i] sqrt(p_i) |e_i>`` for an ``m x r`` matrix ``U``
    with orthonormal columns, so the search runs on that Stiefel manifold:
    random starting points, then Riemannian gradient descent with a
    backtracking step.  All restarts are evaluated as one batch.

    Returns
    -------
    value : float
        Lowest average entanglement found.
    witness : EnsembleDecomposition
        Ensemble attaining ``value``.
    """
    layout = rho.layout
    cut = layout.check_labels(cut)
    rest = layout.complement(cut)
    if not cut or not rest:
        raise LayoutError("cut must be a proper, non-empty subset of the layout")
    w, v = eig_hermitian(rho.matrix)
    w = clamp_psd(w)
    r = max(1, int(np.sum(w > 1e-13)))
    m = r * r if ensemble_size is None else int(ensemble_size)
    if m < r:
        raise ValueError(f"ensemble size {m} below rank {r}")
    order = list(cut) + list(rest)
    perm_layout = layout.permuted(order)
    da = layout.dim_of(cut)
    x = np.empty((r, layout.dim), dtype=complex)
    for i in range(r):
        vec = PureState.normalized(layout, v[:, i])
        x[i] = reorder(vec, order).amplitudes * np.sqrt(w[i])
    x = x.reshape(r, da, -1)

    rng = np.random.default_rng(seed)
    restarts = max(1, int(restarts))
    z = rng.normal(size=(restarts, m, r)) + 1j * rng.normal(size=(restarts, m, r))
    # the eigen-ensemble itself is always a candidate
    z[0] = np.eye(m, r)
    u, f = _stiefel_descent(_polar(z), x, iters, gtol)
    best = int(np.argmin(f))
    ub = u[best]

    vecs = np.einsum("ji,iab->jab", ub, x).reshape(m, -1)
    q = np.sum(np.abs(vecs) ** 2, axis=1)
    q = q / q.sum()
    members = []
    weights = []
    for qj, vec in zip(q, vecs):
        if qj <= 1e-15:
            continue
        st = PureState.normalized(perm_layout, vec)
        members.append(reorder(st, layout.labels))
        weights.append(qj)
    weights = np.asarray(weights)
    witness = EnsembleDecomposition(weights / weights.sum(), tuple(members))
    value = witness.average_entanglement(cut)
    return max(0.0, value), witness
