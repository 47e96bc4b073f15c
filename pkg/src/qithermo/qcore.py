"""Dense linear algebra on small labelled tensor-product Hilbert spaces.

Every state and operator carries a :class:`SystemLayout`, an ordered list of
``(label, dim)`` factors.  Kronecker products always follow layout order;
anything that needs another order goes through :func:`reorder`.

All logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.stats import unitary_group

TOL_NORM = 1e-9
TOL_TRACE = 1e-9
TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_UNITARY = 1e-9
TOL_EIG = 1e-10
TOL_REC = 1e-10


class LayoutError(ValueError):
    """Raised for unknown, duplicated or overlapping subsystem labels."""


class StateError(ValueError):
    """Raised when an array does not satisfy the invariants of its type."""


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor factors ``((label, dim), ...)``."""

    factors: tuple

    def __post_init__(self):
        factors = tuple((str(lab), int(d)) for lab, d in self.factors)
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout: {labels}")
        for lab, d in factors:
            if d < 1:
                raise LayoutError(f"factor {lab!r} has non-positive dimension {d}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *factors) -> "SystemLayout":
        """``SystemLayout.of(("S", 2), ("P", 2))``."""
        return cls(tuple(factors))

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=int)) if self.factors else 1

    def __contains__(self, label) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.factors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        d = 1
        for lab in labels:
            d *= self.dims[self.index(lab)]
        return d

    def check_labels(self, labels: Iterable[str]) -> tuple:
        labels = tuple(labels)
        for lab in labels:
            self.index(lab)
        if len(set(labels)) != len(labels):
            raise LayoutError(f"repeated labels in {labels}")
        return labels

    def subset(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout of ``labels``, kept in this layout's order."""
        wanted = set(self.check_labels(labels))
        return SystemLayout(tuple(f for f in self.factors if f[0] in wanted))

    def complement(self, labels: Iterable[str]) -> tuple:
        wanted = set(self.check_labels(labels))
        return tuple(lab for lab in self.labels if lab not in wanted)

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"overlapping labels: {sorted(clash)}")
        return SystemLayout(self.factors + other.factors)

    def permuted(self, labels: Sequence[str]) -> "SystemLayout":
        labels = self.check_labels(labels)
        if set(labels) != set(self.labels):
            raise LayoutError(f"{labels} is not a permutation of {self.labels}")
        return SystemLayout(tuple(self.factors[self.index(lab)] for lab in labels))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalised state vector over a layout."""

    layout: SystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.dim:
            raise StateError(f"vector of length {amps.shape[0]} does not fit layout dim {self.layout.dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL_NORM:
            raise StateError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def normalized(cls, layout: SystemLayout, vector) -> "PureState":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise StateError("cannot normalise the zero vector")
        return cls(layout, v / n)

    @classmethod
    def basis(cls, layout: SystemLayout, *indices: int) -> "PureState":
        """Computational basis state, one index per factor."""
        if len(indices) != len(layout):
            raise StateError(f"need {len(layout)} indices, got {len(indices)}")
        v = np.zeros(layout.dim, dtype=complex)
        v[np.ravel_multi_index(indices, layout.dims)] = 1.0
        return cls(layout, v)

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def dm(self) -> "DensityMatrix":
        return _dm(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: "PureState") -> complex:
        if self.layout != other.layout:
            raise LayoutError("inner product of states on different layouts")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace operator over a layout."""

    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.layout.dim
        if m.shape != (d, d):
            raise StateError(f"matrix of shape {m.shape} does not fit layout dim {d}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > TOL_HERM:
            raise StateError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TOL_TRACE:
            raise StateError(f"density matrix trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lo < -TOL_PSD:
            raise StateError(f"density matrix has negative eigenvalue {lo!r}")
        object.__setattr__(self, "matrix", _frozen((m + m.conj().T) / 2))

    @classmethod
    def maximally_mixed(cls, layout: SystemLayout) -> "DensityMatrix":
        return cls(layout, np.eye(layout.dim) / layout.dim)

    def eigvals(self) -> np.ndarray:
        """Eigenvalues, descending, with PSD noise clamped to zero."""
        return clamp_psd(np.linalg.eigvalsh(self.matrix)[::-1])

    def rank(self, tol: float = 1e-12) -> int:
        return int(np.sum(self.eigvals() > tol))

    def expect(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(self.matrix @ op)))


def _dm(layout: SystemLayout, matrix: np.ndarray) -> DensityMatrix:
    """Build a DensityMatrix without re-validating (internal use)."""
    obj = object.__new__(DensityMatrix)
    m = np.asarray(matrix, dtype=complex)
    object.__setattr__(obj, "layout", layout)
    object.__setattr__(obj, "matrix", _frozen((m + m.conj().T) / 2))
    return obj


def _ket(layout: SystemLayout, vector: np.ndarray) -> PureState:
    obj = object.__new__(PureState)
    object.__setattr__(obj, "layout", layout)
    object.__setattr__(obj, "amplitudes", _frozen(np.asarray(vector).reshape(-1)))
    return obj


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    """Unitary acting on the factors of ``layout`` (its support).

    When applied to a larger state it acts as the identity on every factor
    outside the support.
    """

    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.layout.dim
        if m.shape != (d, d):
            raise StateError(f"unitary of shape {m.shape} does not fit support dim {d}")
        if np.max(np.abs(m.conj().T @ m - np.eye(d)), initial=0.0) > TOL_UNITARY:
            raise StateError("operator is not unitary")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def support(self) -> tuple:
        return self.layout.labels

    @classmethod
    def identity(cls, layout: SystemLayout) -> "UnitaryOp":
        return cls(layout, np.eye(layout.dim))

    def dagger(self) -> "UnitaryOp":
        return UnitaryOp(self.layout, self.matrix.conj().T)

    def embed(self, layout: SystemLayout) -> np.ndarray:
        """Full matrix on ``layout`` (identity outside the support)."""
        return embed_operator(self.matrix, self.layout, layout)


Operand = Union[PureState, DensityMatrix, UnitaryOp]


# --- layout bookkeeping -------------------------------------------------------

def _apply_on_axes(tensor: np.ndarray, op: np.ndarray, op_layout: SystemLayout,
                   layout: SystemLayout, offset: int = 0) -> np.ndarray:
    """Contract ``op`` into the ``op_layout`` axes of ``tensor``.

    ``tensor`` has the axes of ``layout`` starting at ``offset`` (so the same
    routine handles ket and bra indices of an operator).
    """
    k = len(op_layout)
    axes = [offset + layout.index(lab) for lab in op_layout.labels]
    op_t = op.reshape(op_layout.dims * 2)
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def embed_operator(op: np.ndarray, op_layout: SystemLayout, layout: SystemLayout) -> np.ndarray:
    """Pad ``op`` (acting on ``op_layout``) with identities up to ``layout``."""
    layout.check_labels(op_layout.labels)
    for lab, d in op_layout.factors:
        if layout.dims[layout.index(lab)] != d:
            raise LayoutError(f"dimension mismatch on factor {lab!r}")
    eye = np.eye(layout.dim, dtype=complex).reshape(layout.dims * 2)
    out = _apply_on_axes(eye, np.asarray(op, dtype=complex), op_layout, layout)
    return out.reshape(layout.dim, layout.dim)


def reorder(x: Operand, labels: Sequence[str]) -> Operand:
    """Permute the tensor factors of a state or operator into ``labels`` order."""
    new = x.layout.permuted(labels)
    perm = [x.layout.index(lab) for lab in new.labels]
    if isinstance(x, PureState):
        return _ket(new, np.transpose(x.tensor, perm).reshape(-1))
    n = len(perm)
    m = np.asarray(x.matrix).reshape(x.layout.dims * 2)
    m = np.transpose(m, perm + [p + n for p in perm]).reshape(new.dim, new.dim)
    if isinstance(x, DensityMatrix):
        return _dm(new, m)
    return UnitaryOp(new, m)


def relabel(x: Operand, mapping: dict) -> Operand:
    """Rename factors without touching the numbers."""
    new = SystemLayout(tuple((mapping.get(lab, lab), d) for lab, d in x.layout.factors))
    if isinstance(x, PureState):
        return _ket(new, x.amplitudes)
    if isinstance(x, DensityMatrix):
        return _dm(new, x.matrix)
    return UnitaryOp(new, x.matrix)


# --- operations ---------------------------------------------------------------

def tensor(a: Operand, b: Operand) -> Operand:
    """Kronecker product with concatenated layout (``a`` factors first)."""
    layout = a.layout.concat(b.layout)
    if isinstance(a, UnitaryOp) and isinstance(b, UnitaryOp):
        return UnitaryOp(layout, np.kron(a.matrix, b.matrix))
    if isinstance(a, UnitaryOp) or isinstance(b, UnitaryOp):
        raise TypeError("cannot tensor a unitary with a state")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return _ket(layout, np.kron(a.amplitudes, b.amplitudes))
    ma = a.dm().matrix if isinstance(a, PureState) else a.matrix
    mb = b.dm().matrix if isinstance(b, PureState) else b.matrix
    return _dm(layout, np.kron(ma, mb))


def tensor_all(*items: Operand) -> Operand:
    out = items[0]
    for it in items[1:]:
        out = tensor(out, it)
    return out


def partial_trace(rho: Union[DensityMatrix, PureState], keep: Iterable[str]) -> DensityMatrix:
    """Reduced state on ``keep`` (factors stay in layout order)."""
    layout = rho.layout
    keep_set = set(layout.check_labels(keep))
    kept = [i for i, lab in enumerate(layout.labels) if lab in keep_set]
    traced = [i for i in range(len(layout)) if i not in kept]
    new = SystemLayout(tuple(layout.factors[i] for i in kept))
    if isinstance(rho, PureState):
        t = np.transpose(rho.tensor, kept + traced).reshape(new.dim, -1)
        return _dm(new, t @ t.conj().T)
    if not traced:
        return rho
    n = len(layout)
    m = rho.matrix.reshape(layout.dims * 2)
    # move traced ket/bra axes to the end, then contract them pairwise
    m = np.transpose(m, kept + [k + n for k in kept] + traced + [t + n for t in traced])
    dk = new.dim
    dt = layout.dim // dk
    m = m.reshape(dk, dk, dt, dt)
    return _dm(new, np.einsum("abcc->ab", m))


def clamp_psd(w: np.ndarray, tol: float = TOL_PSD) -> np.ndarray:
    """Zero out eigenvalues in ``[-tol, 0)``; reject anything more negative."""
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -tol:
        raise StateError(f"negative eigenvalue {w.min()!r} below -{tol}")
    return np.where(w < 0, 0.0, w)


def eig_hermitian(m: np.ndarray):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, V)`` with ``m = V diag(w) V^dagger``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StateError(f"expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > TOL_HERM:
        raise StateError("matrix is not Hermitian")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w[::-1], v[:, ::-1]


def matrix_function_psd(m: np.ndarray, f) -> np.ndarray:
    """Apply ``f`` to the spectrum of a PSD matrix (after clamping noise)."""
    w, v = eig_hermitian(m)
    w = clamp_psd(w)
    return (v * f(w)) @ v.conj().T


def matrix_sqrt_psd(m: np.ndarray, cutoff: float = 0.0) -> np.ndarray:
    """PSD square root; eigenvalues at or below ``cutoff`` are treated as zero.

    A positive cutoff keeps rounding noise on a kernel (around 1e-17) from
    turning into a visible ``sqrt`` (around 3e-9), e.g. for projectors.
    """
    return matrix_function_psd(m, lambda w: np.where(w > cutoff, np.sqrt(w), 0.0))


def matrix_log_support(m: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Natural log on the support; the kernel maps to zero."""

    def _log(w):
        out = np.zeros_like(w)
        pos = w > tol
        out[pos] = np.log(w[pos])
        return out

    return matrix_function_psd(m, _log)


def purify(rho: DensityMatrix, reference_label: str = "R", reference_dim: int | None = None) -> PureState:
    """Canonical purification ``sum_i sqrt(p_i) |e_i> |i_R>``.

    The reference is appended as the last factor.  Its dimension is the rank
    of ``rho`` unless ``reference_dim`` (at least the rank) pads it.
    """
    if reference_label in rho.layout:
        raise LayoutError(f"reference label {reference_label!r} already in layout")
    w, v = eig_hermitian(rho.matrix)
    w = clamp_psd(w)
    r = max(1, int(np.sum(w > 1e-14)))
    dr = r if reference_dim is None else int(reference_dim)
    if dr < r:
        raise LayoutError(f"reference dimension {dr} below rank {r}")
    coeffs = np.zeros((rho.layout.dim, dr), dtype=complex)
    coeffs[:, :r] = v[:, :r] * np.sqrt(w[:r])
    vec = coeffs.reshape(-1)
    vec = vec / np.linalg.norm(vec)
    layout = rho.layout.concat(SystemLayout.of((reference_label, dr)))
    return _ket(layout, vec)


def apply_unitary(state: Union[PureState, DensityMatrix], u: UnitaryOp):
    """Apply ``u`` on its support, identity elsewhere."""
    layout = state.layout
    for lab, d in u.layout.factors:
        if layout.dims[layout.index(lab)] != d:
            raise LayoutError(f"dimension mismatch on factor {lab!r}")
    if isinstance(state, PureState):
        out = _apply_on_axes(state.tensor, u.matrix, u.layout, layout)
        return _ket(layout, out.reshape(-1))
    n = len(layout)
    m = state.matrix.reshape(layout.dims * 2)
    m = _apply_on_axes(m, u.matrix, u.layout, layout)
    m = _apply_on_axes(m, u.matrix.conj(), u.layout, layout, offset=n)
    return _dm(layout, m.reshape(layout.dim, layout.dim))


def apply_operator(state: DensityMatrix, op: np.ndarray, op_layout: SystemLayout) -> np.ndarray:
    """``K rho K^dagger`` as a raw (unnormalised) matrix."""
    k = embed_operator(op, op_layout, state.layout)
    return k @ state.matrix @ k.conj().T


# --- random instances ---------------------------------------------------------

def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(dim, random_state=rng)


def haar_state(layout: SystemLayout, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return PureState.normalized(layout, v)


def random_density(layout: SystemLayout, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state from the induced (Ginibre) measure with the given rank."""
    rank = layout.dim if rank is None else rank
    g = rng.normal(size=(layout.dim, rank)) + 1j * rng.normal(size=(layout.dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(layout, m / np.trace(m).real)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (g + g.conj().T) / 2
