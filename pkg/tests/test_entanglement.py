import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import brentq

from qithermo.entanglement import (
    EnsembleDecomposition,
    binary_entropy,
    concurrence_2q,
    entanglement_entropy,
    eof_2q,
    eof_convex_roof,
    eof_from_concurrence,
    lu_equivalent_pure_2q,
    relative_entropy,
    shannon_entropy,
    von_neumann_entropy,
)
from qithermo.qcore import (
    DensityMatrix,
    PureState,
    StateError,
    SystemLayout,
    UnitaryOp,
    apply_unitary,
    haar_state,
    haar_unitary,
    partial_trace,
    random_density,
    reorder,
)

from conftest import seeds

Q = SystemLayout.of(("S", 2))
SR = SystemLayout.of(("S", 2), ("R", 2))
PSR = SystemLayout.of(("P", 2), ("S", 2), ("R1", 2))
LOG2 = math.log(2)


def bell():
    return PureState.normalized(SR, [1, 0, 0, 1])


def w_state():
    return PureState.normalized(PSR, [0, 1, 1, 0, 1, 0, 0, 0])


def dm(m, layout=Q):
    return DensityMatrix(layout, np.asarray(m, dtype=complex))


def test_von_neumann_entropy_examples():
    assert von_neumann_entropy(bell().dm()) == pytest.approx(0, abs=1e-12)
    assert von_neumann_entropy(dm(np.eye(2) / 2)) == pytest.approx(LOG2)
    expected = -0.9 * math.log(0.9) - 0.1 * math.log(0.1)
    assert von_neumann_entropy(dm(np.diag([0.9, 0.1]))) == pytest.approx(expected)


def test_shannon_entropy_examples():
    assert shannon_entropy([1, 0]) == 0
    assert shannon_entropy([0.5, 0.5]) == pytest.approx(LOG2)
    assert shannon_entropy([0.25, 0.75]) == pytest.approx(-0.25 * math.log(0.25) - 0.75 * math.log(0.75))
    assert binary_entropy(0.25) == pytest.approx(shannon_entropy([0.25, 0.75]))


def test_entanglement_entropy_examples():
    assert entanglement_entropy(bell(), ["S"]) == pytest.approx(LOG2)
    prod = PureState.normalized(SR, [1, 1, 0, 0])
    assert entanglement_entropy(prod, ["S"]) == pytest.approx(0, abs=1e-12)
    assert entanglement_entropy(prod, ["R"]) == pytest.approx(0, abs=1e-12)
    ghz = PureState.normalized(PSR, [1, 0, 0, 0, 0, 0, 0, 1])
    assert entanglement_entropy(ghz, ["P"]) == pytest.approx(LOG2)


def test_relative_entropy_examples(rng):
    rho = random_density(Q, rng)
    assert relative_entropy(rho, rho) == pytest.approx(0, abs=1e-12)
    assert relative_entropy(dm(np.diag([1, 0])), dm(np.diag([0, 1]))) == math.inf
    p = 0.3
    got = relative_entropy(dm(np.eye(2) / 2), dm(np.diag([p, 1 - p])))
    assert got == pytest.approx(-LOG2 - 0.5 * math.log(p * (1 - p)))


@given(seeds)
def test_relative_entropy_is_nonnegative(seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.of(("S", 3))
    assert relative_entropy(random_density(lay, rng), random_density(lay, rng)) >= -1e-12


@given(seeds)
def test_entropy_bounds(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(SystemLayout.of(("S", 3)), rng)
    s = von_neumann_entropy(rho)
    assert -1e-12 <= s <= math.log(3) + 1e-12


def test_concurrence_examples():
    assert concurrence_2q(bell().dm()) == pytest.approx(1)
    prod = PureState.normalized(SR, [1, 1, 1, 1])
    assert concurrence_2q(prod.dm()) == pytest.approx(0, abs=1e-12)
    rho_sr = reorder(partial_trace(w_state(), ["S", "R1"]), ["S", "R1"])
    assert concurrence_2q(rho_sr) == pytest.approx(2 / 3, abs=1e-12)


def test_w_marginal_against_convex_roof():
    # the closed form and the brute-force roof agree, and inverting h recovers C = 2/3
    rho_sr = reorder(partial_trace(w_state(), ["S", "R1"]), ["S", "R1"])
    roof, witness = eof_convex_roof(rho_sr, ["S"], ensemble_size=4, restarts=32, seed=3)
    assert witness.reproduces(rho_sr)
    assert roof == pytest.approx(eof_2q(rho_sr), abs=1e-3)
    c = brentq(lambda x: eof_from_concurrence(x) - roof, 1e-9, 1 - 1e-9)
    assert c == pytest.approx(2 / 3, abs=1e-2)


def test_eof_from_concurrence_examples():
    assert eof_from_concurrence(1) == pytest.approx(LOG2)
    assert eof_from_concurrence(0) == 0
    assert eof_from_concurrence(2 / 3) == pytest.approx(binary_entropy((1 + math.sqrt(5) / 3) / 2))


@given(seeds)
def test_eof_pure_equals_entanglement_entropy(seed):
    psi = haar_state(SR, np.random.default_rng(seed))
    assert eof_2q(psi.dm()) == pytest.approx(entanglement_entropy(psi, ["S"]), abs=1e-9)


@given(seeds)
def test_concurrence_local_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(SR, rng, rank=2)
    u = UnitaryOp(SR, np.kron(haar_unitary(2, rng), haar_unitary(2, rng)))
    assert concurrence_2q(apply_unitary(rho, u)) == pytest.approx(concurrence_2q(rho), abs=1e-10)


def test_roof_pure_state(rng):
    psi = haar_state(SR, rng)
    for m in (1, 3):
        val, _ = eof_convex_roof(psi.dm(), ["S"], ensemble_size=m, restarts=4, seed=0)
        assert val == pytest.approx(entanglement_entropy(psi, ["S"]), abs=1e-10)


def test_roof_separable_mixture(rng):
    rho = 0
    for p in (0.5, 0.3, 0.2):
        a = haar_state(SystemLayout.of(("S", 2)), rng).dm().matrix
        b = haar_state(SystemLayout.of(("R", 2)), rng).dm().matrix
        rho = rho + p * np.kron(a, b)
    val, witness = eof_convex_roof(dm(rho, SR), ["S"], ensemble_size=4, restarts=32, seed=1)
    assert val <= 1e-6
    assert witness.reproduces(dm(rho, SR))


@settings(max_examples=10)
@given(seeds)
def test_roof_matches_closed_form_rank2(seed):
    rho = random_density(SR, np.random.default_rng(seed), rank=2)
    val, witness = eof_convex_roof(rho, ["S"], ensemble_size=4, restarts=64, seed=seed)
    assert abs(val - eof_2q(rho)) <= 1e-3
    assert witness.reproduces(rho)
    assert val == pytest.approx(witness.average_entanglement(["S"]))


def test_roof_rejects_small_ensemble(rng):
    with pytest.raises(ValueError):
        eof_convex_roof(random_density(SR, rng, rank=3), ["S"], ensemble_size=2)


def test_roof_on_qubit_qutrit_is_bounded(rng):
    lay = SystemLayout.of(("S", 2), ("R", 3))
    rho = random_density(lay, rng, rank=2)
    val, witness = eof_convex_roof(rho, ["S"], restarts=16, seed=0)
    assert 0 <= val <= von_neumann_entropy(partial_trace(rho, ["S"])) + 1e-9
    assert witness.reproduces(rho)


def test_lu_equivalence_examples(rng):
    psi = haar_state(SR, rng)
    u = UnitaryOp(SR, np.kron(haar_unitary(2, rng), haar_unitary(2, rng)))
    assert lu_equivalent_pure_2q(psi, apply_unitary(psi, u))
    assert not lu_equivalent_pure_2q(bell(), PureState.basis(SR, 0, 0))
    a = PureState.normalized(SR, [math.sqrt(0.9), 0, 0, math.sqrt(0.1)])
    b = PureState.normalized(SR, [math.sqrt(0.8), 0, 0, math.sqrt(0.2)])
    assert not lu_equivalent_pure_2q(a, b)


def test_ensemble_validation():
    members = (PureState.basis(Q, 0), PureState.basis(Q, 1))
    with pytest.raises(StateError):
        EnsembleDecomposition(np.array([0.5, 0.6]), members)
    with pytest.raises(StateError):
        EnsembleDecomposition(np.array([1.0]), members)
    ens = EnsembleDecomposition(np.array([0.5, 0.5]), members)
    assert ens.reproduces(dm(np.eye(2) / 2))
