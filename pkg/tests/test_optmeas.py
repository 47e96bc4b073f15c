import math

import numpy as np
import pytest
from hypothesis import given, settings

from qithermo.entanglement import (
    EnsembleDecomposition,
    entanglement_entropy,
    eof_2q,
    eof_convex_roof,
    schmidt_coefficients,
)
from qithermo.optmeas import (
    EnsembleMismatch,
    MeasurementModel,
    measurement_outcomes,
    optimal_probe_measurement,
    probe_basis_from_ensemble,
    readout_matrix,
)
from qithermo.qcore import (
    PureState,
    StateError,
    SystemLayout,
    UnitaryOp,
    apply_unitary,
    haar_state,
    haar_unitary,
    partial_trace,
    reorder,
    tensor,
)

from conftest import seeds

S = SystemLayout.of(("S", 2))
P = SystemLayout.of(("P", 2))
SP = SystemLayout.of(("S", 2), ("P", 2))
PSR = SystemLayout.of(("P", 2), ("S", 2), ("R1", 2))
GHZ = PureState.normalized(PSR, [1, 0, 0, 0, 0, 0, 0, 1])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
COMP = (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


def sr_reduction(psi):
    return reorder(partial_trace(psi, ["S", "R1"]), ["S", "R1"])


def test_identity_interaction_kraus():
    m = MeasurementModel(PureState.basis(P, 0), UnitaryOp.identity(SP), COMP)
    assert np.allclose(m.kraus[0][0], np.eye(2))
    assert np.allclose(m.kraus[1][0], 0)


def test_cnot_kraus_are_projectors():
    m = MeasurementModel(PureState.basis(P, 0), UnitaryOp(SP, CNOT), COMP)
    assert np.allclose(m.kraus[0][0], np.diag([1, 0]))
    assert np.allclose(m.kraus[1][0], np.diag([0, 1]))
    assert np.allclose(m.effects[1], np.diag([0, 1]))


@given(seeds)
def test_haar_interaction_completeness_and_born_rule(seed):
    rng = np.random.default_rng(seed)
    dp = 3
    probe = SystemLayout.of(("P", dp))
    u = UnitaryOp(SystemLayout.of(("S", 2), ("P", dp)), haar_unitary(2 * dp, rng))
    # one rank-2 and one rank-1 projector
    v = haar_unitary(dp, rng)
    projs = (v[:, :2] @ v[:, :2].conj().T, np.outer(v[:, 2], v[:, 2].conj()))
    m = MeasurementModel(PureState.basis(probe, 0), u, projs)
    assert len(m.kraus[0]) == 2 and len(m.kraus[1]) == 1
    assert np.max(np.abs(sum(m.effects) - np.eye(2))) <= 1e-10
    rho = haar_state(S, rng)
    joint = apply_unitary(tensor(rho, PureState.basis(probe, 0)), u)
    for d, (pk, _) in zip(m.effects, measurement_outcomes(joint, projs, "P")):
        assert np.real(np.vdot(rho.amplitudes, d @ rho.amplitudes)) == pytest.approx(pk, abs=1e-10)


def test_incomplete_projectors_rejected():
    with pytest.raises(StateError):
        MeasurementModel(PureState.basis(P, 0), UnitaryOp.identity(SP), (np.diag([1.0, 0.0]),))


def test_readout_matrix_is_rank_one_projector():
    for a, theta in ((0.3, 0.7), (0.0, 0.0), (1.0, 2.0), (0.5, -1.2)):
        r = readout_matrix(a, theta)
        assert abs(np.linalg.det(r)) <= 1e-15
        assert np.trace(r).real == pytest.approx(1)
        assert np.max(np.abs(r @ r - r)) <= 1e-15


def test_ghz_readout():
    om = optimal_probe_measurement(GHZ)
    assert om.method == "closed_form"
    assert om.a == pytest.approx(0, abs=1e-12)
    assert np.allclose(om.projectors_gsd[0], np.diag([0, 1]), atol=1e-12)
    assert np.allclose(om.projectors_gsd[1], np.diag([1, 0]), atol=1e-12)
    for pk, out in measurement_outcomes(GHZ, om.projectors, "P"):
        assert pk == pytest.approx(0.5)
        assert entanglement_entropy(out, ["S"]) == pytest.approx(0, abs=1e-12)
    assert eof_2q(sr_reduction(GHZ)) == pytest.approx(0, abs=1e-12)


def test_decoupled_probe_readout():
    bell = PureState.normalized(SystemLayout.of(("S", 2), ("R1", 2)), [1, 0, 0, 1])
    psi = tensor(PureState.basis(P, 1), bell)
    om = optimal_probe_measurement(psi)
    assert om.method == "decoupled"
    assert "singular_denominator" in om.flags
    for pk, out in measurement_outcomes(psi, om.projectors, "P"):
        if out is not None:
            assert entanglement_entropy(out, ["S"]) == pytest.approx(math.log(2))


@given(seeds)
def test_readout_outcomes_attain_eof(seed):
    psi = haar_state(PSR, np.random.default_rng(seed))
    om = optimal_probe_measurement(psi)
    assert om.b == pytest.approx(1 - om.a)
    assert om.k == pytest.approx(math.sqrt(om.a * om.b))
    p0, p1 = om.projectors
    assert np.max(np.abs(p0 + p1 - np.eye(2))) <= 1e-9
    assert np.max(np.abs(p0 @ p0 - p0)) <= 1e-9
    assert np.max(np.abs(p0 @ p1)) <= 1e-9
    target = eof_2q(sr_reduction(psi))
    spectra = []
    for pk, out in measurement_outcomes(psi, om.projectors, "P"):
        assert out is not None
        spectra.append(schmidt_coefficients(out, ["S"]))
        assert abs(entanglement_entropy(out, ["S"]) - target) <= 1e-7
    assert np.max(np.abs(spectra[0] - spectra[1])) <= 1e-8


def test_ensemble_basis_for_ghz():
    sr = SystemLayout.of(("S", 2), ("R1", 2))
    witness = EnsembleDecomposition(np.array([0.5, 0.5]), (PureState.basis(sr, 0, 0), PureState.basis(sr, 1, 1)))
    basis = probe_basis_from_ensemble(GHZ, witness)
    assert np.allclose(np.abs(basis), np.eye(2), atol=1e-12)


def test_ensemble_basis_rank_one():
    sr = SystemLayout.of(("S", 2), ("R1", 2))
    phi = PureState.normalized(sr, [1, 0, 0, 1])
    psi = tensor(PureState.basis(P, 0), phi)
    basis = probe_basis_from_ensemble(psi, EnsembleDecomposition(np.array([1.0]), (phi,)))
    assert np.max(np.abs(basis.conj().T @ basis - np.eye(2))) <= 1e-12
    assert abs(basis[0, 0]) == pytest.approx(1)


@settings(max_examples=15)
@given(seeds)
def test_ensemble_basis_steers_onto_witness(seed):
    rng = np.random.default_rng(seed)
    dp = 4
    lay = SystemLayout.of(("P", dp), ("S", 2), ("R", 2))
    # rank-2 reduction on S,R from a probe entangled through its first two levels
    core = haar_state(SystemLayout.of(("P", 2), ("S", 2), ("R", 2)), rng).amplitudes.reshape(2, 4)
    psi = PureState.normalized(lay, np.concatenate([core, np.zeros((dp - 2, 4))]).ravel())
    rho = partial_trace(psi, ["S", "R"])
    _, witness = eof_convex_roof(rho, ["S"], ensemble_size=4, restarts=8, seed=seed)
    basis = probe_basis_from_ensemble(psi, witness)
    assert np.max(np.abs(basis.conj().T @ basis - np.eye(dp))) <= 1e-10
    projs = [np.outer(basis[:, k], basis[:, k].conj()) for k in range(dp)]
    outs = measurement_outcomes(psi, projs, "P")
    for k, (q, mem) in enumerate(zip(witness.weights, witness.members)):
        pk, out = outs[k]
        assert pk == pytest.approx(q, abs=1e-8)
        if q > 1e-8:
            sbr = partial_trace(out, ["S", "R"]).matrix
            assert np.max(np.abs(sbr - mem.dm().matrix)) <= 1e-6


def test_ensemble_mismatch(rng):
    psi = haar_state(PSR, rng)
    sr = SystemLayout.of(("S", 2), ("R1", 2))
    wrong = EnsembleDecomposition(np.array([1.0]), (PureState.basis(sr, 0, 0),))
    with pytest.raises(EnsembleMismatch):
        probe_basis_from_ensemble(psi, wrong)
    too_many = EnsembleDecomposition(np.full(3, 1 / 3), tuple(PureState.basis(sr, 0, i) for i in (0, 1, 1)))
    with pytest.raises(EnsembleMismatch):
        probe_basis_from_ensemble(psi, too_many)
