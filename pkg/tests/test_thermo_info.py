import math

import numpy as np
import pytest
from hypothesis import given

from qithermo.entanglement import shannon_entropy, von_neumann_entropy
from qithermo.optmeas import MeasurementModel
from qithermo.qcore import DensityMatrix, SystemLayout, UnitaryOp, haar_unitary, purify, random_density, tensor
from qithermo.thermo.constructions import (
    SP_LAYOUT,
    cnot_measurement,
    computational_projectors,
    probe_ground,
    random_probe_basis,
)
from qithermo.thermo.info import (
    canonical_cross_entropy,
    canonical_state,
    canonical_state_beta,
    free_energy,
    i_e,
    i_qc,
    i_qc_forms,
    matching_beta,
)

from conftest import seeds

S = SystemLayout.of(("S", 2))
LOG2 = math.log(2)


def test_canonical_state_of_zero_hamiltonian():
    assert np.allclose(canonical_state(np.zeros((2, 2)), 1.7).matrix, np.eye(2) / 2)
    assert free_energy(np.zeros((2, 2)), 1.7) == pytest.approx(-1.7 * LOG2)


def test_low_temperature_limit():
    h = np.diag([0.0, 1.0, 2.5])
    rho = canonical_state_beta(h, 1e6)
    assert np.max(np.abs(rho.matrix - np.diag([1, 0, 0]))) <= 1e-6
    assert np.allclose(canonical_state_beta(h, math.inf).matrix, np.diag([1, 0, 0]))


def test_temperature_validation():
    with pytest.raises(ValueError):
        canonical_state(np.eye(2), 0.0)
    with pytest.raises(ValueError):
        free_energy(np.eye(2), -1.0)


@given(seeds)
def test_cross_entropy_is_u_minus_f_over_t(seed):
    rng = np.random.default_rng(seed)
    h = np.diag(np.sort(rng.uniform(0, 2, 3)))
    t = float(rng.uniform(0.2, 3))
    rho = random_density(SystemLayout.of(("S", 3)), rng)
    u = float(np.real(np.trace(rho.matrix @ h)))
    assert canonical_cross_entropy(rho, h, 1 / t) == pytest.approx((u - free_energy(h, t)) / t)


@given(seeds)
def test_matching_beta_minimises_cross_entropy(seed):
    rng = np.random.default_rng(seed)
    h = np.diag([0.0, float(rng.uniform(0.1, 2))])
    rho = random_density(S, rng)
    beta = matching_beta(rho, h)
    if beta in (None, math.inf):
        return
    best = canonical_cross_entropy(rho, h, beta)
    for b in np.linspace(0, 3 * max(beta, 1), 50):
        assert canonical_cross_entropy(rho, h, b) >= best - 1e-10


def test_matching_beta_special_cases():
    h = np.diag([0.0, 1.0])
    assert matching_beta(DensityMatrix(S, np.eye(2) / 2), np.zeros((2, 2))) is None
    assert matching_beta(DensityMatrix(S, np.diag([1.0, 0.0])), h) == math.inf
    assert matching_beta(DensityMatrix(S, np.diag([0.3, 0.7])), h) == 0.0
    rho = canonical_state(h, 0.8)
    assert matching_beta(rho, h) == pytest.approx(1 / 0.8)


def test_iqc_identity_interaction_is_zero(rng):
    m = MeasurementModel(probe_ground(), UnitaryOp.identity(SP_LAYOUT), computational_projectors())
    assert i_qc(random_density(S, rng), m) == pytest.approx(0, abs=1e-12)


def test_szilard_information():
    rho = DensityMatrix(S, np.eye(2) / 2)
    forms = i_qc_forms(rho, cnot_measurement())
    assert forms.value == pytest.approx(LOG2)
    assert forms.alternative == pytest.approx(LOG2)
    info = i_e(purify(rho, "R"), cnot_measurement().interaction, probe_ground())
    assert info.value == pytest.approx(LOG2)
    assert info.eof_after == pytest.approx(0, abs=1e-12)


def test_ie_identity_interaction_is_zero(rng):
    rho = random_density(S, rng)
    info = i_e(purify(rho, "R"), UnitaryOp.identity(SP_LAYOUT), probe_ground())
    assert info.value == pytest.approx(0, abs=1e-10)
    assert info.eof_before == pytest.approx(von_neumann_entropy(rho))


@given(seeds)
def test_iqc_bounds(seed):
    rng = np.random.default_rng(seed)
    m = MeasurementModel(probe_ground(), UnitaryOp(SP_LAYOUT, haar_unitary(4, rng)), random_probe_basis(rng))
    rho = random_density(S, rng)
    forms = i_qc_forms(rho, m)
    assert forms.residual <= 1e-10
    assert -1e-9 <= forms.value <= min(von_neumann_entropy(rho), shannon_entropy(forms.probabilities)) + 1e-9


@given(seeds)
def test_lemma1_every_probe_basis(seed):
    rng = np.random.default_rng(seed)
    u = UnitaryOp(SP_LAYOUT, haar_unitary(4, rng))
    rho = random_density(S, rng)
    info = i_e(purify(rho, "R"), u, probe_ground())
    assert info.method == "two_qubit"
    for _ in range(5):
        m = MeasurementModel(probe_ground(), u, random_probe_basis(rng))
        assert i_qc(rho, m) <= info.value + 1e-7


def test_ie_split_with_bath(rng):
    rho_s = random_density(S, rng)
    rho_b = random_density(SystemLayout.of(("B", 2)), rng)
    rho1 = tensor(rho_s, rho_b)
    u = UnitaryOp(SP_LAYOUT, haar_unitary(4, rng))
    split = i_e(purify(rho1, "R"), u, probe_ground())
    alone = i_e(purify(rho_s, "R"), u, probe_ground())
    assert split.method == "split"
    assert split.value == pytest.approx(alone.value, abs=1e-9)


def test_ie_refuses_high_rank(rng):
    lay = SystemLayout.of(("S", 2), ("B", 3))
    rho1 = random_density(lay, rng)
    # rank of rho_SBR after the interaction is bounded by the probe dimension
    u = UnitaryOp(SystemLayout.of(("S", 2), ("B", 3), ("P", 6)), haar_unitary(36, rng))
    with pytest.raises(ValueError):
        i_e(purify(rho1, "R"), u, probe_ground(6))
