import math

import numpy as np
import pytest
from hypothesis import given

from qithermo.entanglement import concurrence_2q
from qithermo.qcore import (
    LayoutError,
    PureState,
    SystemLayout,
    UnitaryOp,
    apply_unitary,
    haar_state,
    haar_unitary,
    partial_trace,
    reorder,
)
from qithermo.schmidt import appendix_params, gsd, gsd_candidates, tangle_3q

from conftest import seeds

PSR = SystemLayout.of(("P", 2), ("S", 2), ("R1", 2))
GHZ = PureState.normalized(PSR, [1, 0, 0, 0, 0, 0, 0, 1])
W = PureState.normalized(PSR, [0, 1, 1, 0, 1, 0, 0, 0])


def pair_concurrences(psi):
    out = []
    for pair in (["P", "S"], ["P", "R1"], ["S", "R1"]):
        out.append(concurrence_2q(reorder(partial_trace(psi, pair), pair)))
    return np.array(out)


def test_product_is_already_canonical():
    g = gsd(PureState.basis(PSR, 0, 0, 0))
    assert np.allclose(g.lambdas, [1, 0, 0, 0, 0], atol=1e-12)
    p = appendix_params(g)
    assert p.tau == pytest.approx(0) and p.j5 == pytest.approx(0)
    assert p.c_ps == p.c_pr1 == pytest.approx(0)
    assert p.c_sr1 == pytest.approx(0)


def test_ghz_canonical_form_and_params():
    g = gsd(GHZ)
    s = 1 / math.sqrt(2)
    assert np.allclose(g.lambdas, [s, 0, 0, 0, s], atol=1e-12)
    assert g.phase == 0
    assert np.max(np.abs(g.reconstruct() - GHZ.amplitudes)) <= 1e-12
    p = appendix_params(g)
    assert p.j5 == pytest.approx(0, abs=1e-12)
    assert p.k5 == pytest.approx(1) and p.tau == pytest.approx(1)
    assert p.delta_j == pytest.approx(0, abs=1e-12)
    assert p.q_e == 0
    assert p.phi5_degenerate and "phi5_undefined" in p.flags


def test_tangle_examples():
    assert tangle_3q(GHZ) == pytest.approx(1)
    assert tangle_3q(W) == pytest.approx(0, abs=1e-12)
    prod = PureState.normalized(PSR, [1, 0, 0, 1, 0, 0, 0, 0])
    assert tangle_3q(prod) == pytest.approx(0, abs=1e-12)
    with pytest.raises(LayoutError):
        tangle_3q(PureState.basis(SystemLayout.of(("A", 2), ("B", 2)), 0, 0))


@given(seeds)
def test_gsd_reconstructs_and_keeps_invariants(seed):
    psi = haar_state(PSR, np.random.default_rng(seed))
    g = gsd(psi)
    assert np.max(np.abs(g.reconstruct() - psi.amplitudes)) <= 1e-8
    assert g.lambdas[0] > 0
    assert 0 <= g.phase <= math.pi
    canon = g.canonical_state()
    assert np.max(np.abs(pair_concurrences(canon) - pair_concurrences(psi))) <= 1e-8
    assert abs(tangle_3q(canon) - tangle_3q(psi)) <= 1e-8
    p = appendix_params(g)
    assert p.tau == pytest.approx(tangle_3q(psi), abs=1e-8)
    assert p.k_sr1 - p.tau >= -1e-10
    assert p.k_sr1 - p.tau == pytest.approx(p.c_sr1 ** 2, abs=1e-10)
    assert p.k5 ** 2 - p.k_ps * p.k_pr1 * p.c_sr1 ** 2 >= -1e-9


@given(seeds)
def test_gsd_invariant_under_local_unitaries(seed):
    rng = np.random.default_rng(seed)
    psi = haar_state(PSR, rng)
    local = np.kron(haar_unitary(2, rng), np.kron(haar_unitary(2, rng), haar_unitary(2, rng)))
    moved = apply_unitary(psi, UnitaryOp(PSR, local))
    a, b = gsd(psi), gsd(moved)
    assert np.allclose(a.lambdas, b.lambdas, atol=1e-8)
    assert a.phase == pytest.approx(b.phase, abs=1e-7)


@given(seeds)
def test_ghz_class_real_forms_have_two_branches(seed):
    # real canonical amplitudes (phi = 0) put sin(phi) = 0, hence Q_e = 0
    rng = np.random.default_rng(seed)
    lam = np.abs(rng.normal(size=5)) + 0.05
    lam /= np.linalg.norm(lam)
    vec = np.zeros(8)
    vec[[0, 4, 5, 6, 7]] = lam
    psi = PureState.normalized(PSR, vec)
    local = np.kron(haar_unitary(2, rng), np.kron(haar_unitary(2, rng), haar_unitary(2, rng)))
    psi = apply_unitary(psi, UnitaryOp(PSR, local))
    cands = gsd_candidates(psi)
    g = gsd(psi)
    assert len(cands) >= 2 and g.alternatives >= 2
    assert g.lambdas[0] == pytest.approx(max(c.lambdas[0] for c in cands))
    assert appendix_params(g).q_e == 0
    assert np.max(np.abs(g.reconstruct() - psi.amplitudes)) <= 1e-8


def test_custom_labels():
    lay = SystemLayout.of(("S", 2), ("R1", 2), ("P", 2))
    psi = reorder(GHZ, ["S", "R1", "P"])
    assert psi.layout == lay
    g = gsd(psi, ("P", "S", "R1"))
    assert g.lambdas[0] == pytest.approx(1 / math.sqrt(2))
