import numpy as np
import pytest

from chancert.channels import identity_channel
from chancert.constructions import entangling_gram
from chancert.correlations import BellFunctional, chsh
from chancert.dephasing import dephase_channel_memoryless
from chancert.protocols import ic_family, sample_losr
from chancert.sampling import density_matrix
from chancert.seesaw import mdi_losr_test, optimal_povm, ppt_upper_bound, seesaw_gamma_max, seesaw_tau


def classical_inputs():
    plus = np.full((2, 2), 0.5)
    return [np.kron(np.diag(np.eye(2)[x]), plus) for x in range(2)]


def test_optimal_povm_two_outcomes(rng):
    ops = []
    for _ in range(2):
        h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        ops.append(h + h.conj().T)
    eff, value, exact = optimal_povm(np.array(ops))
    w = np.linalg.eigvalsh(ops[0] - ops[1])
    assert exact
    assert abs(value - (np.trace(ops[1]).real + w[w > 0].sum())) < 1e-12


def test_optimal_povm_sdp_beats_random(rng):
    ops = []
    for _ in range(3):
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        ops.append(h + h.conj().T)
    ops = np.array(ops)
    eff, value, exact = optimal_povm(ops)
    assert np.abs(eff.sum(axis=0) - np.eye(2)).max() < 1e-9
    # every projective POVM assigning rank-one effects to two of the outcomes is no better
    for _ in range(200):
        v = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
        a, b = rng.choice(3, 2, replace=False)
        trial = np.trace(np.outer(v[:, 0], v[:, 0].conj()) @ ops[a]).real + \
            np.trace(np.outer(v[:, 1], v[:, 1].conj()) @ ops[b]).real
        assert trial <= value + 1e-7


def test_product_inputs_stay_local(rng):
    rho = [density_matrix(2, rng) for _ in range(2)]
    res = seesaw_gamma_max(identity_channel((2, 2)), chsh(), rho, rho, restarts=5)
    assert res.value <= 2 + 1e-9


def test_dephased_identity_reaches_tsirelson():
    ch = dephase_channel_memoryless(identity_channel((2, 2)), entangling_gram(), np.ones((4, 4)))
    x = classical_inputs()
    res = seesaw_gamma_max(ch, chsh(), x, x, (2, 2), restarts=10, seed=3)
    assert abs(res.value - 2 * np.sqrt(2)) < 1e-6
    assert np.diff(res.history).min() >= -1e-10
    assert res.converged


def test_seeded_runs_repeat():
    ch = dephase_channel_memoryless(identity_channel((2, 2)), entangling_gram(), np.ones((4, 4)))
    x = classical_inputs()
    a = seesaw_gamma_max(ch, chsh(), x, x, (2, 2), restarts=4, seed=9)
    b = seesaw_gamma_max(ch, chsh(), x, x, (2, 2), restarts=4, seed=9)
    assert a.restart_values == b.restart_values


def test_zero_functional():
    x = classical_inputs()
    res = seesaw_gamma_max(identity_channel((2, 2)), BellFunctional(np.zeros((2, 2, 2, 2))), x, x, (2, 2))
    assert res.value == 0


def test_three_outcome_seesaw_is_monotone(rng):
    tau = np.array([[np.kron(density_matrix(2, rng), density_matrix(2, rng)) for _ in range(2)] for _ in range(2)])
    tau = tau.reshape(2, 2, 2, 2, 2, 2)
    res = seesaw_tau(tau, BellFunctional(rng.standard_normal((3, 3, 2, 2))), restarts=2, seed=0)
    assert np.diff(res.history).min() >= -1e-10
    assert res.alice.n_outcomes == 3


def test_ppt_bound_brackets_seesaw():
    rng = np.random.default_rng(5)
    fam = ic_family((2,))
    g = BellFunctional(rng.standard_normal((2, 2, 4, 4)))
    bound, info = ppt_upper_bound(g, fam, fam)
    tau = np.einsum("xij,ykl->xyikjl", np.array(fam), np.array(fam)).reshape(4, 4, 2, 2, 2, 2)
    low = seesaw_tau(tau, g, restarts=10, seed=1).value
    assert low <= bound + 1e-9
    assert bound <= info["trivial_bound"] + 1e-12


def test_losr_test_guards():
    fam = ic_family((2, 2))
    zero = BellFunctional(np.zeros((4, 4, 16, 16)))
    rep = mdi_losr_test(sample_losr((2, 2), (2, 2), 2, 0), zero, fam, fam)
    assert rep.verdict == "inconclusive"
    with pytest.raises(ValueError):
        mdi_losr_test(sample_losr((2, 2), (2, 2), 2, 0), zero, fam[:8], fam)
    with pytest.raises(ValueError):
        mdi_losr_test(identity_channel((2, 3)), zero, fam, fam)


def test_losr_channel_is_never_certified():
    fam = ic_family((2, 2))
    g = BellFunctional(np.random.default_rng(2).standard_normal((4, 4, 16, 16)))
    rep = mdi_losr_test(sample_losr((2, 2), (2, 2), 3, 8), g, fam, fam, restarts=2, seed=0)
    r = rep.residuals
    assert rep.verdict == "inconclusive"
    assert r["seesaw_lower"] <= r["ppt_upper"] + 1e-9
    assert r["lhs"] <= r["ppt_upper"] + 1e-7
