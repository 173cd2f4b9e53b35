import numpy as np
import pytest

from chancert.channels import (ChoiChannel, KrausChannel, SuperchannelChoi, adjoint, apply, apply_kraus,
                               choi_from_kraus, choi_from_unitary, compose, identity_channel, is_cptp, is_qns,
                               is_superchannel, kraus_from_choi, mix_channels, product_channel)
from chancert.constructions import CNOT, SWAP
from chancert.sampling import choi_matrix, density_matrix, haar_unitary, kraus_operators


def loop_choi(kraus, d_in, d_out):
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for i in range(d_in):
        for k in range(d_in):
            e = np.zeros((d_in, d_in))
            e[i, k] = 1
            j += np.kron(e, sum(K @ e @ K.conj().T for K in kraus))
    return j


def test_choi_from_kraus_matches_definition(rng):
    ks = kraus_operators(2, 3, rng, num=3)
    ch = choi_from_kraus(ks)
    assert np.abs(ch.choi - loop_choi(ks, 2, 3)).max() < 1e-14
    assert abs(np.trace(ch.choi).real - 2) < 1e-12


def test_apply_agrees_with_kraus(rng):
    ks = kraus_operators(3, 2, rng, num=4)
    rho = density_matrix(3, rng)
    assert np.abs(apply(choi_from_kraus(ks), rho) - apply_kraus(ks, rho)).max() < 1e-14


def test_identity_channel():
    ch = identity_channel((2, 3))
    assert is_cptp(ch).inside
    rho = np.arange(36).reshape(6, 6).astype(complex)
    assert np.abs(apply(ch, rho) - rho).max() == 0


def test_kraus_roundtrip(rng):
    ch = ChoiChannel(choi_matrix(2, 3, rng), (2,), (3,))
    back = choi_from_kraus(kraus_from_choi(ch), (2,), (3,))
    assert np.abs(back.choi - ch.choi).max() < 1e-12


def test_compose_and_adjoint(rng):
    a = choi_from_kraus(kraus_operators(2, 3, rng, num=2))
    b = choi_from_kraus(kraus_operators(3, 2, rng, num=2))
    rho = density_matrix(2, rng)
    assert np.abs(apply(compose(b, a), rho) - apply(b, apply(a, rho))).max() < 1e-13
    x, y = density_matrix(2, rng), density_matrix(3, rng)
    lhs = np.trace(apply(a, x) @ y)
    rhs = np.trace(x @ apply(adjoint(a), y))
    assert abs(lhs - rhs) < 1e-13


def test_unitary_channel(rng):
    u = haar_unitary(4, rng)
    ch = choi_from_unitary(u, (2, 2))
    rho = density_matrix(4, rng)
    assert np.abs(apply(ch, rho) - u @ rho @ u.conj().T).max() < 1e-13
    assert ch.is_bipartite


def test_product_channels_are_qns(rng):
    a = choi_from_kraus(kraus_operators(2, 2, rng, num=2))
    b = choi_from_kraus(kraus_operators(2, 2, rng, num=3))
    ch = product_channel(a, b)
    assert is_cptp(ch).inside
    rep = is_qns(ch)
    assert rep.inside and max(rep.residuals.values()) < 1e-12


def test_mixture_of_products_is_qns(rng):
    chans = [product_channel(choi_from_kraus(kraus_operators(2, 2, rng, num=2)),
                             choi_from_kraus(kraus_operators(2, 2, rng, num=2))) for _ in range(3)]
    assert is_qns(mix_channels([0.2, 0.3, 0.5], chans)).inside


def test_cnot_signals():
    rep = is_qns(choi_from_unitary(CNOT, (2, 2)))
    assert rep.verdict == "outside"
    assert rep.residuals["bob_to_alice"] > 0.1


def test_swap_signals_both_ways():
    rep = is_qns(choi_from_unitary(SWAP, (2, 2)))
    assert rep.residuals["alice_to_bob"] > 0.1 and rep.residuals["bob_to_alice"] > 0.1


def test_cptp_failures(rng):
    j = choi_matrix(2, 2, rng)
    assert not is_cptp(ChoiChannel(1.1 * j, (2,), (2,))).inside
    w, v = np.linalg.eigh(j)
    w[0] = -0.05
    assert not is_cptp(ChoiChannel((v * w) @ v.conj().T, (2,), (2,))).inside


def test_kraus_channel_validates():
    with pytest.raises(ValueError):
        KrausChannel([np.eye(2) * 1.1])
    with pytest.raises(ValueError):
        ChoiChannel(np.eye(3), (2,), (2,))


def test_superchannel_identity():
    # the identity superchannel: A0 -> A1 wire into the slot, slot output B0 -> B1 out
    # its Choi is |I>><<I|_{A0 A1} (x) |I>><<I|_{B0 B1} reordered to (A0, B0, A1, B1)
    wire = identity_channel((2,)).choi
    j = np.kron(wire, wire).reshape([2] * 8).transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(16, 16)
    rep = is_superchannel(SuperchannelChoi(j, (2, 2, 2, 2)))
    assert rep.inside


def test_superchannel_rejects_backwards_wire():
    # slot output B0 wired straight back into the slot input A1
    wire = identity_channel((2,)).choi
    j = np.kron(np.kron(np.eye(2), wire), np.eye(2) / 2)
    rep = is_superchannel(SuperchannelChoi(j, (2, 2, 2, 2)))
    assert rep.residuals["input_marginal"] < 1e-15
    assert rep.residuals["causal_order"] > 0.1
    assert not rep.inside
