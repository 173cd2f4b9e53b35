import itertools

import numpy as np
import pytest

from chancert.bounds import npa_membership
from chancert.channels import ChoiChannel, identity_channel, is_cptp, is_qns, product_channel
from chancert.correlations import bell_value, chsh, is_local, is_nonsignaling
from chancert.dephasing import classical_channel, decoherent_action, decoherent_distribution
from chancert.protocols import (MeasurementFamily, ProtocolSpec, QuantumStrategy, bell_measurement,
                                generalized_bell_basis, ic_family, lose_from_strategy, operator_span_rank,
                                random_channel, random_measurements, random_strategy, run_protocol, sample_losr,
                                tsirelson_strategy)
from chancert.sampling import density_matrix


def loop_born(state, alice, bob):
    na, nb = alice.n_outcomes, bob.n_outcomes
    p = np.zeros((na, nb, alice.n_settings, bob.n_settings))
    for a, b, x, y in itertools.product(range(na), range(nb), range(alice.n_settings), range(bob.n_settings)):
        p[a, b, x, y] = np.trace(np.kron(alice.setting(x)[a], bob.setting(y)[b]) @ state).real
    return p


def test_strategy_distribution_matches_loops():
    s = random_strategy((2, 3), 2, 3, seed=5)
    assert np.abs(s.distribution().table - loop_born(s.state, s.alice, s.bob)).max() < 1e-14


def test_tsirelson_strategy_value():
    assert abs(bell_value(chsh(), tsirelson_strategy().distribution()) - 2 * np.sqrt(2)) < 1e-12


def test_bell_basis():
    for d in (2, 3, 4):
        vecs = np.array(generalized_bell_basis(d))
        assert np.abs(vecs.conj() @ vecs.T - np.eye(d * d)).max() < 1e-12
        assert np.abs(sum(np.outer(v, v.conj()) for v in vecs) - np.eye(d * d)).max() < 1e-10
    assert np.abs(generalized_bell_basis(2)[0] - np.array([1, 0, 0, 1]) / np.sqrt(2)).max() < 1e-15
    assert bell_measurement(3).is_projective()


def test_measurement_family_validation():
    with pytest.raises(ValueError):
        MeasurementFamily.single([np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        MeasurementFamily.single([np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])])
    fam = random_measurements(3, 2, 4, np.random.default_rng(0))
    assert fam.n_settings == 2 and fam.n_outcomes == 4 and not fam.is_projective()


def test_lose_roundtrip():
    for seed in range(10):
        s = random_strategy((2, 2), 2, 2, seed)
        ch = lose_from_strategy(s)
        assert is_cptp(ch).inside and is_qns(ch).inside
        assert np.abs(decoherent_distribution(ch).table - s.distribution().table).max() < 1e-8


def test_lose_roundtrip_larger_scenario():
    s = random_strategy((3, 2), 3, 2, seed=11)
    ch = lose_from_strategy(s)
    assert is_cptp(ch).inside
    assert np.abs(decoherent_distribution(ch).table - s.distribution().table).max() < 1e-8


def test_deterministic_strategy_gives_classical_channel():
    fa, fb = (1, 0), (0, 0)

    def fam(f):
        return MeasurementFamily(tuple(tuple(np.eye(2) * (a == f[x]) for a in range(2)) for x in range(2)))

    state = np.kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    ch = lose_from_strategy(QuantumStrategy(state, (2, 2), fam(fa), fam(fb)))
    s = np.zeros((4, 4))
    for x, y in itertools.product(range(2), repeat=2):
        s[2 * fa[x] + fb[y], 2 * x + y] = 1
    assert np.abs(ch.choi - classical_channel(s, (2, 2), (2, 2)).choi).max() < 1e-12


def test_separable_strategies_are_local():
    for seed in range(10):
        s = random_strategy((2, 2), 2, 2, seed, separable=True)
        assert is_local(decoherent_distribution(lose_from_strategy(s))).inside


def test_sample_losr():
    for seed in range(5):
        ch = sample_losr((2, 2), (2, 2), 3, seed)
        assert is_cptp(ch).inside and is_qns(ch).inside
        assert is_local(decoherent_distribution(ch)).inside
    assert np.abs(sample_losr((2, 2), (2, 2), 2, 7).choi - sample_losr((2, 2), (2, 2), 2, 7).choi).max() == 0
    with pytest.raises(ValueError):
        sample_losr((2, 2), (2, 2), 0, 0)
    ident = product_channel(identity_channel((2,)), identity_channel((2,)))
    assert np.abs(ident.choi - identity_channel((2, 2)).choi).max() == 0


def _product_spec(rng, variant="b"):
    states = [density_matrix(4, rng) for _ in range(3)]
    return ProtocolSpec(variant, states, states[:2], random_measurements(4, 1, 2, rng),
                        random_measurements(4, 1, 3, rng), (2, 2))


def test_variant_b_on_losr_is_local(rng):
    spec = _product_spec(rng)
    for seed in range(5):
        p = run_protocol(spec, sample_losr((2, 2), (2, 2), 2, seed))
        assert p.cardinalities == (2, 3, 3, 2)
        assert is_local(p).inside


def test_variant_a_equals_b_for_preparations(rng):
    spec_b = _product_spec(rng)
    prep = lambda rho: ChoiChannel(rho, (1,), (2, 2))
    spec_a = ProtocolSpec("a", [prep(r) for r in spec_b.alice_inputs], [prep(r) for r in spec_b.bob_inputs],
                          spec_b.alice_meas, spec_b.bob_meas, (2, 2), np.ones((1, 1)), (1, 1))
    ch = sample_losr((2, 2), (2, 2), 2, 3)
    assert np.abs(run_protocol(spec_a, ch).table - run_protocol(spec_b, ch).table).max() < 1e-14


def test_variant_a_with_shared_entanglement(rng):
    phi = np.zeros((4, 4))
    phi[np.ix_([0, 3], [0, 3])] = 0.5
    chans = [random_channel(2, 4, rng) for _ in range(2)]
    chans = [ChoiChannel(c.choi, (2,), (2, 2)) for c in chans]
    spec = ProtocolSpec("a", chans, chans, random_measurements(4, 2, 2, rng), random_measurements(4, 2, 2, rng),
                        (2, 2), phi, (2, 2))
    p = run_protocol(spec, sample_losr((2, 2), (2, 2), 2, 1))
    assert is_nonsignaling(p).inside
    assert npa_membership(p, 1).inside


def test_variant_c_is_decoherent_action():
    ch = sample_losr((2, 2), (2, 2), 2, 4)
    p = run_protocol(ProtocolSpec("c"), ch)
    assert np.abs(p.stochastic() - decoherent_action(ch)).max() < 1e-15


def test_protocol_errors(rng):
    with pytest.raises(ValueError):
        ProtocolSpec("z")
    with pytest.raises(ValueError):
        ProtocolSpec("b", [np.eye(4) / 4], [np.eye(4) / 4])
    spec = _product_spec(rng)
    with pytest.raises(ValueError):
        run_protocol(spec, identity_channel((3, 3)))


def test_ic_families_span():
    assert operator_span_rank(ic_family((2,))) == 4
    assert operator_span_rank(ic_family((2, 2))) == 16
    assert operator_span_rank(ic_family((3,))) == 9
    assert operator_span_rank(ic_family((3, 2))) == 36
