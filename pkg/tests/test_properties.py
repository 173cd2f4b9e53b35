import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from chancert import fileio
from chancert.bounds import NPA_SLACK, negativity, negativity_grid, noisy_plus_states, npa_margins
from chancert.channels import ChoiChannel, choi_from_kraus, is_cptp, is_qns
from chancert.correlations import bell_value, chsh, is_local, vertex_matrix
from chancert.dephasing import (decoherent_action, decoherent_action_kraus, decoherent_distribution,
                                dephase_channel_memoryless, dephase_state)
from chancert.protocols import generalized_bell_basis, lose_from_strategy, random_strategy, sample_losr
from chancert.regions import tables_for
from chancert.sampling import choi_matrix, density_matrix, gram_matrix, kraus_operators
from chancert.tensor import partial_trace, partial_transpose

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)
fast = settings(max_examples=25, deadline=None)


@fast
@given(seeds, dims, dims)
def test_partial_trace_keeps_trace(seed, da, db):
    rho = density_matrix(da * db, np.random.default_rng(seed))
    a = partial_trace(rho, [0], (da, db))
    assert abs(np.trace(a) - 1) < 1e-12
    assert np.abs(partial_transpose(partial_transpose(rho, [1], (da, db)), [1], (da, db)) - rho).max() == 0


@fast
@given(seeds, dims, dims)
def test_random_channels_are_cptp_with_stochastic_action(seed, din, dout):
    rng = np.random.default_rng(seed)
    ks = kraus_operators(din, dout, rng, num=3 if dout * 3 >= din else din)
    ch = choi_from_kraus(ks)
    assert is_cptp(ch).inside
    s = decoherent_action(ch)
    assert s.min() >= -1e-15 and np.abs(s.sum(axis=0) - 1).max() < 1e-12
    assert np.abs(s - decoherent_action_kraus(ks)).max() < 1e-10


@fast
@given(seeds)
def test_gram_dephasing_keeps_states_and_channels(seed):
    rng = np.random.default_rng(seed)
    rho = density_matrix(4, rng)
    out = dephase_state(rho, gram_matrix(4, rng))
    assert np.linalg.eigvalsh(out)[0] > -1e-12 and abs(np.trace(out) - 1) < 1e-12
    ch = ChoiChannel(choi_matrix(2, 2, rng), (2,), (2,))
    assert is_cptp(dephase_channel_memoryless(ch, gram_matrix(2, rng), gram_matrix(2, rng))).inside


@fast
@given(seeds, st.integers(1, 4))
def test_losr_samples_are_qns_and_local(seed, terms):
    ch = sample_losr((2, 2), (2, 2), terms, seed)
    assert is_qns(ch).inside
    assert is_local(decoherent_distribution(ch)).inside


@fast
@given(seeds)
def test_vertex_mixtures_are_local(seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(16) * 0.3)
    p = (w[:, None] * vertex_matrix(2, 2, 2, 2)).sum(axis=0).reshape(2, 2, 2, 2)
    assert is_local(p).inside
    assert abs(bell_value(chsh(), p)) <= 2 + 1e-12


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_lose_roundtrip_property(seed):
    s = random_strategy((2, 2), 2, 2, seed)
    assert np.abs(decoherent_distribution(lose_from_strategy(s)).table - s.distribution().table).max() < 1e-8


@fast
@given(st.floats(0, 1), st.floats(0, 1))
def test_negativity_range(p, q):
    n = negativity(noisy_plus_states(p, q))
    assert -1e-15 <= n <= 0.5 + 1e-12


def test_negativity_non_increasing_in_q():
    _, _, neg = negativity_grid(41)
    assert np.diff(neg, axis=1).max() <= 1e-12


@fast
@given(st.floats(0, 1), st.floats(0, 1))
def test_nesting_on_random_points(s, t):
    if s + t > 1:
        t = 1 - s
    tab = tables_for(np.array([s]), np.array([t]))
    loc = is_local(tab[0]).inside
    m2, st2, _ = npa_margins(tab, 2)
    m1, st1, _ = npa_margins(tab, 1)
    assert st1[0] == "optimal" and st2[0] == "optimal"
    in2, in1 = m2[0] >= -NPA_SLACK, m1[0] >= -NPA_SLACK
    assert (not loc or in2) and (not in2 or in1)


@fast
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=4, max_size=4),
       st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=4, max_size=4))
def test_matrix_file_roundtrip(re, im):
    m = (np.array(re) + 1j * np.array(im)).reshape(2, 2)
    f = fileio.MatrixFile("state", m, {"state": [2]})
    back = fileio.MatrixFile.from_json(json.loads(f.dumps())).entries
    assert np.array_equal(back.view(float), m.view(float))


@fast
@given(st.integers(2, 5))
def test_bell_basis_resolves_identity(d):
    vecs = generalized_bell_basis(d)
    assert np.abs(sum(np.outer(v, v.conj()) for v in vecs) - np.eye(d * d)).max() < 1e-10
