import numpy as np

from chancert.sdp import SdpProblem, hermitian_to_real, real_to_hermitian, solve_sdp, sym_basis_constraints


def test_smallest_eigenvalue_batch(rng):
    # min <C, X> over unit-trace PSD X is the smallest eigenvalue of C
    c = rng.standard_normal((50, 6, 6))
    c = c + c.transpose(0, 2, 1)
    res = solve_sdp(SdpProblem((np.eye(6)[None],), (c,), np.ones(1)))
    want = np.linalg.eigvalsh(c)[:, 0]
    assert np.all(res.status == "optimal")
    assert np.abs(res.primal - want).max() < 1e-6
    assert np.abs(res.dual - want).max() < 1e-6
    assert np.all(res.primal >= res.dual - 1e-9)


def test_lovasz_theta_of_pentagon():
    n = 5
    edges = [(i, (i + 1) % n) for i in range(n)]
    rows = [np.eye(n)] + [sym_basis_constraints(n, [tuple(sorted(e))])[0] for e in edges]
    b = np.zeros(len(rows))
    b[0] = 1
    res = solve_sdp(SdpProblem((np.array(rows),), (-np.ones((n, n)),), b)).squeeze()
    assert res.status == "optimal"
    assert abs(-res.primal - np.sqrt(5)) < 1e-7


def test_linear_block():
    c = np.array([3.0, -1.0, 2.0, 0.5])
    res = solve_sdp(SdpProblem((), (), np.ones(1), a_lin=np.ones((1, 4)), c_lin=c)).squeeze()
    assert abs(res.primal + 1) < 1e-7
    assert np.abs(res.x_lin - [0, 1, 0, 0]).max() < 1e-6


def test_infeasible_is_not_optimal():
    res = solve_sdp(SdpProblem((np.eye(3)[None],), (np.eye(3),), -np.ones(1)), max_iter=60).squeeze()
    assert res.status != "optimal"


def test_real_embedding_roundtrip(rng):
    h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h = h + h.conj().T
    r = hermitian_to_real(h)
    assert np.abs(real_to_hermitian(r) - h).max() < 1e-15
    assert np.abs(np.sort(np.linalg.eigvalsh(r))[::2] - np.linalg.eigvalsh(h)).max() < 1e-12
