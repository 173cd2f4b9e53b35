import numpy as np
import pytest

from chancert.sampling import density_matrix, haar_unitary
from chancert.tensor import (ComplexMatrix, SubsystemIndex, kron, min_eig, partial_trace, partial_transpose,
                             permute_systems, schur, unitary_completion)


def loop_partial_trace_second(m, da, db):
    out = np.zeros((da, da), dtype=complex)
    for i in range(da):
        for j in range(da):
            for k in range(db):
                out[i, j] += m[i * db + k, j * db + k]
    return out


def test_partial_trace_matches_loops(rng):
    rho = density_matrix(6, rng)
    a = partial_trace(rho, [0], (2, 3))
    assert np.abs(a - loop_partial_trace_second(rho, 2, 3)).max() < 1e-14


def test_partial_trace_of_product(rng):
    r1, r2, r3 = density_matrix(2, rng), density_matrix(3, rng), density_matrix(2, rng)
    big = np.kron(np.kron(r1, r2), r3)
    assert np.abs(partial_trace(big, [0, 2], (2, 3, 2)) - np.kron(r1, r3)).max() < 1e-14
    assert np.abs(partial_trace(big, [1], (2, 3, 2)) - r2).max() < 1e-14


def test_labels_are_followed(rng):
    r1, r2 = density_matrix(2, rng), density_matrix(3, rng)
    m = ComplexMatrix(np.kron(r1, r2), (2, 3), ("A", "B"))
    out = partial_trace(m, ["B"])
    assert out.labels == ("B",)
    assert np.abs(out.data - r2).max() < 1e-14


def test_partial_transpose_entries(rng):
    rho = density_matrix(4, rng)
    pt = partial_transpose(rho, [1], (2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    assert pt[2 * i + k, 2 * j + l] == rho[2 * i + l, 2 * j + k]


def test_full_transpose_is_transpose(rng):
    rho = density_matrix(6, rng)
    assert np.abs(partial_transpose(rho, [0, 1], (2, 3)) - rho.T).max() == 0


def test_permute_systems_is_swap(rng):
    a, b = density_matrix(2, rng), density_matrix(3, rng)
    out = permute_systems(np.kron(a, b), [1, 0], (2, 3))
    assert np.abs(out - np.kron(b, a)).max() < 1e-15


def test_kron_carries_labels():
    m = kron(ComplexMatrix(np.eye(2), (2,), ("A",)), ComplexMatrix(np.eye(3), (3,), ("B",)))
    assert m.labels == ("A", "B") and m.dims == (2, 3)


def test_bad_inputs():
    with pytest.raises(ValueError):
        SubsystemIndex(("A", "A"), (2, 2))
    with pytest.raises(ValueError):
        partial_trace(np.eye(4), [0], (2, 3))
    with pytest.raises(ValueError):
        permute_systems(np.eye(4), [0, 0], (2, 2))
    with pytest.raises(ValueError):
        schur(np.eye(2), np.eye(3))


def test_unitary_completion(rng):
    u = haar_unitary(5, rng)
    v = u[:, :2]
    w = unitary_completion(v)
    assert np.abs(w.conj().T @ w - np.eye(5)).max() < 1e-12
    assert np.abs(w[:, :2] - v).max() == 0
    assert np.abs(unitary_completion(v) - w).max() == 0


def test_min_eig(rng):
    rho = density_matrix(4, rng)
    assert abs(min_eig(rho) - np.linalg.eigvalsh(rho)[0]) < 1e-14
