"""Seeded random objects. Every sampler takes a ``numpy.random.Generator`` or an int seed."""
from __future__ import annotations

import numpy as np


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(shape, rng) -> np.ndarray:
    rng = as_rng(rng)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def haar_unitary(d: int, rng) -> np.ndarray:
    z = ginibre((d, d), rng)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def pure_state(d: int, rng) -> np.ndarray:
    v = ginibre(d, rng)
    return v / np.linalg.norm(v)


def density_matrix(d: int, rng, rank: int | None = None) -> np.ndarray:
    g = ginibre((d, rank or d), rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def kraus_operators(d_in: int, d_out: int, rng, num: int | None = None) -> list[np.ndarray]:
    """Kraus operators of a random CPTP map, cut from a Haar isometry."""
    num = num or d_in * d_out
    big = d_out * num
    if big < d_in:
        raise ValueError("environment too small for an isometry")
    iso = haar_unitary(big, rng)[:, :d_in]
    return [iso[k * d_out:(k + 1) * d_out] for k in range(num)]


def choi_matrix(d_in: int, d_out: int, rng) -> np.ndarray:
    """Full-rank random Choi matrix normalised to be trace preserving.

    A positive matrix is drawn and conjugated by the inverse square root of its input marginal.
    """
    d = d_in * d_out
    g = ginibre((d, d), rng)
    sigma = g @ g.conj().T
    marg = np.einsum("ikjk->ij", sigma.reshape(d_in, d_out, d_in, d_out))
    w, v = np.linalg.eigh(marg)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    y = np.kron(inv_sqrt, np.eye(d_out))
    j = y @ sigma @ y
    return (j + j.conj().T) / 2


def gram_matrix(d: int, rng, real: bool = False) -> np.ndarray:
    """Gram matrix of ``d`` random unit vectors (unit diagonal, positive semidefinite)."""
    rng = as_rng(rng)
    v = rng.standard_normal((d, d)) if real else ginibre((d, d), rng)
    v = v / np.linalg.norm(v, axis=0)
    g = v.conj().T @ v
    np.fill_diagonal(g, 1.0)
    return g


def projective_measurement(d: int, n_out: int, rng) -> list[np.ndarray]:
    """Rank-one columns of a Haar unitary dealt round-robin onto ``n_out`` outcomes."""
    u = haar_unitary(d, rng)
    effects = [np.zeros((d, d), dtype=complex) for _ in range(n_out)]
    for j in range(d):
        effects[j % n_out] += np.outer(u[:, j], u[:, j].conj())
    return effects
