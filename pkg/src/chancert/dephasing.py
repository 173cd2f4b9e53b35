"""Dephasing through Schur products with Gram matrices, damping noise, and decoherent actions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import ChoiChannel, KrausChannel
from .correlations import ConditionalDistribution
from .tensor import ComplexMatrix, min_eig

GRAM_PSD_TOL = 1e-9
GRAM_DIAG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GramMatrix:
    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g.data if isinstance(self.g, ComplexMatrix) else self.g, dtype=complex)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("Gram matrix must be square")
        diag_err = np.abs(np.diag(g) - 1).max()
        if diag_err > GRAM_DIAG_TOL:
            raise ValueError(f"Gram diagonal deviates from 1 by {diag_err:.3g}")
        if np.abs(g - g.conj().T).max() > GRAM_DIAG_TOL:
            raise ValueError("Gram matrix is not Hermitian")
        lam = min_eig(g)
        if lam < -GRAM_PSD_TOL:
            raise ValueError(f"Gram matrix is not positive semidefinite (min eigenvalue {lam:.3g})")
        object.__setattr__(self, "g", g)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @classmethod
    def ones(cls, d: int) -> "GramMatrix":
        return cls(np.ones((d, d)))

    @classmethod
    def identity(cls, d: int) -> "GramMatrix":
        return cls(np.eye(d))


@dataclass(frozen=True)
class NoiseParams:
    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")


def _gram(g) -> np.ndarray:
    return g.g if isinstance(g, GramMatrix) else GramMatrix(g).g


def dephase_state(rho, g) -> np.ndarray:
    r = rho.data if isinstance(rho, ComplexMatrix) else np.asarray(rho, dtype=complex)
    gm = _gram(g)
    if gm.shape != r.shape:
        raise ValueError(f"Gram shape {gm.shape} does not match state shape {r.shape}")
    return r * gm


def dephase_channel_memoryless(ch: ChoiChannel, g_in, g_out) -> ChoiChannel:
    """Pre- and post-processing by dephasing channels: J -> J * (G_in (x) G_out)."""
    gi, go = _gram(g_in), _gram(g_out)
    if gi.shape[0] != ch.d_in or go.shape[0] != ch.d_out:
        raise ValueError("Gram dimensions do not match the channel")
    return ChoiChannel(ch.choi * np.kron(gi, go), ch.in_dims, ch.out_dims, ch.in_labels, ch.out_labels)


def dephase_local(ch: ChoiChannel, grams: Sequence) -> ChoiChannel:
    """Independent dephasing of every subsystem; ``grams`` follow the channel's label order."""
    dims = ch.in_dims + ch.out_dims
    if len(grams) != len(dims):
        raise ValueError(f"expected {len(dims)} Gram matrices, got {len(grams)}")
    full = np.ones((1, 1), dtype=complex)
    for g, d in zip(grams, dims):
        gm = _gram(g)
        if gm.shape[0] != d:
            raise ValueError(f"Gram of size {gm.shape[0]} for a subsystem of dimension {d}")
        full = np.kron(full, gm)
    return ChoiChannel(ch.choi * full, ch.in_dims, ch.out_dims, ch.in_labels, ch.out_labels)


def dephase_superchannel(ch: ChoiChannel, g: np.ndarray) -> np.ndarray:
    """Schur product of the Choi matrix with an arbitrary (unchecked) matrix of its size.

    Returns the raw matrix so callers can inspect the result even when ``g`` is not a Gram matrix.
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != ch.choi.shape:
        raise ValueError("matrix must match the Choi shape")
    return ch.choi * g


def noise_dq(rho, q: float) -> np.ndarray:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q = {q} outside [0, 1]")
    r = np.asarray(rho.data if isinstance(rho, ComplexMatrix) else rho, dtype=complex)
    return (1 - q) * r + q * np.diag(np.diag(r))


def noise_dp(rho, p: float, level: int = 3) -> np.ndarray:
    """Damp the coherences between flat level ``level`` and every other level by (1 - 2p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p = {p} outside [0, 1]")
    r = np.array(rho.data if isinstance(rho, ComplexMatrix) else rho, dtype=complex)
    if r.shape != (4, 4):
        raise ValueError("noise_dp acts on 4x4 states")
    f = 1 - 2 * p
    mask = np.ones(4, dtype=bool)
    mask[level] = False
    r[level, mask] *= f
    r[mask, level] *= f
    return r


def decoherent_action(ch: ChoiChannel) -> np.ndarray:
    """S[out, in] = <out| E(|in><in|) |out>, read off the Choi diagonal."""
    d = np.real(np.diag(ch.choi)).reshape(ch.d_in, ch.d_out)
    return d.T.copy()


def decoherent_action_kraus(kraus) -> np.ndarray:
    ks = kraus.kraus if isinstance(kraus, KrausChannel) else kraus
    return np.real(sum(k * k.conj() for k in ks))


def decoherent_distribution(ch: ChoiChannel) -> ConditionalDistribution:
    """Decoherent action of a bipartite channel as p(a, b | x, y)."""
    if not ch.is_bipartite:
        raise ValueError("bipartite channel required")
    nx, ny = ch.in_dims
    na, nb = ch.out_dims
    return ConditionalDistribution.from_stochastic(decoherent_action(ch), na, nb, nx, ny)


def decohere(ch: ChoiChannel) -> ChoiChannel:
    """Complete dephasing of inputs and outputs; the Choi matrix becomes its own diagonal."""
    return ChoiChannel(np.diag(np.diag(ch.choi)), ch.in_dims, ch.out_dims, ch.in_labels, ch.out_labels)


def classical_channel(s: np.ndarray, in_dims, out_dims) -> ChoiChannel:
    """Embed a stochastic matrix as a channel with diagonal Choi matrix."""
    s = np.asarray(s, dtype=float)
    in_dims, out_dims = tuple(in_dims), tuple(out_dims)
    if s.shape != (int(np.prod(out_dims)), int(np.prod(in_dims))):
        raise ValueError("stochastic matrix shape does not match dims")
    return ChoiChannel(np.diag(s.T.reshape(-1)).astype(complex), in_dims, out_dims)


def noisy_plus_state(p: float, q: float) -> np.ndarray:
    """|++><++| after uniform damping q followed by fourth-level damping p."""
    plus = np.full((4, 4), 0.25, dtype=complex)
    return noise_dp(noise_dq(plus, q), p)


def noisy_plus_state_closed_form(p: float, q: float) -> np.ndarray:
    x = (1 - q) * (1 - 2 * p)
    c = 1 - q
    return 0.25 * np.array([[1, c, c, x], [c, 1, c, x], [c, c, 1, x], [x, x, x, 1]], dtype=complex)
