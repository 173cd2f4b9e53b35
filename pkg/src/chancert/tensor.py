"""Labelled complex matrices and the multipartite tensor operations used everywhere else.

Composite indices are row-major: the leftmost subsystem is the most significant digit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
EIG_HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class SubsystemIndex:
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate subsystem labels {self.labels}")
        if any(int(d) < 1 for d in self.dims):
            raise ValueError(f"subsystem dimensions must be >= 1, got {self.dims}")

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=int))

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem label {label!r}") from None

    def positions(self, which: Sequence[str | int]) -> list[int]:
        out = []
        for w in which:
            out.append(w if isinstance(w, (int, np.integer)) else self.position(w))
        return [int(i) for i in out]


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """Square (or rectangular) complex matrix carrying its tensor structure.

    ``dims`` describes the row space; ``col_dims`` defaults to ``dims``.
    """

    data: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None
    col_dims: tuple[int, ...] | None = None
    hermitian: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.col_dims is not None:
            object.__setattr__(self, "col_dims", tuple(int(d) for d in self.col_dims))
        if data.ndim != 2:
            raise ValueError("ComplexMatrix data must be 2-dimensional")
        rows = int(np.prod(self.dims, dtype=int))
        cols = int(np.prod(self.cdims, dtype=int))
        if data.shape != (rows, cols):
            raise ValueError(f"shape {data.shape} does not match dims {self.dims} x {self.cdims}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            SubsystemIndex(self.labels, self.dims)
        if self.hermitian:
            err = hermitian_residual(data)
            if err > HERMITIAN_TOL:
                raise ValueError(f"matrix flagged Hermitian has residual {err:.3g}")

    @property
    def cdims(self) -> tuple[int, ...]:
        return self.dims if self.col_dims is None else self.col_dims

    @property
    def index(self) -> SubsystemIndex:
        labels = self.labels if self.labels is not None else tuple(str(i) for i in range(len(self.dims)))
        return SubsystemIndex(labels, self.dims)

    def positions(self, which: Sequence[str | int]) -> list[int]:
        return self.index.positions(which)


def hermitian_residual(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        return float("inf")
    return float(np.abs(a - a.conj().T).max(initial=0.0))


def _unwrap(m, dims):
    if isinstance(m, ComplexMatrix):
        return m.data, m.dims, m
    a = np.asarray(m)
    if dims is None:
        dims = (a.shape[0],)
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims)) != a.shape[0] or a.shape[0] != a.shape[1]:
        raise ValueError(f"dims {dims} incompatible with matrix shape {a.shape}")
    return a, dims, None


def kron(*ms) -> ComplexMatrix | np.ndarray:
    """Kronecker product; labels and dims are concatenated when all factors carry them."""
    if not ms:
        raise ValueError("kron needs at least one factor")
    out = np.ones((1, 1), dtype=complex)
    for m in ms:
        out = np.kron(out, m.data if isinstance(m, ComplexMatrix) else np.asarray(m))
    if all(isinstance(m, ComplexMatrix) for m in ms):
        dims = sum((m.dims for m in ms), ())
        cdims = sum((m.cdims for m in ms), ())
        labels = None
        if all(m.labels is not None for m in ms):
            labels = sum((m.labels for m in ms), ())
        return ComplexMatrix(out, dims, labels, None if cdims == dims else cdims,
                             all(m.hermitian for m in ms))
    return out


def partial_trace(m, keep: Sequence[str | int], dims: Sequence[int] | None = None):
    """Trace out every subsystem not listed in ``keep``; kept order follows the input order."""
    a, dims, cm = _unwrap(m, dims)
    pos = cm.positions(keep) if cm is not None else [int(k) for k in keep]
    n = len(dims)
    if len(set(pos)) != len(pos) or any(p < 0 or p >= n for p in pos):
        raise ValueError(f"invalid subsystems to keep: {keep}")
    pos = sorted(pos)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise ValueError("too many subsystems")
    row = list(letters[:n])
    col = [letters[n + i] if i in pos else row[i] for i in range(n)]
    out_sub = "".join(row[i] for i in pos) + "".join(col[i] for i in pos)
    t = a.reshape(dims + dims)
    r = np.einsum("".join(row) + "".join(col) + "->" + out_sub, t)
    kd = tuple(dims[i] for i in pos)
    d = int(np.prod(kd, dtype=int))
    r = r.reshape(d, d)
    if cm is not None:
        labels = None if cm.labels is None else tuple(cm.labels[i] for i in pos)
        return ComplexMatrix(r, kd, labels)
    return r


def partial_transpose(m, which: Sequence[str | int], dims: Sequence[int] | None = None):
    """Transpose the listed subsystems only."""
    a, dims, cm = _unwrap(m, dims)
    pos = cm.positions(which) if cm is not None else [int(k) for k in which]
    n = len(dims)
    axes = list(range(2 * n))
    for p in pos:
        axes[p], axes[n + p] = axes[n + p], axes[p]
    r = a.reshape(dims + dims).transpose(axes).reshape(a.shape)
    if cm is not None:
        return ComplexMatrix(r, cm.dims, cm.labels, hermitian=cm.hermitian)
    return r


def permute_systems(m, perm: Sequence[str | int], dims: Sequence[int] | None = None):
    """Reorder subsystems so that new position i holds old subsystem ``perm[i]``."""
    a, dims, cm = _unwrap(m, dims)
    pos = cm.positions(perm) if cm is not None else [int(k) for k in perm]
    n = len(dims)
    if sorted(pos) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} subsystems")
    r = a.reshape(dims + dims).transpose(pos + [n + p for p in pos]).reshape(a.shape)
    nd = tuple(dims[p] for p in pos)
    if cm is not None:
        labels = None if cm.labels is None else tuple(cm.labels[p] for p in pos)
        return ComplexMatrix(r, nd, labels, hermitian=cm.hermitian)
    return r


def schur(m1, m2):
    """Entrywise product; both operands must share shape (and labels when present)."""
    a = m1.data if isinstance(m1, ComplexMatrix) else np.asarray(m1)
    b = m2.data if isinstance(m2, ComplexMatrix) else np.asarray(m2)
    if a.shape != b.shape:
        raise ValueError(f"Schur product shape mismatch {a.shape} vs {b.shape}")
    if isinstance(m1, ComplexMatrix) and isinstance(m2, ComplexMatrix):
        if m1.dims != m2.dims:
            raise ValueError("Schur product subsystem dims mismatch")
        if m1.labels is not None and m2.labels is not None and m1.labels != m2.labels:
            raise ValueError(f"Schur product label mismatch {m1.labels} vs {m2.labels}")
    out = a * b
    if isinstance(m1, ComplexMatrix):
        return ComplexMatrix(out, m1.dims, m1.labels, m1.col_dims)
    return out


def herm_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors of a Hermitian matrix."""
    a = m.data if isinstance(m, ComplexMatrix) else np.asarray(m)
    err = hermitian_residual(a)
    if err > EIG_HERMITIAN_TOL * max(1.0, np.abs(a).max(initial=0.0)):
        raise ValueError(f"matrix is not Hermitian (residual {err:.3g})")
    a = (a + a.conj().T) / 2
    return np.linalg.eigh(a)


def min_eig(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0])


def unitary_completion(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Extend an isometry (orthonormal columns) to a unitary.

    The new columns come from Gram-Schmidt over the canonical basis, always taking the
    vector with the largest residual and breaking ties by the smallest index, so the
    result is deterministic.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    d, k = v.shape
    if k > d:
        raise ValueError("more columns than rows")
    if np.abs(v.conj().T @ v - np.eye(k)).max(initial=0.0) > tol:
        raise ValueError("input columns are not orthonormal")
    cols = [v[:, j] for j in range(k)]
    q = v.copy()
    while len(cols) < d:
        basis = np.eye(d, dtype=complex)
        resid = basis - q @ (q.conj().T @ basis)
        norms = np.linalg.norm(resid, axis=0)
        best = norms.max()
        j = int(np.flatnonzero(norms >= best - 1e-12)[0])
        w = resid[:, j]
        # one extra pass keeps orthogonality at machine precision
        w = w - q @ (q.conj().T @ w)
        w = w / np.linalg.norm(w)
        cols.append(w)
        q = np.column_stack(cols)
    return q


def ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1
    return v


def proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())
