"""Channels in Choi and Kraus form, their algebra, and structural membership checks.

Choi matrices are unnormalised, J = sum_ij |i><j| (x) E(|i><j|), so Tr J = d_in.
Bipartite channels use the subsystem order (A0, B0, A1, B1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .report import INSIDE, OUTSIDE, CertificateReport
from .tensor import ComplexMatrix, hermitian_residual, min_eig, permute_systems

PSD_TOL = 1e-9
VALID_TOL = 1e-9
STRUCT_TOL = 1e-8

MONO_LABELS = (("A0",), ("A1",))
BI_LABELS = (("A0", "B0"), ("A1", "B1"))


def _default_labels(in_dims, out_dims):
    if len(in_dims) == 1 and len(out_dims) == 1:
        return MONO_LABELS
    if len(in_dims) == 2 and len(out_dims) == 2:
        return BI_LABELS
    return (tuple(f"in{i}" for i in range(len(in_dims))),
            tuple(f"out{i}" for i in range(len(out_dims))))


@dataclass(frozen=True, eq=False)
class ChoiChannel:
    """Channel stored through its Choi matrix over (inputs..., outputs...).

    Construction checks shapes only; ``is_cptp`` reports positivity and trace preservation.
    """

    choi: np.ndarray
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]
    in_labels: tuple[str, ...] | None = None
    out_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "choi", np.asarray(self.choi, dtype=complex))
        object.__setattr__(self, "in_dims", tuple(int(d) for d in self.in_dims))
        object.__setattr__(self, "out_dims", tuple(int(d) for d in self.out_dims))
        dl_in, dl_out = _default_labels(self.in_dims, self.out_dims)
        if self.in_labels is None:
            object.__setattr__(self, "in_labels", dl_in)
        if self.out_labels is None:
            object.__setattr__(self, "out_labels", dl_out)
        object.__setattr__(self, "in_labels", tuple(self.in_labels))
        object.__setattr__(self, "out_labels", tuple(self.out_labels))
        d = self.d_in * self.d_out
        if self.choi.shape != (d, d):
            raise ValueError(f"Choi shape {self.choi.shape} does not match dims {self.in_dims}->{self.out_dims}")
        if len(self.in_labels) != len(self.in_dims) or len(self.out_labels) != len(self.out_dims):
            raise ValueError("label count does not match dims")

    @property
    def d_in(self) -> int:
        return int(np.prod(self.in_dims, dtype=int))

    @property
    def d_out(self) -> int:
        return int(np.prod(self.out_dims, dtype=int))

    @property
    def is_bipartite(self) -> bool:
        return len(self.in_dims) == 2 and len(self.out_dims) == 2

    @property
    def labels(self) -> tuple[str, ...]:
        return self.in_labels + self.out_labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.in_dims + self.out_dims

    @property
    def matrix(self) -> ComplexMatrix:
        return ComplexMatrix(self.choi, self.dims, self.labels)

    def tensor(self) -> np.ndarray:
        """Choi reshaped to J[i, k, j, l] = E(|i><j|)_{kl}."""
        return self.choi.reshape(self.d_in, self.d_out, self.d_in, self.d_out)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus: tuple[np.ndarray, ...]
    in_dims: tuple[int, ...] | None = None
    out_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ValueError("empty Kraus list")
        shape = ks[0].shape
        if any(k.shape != shape or k.ndim != 2 for k in ks):
            raise ValueError("Kraus operators must share one 2-d shape")
        object.__setattr__(self, "kraus", ks)
        if self.in_dims is None:
            object.__setattr__(self, "in_dims", (shape[1],))
        if self.out_dims is None:
            object.__setattr__(self, "out_dims", (shape[0],))
        if int(np.prod(self.in_dims)) != shape[1] or int(np.prod(self.out_dims)) != shape[0]:
            raise ValueError("Kraus shape does not match declared dims")
        s = sum(k.conj().T @ k for k in ks)
        err = np.abs(s - np.eye(shape[1])).max()
        if err > VALID_TOL:
            raise ValueError(f"Kraus operators are not trace preserving (residual {err:.3g})")


@dataclass(frozen=True, eq=False)
class SuperchannelChoi:
    """Choi matrix over (A0, B0, A1, B1) of a map sending channels A1->B0 to channels A0->B1.

    Validity: positivity, J_{A0B0} = 1, and the B1-traced Choi factorising as J_{A0A1} (x) 1_{B0}/d_{B0}.
    """

    choi: np.ndarray
    dims: tuple[int, int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "choi", np.asarray(self.choi, dtype=complex))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) != 4:
            raise ValueError("superchannel Choi needs four subsystems (A0, B0, A1, B1)")
        d = int(np.prod(self.dims))
        if self.choi.shape != (d, d):
            raise ValueError("superchannel Choi shape mismatch")


def choi_from_kraus(k: KrausChannel | Sequence[np.ndarray], in_dims=None, out_dims=None) -> ChoiChannel:
    if not isinstance(k, KrausChannel):
        k = KrausChannel(tuple(k), in_dims, out_dims)
    d_out, d_in = k.kraus[0].shape
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for op in k.kraus:
        v = op.T.reshape(-1)
        j += np.outer(v, v.conj())
    return ChoiChannel(j, k.in_dims, k.out_dims)


def choi_from_unitary(u: np.ndarray, dims: Sequence[int] | None = None) -> ChoiChannel:
    u = np.asarray(u, dtype=complex)
    dims = tuple(dims) if dims is not None else (u.shape[0],)
    return choi_from_kraus(KrausChannel((u,), dims, dims))


def identity_channel(dims: Sequence[int]) -> ChoiChannel:
    return choi_from_unitary(np.eye(int(np.prod(dims))), dims)


def kraus_from_choi(ch: ChoiChannel, tol: float = 1e-12) -> list[np.ndarray]:
    w, v = np.linalg.eigh((ch.choi + ch.choi.conj().T) / 2)
    out = []
    for lam, vec in zip(w, v.T):
        if lam > tol:
            out.append((np.sqrt(lam) * vec).reshape(ch.d_in, ch.d_out).T)
    return out


def apply(ch: ChoiChannel, rho) -> np.ndarray:
    """E(rho)_{kl} = sum_ij rho_ij J[i,k,j,l]."""
    r = rho.data if isinstance(rho, ComplexMatrix) else np.asarray(rho)
    if r.shape != (ch.d_in, ch.d_in):
        raise ValueError(f"state shape {r.shape} does not match channel input dimension {ch.d_in}")
    return np.einsum("ij,ikjl->kl", r, ch.tensor())


def apply_kraus(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def compose(after: ChoiChannel, before: ChoiChannel) -> ChoiChannel:
    """Choi of ``after`` applied to the output of ``before``."""
    if before.d_out != after.d_in:
        raise ValueError(f"cannot chain output dimension {before.d_out} into input {after.d_in}")
    jc = np.einsum("imjn,mknl->ikjl", before.tensor(), after.tensor())
    d = before.d_in * after.d_out
    return ChoiChannel(jc.reshape(d, d), before.in_dims, after.out_dims,
                       before.in_labels, after.out_labels)


def adjoint(ch: ChoiChannel) -> ChoiChannel:
    """Heisenberg-picture map, fixed by Tr(E[X] Y) = Tr(X E^dag[Y])."""
    k = ch.tensor().transpose(3, 2, 1, 0)
    d = ch.d_in * ch.d_out
    return ChoiChannel(k.reshape(d, d), ch.out_dims, ch.in_dims, ch.out_labels, ch.in_labels)


def tensor_channels(first: ChoiChannel, second: ChoiChannel) -> ChoiChannel:
    """Product channel with inputs (first.in, second.in) and outputs (first.out, second.out)."""
    j = np.kron(first.choi, second.choi)
    n1i, n1o, n2i = len(first.in_dims), len(first.out_dims), len(second.in_dims)
    n2o = len(second.out_dims)
    dims = first.in_dims + first.out_dims + second.in_dims + second.out_dims
    a_in = list(range(n1i))
    a_out = list(range(n1i, n1i + n1o))
    b_in = list(range(n1i + n1o, n1i + n1o + n2i))
    b_out = list(range(n1i + n1o + n2i, n1i + n1o + n2i + n2o))
    j = permute_systems(j, a_in + b_in + a_out + b_out, dims)
    in_labels = out_labels = None
    if first.is_bipartite or second.is_bipartite or n1i + n2i != 2:
        in_labels = tuple(f"in{i}" for i in range(n1i + n2i))
        out_labels = tuple(f"out{i}" for i in range(n1o + n2o))
    return ChoiChannel(j, first.in_dims + second.in_dims, first.out_dims + second.out_dims,
                       in_labels, out_labels)


def product_channel(ch_a: ChoiChannel, ch_b: ChoiChannel) -> ChoiChannel:
    """E_A (x) E_B as a bipartite channel over (A0, B0, A1, B1)."""
    if len(ch_a.in_dims) != 1 or len(ch_b.in_dims) != 1:
        raise ValueError("product_channel expects two monopartite channels")
    ch = tensor_channels(ch_a, ch_b)
    return ChoiChannel(ch.choi, ch.in_dims, ch.out_dims)


def mix_channels(weights: Sequence[float], chans: Sequence[ChoiChannel]) -> ChoiChannel:
    j = sum(w * c.choi for w, c in zip(weights, chans))
    c0 = chans[0]
    return ChoiChannel(j, c0.in_dims, c0.out_dims, c0.in_labels, c0.out_labels)


def _bi4(ch) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    if isinstance(ch, SuperchannelChoi):
        return ch.choi, ch.dims
    if not ch.is_bipartite:
        raise ValueError("bipartite channel (A0, B0, A1, B1) required")
    return ch.choi, ch.in_dims + ch.out_dims


def bipartite_marginals(choi: np.ndarray, dims) -> dict[str, np.ndarray]:
    """Reduced Choi matrices needed by the nonsignalling and superchannel checks."""
    da0, db0, da1, db1 = dims
    t = choi.reshape(da0, db0, da1, db1, da0, db0, da1, db1)
    return {
        "A0B0B1": np.einsum("abcdefcg->abdefg", t).reshape(da0 * db0 * db1, -1),
        "B0B1": np.einsum("abcdafcg->bdfg", t).reshape(db0 * db1, -1),
        "A0B0A1": np.einsum("abcdefgd->abcefg", t).reshape(da0 * db0 * da1, -1),
        "A0A1": np.einsum("abcdebgd->aceg", t).reshape(da0 * da1, -1),
        "A0B0": np.einsum("abcdefcd->abef", t).reshape(da0 * db0, -1),
    }


def _b_free_residual(m, dims) -> float:
    """|| J_{A0B0A1} - (J_{A0A1} (x) 1_{B0}/d_{B0}) reordered to (A0,B0,A1) ||_max."""
    da0, db0, da1, _ = dims
    rhs = np.einsum("acdf,be->abcdef", m["A0A1"].reshape(da0, da1, da0, da1), np.eye(db0) / db0)
    return float(np.abs(m["A0B0A1"] - rhs.reshape(m["A0B0A1"].shape)).max())


def is_cptp(ch: ChoiChannel, tol: float = PSD_TOL) -> CertificateReport:
    herm = hermitian_residual(ch.choi)
    lam = min_eig(ch.choi)
    tp = np.einsum("ikjk->ij", ch.tensor())
    tp_err = float(np.abs(tp - np.eye(ch.d_in)).max())
    ok = herm <= tol and lam >= -tol and tp_err <= tol
    return CertificateReport(
        "CPTP", INSIDE if ok else OUTSIDE,
        residuals={"min_eigenvalue": lam, "trace_preservation": tp_err, "hermiticity": herm},
        tolerances={"psd": -tol, "trace_preservation": tol},
    )


def is_qns(ch: ChoiChannel, tol: float = STRUCT_TOL) -> CertificateReport:
    choi, dims = _bi4(ch)
    da0, db0, _, db1 = dims
    m = bipartite_marginals(choi, dims)
    rhs = np.kron(np.eye(da0) / da0, m["B0B1"])
    r_a = float(np.abs(m["A0B0B1"] - rhs).max())
    r_b = _b_free_residual(m, dims)
    ok = r_a <= tol and r_b <= tol
    return CertificateReport(
        "QNS", INSIDE if ok else OUTSIDE,
        residuals={"alice_to_bob": r_a, "bob_to_alice": r_b},
        tolerances={"max_norm": tol},
        details={"note": "alice_to_bob compares the A1-traced Choi with 1/d_A0 (x) J_B0B1"},
    )


def is_superchannel(j, tol: float = STRUCT_TOL) -> CertificateReport:
    choi, dims = _bi4(j)
    da0, db0, _, _ = dims
    m = bipartite_marginals(choi, dims)
    lam = min_eig(choi)
    r_norm = float(np.abs(m["A0B0"] - np.eye(da0 * db0)).max())
    r_causal = _b_free_residual(m, dims)
    ok = lam >= -tol and r_norm <= tol and r_causal <= tol
    return CertificateReport(
        "superchannel", INSIDE if ok else OUTSIDE,
        residuals={"min_eigenvalue": lam, "input_marginal": r_norm, "causal_order": r_causal},
        tolerances={"psd": -tol, "max_norm": tol},
    )
