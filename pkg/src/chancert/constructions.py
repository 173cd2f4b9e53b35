"""Named states, unitaries, Gram matrices and boxes used in examples and checks."""
from __future__ import annotations

import itertools

import numpy as np

from .channels import ChoiChannel, choi_from_unitary, is_superchannel
from .correlations import ConditionalDistribution, anti_pr_box, identity_box, pr_box
from .tensor import min_eig

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
CNOT = np.eye(4, dtype=complex)[[0, 1, 3, 2]]

PLUS_PLUS = np.full((4, 4), 0.25, dtype=complex)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
# (|0+> + |1->)/sqrt(2)
PSI_ENTANGLED = np.array([1, 1, 1, -1], dtype=complex) / 2


def entangling_gram() -> np.ndarray:
    """4|psi><psi| for the state above: a rank-one Gram matrix that entangles |++>."""
    return 4 * np.outer(PSI_ENTANGLED, PSI_ENTANGLED.conj())


def chsh_observable() -> np.ndarray:
    """Z (x) (s+ + s-) + X (x) (s+ - s-), with s+- = (X +- Z)/sqrt(2)."""
    sp = (X + Z) / np.sqrt(2)
    sm = (X - Z) / np.sqrt(2)
    return np.kron(Z, sp + sm) + np.kron(X, sp - sm)


def bell_basis_unitary(factor_order: str = "row-major") -> np.ndarray:
    """Unitary sending |i xor j, j> to (X^i Z^j (x) 1)|Phi+>.

    ``factor_order="reversed"`` builds the same recipe with the two tensor factors swapped
    (Pauli on the second qubit, key |j, i xor j>), i.e. SWAP U SWAP.
    """
    u = np.zeros((4, 4), dtype=complex)
    for i, j in itertools.product(range(2), repeat=2):
        pauli = np.linalg.matrix_power(X, i) @ np.linalg.matrix_power(Z, j)
        col = 2 * (i ^ j) + j
        u[:, col] = np.kron(pauli, I2) @ PHI_PLUS
    if factor_order == "row-major":
        return u
    if factor_order == "reversed":
        return SWAP @ u @ SWAP
    raise ValueError(f"unknown factor order {factor_order!r}")


def hadamard_dressed(u: np.ndarray) -> np.ndarray:
    """(H (x) H) U (1 (x) H)."""
    return np.kron(HADAMARD, HADAMARD) @ u @ np.kron(I2, HADAMARD)


def target_permutation() -> np.ndarray:
    """|0><0| + |1><3| + |2><2| + |3><1|."""
    s = np.zeros((4, 4))
    s[0, 0] = s[1, 3] = s[2, 2] = s[3, 1] = 1
    return s


def swap_bit_order(s: np.ndarray) -> np.ndarray:
    """Re-read a two-bit stochastic matrix with the least significant bit first."""
    return SWAP.real @ s @ SWAP.real


def controlled_phase_unitary() -> np.ndarray:
    """sum_j |j><j| (x) X (iZ)^j."""
    return np.kron(np.diag([1, 0]), X) + np.kron(np.diag([0, 1]), X @ (1j * Z))


def local_flip_unitary() -> np.ndarray:
    """1 (x) X."""
    return np.kron(I2, X)


def bipartite_unitary_channel(u: np.ndarray) -> ChoiChannel:
    return choi_from_unitary(u, (2, 2))


def listed_phase_gram(index_base: int = 1) -> np.ndarray:
    """The 16x16 matrix with unit diagonal and the listed off-diagonal phases.

    ``index_base`` says whether the listed coefficient indices count from 0 or from 1.
    Entries are completed by Hermitian symmetry. The result is not checked for positivity.
    """
    if index_base not in (0, 1):
        raise ValueError("index_base must be 0 or 1")
    g = np.eye(16, dtype=complex)
    entries = {(12, 15): 1, (2, 5): -1, (2, 12): 1j, (5, 12): 1j, (2, 15): -1j, (5, 15): 1j}
    for (i, j), v in entries.items():
        i, j = i - index_base, j - index_base
        g[i, j] = v
        g[j, i] = np.conj(v)
    return g


def phase_gram(source: np.ndarray, target: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Gram matrix G with source_choi * G = target_choi for two pure Choi vectors.

    Both vectors must share their support and have equal moduli on it; G is then
    (1 - P) + v v^dag with v the ratio target/source on the support, which is positive
    semidefinite with unit diagonal.
    """
    s = np.asarray(source, dtype=complex).reshape(-1)
    t = np.asarray(target, dtype=complex).reshape(-1)
    supp = np.abs(s) > tol
    if not np.array_equal(supp, np.abs(t) > tol) or np.abs(np.abs(s[supp]) - np.abs(t[supp])).max() > 1e-9:
        raise ValueError("vectors differ in support or moduli; no phase Gram exists")
    v = np.zeros_like(s)
    v[supp] = t[supp] / s[supp]
    g = np.diag((~supp).astype(complex)) + np.outer(v, v.conj())
    return g


def choi_vector(u: np.ndarray) -> np.ndarray:
    """|U>> = sum_i |i> (x) U|i>, ordered (inputs, outputs) and regrouped to (A0, B0, A1, B1)."""
    return u.T.reshape(-1)


def superchannel_example_summary() -> dict:
    """Numbers behind the dephasing-superchannel example: do the listed phases map one Choi matrix onto the other?"""
    jl = choi_from_unitary(local_flip_unitary(), (2, 2))
    ju = choi_from_unitary(controlled_phase_unitary(), (2, 2))
    out = {}
    for base in (0, 1):
        g = listed_phase_gram(base)
        res = jl.choi * g
        out[f"listed_base{base}"] = {
            "gram_min_eigenvalue": min_eig(g),
            "matches_target": bool(np.abs(res - ju.choi).max() < 1e-12),
            "max_deviation": float(np.abs(res - ju.choi).max()),
            "result_superchannel": is_superchannel(ChoiChannel(res, (2, 2), (2, 2))).verdict,
        }
    g = phase_gram(choi_vector(local_flip_unitary()), choi_vector(controlled_phase_unitary()))
    res = jl.choi * g
    out["phase_gram"] = {
        "gram_min_eigenvalue": min_eig(g),
        "matches_target": bool(np.abs(res - ju.choi).max() < 1e-12),
        "result_superchannel": is_superchannel(ChoiChannel(res, (2, 2), (2, 2))).verdict,
        "nonzero_entries": [(int(i), int(j), complex(g[i, j])) for i, j in zip(*np.nonzero(np.abs(g - np.eye(16)) > 1e-12)) if i < j],
    }
    out["source_superchannel"] = is_superchannel(jl).verdict
    return out


def cross_section_boxes() -> tuple[ConditionalDistribution, ConditionalDistribution, ConditionalDistribution]:
    """(R, S, 1_4): the PR box, its CHSH-opposite box, and the identity box."""
    return pr_box(), anti_pr_box(), identity_box(2)


def cross_section_point(s: float, t: float) -> np.ndarray:
    r, sb, one = cross_section_boxes()
    return s * r.table + t * sb.table + (1 - s - t) * one.table


TSIRELSON_WEIGHT = (1 + 1 / np.sqrt(2)) / 2
