"""Measurement protocols that turn a bipartite channel into a conditional distribution.

Three variants are simulated exactly with the Born rule:

* ``general``: a shared state on (A_rho, B_rho) is processed locally by channels
  Lambda^x: A_rho -> (R, A0) and Phi^y: B_rho -> (S, B0) before the channel acts;
* ``product-input``: local input states rho^x on (R, A0) and sigma^y on (S, B0);
* ``computational``: basis states in, computational-basis readout (the decoherent action).

Ancillas always come first: effects M^a act on (R, A1) and N^b on (S, B1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import ChoiChannel, choi_from_kraus, mix_channels, product_channel
from .correlations import ConditionalDistribution
from .dephasing import decoherent_distribution
from .sampling import as_rng, density_matrix, kraus_operators, projective_measurement, pure_state
from .tensor import unitary_completion

POVM_TOL = 1e-9
PROJ_TOL = 1e-9

VARIANTS = {"general": "general", "a": "general", "product-input": "product-input",
            "b": "product-input", "computational": "computational", "c": "computational"}


def _herm(m) -> np.ndarray:
    m = np.asarray(getattr(m, "data", m), dtype=complex)
    return m


@dataclass(frozen=True, eq=False)
class MeasurementFamily:
    """POVMs indexed by setting: ``effects[x][a]``. A single setting is reused for every input."""

    effects: tuple

    def __post_init__(self):
        eff = tuple(tuple(_herm(e) for e in povm) for povm in self.effects)
        if not eff or not eff[0]:
            raise ValueError("empty measurement family")
        n_out = len(eff[0])
        d = eff[0][0].shape[0]
        for x, povm in enumerate(eff):
            if len(povm) != n_out:
                raise ValueError("every setting needs the same number of outcomes")
            total = np.zeros((d, d), dtype=complex)
            for e in povm:
                if e.shape != (d, d):
                    raise ValueError("effects must share one square shape")
                if np.abs(e - e.conj().T).max() > POVM_TOL:
                    raise ValueError(f"setting {x}: effect is not Hermitian")
                if np.linalg.eigvalsh((e + e.conj().T) / 2)[0] < -POVM_TOL:
                    raise ValueError(f"setting {x}: effect is not positive semidefinite")
                total += e
            err = np.abs(total - np.eye(d)).max()
            if err > POVM_TOL:
                raise ValueError(f"setting {x}: effects sum to identity only within {err:.3g}")
        object.__setattr__(self, "effects", eff)

    @classmethod
    def single(cls, povm: Sequence) -> "MeasurementFamily":
        return cls((tuple(povm),))

    @property
    def n_settings(self) -> int:
        return len(self.effects)

    @property
    def n_outcomes(self) -> int:
        return len(self.effects[0])

    @property
    def dim(self) -> int:
        return self.effects[0][0].shape[0]

    def setting(self, x: int) -> tuple:
        return self.effects[0] if self.n_settings == 1 else self.effects[x]

    def array(self, n_settings: int) -> np.ndarray:
        """Effects as an array [x, a, i, j], repeating a single POVM over ``n_settings``."""
        if self.n_settings not in (1, n_settings):
            raise ValueError(f"family has {self.n_settings} settings, protocol needs {n_settings}")
        return np.array([[e for e in self.setting(x)] for x in range(n_settings)])

    def is_projective(self, tol: float = PROJ_TOL) -> bool:
        return all(np.abs(e @ e - e).max() <= tol for povm in self.effects for e in povm)


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    """Inputs, measurements and ancilla sizes for one of the three protocol variants.

    For ``general`` the inputs are ChoiChannels A_rho -> (R, A0) and B_rho -> (S, B0) and
    ``shared_state`` lives on (A_rho, B_rho) with ``shared_dims``. For ``product-input``
    the inputs are density matrices on (R, A0) and (S, B0). ``computational`` needs nothing.
    """

    variant: str
    alice_inputs: tuple = ()
    bob_inputs: tuple = ()
    alice_meas: MeasurementFamily | None = None
    bob_meas: MeasurementFamily | None = None
    ancilla_dims: tuple[int, int] = (1, 1)
    shared_state: np.ndarray | None = None
    shared_dims: tuple[int, int] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown protocol variant {self.variant!r}")
        object.__setattr__(self, "variant", VARIANTS[self.variant])
        object.__setattr__(self, "ancilla_dims", tuple(int(d) for d in self.ancilla_dims))
        if self.variant == "computational":
            return
        if self.alice_meas is None or self.bob_meas is None:
            raise ValueError("measurement families are required")
        if not self.alice_inputs or not self.bob_inputs:
            raise ValueError("input families are required")
        if self.variant == "general":
            if self.shared_state is None or self.shared_dims is None:
                raise ValueError("the general protocol needs a shared state and its dims")
            rho = _herm(self.shared_state)
            if rho.shape != (int(np.prod(self.shared_dims)),) * 2:
                raise ValueError("shared state does not match shared_dims")
            object.__setattr__(self, "shared_state", rho)
            for side, chans, d in (("alice", self.alice_inputs, self.shared_dims[0]),
                                   ("bob", self.bob_inputs, self.shared_dims[1])):
                for c in chans:
                    if not isinstance(c, ChoiChannel) or c.d_in != d or len(c.out_dims) != 2:
                        raise ValueError(f"{side} input channels must map dimension {d} to (ancilla, input)")
        else:
            object.__setattr__(self, "alice_inputs", tuple(_herm(r) for r in self.alice_inputs))
            object.__setattr__(self, "bob_inputs", tuple(_herm(r) for r in self.bob_inputs))
            for side, states in (("alice", self.alice_inputs), ("bob", self.bob_inputs)):
                if len({s.shape for s in states}) != 1:
                    raise ValueError(f"{side} input states must share one shape")

    @property
    def n_x(self) -> int:
        return len(self.alice_inputs)

    @property
    def n_y(self) -> int:
        return len(self.bob_inputs)


def apply_with_ancillas(ch: ChoiChannel, omega: np.ndarray, anc: tuple[int, int]) -> np.ndarray:
    """(E (x) id_RS) on a state over (R, A0, S, B0); the result is over (R, A1, S, B1)."""
    da0, db0 = ch.in_dims
    da1, db1 = ch.out_dims
    dr, ds = anc
    om = np.asarray(omega).reshape(dr, da0, ds, db0, dr, da0, ds, db0)
    j = ch.choi.reshape(da0, db0, da1, db1, da0, db0, da1, db1)
    out = np.einsum("risjRISJ,ijklIJKL->rkslRKSL", om, j, optimize=True)
    d = dr * da1 * ds * db1
    return out.reshape(d, d)


def output_states(ch: ChoiChannel, rho_x: Sequence, sigma_y: Sequence, anc: tuple[int, int]) -> np.ndarray:
    """tau[x, y] = (E (x) id)(rho^x (x) sigma^y) over (R, A1, S, B1), for product inputs."""
    da0, db0 = ch.in_dims
    da1, db1 = ch.out_dims
    dr, ds = anc
    rx = np.asarray(rho_x).reshape(len(rho_x), dr, da0, dr, da0)
    sy = np.asarray(sigma_y).reshape(len(sigma_y), ds, db0, ds, db0)
    j = ch.choi.reshape(da0, db0, da1, db1, da0, db0, da1, db1)
    out = np.einsum("xriRI,ysjSJ,ijklIJKL->xyrkslRKSL", rx, sy, j, optimize=True)
    d = dr * da1 * ds * db1
    return out.reshape(len(rho_x), len(sigma_y), d, d)


def born_table(tau: np.ndarray, m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """p[a, b, x, y] = Tr[(M^{a|x} (x) N^{b|y}) tau_xy] with tau over (A side, B side)."""
    nx, ny = tau.shape[:2]
    da, db = m.shape[-1], n.shape[-1]
    t = tau.reshape(nx, ny, da, db, da, db)
    p = np.einsum("xyijkl,xaki,yblj->abxy", t, m, n, optimize=True)
    return np.real(p)


def _clean(p: np.ndarray) -> ConditionalDistribution:
    p = np.where(np.abs(p) < 1e-15, 0.0, p)
    return ConditionalDistribution(p)


def run_protocol(spec: ProtocolSpec, ch: ChoiChannel) -> ConditionalDistribution:
    """Exact Born-rule distribution of the chosen protocol for a bipartite channel."""
    if not ch.is_bipartite:
        raise ValueError("bipartite channel required")
    if spec.variant == "computational":
        return decoherent_distribution(ch)
    da0, db0 = ch.in_dims
    da1, db1 = ch.out_dims
    dr, ds = spec.ancilla_dims
    if spec.alice_meas.dim != dr * da1 or spec.bob_meas.dim != ds * db1:
        raise ValueError("measurement dimensions do not match (ancilla, output) of the channel")
    if spec.variant == "product-input":
        if spec.alice_inputs[0].shape != (dr * da0,) * 2 or spec.bob_inputs[0].shape != (ds * db0,) * 2:
            raise ValueError("input states do not match (ancilla, input) of the channel")
        tau = output_states(ch, spec.alice_inputs, spec.bob_inputs, (dr, ds))
    else:
        for c in spec.alice_inputs:
            if c.out_dims != (dr, da0):
                raise ValueError("alice input channels must output (R, A0)")
        for c in spec.bob_inputs:
            if c.out_dims != (ds, db0):
                raise ValueError("bob input channels must output (S, B0)")
        da_r, db_r = spec.shared_dims
        rho = spec.shared_state.reshape(da_r, db_r, da_r, db_r)
        lx = np.array([c.choi.reshape(da_r, dr * da0, da_r, dr * da0) for c in spec.alice_inputs])
        fy = np.array([c.choi.reshape(db_r, ds * db0, db_r, ds * db0) for c in spec.bob_inputs])
        # omega_xy over ((R A0), (S B0)); Lambda(|al><al'|)_{u,u'} = L[al, u, al', u']
        om = np.einsum("abAB,xaiAI,ybjBJ->xyijIJ", rho, lx, fy, optimize=True)
        dx, dy = dr * da0, ds * db0
        om = om.reshape(len(lx), len(fy), dx * dy, dx * dy)
        tau = np.array([[apply_with_ancillas(ch, om[x, y], (dr, ds)) for y in range(len(fy))]
                        for x in range(len(lx))])
    m = spec.alice_meas.array(spec.n_x)
    n = spec.bob_meas.array(spec.n_y)
    return _clean(born_table(tau, m, n))


def generalized_bell_basis(d: int) -> list[np.ndarray]:
    """|phi^{ab}> = sum_k exp(2 pi i b k / d) |k, k + a> / sqrt(d), listed with a outer, b inner."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    out = []
    for a in range(d):
        for b in range(d):
            v = np.zeros(d * d, dtype=complex)
            for k in range(d):
                v[k * d + (k + a) % d] = np.exp(2j * np.pi * b * k / d)
            out.append(v / np.sqrt(d))
    return out


def bell_measurement(d: int) -> MeasurementFamily:
    return MeasurementFamily.single([np.outer(v, v.conj()) for v in generalized_bell_basis(d)])


# ---------------------------------------------------------------------------
# strategies and channel synthesis


@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """Shared state on R (x) S with projective measurements P^{a|x} on R and Q^{b|y} on S."""

    state: np.ndarray
    dims: tuple[int, int]
    alice: MeasurementFamily
    bob: MeasurementFamily

    def __post_init__(self):
        s = _herm(self.state)
        d = int(np.prod(self.dims))
        if s.shape != (d, d):
            raise ValueError("state does not match dims")
        if np.abs(s - s.conj().T).max() > POVM_TOL or abs(np.trace(s).real - 1) > POVM_TOL:
            raise ValueError("state must be Hermitian with unit trace")
        if np.linalg.eigvalsh((s + s.conj().T) / 2)[0] < -POVM_TOL:
            raise ValueError("state is not positive semidefinite")
        if self.alice.dim != self.dims[0] or self.bob.dim != self.dims[1]:
            raise ValueError("measurement dimensions do not match the state")
        if not (self.alice.is_projective() and self.bob.is_projective()):
            raise ValueError("strategy measurements must be projective")
        object.__setattr__(self, "state", s)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def distribution(self) -> ConditionalDistribution:
        m = self.alice.array(self.alice.n_settings)
        n = self.bob.array(self.bob.n_settings)
        tau = self.state[None, None]
        tau = np.broadcast_to(tau, (m.shape[0], n.shape[0]) + self.state.shape)
        return _clean(born_table(tau, m, n))


def controlled_unitary(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """sum_x |x><x| (x) U_x."""
    d = blocks[0].shape[0]
    u = np.zeros((len(blocks) * d, len(blocks) * d), dtype=complex)
    for x, b in enumerate(blocks):
        u[x * d:(x + 1) * d, x * d:(x + 1) * d] = b
    return u


def dilation_unitaries(family: MeasurementFamily) -> list[np.ndarray]:
    """U_x on (outcome, R) whose first columns are the isometry sum_a |a> (x) P^{a|x}."""
    out = []
    for x in range(family.n_settings):
        iso = np.concatenate(list(family.setting(x)), axis=0)
        out.append(unitary_completion(iso))
    return out


def lose_from_strategy(s: QuantumStrategy) -> ChoiChannel:
    """Channel (C, D) -> (A, B) whose decoherent action is the strategy's distribution.

    E(rho) = Tr_{CDRS}[(U (x) V)(rho (x) |00><00| (x) sigma)(U (x) V)^dag] with controlled
    dilations U = sum_x |x><x| (x) U_x on (C, A, R) and likewise V on (D, B, S).
    """
    nx, na = s.alice.n_settings, s.alice.n_outcomes
    ny, nb = s.bob.n_settings, s.bob.n_outcomes
    dr, ds = s.dims
    u = controlled_unitary(dilation_unitaries(s.alice)).reshape(nx, na, dr, nx, na, dr)
    v = controlled_unitary(dilation_unitaries(s.bob)).reshape(ny, nb, ds, ny, nb, ds)
    w, vecs = np.linalg.eigh(s.state)
    kraus = []
    for lam, vec in zip(w, vecs.T):
        if lam <= 1e-14:
            continue
        sk = np.sqrt(lam) * vec.reshape(dr, ds)
        # K[c, r, d, s][(a, b), (x, y)] = sum <c a r|U|x 0 r'> <d b s|V|y 0 s'> s_k[r', s']
        k = np.einsum("carxq,dbsyt,qt->crdsabxy", u[:, :, :, :, 0, :], v[:, :, :, :, 0, :], sk, optimize=True)
        k = k.reshape(nx * dr * ny * ds, na * nb, nx * ny)
        kraus.extend(op for op in k if np.abs(op).max() > 0)
    return choi_from_kraus(kraus, (nx, ny), (na, nb))


# ---------------------------------------------------------------------------
# samplers


def random_channel(d_in: int, d_out: int, rng) -> ChoiChannel:
    return choi_from_kraus(kraus_operators(d_in, d_out, rng), (d_in,), (d_out,))


def sample_losr(in_dims, out_dims, terms: int, seed) -> ChoiChannel:
    """sum_l p_l E_A^l (x) E_B^l with random CPTP factors and Dirichlet weights."""
    if terms < 1:
        raise ValueError("terms must be at least 1")
    rng = as_rng(seed)
    weights = rng.dirichlet(np.ones(terms))
    chans = [product_channel(random_channel(in_dims[0], out_dims[0], rng),
                             random_channel(in_dims[1], out_dims[1], rng)) for _ in range(terms)]
    return mix_channels(weights, chans)


def random_measurements(d: int, n_settings: int, n_outcomes: int, rng, projective: bool = False) -> MeasurementFamily:
    """Random POVMs; projective ones deal Haar columns round-robin, general ones come from Kraus maps."""
    rng = as_rng(rng)
    fam = []
    for _ in range(n_settings):
        if projective:
            fam.append(projective_measurement(d, n_outcomes, rng))
        else:
            ks = kraus_operators(d, d, rng, num=n_outcomes)
            fam.append([k.conj().T @ k for k in ks])
    return MeasurementFamily(tuple(tuple(p) for p in fam))


def random_strategy(dims, n_settings: int, n_outcomes: int, seed, separable: bool = False,
                    terms: int = 3) -> QuantumStrategy:
    """Random projective strategy; with ``separable`` the state is a mixture of product states."""
    rng = as_rng(seed)
    dr, ds = dims
    if separable:
        w = rng.dirichlet(np.ones(terms))
        state = sum(wi * np.kron(density_matrix(dr, rng), density_matrix(ds, rng)) for wi in w)
    else:
        psi = pure_state(dr * ds, rng)
        state = np.outer(psi, psi.conj())
    return QuantumStrategy(state, (dr, ds),
                           random_measurements(dr, n_settings, n_outcomes, rng, projective=True),
                           random_measurements(ds, n_settings, n_outcomes, rng, projective=True))


def tsirelson_strategy() -> QuantumStrategy:
    """|Phi+> with Z, X for Alice and (Z +- X)/sqrt(2) for Bob."""
    z = np.diag([1.0, -1.0]).astype(complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)

    def pm(obs):
        return ((np.eye(2) + obs) / 2, (np.eye(2) - obs) / 2)

    alice = MeasurementFamily((pm(z), pm(x)))
    bob = MeasurementFamily((pm((z + x) / np.sqrt(2)), pm((z - x) / np.sqrt(2))))
    return QuantumStrategy(np.outer(phi, phi.conj()), (2, 2), alice, bob)


def tetrahedral_states() -> list[np.ndarray]:
    """Qubit states with Bloch vectors on a regular tetrahedron."""
    pauli = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
    return [(np.eye(2) + sum(n[i] * pauli[i] for i in range(3))) / 2 for n in dirs]


def ic_states(d: int) -> list[np.ndarray]:
    """d^2 pure states spanning the operator space of C^d.

    Tetrahedral states for d = 2; otherwise |k>, (|j> + |k>)/sqrt(2) and (|j> + i|k>)/sqrt(2).
    """
    if d == 2:
        return [s.astype(complex) for s in tetrahedral_states()]
    basis = np.eye(d, dtype=complex)
    vecs = [basis[k] for k in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            vecs.append((basis[j] + basis[k]) / np.sqrt(2))
            vecs.append((basis[j] + 1j * basis[k]) / np.sqrt(2))
    return [np.outer(v, v.conj()) for v in vecs]


def ic_family(dims: Sequence[int]) -> list[np.ndarray]:
    """Tensor products of ic_states over the listed subsystems."""
    fam = [np.ones((1, 1), dtype=complex)]
    for d in dims:
        fam = [np.kron(f, s) for f in fam for s in ic_states(d)]
    return fam


def operator_span_rank(states: Sequence[np.ndarray], tol: float = 1e-10) -> int:
    mat = np.array([np.asarray(s).reshape(-1) for s in states])
    return int(np.linalg.matrix_rank(mat, tol=tol))
