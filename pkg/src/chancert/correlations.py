"""Bipartite conditional distributions, Bell functionals and the local / nonsignalling polytopes.

Tables are stored as ``p[a, b, x, y]``. As a stochastic matrix the row index is the
composite (a, b) and the column index the composite (x, y), both row-major.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .channels import ChoiChannel
from .report import INCONCLUSIVE, INSIDE, OUTSIDE, CertificateReport, SolverError
from .tensor import permute_systems

NORM_TOL = 1e-10
NEG_TOL = 1e-12
NS_TOL = 1e-8
LP_FEAS_TOL = 1e-8
LP_SEP_TOL = 1e-9
VERTEX_CAP = 10**6


class CapExceeded(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConditionalDistribution:
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 4:
            raise ValueError("table must have shape (nA, nB, nX, nY)")
        object.__setattr__(self, "table", t)
        norm = t.sum(axis=(0, 1))
        err = np.abs(norm - 1).max()
        if err > NORM_TOL:
            raise ValueError(f"distribution not normalised (max error {err:.3g})")
        if t.min() < -NEG_TOL:
            raise ValueError(f"negative probability {t.min():.3g}")

    @property
    def cardinalities(self) -> tuple[int, int, int, int]:
        return tuple(self.table.shape)

    def stochastic(self) -> np.ndarray:
        na, nb, nx, ny = self.table.shape
        return self.table.reshape(na * nb, nx * ny)

    @classmethod
    def from_stochastic(cls, s: np.ndarray, na: int, nb: int, nx: int, ny: int):
        s = np.real_if_close(np.asarray(s), tol=1e6)
        return cls(np.asarray(s, dtype=float).reshape(na, nb, nx, ny))

    def flat(self) -> np.ndarray:
        return self.table.reshape(-1)


@dataclass(frozen=True, eq=False)
class BellFunctional:
    coeffs: np.ndarray
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 4:
            raise ValueError("coefficients must have shape (nA, nB, nX, nY)")
        object.__setattr__(self, "coeffs", c)

    @property
    def cardinalities(self) -> tuple[int, int, int, int]:
        return tuple(self.coeffs.shape)


def chsh() -> BellFunctional:
    """gamma_{ab,xy} = (-1)^(a + b + x y)."""
    c = np.empty((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        c[a, b, x, y] = (-1) ** (a + b + x * y)
    return BellFunctional(c, {"L": 2.0, "Q": 2 * np.sqrt(2), "NS": 4.0})


def _table(p) -> np.ndarray:
    return p.table if isinstance(p, ConditionalDistribution) else np.asarray(p, dtype=float)


def deterministic(fa, fb, na: int, nb: int) -> ConditionalDistribution:
    """a = fa[x], b = fb[y]."""
    t = np.zeros((na, nb, len(fa), len(fb)))
    for x, a in enumerate(fa):
        for y, b in enumerate(fb):
            t[a, b, x, y] = 1
    return ConditionalDistribution(t)


def pr_box() -> ConditionalDistribution:
    """a xor b = x y with uniform marginals."""
    t = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        t[a, b, x, y] = 0.5 * ((a ^ b) == (x & y))
    return ConditionalDistribution(t)


def anti_pr_box() -> ConditionalDistribution:
    """a xor b = x y xor 1."""
    t = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        t[a, b, x, y] = 0.5 * ((a ^ b) != (x & y))
    return ConditionalDistribution(t)


def identity_box(n: int = 2) -> ConditionalDistribution:
    """a = x, b = y; the identity stochastic matrix."""
    return ConditionalDistribution.from_stochastic(np.eye(n * n), n, n, n, n)


def bell_value(gamma: BellFunctional, p) -> float:
    t = _table(p)
    if t.shape != gamma.coeffs.shape:
        raise ValueError(f"functional shape {gamma.coeffs.shape} does not match distribution {t.shape}")
    return float(np.sum(gamma.coeffs * t))


def marginals(p) -> tuple[np.ndarray, np.ndarray]:
    """Alice's p(a|x,y) and Bob's p(b|x,y)."""
    t = _table(p)
    return t.sum(axis=1), t.sum(axis=0)


def signaling_residual(p) -> tuple[float, float]:
    """Largest deviation of each party's marginal from its average over the other party's input."""
    pa, pb = marginals(p)
    ra = np.abs(pa - pa.mean(axis=2, keepdims=True)).max()
    rb = np.abs(pb - pb.mean(axis=1, keepdims=True)).max()
    return float(ra), float(rb)


def is_nonsignaling(p, tol: float = NS_TOL) -> CertificateReport:
    ra, rb = signaling_residual(p)
    ok = ra <= tol and rb <= tol
    return CertificateReport("NS", INSIDE if ok else OUTSIDE,
                             residuals={"bob_to_alice": ra, "alice_to_bob": rb},
                             tolerances={"marginal": tol})


@lru_cache(maxsize=32)
def vertex_matrix(na: int, nb: int, nx: int, ny: int, cap: int = VERTEX_CAP) -> np.ndarray:
    """Deterministic local strategies as rows, lexicographic in (Alice's map, Bob's map)."""
    count = na ** nx * nb ** ny
    if count > cap:
        raise CapExceeded(f"{count} local vertices exceed the cap {cap}")
    fa = np.array(list(itertools.product(range(na), repeat=nx)), dtype=int).reshape(-1, nx)
    fb = np.array(list(itertools.product(range(nb), repeat=ny)), dtype=int).reshape(-1, ny)
    ea = np.zeros((len(fa), na, nx))
    ea[np.arange(len(fa))[:, None], fa, np.arange(nx)[None, :]] = 1
    eb = np.zeros((len(fb), nb, ny))
    eb[np.arange(len(fb))[:, None], fb, np.arange(ny)[None, :]] = 1
    v = np.einsum("iax,jby->ijabxy", ea, eb).reshape(count, -1)
    v.setflags(write=False)
    return v


def local_vertices(scenario, cap: int = VERTEX_CAP) -> list[ConditionalDistribution]:
    na, nb, nx, ny = scenario
    v = vertex_matrix(na, nb, nx, ny, cap)
    return [ConditionalDistribution(row.reshape(na, nb, nx, ny)) for row in v]


def max_bell_local(gamma: BellFunctional, cap: int = VERTEX_CAP) -> float:
    v = vertex_matrix(*gamma.cardinalities, cap)
    return float((v @ gamma.coeffs.reshape(-1)).max())


def _ns_constraints(na, nb, nx, ny):
    n = na * nb * nx * ny
    idx = np.arange(n).reshape(na, nb, nx, ny)
    rows = []
    for x, y in itertools.product(range(nx), range(ny)):
        r = np.zeros(n)
        r[idx[:, :, x, y].ravel()] = 1
        rows.append((r, 1.0))
    for a, x, y in itertools.product(range(na), range(nx), range(1, ny)):
        r = np.zeros(n)
        r[idx[a, :, x, y].ravel()] += 1
        r[idx[a, :, x, 0].ravel()] -= 1
        rows.append((r, 0.0))
    for b, y, x in itertools.product(range(nb), range(ny), range(1, nx)):
        r = np.zeros(n)
        r[idx[:, b, x, y].ravel()] += 1
        r[idx[:, b, 0, y].ravel()] -= 1
        rows.append((r, 0.0))
    return np.array([r for r, _ in rows]), np.array([v for _, v in rows])


def max_bell_ns(gamma: BellFunctional) -> float:
    a_eq, b_eq = _ns_constraints(*gamma.cardinalities)
    res = linprog(-gamma.coeffs.reshape(-1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"nonsignalling LP failed: {res.message}", status="lp_failure")
    return float(-res.fun)


def is_local(p, cap: int = VERTEX_CAP) -> CertificateReport:
    """Vertex-weight LP in L1-distance form.

    minimise sum(u + w) subject to V^T lam + u - w = p, sum(lam) = 1, everything >= 0.
    A zero optimum gives the convex decomposition; a positive one comes with a dual vector
    that separates p from every deterministic strategy.
    """
    t = _table(p)
    shape = t.shape
    v = vertex_matrix(*shape, cap)
    nv, n = v.shape
    a_eq = np.zeros((n + 1, nv + 2 * n))
    a_eq[:n, :nv] = v.T
    a_eq[:n, nv:nv + n] = np.eye(n)
    a_eq[:n, nv + n:] = -np.eye(n)
    a_eq[n, :nv] = 1
    b_eq = np.concatenate([t.reshape(-1), [1.0]])
    c = np.concatenate([np.zeros(nv), np.ones(2 * n)])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"local-polytope LP failed: {res.message}", status="lp_failure")
    lam = res.x[:nv]
    distance = float(res.fun)
    recon = float(np.abs(v.T @ lam - t.reshape(-1)).max())
    dual = np.asarray(res.eqlin.marginals[:n])
    functional = BellFunctional(dual.reshape(shape))
    value = float(dual @ t.reshape(-1))
    local_max = float((v @ dual).max())
    margin = value - local_max
    residuals = {"l1_distance": distance, "reconstruction": recon, "separation_margin": margin}
    tolerances = {"feasibility": LP_FEAS_TOL, "separation": LP_SEP_TOL}
    if recon <= LP_FEAS_TOL and distance <= LP_FEAS_TOL * n:
        keep = lam > 1e-12
        return CertificateReport("local", INSIDE, residuals, tolerances,
                                 details={"weights": lam[keep], "vertex_indices": np.flatnonzero(keep)})
    if margin > LP_SEP_TOL:
        return CertificateReport("local", OUTSIDE, residuals, tolerances, value=value,
                                 witness=functional, details={"local_bound": local_max})
    return CertificateReport("local", INCONCLUSIVE, residuals, tolerances)


def certify_ns(p) -> CertificateReport:
    """Nonsignalling membership including positivity and normalisation of the table."""
    t = _table(p)
    rep = is_nonsignaling(t)
    neg = float(max(0.0, -t.min()))
    norm = float(np.abs(t.sum(axis=(0, 1)) - 1).max())
    rep.residuals.update({"negativity": neg, "normalisation": norm})
    if neg > NEG_TOL or norm > NORM_TOL:
        rep.verdict = OUTSIDE
    return rep


# ---------------------------------------------------------------------------
# channel witnesses


@dataclass(frozen=True, eq=False)
class ChannelWitness:
    """W = gamma_S/(d_A0 d_B0) 1 - Omega, stored in the Choi order (A0, B0, A1, B1).

    ``omega`` keeps the diagonal operator in the |x a y b> order on (A0, A1, B0, B1).
    """

    w: np.ndarray
    omega: np.ndarray
    bound: float
    target: str
    dims: tuple[int, int, int, int]


def omega_operator(gamma: BellFunctional) -> np.ndarray:
    na, nb, nx, ny = gamma.cardinalities
    diag = gamma.coeffs.transpose(2, 0, 3, 1).reshape(-1)
    return np.diag(diag).astype(complex)


def build_witness(gamma: BellFunctional, target: str, bound: float | None = None,
                  npa_level: int = 2) -> ChannelWitness:
    target = target.upper()
    if bound is None:
        if target == "L":
            bound = max_bell_local(gamma)
        elif target == "NS":
            bound = max_bell_ns(gamma)
        elif target == "Q":
            from .bounds import npa_max
            bound = npa_max(gamma, npa_level)
        else:
            raise ValueError(f"unknown target set {target!r}; expected L, Q or NS")
    elif target not in ("L", "Q", "NS"):
        raise ValueError(f"unknown target set {target!r}; expected L, Q or NS")
    na, nb, nx, ny = gamma.cardinalities
    omega = omega_operator(gamma)
    d = nx * na * ny * nb
    w_native = bound / (nx * ny) * np.eye(d) - omega
    w = permute_systems(w_native, [0, 2, 1, 3], (nx, na, ny, nb))
    return ChannelWitness(w, omega, float(bound), target, (nx, ny, na, nb))


def witness_value(w: ChannelWitness, ch: ChoiChannel) -> float:
    if tuple(ch.in_dims + ch.out_dims) != w.dims:
        raise ValueError(f"channel dims {ch.in_dims + ch.out_dims} do not match witness dims {w.dims}")
    return float(np.real(np.trace(ch.choi @ w.w)))
