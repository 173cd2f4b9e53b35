"""Moment-matrix relaxations of the quantum set and the negativity of two-qubit states.

Moment matrices use one projector per setting (outcome 0), so the complementary
projector is implicit. Moments are taken real, which loses nothing for membership and
for Bell values: the real part of a feasible complex moment matrix is again feasible.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .correlations import BellFunctional, ConditionalDistribution, signaling_residual
from .report import INSIDE, OUTSIDE, CertificateReport, SolverError
from .sdp import SdpProblem, solve_sdp
from .tensor import partial_transpose

NPA_SLACK = 1e-7
NPA_TOL = 1e-8

Letter = tuple[str, int]
Key = tuple[tuple[int, ...], tuple[int, ...]]


def _collapse(seq):
    out = []
    for s in seq:
        if not out or out[-1] != s:
            out.append(s)
    return tuple(out)


def canonical(word) -> Key:
    """Canonical moment label: split by party, drop repeated projectors, identify w with w^dag."""
    a = _collapse(i for p, i in word if p == "A")
    b = _collapse(i for p, i in word if p == "B")
    return min((a, b), (a[::-1], b[::-1]))


@dataclass(frozen=True, eq=False)
class MomentMatrixSpec:
    """Word list and moment structure of an NPA level for two outcomes per setting.

    ``known`` maps moment labels fixed by the behaviour to their position in the moment
    vector (1, p_A(0|x), p_B(0|y), p(00|xy)); ``unknown`` lists the free moment labels.
    """

    n_x: int
    n_y: int
    level: int
    words: tuple
    keys: tuple
    known: dict
    unknown: tuple
    known_basis: np.ndarray  # (L, n, n): F0(p) = sum_l m_l known_basis[l]
    free_basis: np.ndarray  # (K, n, n)

    @property
    def size(self) -> int:
        return len(self.words)

    def index(self, word) -> int:
        return self.words.index(tuple(word))


def _moment_vector_layout(nx, ny) -> dict:
    lay = {((), ()): 0}
    for x in range(nx):
        lay[((x,), ())] = 1 + x
    for y in range(ny):
        lay[((), (y,))] = 1 + nx + y
    for x, y in itertools.product(range(nx), range(ny)):
        lay[((x,), (y,))] = 1 + nx + ny + x * ny + y
    return lay


def moment_matrix_spec(n_x: int, n_y: int, level: int) -> MomentMatrixSpec:
    if level not in (1, 2):
        raise ValueError("only levels 1 and 2 are implemented")
    words = [()] + [(("A", x),) for x in range(n_x)] + [(("B", y),) for y in range(n_y)]
    if level == 2:
        words += [(("A", x), ("A", x2)) for x in range(n_x) for x2 in range(n_x) if x != x2]
        words += [(("B", y), ("B", y2)) for y in range(n_y) for y2 in range(n_y) if y != y2]
        words += [(("A", x), ("B", y)) for x in range(n_x) for y in range(n_y)]
    n = len(words)
    keys = [[canonical(tuple(reversed(u)) + v) for v in words] for u in words]
    layout = _moment_vector_layout(n_x, n_y)
    unknown = []
    for i in range(n):
        for j in range(i, n):
            k = keys[i][j]
            if k not in layout and k not in unknown:
                unknown.append(k)
    kb = np.zeros((len(layout), n, n))
    fb = np.zeros((len(unknown), n, n))
    upos = {k: r for r, k in enumerate(unknown)}
    for i in range(n):
        for j in range(n):
            k = keys[i][j]
            if k in layout:
                kb[layout[k], i, j] = 1
            else:
                fb[upos[k], i, j] = 1
    return MomentMatrixSpec(n_x, n_y, level, tuple(words), tuple(tuple(r) for r in keys),
                            layout, tuple(unknown), kb, fb)


def behaviour_moments(tables: np.ndarray) -> np.ndarray:
    """(B, 2, 2, nx, ny) tables -> (B, L) moment vectors; marginals are averaged over the other input."""
    t = np.asarray(tables, dtype=float)
    if t.ndim == 4:
        t = t[None]
    if t.shape[1:3] != (2, 2):
        raise ValueError("moment relaxations are implemented for two outcomes per setting")
    batch, _, _, nx, ny = t.shape
    pa = t[:, 0].sum(axis=1).mean(axis=2)  # (B, nx)
    pb = t[:, :, 0].sum(axis=1).mean(axis=1)  # (B, ny)
    pab = t[:, 0, 0].reshape(batch, -1)
    return np.concatenate([np.ones((batch, 1)), pa, pb, pab], axis=1)


def functional_moments(gamma: BellFunctional) -> tuple[float, np.ndarray]:
    """Write gamma(p) as c0 + g.m with m the moment vector (1 excluded from g's first slot)."""
    c = gamma.coeffs
    if c.shape[:2] != (2, 2):
        raise ValueError("moment relaxations are implemented for two outcomes per setting")
    nx, ny = c.shape[2:]
    c0 = float(c[1, 1].sum())
    g_a = (c[0, 1] - c[1, 1]).sum(axis=1)
    g_b = (c[1, 0] - c[1, 1]).sum(axis=0)
    g_ab = (c[0, 0] - c[0, 1] - c[1, 0] + c[1, 1]).reshape(-1)
    return c0, np.concatenate([[0.0], g_a, g_b, g_ab])


def npa_max(gamma: BellFunctional, level: int = 1, tol: float = NPA_TOL, raise_on_failure: bool = True) -> float:
    """Upper bound on the quantum value of gamma from the level-``level`` moment matrix."""
    nx, ny = gamma.cardinalities[2:]
    spec = moment_matrix_spec(nx, ny, level)
    c0, g = functional_moments(gamma)
    if not np.any(g):
        return c0
    # every moment except the normalisation is free
    free = np.concatenate([spec.known_basis[1:], spec.free_basis])
    b = np.concatenate([g[1:], np.zeros(len(spec.free_basis))])
    prob = SdpProblem((-free,), (spec.known_basis[0],), b)
    res = solve_sdp(prob, tol=tol).squeeze()
    if res.status != "optimal" and raise_on_failure:
        raise SolverError(f"moment SDP did not converge ({res.status})", str(res.status),
                          {"gap": float(res.gap), "iterations": int(res.iterations)})
    # the primal side is a feasible sum-of-squares certificate, hence an upper bound
    return c0 + float(res.primal)


def _membership_problem(spec: MomentMatrixSpec, moments: np.ndarray) -> SdpProblem:
    c = np.einsum("bl,lij->bij", moments, spec.known_basis)
    n = spec.size
    a = np.concatenate([-spec.free_basis, np.eye(n)[None]])
    b = np.zeros(len(a))
    b[-1] = 1
    return SdpProblem((a,), (c,), b)


def npa_margins(tables: np.ndarray, level: int, tol: float = NPA_TOL, chunk: int = 2048):
    """Largest smallest-eigenvalue over moment matrices consistent with each table.

    Returns (margins, statuses, certificates) where a certificate is the optimal dual PSD
    matrix Y with <Y, F_k> = 0 for every free moment; <Y, F0(p)> < 0 proves p infeasible.
    """
    t = np.asarray(tables, dtype=float)
    if t.ndim == 4:
        t = t[None]
    nx, ny = t.shape[3:]
    spec = moment_matrix_spec(nx, ny, level)
    mom = behaviour_moments(t)
    margins = np.empty(len(t))
    status = np.empty(len(t), dtype=object)
    certs = np.empty((len(t), spec.size, spec.size))
    for s in range(0, len(t), chunk):
        res = solve_sdp(_membership_problem(spec, mom[s:s + chunk]), tol=tol)
        margins[s:s + chunk] = res.dual
        status[s:s + chunk] = res.status
        certs[s:s + chunk] = res.x_psd[0]
    return margins, status, certs


def npa_membership(p, level: int = 1, slack: float = NPA_SLACK, tol: float = NPA_TOL) -> CertificateReport:
    t = p.table if isinstance(p, ConditionalDistribution) else np.asarray(p, dtype=float)
    target = f"NPA{level}"
    ra, rb = signaling_residual(t)
    residuals = {"signaling": max(ra, rb)}
    tolerances = {"slack": slack, "solver": tol}
    if max(ra, rb) > 1e-8:
        return CertificateReport(target, OUTSIDE, residuals, tolerances,
                                 details={"reason": "distribution is signalling"})
    margins, status, certs = npa_margins(t, level, tol)
    if status[0] != "optimal":
        raise SolverError(f"membership SDP did not converge ({status[0]})", str(status[0]),
                          {"margin": float(margins[0])})
    margin = float(margins[0])
    residuals["margin"] = margin
    verdict = INSIDE if margin >= -slack else OUTSIDE
    return CertificateReport(target, verdict, residuals, tolerances, value=margin,
                             witness=certs[0] if verdict == OUTSIDE else None,
                             details={"boundary": abs(margin) <= slack})


def certificate_value(spec: MomentMatrixSpec, cert: np.ndarray, tables: np.ndarray) -> np.ndarray:
    """<Y, F0(p)> for a stored infeasibility certificate Y; negative values exclude p."""
    mom = behaviour_moments(tables)
    f0 = np.einsum("bl,lij->bij", mom, spec.known_basis)
    return np.einsum("ij,bij->b", cert, f0)


# ---------------------------------------------------------------------------
# negativity


def negativity(rho, dims=(2, 2), transpose=(1,), tol: float = 1e-9) -> float:
    """Sum of |negative eigenvalues| of the partial transpose over the ``transpose`` subsystems."""
    r = np.asarray(getattr(rho, "data", rho), dtype=complex)
    if hasattr(rho, "dims") and not isinstance(rho, np.ndarray):
        dims = rho.dims
    if np.abs(r - r.conj().T).max() > tol:
        raise ValueError("negativity needs a Hermitian matrix")
    if abs(np.trace(r).real - 1) > tol:
        raise ValueError("negativity needs a unit-trace state")
    if np.linalg.eigvalsh((r + r.conj().T) / 2)[0] < -tol:
        raise ValueError("negativity needs a positive semidefinite state")
    w = np.linalg.eigvalsh(partial_transpose(r, transpose, dims))
    return float(-w[w < 0].sum())


def noisy_plus_states(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """|++><++| damped by q then by the fourth-level noise p, for broadcastable arrays p and q."""
    p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    rho = np.full(p.shape + (4, 4), 0.25)
    off = ~np.eye(4, dtype=bool)
    rho[..., off] *= (1 - q)[..., None]
    f = (1 - 2 * p)[..., None]
    rho[..., 3, :3] *= f
    rho[..., :3, 3] *= f
    return rho


def negativity_grid(resolution: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Negativity over an evenly spaced (p, q) grid; result[i, j] belongs to (p_i, q_j)."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    ps = np.linspace(0.0, 1.0, resolution)
    qs = np.linspace(0.0, 1.0, resolution)
    rho = noisy_plus_states(ps[:, None], qs[None, :])
    pt = rho.reshape(resolution, resolution, 2, 2, 2, 2).transpose(0, 1, 2, 5, 4, 3)
    pt = pt.reshape(resolution, resolution, 4, 4)
    w = np.linalg.eigvalsh(pt)
    neg = np.maximum(-w, 0.0).sum(axis=-1)
    return ps, qs, neg
