"""See-saw lower bounds on gamma_max and the measurement-device-independent LOSR test.

The see-saw alternates exact best responses: with one party's POVM fixed the value is
linear in the other's, so a two-outcome POVM is the projector onto the positive part of
O_0 - O_1 and a larger one solves a small SDP.

The LOSR test compares gamma(p_E), obtained with generalized-Bell-basis readout, against
max over product effects of sum gamma Tr(M^a rho^x) Tr(N^b sigma^y). That maximum is
bracketed by a see-saw (lower) and by a relaxation in which M^a (x) N^b is replaced by a
PPT global effect with the right marginals (upper). The relaxation is solved with SCS in
dual form and the dual point is then repaired into an exactly feasible one, so the
reported upper bound holds regardless of solver accuracy.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .channels import ChoiChannel
from .correlations import BellFunctional, bell_value
from .protocols import (MeasurementFamily, ProtocolSpec, bell_measurement, operator_span_rank,
                        output_states, run_protocol)
from .report import INCONCLUSIVE, OUTSIDE, CertificateReport
from .sampling import as_rng, projective_measurement
from .sdp import SdpProblem, hermitian_to_real, real_to_hermitian, solve_sdp, sym_basis_constraints

SEESAW_TOL = 1e-9
MAX_SWEEPS = 200
RESTARTS = 20
LOSR_MARGIN = 1e-7


@dataclass
class SeesawResult:
    value: float
    alice: MeasurementFamily
    bob: MeasurementFamily
    history: list[float]
    converged: bool
    restart_values: list[float] = field(default_factory=list)


def _reduce_bob(tau, n):
    """red[x, y, b, i, k] = <i| Tr_B[(1 (x) N^b) tau_xy] |k>."""
    return np.einsum("xyijkl,blj->xybik", tau, n, optimize=True)


def _reduce_alice(tau, m):
    return np.einsum("xyijkl,aki->xyajl", tau, m, optimize=True)


def _herm_clean(e):
    return (e + e.conj().T) / 2


def _normalise_povm(effects):
    """Clip small negative eigenvalues and rescale so the effects sum to the identity exactly."""
    eff = []
    for e in effects:
        w, v = np.linalg.eigh(_herm_clean(e))
        eff.append((v * np.clip(w, 0, None)) @ v.conj().T)
    total = sum(eff)
    w, v = np.linalg.eigh(_herm_clean(total))
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return np.array([_herm_clean(inv_sqrt @ e @ inv_sqrt) for e in eff])


def optimal_povm(ops: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """POVM maximising sum_a Tr(M_a O_a), with a flag saying whether it is exact.

    Two outcomes: projector onto the positive eigenspace of O_0 - O_1. More outcomes: an SDP
    over the real embedding of the Hermitian effects.
    """
    ops = np.asarray(ops)
    k, d = ops.shape[0], ops.shape[1]
    if k == 1:
        return np.eye(d, dtype=complex)[None], float(np.trace(ops[0]).real), True
    if k == 2:
        w, v = np.linalg.eigh(_herm_clean(ops[0] - ops[1]))
        pos = v[:, w > 0]
        m0 = pos @ pos.conj().T
        eff = np.array([m0, np.eye(d) - m0])
        return eff, float(np.real(np.einsum("aij,aji->", eff, ops))), True
    basis = sym_basis_constraints(2 * d)
    b = np.einsum("kij,ij->k", basis, np.eye(2 * d))
    c = tuple(-hermitian_to_real(o) / 2 for o in ops)
    res = solve_sdp(SdpProblem(tuple(basis for _ in range(k)), c, b)).squeeze()
    eff = _normalise_povm([real_to_hermitian(x) for x in res.x_psd])
    return eff, float(np.real(np.einsum("aij,aji->", eff, ops))), res.status == "optimal"


def _value(tau, coeffs, m, n):
    p = np.real(np.einsum("xyijkl,aki,blj->abxy", tau, m, n, optimize=True))
    return float(np.sum(coeffs * p))


def _seesaw_run(args):
    tau, coeffs, seed, max_sweeps, tol = args
    rng = as_rng(seed)
    na, nb = coeffs.shape[:2]
    da, db = tau.shape[2], tau.shape[3]
    n = np.array(projective_measurement(db, nb, rng))
    m = np.array(projective_measurement(da, na, rng))
    value = _value(tau, coeffs, m, n)
    history = [value]
    converged = False
    for _ in range(max_sweeps):
        ops_a = np.einsum("abxy,xybik->aik", coeffs, _reduce_bob(tau, n))
        m_new, v_new, _ = optimal_povm(ops_a)
        if v_new >= value:
            m, value = m_new, v_new
        ops_b = np.einsum("abxy,xyajl->bjl", coeffs, _reduce_alice(tau, m))
        n_new, v_new, _ = optimal_povm(ops_b)
        if v_new >= value:
            n, value = n_new, v_new
        history.append(value)
        if history[-1] - history[-2] < tol:
            converged = True
            break
    return value, m, n, history, converged


def seesaw_tau(tau: np.ndarray, gamma: BellFunctional, restarts: int = RESTARTS, seed=0,
               max_sweeps: int = MAX_SWEEPS, tol: float = SEESAW_TOL, jobs: int = 1) -> SeesawResult:
    """See-saw over single POVMs M^a on the A side and N^b on the B side of tau[x, y].

    ``tau`` has shape (n_x, n_y, d_A, d_B, d_A, d_B).
    """
    coeffs = gamma.coeffs
    na, nb, nx, ny = coeffs.shape
    if tau.shape[:2] != (nx, ny):
        raise ValueError("functional settings do not match the number of inputs")
    if not np.any(coeffs):
        da, db = tau.shape[2], tau.shape[3]
        triv_a = MeasurementFamily.single([np.eye(da)] + [np.zeros((da, da))] * (na - 1))
        triv_b = MeasurementFamily.single([np.eye(db)] + [np.zeros((db, db))] * (nb - 1))
        return SeesawResult(0.0, triv_a, triv_b, [0.0], True, [0.0])
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    tasks = [(tau, coeffs, s, max_sweeps, tol) for s in seeds]
    if jobs > 1 and restarts > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_seesaw_run, tasks))
    else:
        runs = [_seesaw_run(t) for t in tasks]
    best = max(range(len(runs)), key=lambda i: runs[i][0])
    value, m, n, history, converged = runs[best]
    return SeesawResult(value, MeasurementFamily.single(list(_normalise_povm(m))),
                        MeasurementFamily.single(list(_normalise_povm(n))), history, converged,
                        [r[0] for r in runs])


def seesaw_gamma_max(ch: ChoiChannel, gamma: BellFunctional, rho_x: Sequence, sigma_y: Sequence,
                     ancilla_dims: tuple[int, int] = (1, 1), restarts: int = RESTARTS, seed=0,
                     max_sweeps: int = MAX_SWEEPS, tol: float = SEESAW_TOL, jobs: int = 1) -> SeesawResult:
    """Lower bound on max over M^a, N^b of gamma(p) for fixed inputs rho^x, sigma^y.

    Effects act on (R, A1) and (S, B1) and do not depend on the setting; the setting
    enters only through the input state.
    """
    if not ch.is_bipartite:
        raise ValueError("bipartite channel required")
    dr, ds = ancilla_dims
    tau = output_states(ch, rho_x, sigma_y, (dr, ds))
    da, db = dr * ch.out_dims[0], ds * ch.out_dims[1]
    tau = tau.reshape(len(rho_x), len(sigma_y), da, db, da, db)
    return seesaw_tau(tau, gamma, restarts, seed, max_sweeps, tol, jobs)


# ---------------------------------------------------------------------------
# PPT relaxation of the product-effect maximum


def _herm_basis(n: int) -> sp.csr_matrix:
    """Orthonormal Hermitian basis as columns of a (n^2, n^2) complex matrix over row-major vec."""
    rows, cols, vals = [], [], []
    k = 0
    for i in range(n):
        rows.append(i * n + i)
        cols.append(k)
        vals.append(1.0)
        k += 1
    r2 = 1 / np.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            rows += [i * n + j, j * n + i]
            cols += [k, k]
            vals += [r2, r2]
            k += 1
            rows += [i * n + j, j * n + i]
            cols += [k, k]
            vals += [1j * r2, -1j * r2]
            k += 1
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n * n, n * n))


def _from_params(basis: sp.csr_matrix, x: np.ndarray, n: int) -> np.ndarray:
    return _herm_clean((basis @ x).reshape(n, n))


def _ptrace_b(na: int, nb: int) -> sp.csr_matrix:
    rows, cols = [], []
    for i in range(na):
        for k in range(na):
            for j in range(nb):
                rows.append(i * na + k)
                cols.append((i * nb + j) * na * nb + (k * nb + j))
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(na * na, (na * nb) ** 2))


def _ptrace_a(na: int, nb: int) -> sp.csr_matrix:
    rows, cols = [], []
    for j in range(nb):
        for l in range(nb):
            for i in range(na):
                rows.append(j * nb + l)
                cols.append((i * nb + j) * na * nb + (i * nb + l))
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(nb * nb, (na * nb) ** 2))


def _ptranspose_b(na: int, nb: int) -> sp.csr_matrix:
    n = na * nb
    idx = np.arange(n * n).reshape(na, nb, na, nb)
    perm = idx.transpose(0, 3, 2, 1).reshape(-1)
    return sp.csr_matrix((np.ones(n * n), (np.arange(n * n), perm)), shape=(n * n, n * n))


def _svec_embed(n: int) -> sp.csr_matrix:
    """svec of [[Re, -Im], [Im, Re]] from [Re vec; Im vec]: lower triangle, column-major, off-diagonals x sqrt 2."""
    m = 2 * n
    rows, cols, vals = [], [], []
    r = 0
    for j in range(m):
        for i in range(j, m):
            scale = 1.0 if i == j else np.sqrt(2)
            bi, ii = divmod(i, n)
            bj, jj = divmod(j, n)
            flat = ii * n + jj
            if bi == bj:  # Re block
                rows.append(r)
                cols.append(flat)
                vals.append(scale)
            else:  # lower-left Im block; the upper-right -Im block is never stored
                rows.append(r)
                cols.append(n * n + flat)
                vals.append(scale)
            r += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(m * (m + 1) // 2, 2 * n * n))


def _realify(c: sp.spmatrix) -> sp.csr_matrix:
    c = sp.csr_matrix(c)
    return sp.vstack([c.real, c.imag]).tocsr()


def gamma_operators(gamma: BellFunctional, rho_x: Sequence, sigma_y: Sequence) -> np.ndarray:
    """Gamma^{ab} = sum_xy gamma_{ab,xy} rho^x (x) sigma^y."""
    rx = np.asarray(rho_x)
    sy = np.asarray(sigma_y)
    g = np.einsum("abxy,xij,ykl->abikjl", gamma.coeffs, rx, sy, optimize=True)
    na, nb = gamma.coeffs.shape[:2]
    n = rx.shape[1] * sy.shape[1]
    return g.reshape(na, nb, n, n)


def _repair_dual(gam, lam, xi, q, da, db):
    """Turn an approximate dual point into an exactly feasible one and return its value.

    Feasibility: Tr_A Xi_b = 0, Q_ab >= 0, Lam_a + Xi_b - Gamma^ab - PT_B(Q_ab) >= 0,
    Y >= Tr_B Lam_a. The returned Tr(Y) upper-bounds sum_ab Tr(Gamma^ab Z^ab) for every
    feasible (Z, M, N), by weak duality.
    """
    ka, kb, n, _ = gam.shape
    xi = np.array([x - np.kron(np.eye(da), np.einsum("ijil->jl", x.reshape(da, db, da, db))) / da
                   for x in xi])
    qq = np.empty_like(q)
    for a in range(ka):
        for b in range(kb):
            w, v = np.linalg.eigh(_herm_clean(q[a, b]))
            qq[a, b] = (v * np.clip(w, 0, None)) @ v.conj().T
    shift = np.zeros(ka)
    for a in range(ka):
        for b in range(kb):
            pt = qq[a, b].reshape(da, db, da, db).transpose(0, 3, 2, 1).reshape(n, n)
            r = _herm_clean(lam[a] + xi[b] - gam[a, b] - pt)
            lo = np.linalg.eigvalsh(r)[0]
            shift[a] = max(shift[a], -lo)
    # a little headroom covers eigenvalue round-off
    scale = 1 + max(np.abs(gam).max(), np.abs(lam).max())
    lam = np.array([_herm_clean(lam[a]) + (shift[a] + 1e-12 * scale) * np.eye(n) for a in range(ka)])
    t = np.array([np.einsum("ijkj->ik", l.reshape(da, db, da, db)) for l in lam])
    tbar = t.mean(axis=0)
    top = max(np.linalg.eigvalsh(_herm_clean(ta - tbar))[-1] for ta in t)
    y = _herm_clean(tbar) + (top + 1e-12 * scale) * np.eye(da)
    return float(np.trace(y).real), {"lambda": lam, "xi": xi, "q": qq, "y": y, "shifts": shift}


def ppt_upper_bound(gamma: BellFunctional, rho_x: Sequence, sigma_y: Sequence,
                    eps: float = 1e-9, max_iters: int = 200000) -> tuple[float, dict]:
    """Upper bound on max over product effects via the PPT relaxation (SCS + dual repair)."""
    import scs

    gam = gamma_operators(gamma, rho_x, sigma_y)
    ka, kb, n, _ = gam.shape
    da = np.asarray(rho_x).shape[1]
    db = np.asarray(sigma_y).shape[1]
    ba, bn = _herm_basis(da), _herm_basis(n)
    pa, pn = da * da, n * n
    nvar = pa + (ka + kb + ka * kb) * pn
    off_lam = pa
    off_xi = off_lam + ka * pn
    off_q = off_xi + kb * pn

    def place(block, offset):
        block = sp.csr_matrix(block)
        pad_l = sp.csr_matrix((block.shape[0], offset))
        pad_r = sp.csr_matrix((block.shape[0], nvar - offset - block.shape[1]))
        return sp.hstack([pad_l, block, pad_r])

    trb = _ptrace_b(da, db) @ bn
    tra = _ptrace_a(da, db) @ bn
    ptb = _ptranspose_b(da, db) @ bn
    emb_a, emb_n = _svec_embed(da), _svec_embed(n)
    ob = _herm_basis(db)

    a_rows, b_rows, cones = [], [], []
    # zero cone: coordinates of Tr_A Xi_b in an orthonormal Hermitian basis
    for b in range(kb):
        coord = (ob.conj().T @ tra).real
        a_rows.append(place(coord, off_xi + b * pn))
        b_rows.append(np.zeros(coord.shape[0]))
    n_zero = sum(r.shape[0] for r in a_rows)
    # Y - Tr_B Lam_a >= 0
    for a in range(ka):
        expr = sp.hstack([sp.csr_matrix(ba), sp.csr_matrix((pa, off_lam - pa + a * pn)),
                          -trb, sp.csr_matrix((pa, nvar - off_lam - (a + 1) * pn))])
        a_rows.append(-(emb_a @ _realify(expr)))
        b_rows.append(np.zeros(emb_a.shape[0]))
        cones.append(2 * da)
    # Lam_a + Xi_b - PT(Q_ab) - Gamma^ab >= 0
    for a in range(ka):
        for b in range(kb):
            expr = place(bn, off_lam + a * pn) + place(bn, off_xi + b * pn) - place(ptb, off_q + (a * kb + b) * pn)
            a_rows.append(-(emb_n @ _realify(expr)))
            g = gam[a, b].reshape(-1)
            b_rows.append(emb_n @ np.concatenate([-g.real, -g.imag]))
            cones.append(2 * n)
    # Q_ab >= 0
    for k in range(ka * kb):
        expr = place(bn, off_q + k * pn)
        a_rows.append(-(emb_n @ _realify(expr)))
        b_rows.append(np.zeros(emb_n.shape[0]))
        cones.append(2 * n)
    a_mat = sp.vstack(a_rows).tocsc()
    b_vec = np.concatenate(b_rows)
    c = np.zeros(nvar)
    c[:da] = 1.0  # Tr Y: the diagonal basis elements come first
    solver = scs.SCS({"A": a_mat, "b": b_vec, "c": c}, {"z": n_zero, "s": cones},
                     eps_abs=eps, eps_rel=eps, max_iters=max_iters, verbose=False)
    sol = solver.solve()
    x = sol["x"]
    lam = np.array([_from_params(bn, x[off_lam + a * pn: off_lam + (a + 1) * pn], n) for a in range(ka)])
    xi = np.array([_from_params(bn, x[off_xi + b * pn: off_xi + (b + 1) * pn], n) for b in range(kb)])
    q = np.array([_from_params(bn, x[off_q + k * pn: off_q + (k + 1) * pn], n)
                  for k in range(ka * kb)]).reshape(ka, kb, n, n)
    if not np.all(np.isfinite(x)):
        lam = np.zeros((ka, n, n), dtype=complex)
        xi = np.zeros((kb, n, n), dtype=complex)
        q = np.zeros((ka, kb, n, n), dtype=complex)
    bound, cert = _repair_dual(gam, lam, xi, q, da, db)
    # repairing the zero point gives Lam_a = max_b lambda_max(Gamma^ab) 1, always valid
    trivial, _ = _repair_dual(gam, np.zeros_like(lam), np.zeros_like(xi), np.zeros_like(q), da, db)
    info = {"status": sol["info"]["status"], "solver_objective": float(sol["info"]["pobj"]),
            "iterations": int(sol["info"]["iter"]), "repair_shifts": cert["shifts"],
            "trivial_bound": trivial, "used_trivial_bound": trivial < bound}
    bound = min(bound, trivial)
    return bound, info


def mdi_losr_test(ch: ChoiChannel, gamma: BellFunctional, rho_x: Sequence, sigma_y: Sequence,
                  restarts: int = RESTARTS, seed=0, jobs: int = 1, margin: float = LOSR_MARGIN) -> CertificateReport:
    """Certify a channel as not LOSR when gamma(p_E) beats every product-effect strategy.

    The inputs must span the operator spaces on (R, A0) and (S, B0), with R of the size of
    A0 and S of the size of B0. Readout is in the generalized Bell basis on (R, A1), (S, B1).
    """
    if not ch.is_bipartite:
        raise ValueError("bipartite channel required")
    da0, db0 = ch.in_dims
    da1, db1 = ch.out_dims
    if da0 != da1 or db0 != db1:
        raise ValueError(f"unsupported dimensions {ch.in_dims}->{ch.out_dims}: "
                         "Bell-basis readout is implemented for equal input and output sizes only")
    rx = [np.asarray(r, dtype=complex) for r in rho_x]
    sy = [np.asarray(s, dtype=complex) for s in sigma_y]
    for name, fam, d in (("alice", rx, da0), ("bob", sy, db0)):
        if any(r.shape != (d * d, d * d) for r in fam):
            raise ValueError(f"{name} inputs must be states on (ancilla, input) of size {d * d}")
        rank = operator_span_rank(fam)
        if rank != d ** 4:
            raise ValueError(f"{name} inputs span an operator space of dimension {rank}, need {d ** 4}")
    shape = (da0 * da1, db0 * db1, len(rx), len(sy))
    if gamma.coeffs.shape != shape:
        raise ValueError(f"functional shape {gamma.coeffs.shape} does not match {shape}")
    spec = ProtocolSpec("product-input", rx, sy, bell_measurement(da0), bell_measurement(db0), (da0, db0))
    p = run_protocol(spec, ch)
    lhs = bell_value(gamma, p)
    tolerances = {"margin": margin}
    if not np.any(gamma.coeffs):
        return CertificateReport("LOSR", INCONCLUSIVE, {"lhs": lhs}, tolerances,
                                 details={"reason": "zero functional"})
    tau = np.einsum("xij,ykl->xyikjl", np.array(rx), np.array(sy))
    na, nb = rx[0].shape[0], sy[0].shape[0]
    tau = tau.reshape(len(rx), len(sy), na, nb, na, nb)
    lower = seesaw_tau(tau, gamma, restarts, seed, jobs=jobs)
    upper, info = ppt_upper_bound(gamma, rx, sy)
    residuals = {"lhs": lhs, "seesaw_lower": lower.value, "ppt_upper": upper,
                 "margin": lhs - upper, "gap_lower": lhs - lower.value}
    details = {"solver": info, "distribution": p.table}
    if lhs > upper + margin:
        return CertificateReport("LOSR", OUTSIDE, residuals, tolerances, value=lhs, witness=gamma, details=details)
    return CertificateReport("LOSR", INCONCLUSIVE, residuals, tolerances, value=lhs, details=details)
