"""Batched primal-dual interior-point solver for small dense semidefinite programs.

Standard form, one problem per batch entry:

    minimise   <C, X>
    subject to <A_i, X> = b_i          i = 1..m
               X = (X_1, ..., X_r, x)  with X_j PSD (n_j x n_j) and x >= 0

Dual: maximise b.y subject to C - sum_i y_i A_i = S in the same cone.

The constraint matrices are shared across the batch; C and b may vary per entry.
Search directions are HKM with Mehrotra predictor-corrector; entries that reach the
tolerance are frozen while the rest keep iterating.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
NUMERICAL = "numerical_failure"


@dataclass(frozen=True, eq=False)
class SdpProblem:
    a_psd: tuple[np.ndarray, ...]
    c_psd: tuple[np.ndarray, ...]
    b: np.ndarray
    a_lin: np.ndarray | None = None
    c_lin: np.ndarray | None = None

    def __post_init__(self):
        a_psd = tuple(np.asarray(a, dtype=float) for a in self.a_psd)
        c_psd = tuple(np.asarray(c, dtype=float) for c in self.c_psd)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a_psd", a_psd)
        object.__setattr__(self, "c_psd", c_psd)
        object.__setattr__(self, "b", b)
        m = b.shape[-1]
        if len(a_psd) != len(c_psd):
            raise ValueError("one objective block per constraint block required")
        for a, c in zip(a_psd, c_psd):
            if a.ndim != 3 or a.shape[0] != m or a.shape[1] != a.shape[2]:
                raise ValueError(f"constraint block of shape {a.shape} does not fit m={m}")
            if np.abs(a - a.transpose(0, 2, 1)).max(initial=0.0) > 1e-12:
                raise ValueError("constraint matrices must be symmetric")
            if c.shape[-2:] != a.shape[1:]:
                raise ValueError("objective block size mismatch")
            if np.abs(c - np.swapaxes(c, -1, -2)).max(initial=0.0) > 1e-12:
                raise ValueError("objective matrices must be symmetric")
        if (self.a_lin is None) != (self.c_lin is None):
            raise ValueError("linear block needs both a_lin and c_lin")
        if self.a_lin is not None:
            a_lin = np.asarray(self.a_lin, dtype=float)
            c_lin = np.asarray(self.c_lin, dtype=float)
            if a_lin.ndim != 2 or a_lin.shape[0] != m or c_lin.shape[-1] != a_lin.shape[1]:
                raise ValueError("linear block shape mismatch")
            object.__setattr__(self, "a_lin", a_lin)
            object.__setattr__(self, "c_lin", c_lin)

    @property
    def m(self) -> int:
        return self.b.shape[-1]

    @property
    def blocks(self) -> tuple[int, ...]:
        return tuple(a.shape[1] for a in self.a_psd)

    @property
    def n_lin(self) -> int:
        return 0 if self.a_lin is None else self.a_lin.shape[1]

    @property
    def batch(self) -> int | None:
        sizes = {self.b.shape[0]} if self.b.ndim == 2 else set()
        for c in self.c_psd:
            if c.ndim == 3:
                sizes.add(c.shape[0])
        if self.c_lin is not None and self.c_lin.ndim == 2:
            sizes.add(self.c_lin.shape[0])
        if len(sizes) > 1:
            raise ValueError(f"inconsistent batch sizes {sizes}")
        return sizes.pop() if sizes else None


@dataclass
class SdpResult:
    x_psd: list[np.ndarray]
    x_lin: np.ndarray
    y: np.ndarray
    s_psd: list[np.ndarray]
    s_lin: np.ndarray
    primal: np.ndarray
    dual: np.ndarray
    status: np.ndarray
    iterations: np.ndarray
    gap: np.ndarray
    primal_infeasibility: np.ndarray
    dual_infeasibility: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.status == OPTIMAL

    def squeeze(self) -> "SdpResult":
        return SdpResult([x[0] for x in self.x_psd], self.x_lin[0], self.y[0],
                         [s[0] for s in self.s_psd], self.s_lin[0],
                         self.primal[0], self.dual[0], self.status[0], self.iterations[0],
                         self.gap[0], self.primal_infeasibility[0], self.dual_infeasibility[0])


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


class _Ops:
    def __init__(self, prob: SdpProblem):
        self.a = [a.reshape(a.shape[0], -1) for a in prob.a_psd]
        self.shapes = prob.blocks
        self.al = prob.a_lin
        full = np.concatenate(self.a + ([self.al] if self.al is not None else []), axis=1)
        # pseudo-inverse of A A^T, used to keep primal directions on A dx = r_p
        self.gram_pinv = np.linalg.pinv(full @ full.T, rcond=1e-12)

    def project(self, dxs, dxl, target):
        """Add the least-norm correction that makes A(dx) equal ``target`` exactly."""
        v = (target - self.amap(dxs, dxl)) @ self.gram_pinv
        blocks, lin = self.atmap(v)
        return [d + e for d, e in zip(dxs, blocks)], dxl + lin if dxl.shape[1] else dxl

    def amap(self, xs, xl):
        out = 0.0
        for a, x in zip(self.a, xs):
            out = out + x.reshape(x.shape[0], -1) @ a.T
        if self.al is not None:
            out = out + xl @ self.al.T
        return out

    def atmap(self, y):
        blocks = [(y @ a).reshape(y.shape[0], n, n) for a, n in zip(self.a, self.shapes)]
        lin = y @ self.al if self.al is not None else np.zeros((y.shape[0], 0))
        return blocks, lin


def _inner(xs, ss, xl, sl):
    out = sum(np.einsum("bij,bij->b", x, s) for x, s in zip(xs, ss))
    if xl.shape[1]:
        out = out + np.einsum("bi,bi->b", xl, sl)
    return out


def _max_step_psd(x, dx):
    """Largest alpha with x + alpha dx PSD (inf when dx keeps x PSD for every alpha)."""
    linv = np.linalg.inv(_chol(x))
    with np.errstate(over="ignore", invalid="ignore"):
        t = _sym(linv @ dx @ np.swapaxes(linv, -1, -2))
    ok = np.isfinite(t).all(axis=(1, 2))
    lam = np.full(x.shape[0], -np.inf)
    if ok.any():
        lam[ok] = np.linalg.eigvalsh(t[ok])[:, 0]
    with np.errstate(divide="ignore"):
        return np.where(lam < 0, -1.0 / lam, np.inf)


def _chol(x):
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(x)
        return v * np.sqrt(np.maximum(w, 1e-300))[:, None, :]


def _max_step_lin(x, dx):
    if x.shape[1] == 0:
        return np.full(x.shape[0], np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dx < 0, -x / dx, np.inf)
    return r.min(axis=1)


def _solve_batch(m_mat, h):
    try:
        return np.linalg.solve(m_mat, h[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(h)
        for i in range(h.shape[0]):
            out[i] = np.linalg.lstsq(m_mat[i], h[i], rcond=None)[0]
        return out


def solve_sdp(prob: SdpProblem, tol: float = 1e-8, max_iter: int = 200,
              step_fraction: float = 0.98) -> SdpResult:
    """Solve every problem in the batch. Unbatched problems come back with batch size 1.

    Infeasible or unbounded entries end with a non-optimal status rather than an exception.
    """
    # diverging entries produce inf/nan on the way to a non-optimal status
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        return _solve(prob, tol, max_iter, step_fraction)


def _solve(prob, tol, max_iter, step_fraction):
    batch = prob.batch or 1
    ops = _Ops(prob)
    m = prob.m
    nb = len(prob.blocks)
    k = prob.n_lin
    nu = sum(prob.blocks) + k

    c = [np.broadcast_to(cj, (batch,) + cj.shape[-2:]).copy() for cj in prob.c_psd]
    cl = np.broadcast_to(prob.c_lin, (batch, k)).copy() if k else np.zeros((batch, 0))
    b = np.broadcast_to(prob.b, (batch, m)).copy()

    a_norm = max([np.linalg.norm(a, axis=1).max(initial=0.0) for a in ops.a] +
                 ([np.linalg.norm(ops.al, axis=1).max(initial=0.0)] if k else []))
    c_norm = np.sqrt(sum(np.einsum("bij,bij->b", cj, cj) for cj in c) + np.einsum("bi,bi->b", cl, cl)) \
        if (nb or k) else np.zeros(batch)
    b_norm = np.linalg.norm(b, axis=1)
    n_max = max(list(prob.blocks) + [k, 1])
    xi = max(10.0, np.sqrt(n_max), n_max * float(np.max((1 + np.abs(b)) / (1 + a_norm))))
    eta = max(10.0, np.sqrt(n_max), float(max(a_norm, np.max(c_norm))))

    xs = [np.broadcast_to(xi * np.eye(n), (batch, n, n)).copy() for n in prob.blocks]
    ss = [np.broadcast_to(eta * np.eye(n), (batch, n, n)).copy() for n in prob.blocks]
    xl = np.full((batch, k), xi)
    sl = np.full((batch, k), eta)
    y = np.zeros((batch, m))

    status = np.full(batch, MAX_ITER, dtype=object)
    iters = np.zeros(batch, dtype=int)
    gap_out = np.full(batch, np.inf)
    pinf_out = np.full(batch, np.inf)
    dinf_out = np.full(batch, np.inf)
    active = np.arange(batch)
    stalled = np.zeros(batch, dtype=int)

    for it in range(max_iter + 1):
        if active.size == 0:
            break
        X = [x[active] for x in xs]
        S = [s[active] for s in ss]
        XL, SL, Y = xl[active], sl[active], y[active]
        C = [cj[active] for cj in c]
        CL, Bv = cl[active], b[active]

        rp = Bv - ops.amap(X, XL)
        aty, atyl = ops.atmap(Y)
        rd = [cj - a - s for cj, a, s in zip(C, aty, S)]
        rdl = CL - atyl - SL
        xs_gap = _inner(X, S, XL, SL)
        pobj = _inner(C, X, CL, XL)
        dobj = np.einsum("bi,bi->b", Bv, Y)
        scale = 1 + np.abs(pobj) + np.abs(dobj)
        rel_gap = np.maximum(xs_gap, np.abs(pobj - dobj)) / scale
        pinf = np.linalg.norm(rp, axis=1) / (1 + b_norm[active])
        dres = np.sqrt(sum(np.einsum("bij,bij->b", r, r) for r in rd) + np.einsum("bi,bi->b", rdl, rdl)) \
            if (nb or k) else np.zeros(active.size)
        dinf = dres / (1 + c_norm[active])
        gap_out[active], pinf_out[active], dinf_out[active] = rel_gap, pinf, dinf
        iters[active] = it
        done = (rel_gap < tol) & (pinf < tol) & (dinf < tol)
        bad = ~np.isfinite(rel_gap) | ~np.isfinite(pinf) | ~np.isfinite(dinf) | (stalled[active] >= 5)
        status[active[done]] = OPTIMAL
        status[active[bad]] = NUMERICAL
        keep = ~(done | bad)
        if it == max_iter or not keep.any():
            break
        if not keep.all():
            active = active[keep]
            X = [x[keep] for x in X]
            S = [s[keep] for s in S]
            XL, SL, Y, C, CL = XL[keep], SL[keep], Y[keep], [cj[keep] for cj in C], CL[keep]
            rp, rd, rdl, xs_gap = rp[keep], [r[keep] for r in rd], rdl[keep], xs_gap[keep]
        bsz = active.size
        mu = xs_gap / nu

        # Schur complement M_ij = Tr(A_i X A_j S^-1) = <G_i, G_j> with G_i = Lx^T A_i Ls^-T;
        # factoring G^T by QR avoids squaring the condition number of M.
        sinv, cols = [], []
        for a, n, x, s in zip(ops.a, prob.blocks, X, S):
            lx = _chol(x)
            ls_inv = np.linalg.inv(_chol(s))
            sinv.append(np.swapaxes(ls_inv, -1, -2) @ ls_inv)
            g = np.swapaxes(lx, -1, -2)[:, None] @ a.reshape(m, n, n)[None] @ np.swapaxes(ls_inv, -1, -2)[:, None]
            cols.append(g.reshape(bsz, m, n * n))
        dl = XL / SL if k else None
        if k:
            cols.append(ops.al[None] * np.sqrt(dl)[:, None, :])
        r_fac = np.linalg.qr(np.swapaxes(np.concatenate(cols, axis=2), 1, 2), mode="r")
        xrs = [x @ r @ si for x, r, si in zip(X, rd, sinv)]
        xrs_l = dl * rdl if k else np.zeros((bsz, 0))

        def direction(sig, corr, corr_l):
            r_blocks = []
            for x, si, cb in zip(X, sinv, corr):
                rb = (sig * mu)[:, None, None] * si - x
                if cb is not None:
                    rb = rb - cb @ si
                r_blocks.append(rb)
            if k:
                rl = ((sig * mu)[:, None] - XL * SL - (corr_l if corr_l is not None else 0.0)) / SL
            else:
                rl = np.zeros((bsz, 0))
            h = rp - ops.amap(r_blocks, rl) + ops.amap(xrs, xrs_l)
            dy = _solve_batch(r_fac, _solve_batch(np.swapaxes(r_fac, 1, 2), h))
            aty_d, atyl_d = ops.atmap(dy)
            ds = [r - a for r, a in zip(rd, aty_d)]
            dx = [_sym(rb - x @ d @ si) for rb, x, d, si in zip(r_blocks, X, ds, sinv)]
            dsl = rdl - atyl_d
            dxl = rl - dl * dsl if k else rl
            dx, dxl = ops.project(dx, dxl, rp)
            return dx, dxl, dy, ds, dsl

        def steps(dx, dxl, ds, dsl):
            ap = _max_step_lin(XL, dxl)
            ad = _max_step_lin(SL, dsl)
            for x, d in zip(X, dx):
                ap = np.minimum(ap, _max_step_psd(x, d))
            for s, d in zip(S, ds):
                ad = np.minimum(ad, _max_step_psd(s, d))
            return ap, ad

        zeros = np.zeros(bsz)
        dx, dxl, dy, ds, dsl = direction(zeros, [None] * nb, None)
        ap, ad = steps(dx, dxl, ds, dsl)
        ap, ad = np.minimum(1.0, ap), np.minimum(1.0, ad)
        xa = [x + ap[:, None, None] * d for x, d in zip(X, dx)]
        sa = [s + ad[:, None, None] * d for s, d in zip(S, ds)]
        mu_aff = _inner(xa, sa, XL + ap[:, None] * dxl, SL + ad[:, None] * dsl) / nu
        sigma = np.clip((mu_aff / np.maximum(mu, 1e-300)) ** 3, 0.0, 1.0)
        corr = [dxb @ dsb for dxb, dsb in zip(dx, ds)]
        corr_l = dxl * dsl if k else None
        dx, dxl, dy, ds, dsl = direction(sigma, corr, corr_l)
        ap, ad = steps(dx, dxl, ds, dsl)
        ap = np.minimum(1.0, step_fraction * ap)
        ad = np.minimum(1.0, step_fraction * ad)

        for j in range(nb):
            xs[j][active] = _sym(X[j] + ap[:, None, None] * dx[j])
            ss[j][active] = _sym(S[j] + ad[:, None, None] * ds[j])
        if k:
            xl[active] = XL + ap[:, None] * dxl
            sl[active] = SL + ad[:, None] * dsl
        y[active] = Y + ad[:, None] * dy
        # both step lengths collapsing means the directions are no longer useful
        stalled[active] = np.where((ap < 1e-10) & (ad < 1e-10), stalled[active] + 1, 0)

    pobj = _inner([cj for cj in c], xs, cl, xl)
    dobj = np.einsum("bi,bi->b", b, y)
    return SdpResult(xs, xl, y, ss, sl, pobj, dobj, status, iters, gap_out, pinf_out, dinf_out)


def sym_basis_constraints(n: int, rows: Sequence[tuple[int, int]] | None = None) -> np.ndarray:
    """Matrices E with <E, X> = X_ij for the requested (i <= j) positions."""
    if rows is None:
        rows = [(i, j) for i in range(n) for j in range(i, n)]
    out = np.zeros((len(rows), n, n))
    for r, (i, j) in enumerate(rows):
        if i == j:
            out[r, i, i] = 1.0
        else:
            out[r, i, j] = out[r, j, i] = 0.5
    return out


def hermitian_to_real(h: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]]; preserves positivity and doubles traces."""
    h = np.asarray(h)
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def real_to_hermitian(r: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hermitian_to_real` after averaging out any non-complex structure."""
    n = r.shape[-1] // 2
    a, b = r[..., :n, :n], r[..., :n, n:]
    c, d = r[..., n:, :n], r[..., n:, n:]
    return 0.5 * (a + d) + 0.5j * (c - b)
