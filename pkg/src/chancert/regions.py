"""Region scan of the plane P(s, t) = s R + t S + (1 - s - t) 1_4.

Every membership set involved is convex and P is affine in (s, t), so two kinds of
certificate are reused across grid points:

* a point in the convex hull of points already certified inside is inside;
* a linear certificate (separating Bell functional, or dual moment-matrix certificate)
  found for one point excludes every point on which it is violated.

Only points left undecided by those certificates are solved directly, working from a
coarse sub-grid down to the full grid.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .bounds import NPA_SLACK, behaviour_moments, moment_matrix_spec, npa_margins
from .constructions import TSIRELSON_WEIGHT, cross_section_boxes, cross_section_point
from .correlations import LP_SEP_TOL, certify_ns, is_local, vertex_matrix
from .report import INCONCLUSIVE, INSIDE, OUTSIDE, SolverError

REGIONS = ("local", "npa2", "npa1", "ns", "signaling-excluded")
STRIDES = (16, 8, 4, 2, 1)


def grid(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """(s, t) for every cell of the square grid, s outer and t inner."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    v = np.linspace(0.0, 1.0, resolution)
    s, t = np.meshgrid(v, v, indexing="ij")
    return s.reshape(-1), t.reshape(-1)


def tables_for(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    r, sb, one = (b.table for b in cross_section_boxes())
    s = np.asarray(s)[:, None, None, None, None]
    t = np.asarray(t)[:, None, None, None, None]
    return s * r + t * sb + (1 - s - t) * one


def _local_solve(tables):
    out = []
    for t in tables:
        rep = is_local(t)
        f = rep.witness.coeffs.reshape(-1) if rep.verdict == OUTSIDE else None
        out.append((rep.verdict, f))
    return out


def _npa_solve(args):
    tables, level = args
    margins, status, certs = npa_margins(tables, level)
    return margins, status, certs


def _chunks(n, jobs):
    size = max(1, -(-n // max(1, jobs)))
    return [slice(k, min(n, k + size)) for k in range(0, n, size)]


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


class _ConvexScan:
    """Inside/outside bookkeeping for one convex set over a fixed list of points."""

    def __init__(self, st: np.ndarray):
        self.st = st
        self.state = np.zeros(len(st), dtype=int)  # 1 inside, -1 outside, 0 unknown
        self.solved = np.zeros(len(st), dtype=bool)
        self.inconclusive = np.zeros(len(st), dtype=bool)

    def propagate(self, cert_values: np.ndarray | None):
        """Extend verdicts with the hull of inside points and the outside certificates."""
        unknown = self.state == 0
        if cert_values is not None and unknown.any():
            hit = unknown & (cert_values.min(axis=1) < 0)
            self.state[hit] = -1
            unknown &= ~hit
        ins = self.st[(self.state == 1) & self.solved]
        if unknown.any() and len(ins) >= 3:
            try:
                tri = Delaunay(ins)
            except QhullError:
                return
            idx = np.flatnonzero(unknown)
            inside = tri.find_simplex(self.st[idx]) >= 0
            self.state[idx[inside]] = 1


def _scan(st, ij, strides, solve, cert_eval):
    """Coarse-to-fine scan. ``solve(idx)`` returns verdicts and new certificates for points."""
    scan = _ConvexScan(st)
    certs = []
    for h in strides:
        on_stride = (ij[:, 0] % h == 0) & (ij[:, 1] % h == 0)
        pick = np.flatnonzero((scan.state == 0) & on_stride)
        if len(pick) == 0:
            continue
        verdicts, new = solve(pick)
        scan.solved[pick] = True
        scan.state[pick] = np.where(verdicts == INSIDE, 1, np.where(verdicts == OUTSIDE, -1, 0))
        scan.inconclusive[pick] = verdicts == INCONCLUSIVE
        certs.extend(new)
        scan.propagate(cert_eval(certs) if certs else None)
    return scan


def classify_cross_section(resolution: int, jobs: int = 1, strides=STRIDES) -> dict:
    """Region label and per-set membership flags for every grid point.

    Returns a dict with arrays ``s``, ``t``, ``region`` and boolean ``local``, ``npa2``,
    ``npa1``, ``ns`` (False outside the probability simplex), plus solve counts.
    """
    s, t = grid(resolution)
    ij = np.stack([np.rint(s * (resolution - 1)), np.rint(t * (resolution - 1))], axis=1).astype(int)
    valid = ij.sum(axis=1) <= resolution - 1
    vidx = np.flatnonzero(valid)
    st = np.stack([s[vidx], t[vidx]], axis=1)
    ij = ij[vidx]
    tabs = tables_for(st[:, 0], st[:, 1])
    flat = tabs.reshape(len(tabs), -1)

    ns_flags = np.array([certify_ns(tb).verdict == INSIDE for tb in tabs])

    v = vertex_matrix(2, 2, 2, 2)

    def local_solve(idx):
        parts = _chunks(len(idx), jobs)
        res = _map(_local_solve, [tabs[idx[p]] for p in parts], jobs)
        res = [r for chunk in res for r in chunk]
        verdicts = np.array([r[0] for r in res], dtype=object)
        return verdicts, [r[1] for r in res if r[1] is not None]

    def local_eval(certs):
        f = np.array(certs)
        bound = (v @ f.T).max(axis=0)
        # violated when f.p - local_max > separation tolerance
        return -(flat @ f.T - bound[None] - LP_SEP_TOL)

    local = _scan(st, ij, strides, local_solve, local_eval)

    mom = behaviour_moments(tabs)
    npa = {}
    for level in (1, 2):
        spec = moment_matrix_spec(2, 2, level)

        def npa_solve(idx, level=level):
            parts = _chunks(len(idx), jobs)
            res = _map(_npa_solve, [(tabs[idx[p]], level) for p in parts], jobs)
            margins = np.concatenate([r[0] for r in res])
            status = np.concatenate([r[1] for r in res])
            certs = np.concatenate([r[2] for r in res])
            if np.any(status != "optimal"):
                bad = int(np.sum(status != "optimal"))
                raise SolverError(f"{bad} moment SDPs did not converge", "max_iter")
            verdicts = np.where(margins >= -NPA_SLACK, INSIDE, OUTSIDE).astype(object)
            out = certs[verdicts == OUTSIDE]
            return verdicts, [np.einsum("ij,lij->l", y, spec.known_basis) for y in out]

        def npa_eval(certs):
            c = np.array(certs)
            return mom @ c.T + NPA_SLACK

        npa[level] = _scan(st, ij, strides, npa_solve, npa_eval)

    region = np.full(len(s), "signaling-excluded", dtype=object)
    flags = {}
    for name, scan in (("local", local), ("npa2", npa[2]), ("npa1", npa[1])):
        f = np.zeros(len(s), dtype=bool)
        f[vidx] = scan.state == 1
        flags[name] = f
    f = np.zeros(len(s), dtype=bool)
    f[vidx] = ns_flags
    flags["ns"] = f
    sub = region[vidx]
    for name in ("ns", "npa1", "npa2", "local"):
        sub[flags[name][vidx]] = name
    region[vidx] = sub
    return {
        "s": s, "t": t, "region": region, **flags,
        "undecided": {"local": int(np.sum(local.state == 0)), "npa1": int(np.sum(npa[1].state == 0)),
                      "npa2": int(np.sum(npa[2].state == 0))},
        "solved": {"local": int(local.solved.sum()), "npa1": int(npa[1].solved.sum()),
                   "npa2": int(npa[2].solved.sum())},
    }


def nesting_violations(result: dict) -> np.ndarray:
    """Grid indices where local => npa2 => npa1 => ns fails."""
    loc, n2, n1, ns = (result[k] for k in ("local", "npa2", "npa1", "ns"))
    bad = (loc & ~n2) | (n2 & ~n1) | (n1 & ~ns)
    return np.flatnonzero(bad)


def tsirelson_edge_point() -> tuple[float, float]:
    """The point on the R-S edge whose CHSH value is 2 sqrt 2."""
    return TSIRELSON_WEIGHT, 1 - TSIRELSON_WEIGHT


def edge_point_table() -> np.ndarray:
    return cross_section_point(*tsirelson_edge_point())


def edge_boundary(target: str, tol: float = 1e-6) -> float:
    """Largest weight w with w R + (1 - w) S still inside ``target`` (local, npa1 or npa2), by bisection."""
    if target == "local":
        def inside(w):
            rep = is_local(cross_section_point(w, 1 - w))
            if rep.verdict == INCONCLUSIVE:
                raise SolverError("local LP inconclusive during bisection", "inconclusive")
            return rep.verdict == INSIDE
    elif target in ("npa1", "npa2"):
        level = int(target[-1])

        def inside(w):
            m, status, _ = npa_margins(cross_section_point(w, 1 - w), level)
            if status[0] != "optimal":
                raise SolverError(f"moment SDP did not converge ({status[0]})", str(status[0]))
            return m[0] >= -NPA_SLACK
    else:
        raise ValueError(f"unknown target {target!r}")
    lo, hi = 0.5, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
