"""Command-line front end.

Exit codes: 0 success or inside, 1 certified outside or a failed validity check,
2 input error, 3 solver non-convergence or an inconclusive certificate.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import fileio
from .bounds import negativity_grid, npa_membership
from .channels import ChoiChannel, SuperchannelChoi, is_cptp, is_qns, is_superchannel
from .correlations import (BellFunctional, CapExceeded, ConditionalDistribution, bell_value, build_witness,
                           certify_ns, chsh, is_local, witness_value)
from .dephasing import GRAM_DIAG_TOL, GRAM_PSD_TOL, decoherent_action, decoherent_distribution
from .fileio import FileFormatError
from .protocols import POVM_TOL, lose_from_strategy, run_protocol
from .regions import classify_cross_section
from .report import INCONCLUSIVE, INSIDE, OUTSIDE, SolverError
from .seesaw import RESTARTS, mdi_losr_test, seesaw_gamma_max
from .tensor import min_eig

EXIT_OK, EXIT_OUTSIDE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
VERDICT_EXIT = {INSIDE: EXIT_OK, OUTSIDE: EXIT_OUTSIDE, INCONCLUSIVE: EXIT_SOLVER}


class _Context:
    def __init__(self, argv):
        self.argv = list(argv)
        self.start = time.perf_counter()

    def emit(self, args, results: dict, seed=None):
        doc = fileio.report_json(["chancert"] + self.argv, results, seed, time.perf_counter() - self.start)
        _write(fileio.write_json(doc), args.output)


def _write(text: str, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _matrix(path, *kinds):
    f = fileio.read_matrix(path)
    if kinds and f.kind not in kinds:
        raise FileFormatError(f"{path}: expected kind {' or '.join(kinds)}, got {f.kind}")
    return f


def _functional(spec: str) -> BellFunctional:
    if spec == "chsh":
        return chsh()
    return _matrix(spec, "functional").to_object()


def _distribution(path) -> ConditionalDistribution:
    f = _matrix(path, "choi", "stochastic")
    obj = f.to_object()
    if isinstance(obj, ChoiChannel):
        return decoherent_distribution(obj)
    if not isinstance(obj, ConditionalDistribution):
        raise FileFormatError("stochastic file needs bipartite in/out dims to be read as a distribution")
    return obj


def _check(name, ok, residuals, tolerances):
    return {"check": name, "verdict": INSIDE if ok else OUTSIDE,
            "residuals": {k: float(v) for k, v in residuals.items()}, "tolerances": tolerances}


def _report_check(name, rep):
    return {"check": name, "verdict": rep.verdict, "residuals": rep.residuals, "tolerances": rep.tolerances}


def _herm_checks(m):
    herm = float(np.abs(m - m.conj().T).max())
    lam = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
    return herm, lam


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, ctx):
    f = _matrix(args.path)
    checks = []
    if f.kind == "choi":
        ch = f.to_object()
        checks.append(_report_check("cptp", is_cptp(ch)))
        if ch.is_bipartite:
            checks.append(_report_check("qns", is_qns(ch)))
        if args.superchannel:
            if not ch.is_bipartite:
                raise FileFormatError("superchannel check needs dims in=[A0, B0], out=[A1, B1]")
            checks.append(_report_check("superchannel", is_superchannel(SuperchannelChoi(ch.choi, ch.dims))))
    elif f.kind == "gram":
        g = f.to_object()
        herm, lam = _herm_checks(g)
        diag = float(np.abs(np.diag(g) - 1).max())
        checks.append(_check("gram", herm <= GRAM_DIAG_TOL and diag <= GRAM_DIAG_TOL and lam >= -GRAM_PSD_TOL,
                             {"hermiticity": herm, "unit_diagonal": diag, "min_eigenvalue": lam},
                             {"diagonal": GRAM_DIAG_TOL, "psd": -GRAM_PSD_TOL}))
    elif f.kind == "state":
        rho = f.to_object()
        herm, lam = _herm_checks(rho)
        tr = float(abs(np.trace(rho) - 1))
        checks.append(_check("state", herm <= POVM_TOL and lam >= -POVM_TOL and tr <= POVM_TOL,
                             {"hermiticity": herm, "min_eigenvalue": lam, "trace": tr}, {"max_norm": POVM_TOL}))
    elif f.kind == "stochastic":
        s = f.entries
        imag = float(np.abs(s.imag).max(initial=0.0))
        cols = float(np.abs(s.real.sum(axis=0) - 1).max())
        neg = float(max(0.0, -s.real.min()))
        checks.append(_check("stochastic", imag == 0 and cols <= 1e-10 and neg <= 1e-12,
                             {"imaginary": imag, "column_sums": cols, "negativity": neg},
                             {"column_sums": 1e-10, "negativity": 1e-12}))
        if len(f.dims.get("in", ())) == 2 and len(f.dims.get("out", ())) == 2 and checks[-1]["verdict"] == INSIDE:
            checks.append(_report_check("nonsignaling", certify_ns(f.to_object())))
    elif f.kind in ("povm-family", "strategy"):
        fams = [f.entries] if f.kind == "povm-family" else [f.parts.get("alice"), f.parts.get("bob")]
        if f.kind == "strategy":
            rho = f.entries
            herm, lam = _herm_checks(rho)
            tr = float(abs(np.trace(rho) - 1))
            checks.append(_check("state", herm <= POVM_TOL and lam >= -POVM_TOL and tr <= POVM_TOL,
                                 {"hermiticity": herm, "min_eigenvalue": lam, "trace": tr}, {"max_norm": POVM_TOL}))
        for k, e in enumerate(fams):
            if e is None or e.ndim != 4:
                raise FileFormatError("measurement entries must have shape (settings, outcomes, d, d)")
            d = e.shape[-1]
            herm = float(np.abs(e - np.conj(np.swapaxes(e, -1, -2))).max())
            lam = float(min(min_eig(x) for povm in e for x in povm))
            comp = float(np.abs(e.sum(axis=1) - np.eye(d)).max())
            res = {"hermiticity": herm, "min_eigenvalue": lam, "completeness": comp}
            if f.kind == "strategy":
                res["projectivity"] = float(np.abs(np.einsum("xaij,xajk->xaik", e, e) - e).max())
            ok = herm <= POVM_TOL and lam >= -POVM_TOL and comp <= POVM_TOL and res.get("projectivity", 0) <= POVM_TOL
            checks.append(_check(f"measurements[{k}]", ok, res, {"max_norm": POVM_TOL}))
    else:
        f.to_object()
        checks.append(_check(f.kind, True, {}, {}))
    ok = all(c["verdict"] == INSIDE for c in checks)
    ctx.emit(args, {"kind": f.kind, "valid": ok, "checks": checks})
    return EXIT_OK if ok else EXIT_OUTSIDE


def cmd_decohere(args, ctx):
    ch = _matrix(args.path, "choi").to_object()
    s = decoherent_action(ch)
    _write(fileio.write_json(fileio.stochastic_file(s, ch.in_dims, ch.out_dims).to_json()), args.output)
    return EXIT_OK


def cmd_certify(args, ctx):
    p = _distribution(args.path)
    if args.set == "local":
        rep = is_local(p)
    elif args.set == "ns":
        rep = certify_ns(p)
    else:
        rep = npa_membership(p, level=int(args.set[-1]))
    results = {"set": args.set, **rep.to_dict()}
    ctx.emit(args, results)
    return VERDICT_EXIT[rep.verdict]


def cmd_witness(args, ctx):
    ch = _matrix(args.path, "choi").to_object()
    gamma = _functional(args.functional)
    w = build_witness(gamma, args.set, args.bound, npa_level=args.npa_level)
    value = witness_value(w, ch)
    gamma_e = bell_value(gamma, decoherent_distribution(ch))
    verdict = OUTSIDE if value < -args.tol else INCONCLUSIVE
    ctx.emit(args, {"set": args.set, "verdict": verdict, "witness_value": value, "bound": w.bound,
                    "bell_value": gamma_e, "margin": -value, "tolerances": {"witness": args.tol}})
    return EXIT_OUTSIDE if verdict == OUTSIDE else EXIT_OK


def _csv(header, rows) -> str:
    return "\n".join([header] + [",".join(repr(float(v)) if not isinstance(v, str) else v for v in r)
                                 for r in rows]) + "\n"


def cmd_noise_sweep(args, ctx):
    ps, qs, neg = negativity_grid(args.resolution)
    rows = ((ps[i], qs[j], neg[i, j]) for i in range(len(ps)) for j in range(len(qs)))
    _write(_csv("p,q,negativity", rows), args.output)
    return EXIT_OK


def cmd_cross_section(args, ctx):
    res = classify_cross_section(args.resolution, jobs=args.jobs)
    rows = zip(res["s"], res["t"], res["region"])
    _write(_csv("s,t,region", rows), args.output)
    return EXIT_OK


def cmd_simulate(args, ctx):
    spec, ch = fileio.protocol_from_json(fileio.read_json(args.path))
    p = run_protocol(spec, ch)
    _write(fileio.write_json(fileio.distribution_file(p).to_json()), args.output)
    return EXIT_OK


def cmd_seesaw(args, ctx):
    ch = _matrix(args.channel, "choi").to_object()
    rho_x, sigma_y, anc = _matrix(args.inputs, "state-family").to_object()
    gamma = _functional(args.functional)
    res = seesaw_gamma_max(ch, gamma, rho_x, sigma_y, anc, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
    ctx.emit(args, {"value": res.value, "converged": res.converged, "history": res.history,
                    "restart_values": res.restart_values,
                    "alice": res.alice.array(1), "bob": res.bob.array(1)}, seed=args.seed)
    return EXIT_OK


def cmd_losr_test(args, ctx):
    ch = _matrix(args.channel, "choi").to_object()
    rho_x, sigma_y, _ = _matrix(args.inputs, "state-family").to_object()
    gamma = _functional(args.functional)
    rep = mdi_losr_test(ch, gamma, rho_x, sigma_y, restarts=args.restarts, seed=args.seed, jobs=args.jobs)
    ctx.emit(args, rep.to_dict(), seed=args.seed)
    return VERDICT_EXIT[rep.verdict]


def cmd_lose_from_strategy(args, ctx):
    s = _matrix(args.path, "strategy").to_object()
    ch = lose_from_strategy(s)
    _write(fileio.write_json(fileio.channel_file(ch).to_json()), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _resolution(text):
    n = int(text)
    if n < 2:
        raise argparse.ArgumentTypeError("resolution must be at least 2")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chancert", description="Channel nonlocality certification tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        p.set_defaults(fn=fn)
        return p

    p = add("validate", cmd_validate, "run the validity checks that apply to a file")
    p.add_argument("path")
    p.add_argument("--superchannel", action="store_true", help="also check the superchannel constraints")
    p = add("decohere", cmd_decohere, "decoherent action of a channel")
    p.add_argument("path")
    p = add("certify", cmd_certify, "membership of a distribution or decohered channel")
    p.add_argument("path")
    p.add_argument("--set", choices=("local", "ns", "npa1", "npa2"), default="local")
    p = add("witness", cmd_witness, "evaluate Tr(J W) for a channel witness")
    p.add_argument("path")
    p.add_argument("--functional", default="chsh", help="'chsh' or a functional file")
    p.add_argument("--set", choices=("L", "Q", "NS"), default="L")
    p.add_argument("--bound", type=float, default=None, help="override the set bound")
    p.add_argument("--npa-level", type=int, choices=(1, 2), default=2)
    p.add_argument("--tol", type=float, default=1e-9)
    p = add("noise-sweep", cmd_noise_sweep, "negativity over the (p, q) noise grid as CSV")
    p.add_argument("--resolution", type=_resolution, default=101)
    p = add("cross-section", cmd_cross_section, "region labels over the (s, t) plane as CSV")
    p.add_argument("--resolution", type=_resolution, default=201)
    p.add_argument("--jobs", type=int, default=1)
    p = add("simulate", cmd_simulate, "run a measurement protocol on a channel")
    p.add_argument("path")
    p = add("seesaw", cmd_seesaw, "see-saw lower bound on the best measured Bell value")
    p.add_argument("channel")
    p.add_argument("inputs")
    p.add_argument("--functional", default="chsh")
    p.add_argument("--restarts", type=int, default=RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p = add("losr-test", cmd_losr_test, "measurement-device-independent test against LOSR")
    p.add_argument("channel")
    p.add_argument("inputs")
    p.add_argument("--functional", required=True, help="functional file")
    p.add_argument("--restarts", type=int, default=RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p = add("lose-from-strategy", cmd_lose_from_strategy, "channel realising a quantum strategy")
    p.add_argument("path")
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    ctx = _Context(argv)
    try:
        return args.fn(args, ctx)
    except SolverError as e:
        print(f"error: {e} (status {e.status})", file=sys.stderr)
        return EXIT_SOLVER
    except (FileFormatError, CapExceeded, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
