"""Command-line front end.

Every subcommand takes its randomness from --seed, merges --config (JSON)
under explicit flags, and drops a run manifest next to each output
artifact.  Exit codes: 0 success, 1 domain/estimation error, 2 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import bethe, construct, dataio, factorize, ising, nishimori, qc, tanner
from .errors import QcFactorError

SUBCOMMANDS = ("construct", "analyze", "ising-gen", "bethe", "nishimori", "factorize", "bench", "atlas")


@dataclass
class RunManifest:
    subcommand: str
    flags: dict
    seed: int
    version: str
    input_digests: dict
    started: str
    finished: str


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path: str, sub: str, flags: dict, seed: int, inputs: list[str], t0: str) -> None:
    digests = {p: _digest(p) for p in inputs if p and Path(p).exists()}
    man = RunManifest(
        subcommand=sub,
        flags={k: v for k, v in sorted(flags.items()) if v is not None},
        seed=seed,
        version=__version__,
        input_digests=digests,
        started=t0,
        finished=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    )
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(asdict(man), indent=2, sort_keys=True) + "\n"
    )


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _load_matrix_any(path: str):
    """Exponent (.em), alist (.alist), or MatrixMarket input."""
    p = Path(path)
    if p.suffix == ".em":
        with open(p) as fh:
            return qc.read_exponent(fh)
    if p.suffix == ".alist":
        with open(p) as fh:
            return qc.read_alist(fh)
    return dataio.load_matrix_market(p)


def _save_matrix(obj, out: str) -> None:
    p = Path(out)
    if isinstance(obj, qc.ExponentMatrix):
        with open(p, "w") as fh:
            qc.write_exponent(obj, fh)
    elif isinstance(obj, qc.SparseBinaryMatrix):
        with open(p, "w") as fh:
            qc.write_alist(obj, fh)
    else:
        raise QcFactorError(f"cannot persist object of type {type(obj).__name__}")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_atlas(args) -> int:
    if args.list:
        for name in construct.atlas_names():
            print(name)
        return 0
    if not args.name:
        print("atlas: --name or --list required", file=sys.stderr)
        return 2
    try:
        obj = construct.atlas(args.name)
    except KeyError as exc:
        print(f"atlas: {exc.args[0]}", file=sys.stderr)
        return 1
    if args.out:
        t0 = _now()
        # exponent fixtures keep .em, binaries go to alist
        _save_matrix(obj, args.out)
        _write_manifest(args.out, "atlas", vars(args), args.seed, [], t0)
    else:
        if isinstance(obj, qc.ExponentMatrix):
            buf = io.StringIO()
            qc.write_exponent(obj, buf)
            print(buf.getvalue(), end="")
        else:
            buf = io.StringIO()
            qc.write_alist(obj, buf)
            print(buf.getvalue(), end="")
    return 0


def _cmd_construct(args) -> int:
    t0 = _now()
    if args.method == "peg":
        cfg = construct.PegConfig(
            n=args.n, m=args.m, col_degrees=tuple([args.degree] * args.n),
            seed=args.seed, ace_depth=args.ace_depth,
        )
        obj = construct.peg_ace(cfg)
    elif args.method == "sa":
        cfg = construct.SaConfig(
            proto_rows=args.rows, proto_cols=args.cols, L=args.L,
            target_girth=args.girth, t0=args.t0, cooling=args.cooling,
            steps=args.steps, seed=args.seed,
        )
        res = construct.sa_emd(cfg)
        if not res.met_target:
            print(f"construct: target girth not met (violations={res.violations})", file=sys.stderr)
        obj = res.exponent
    elif args.method == "chord":
        obj = factorize.chord_mask_any(args.n).matrix
    elif args.method == "ldpc-square":
        obj = construct.square_ldpc_mask(args.n, degree=args.degree or None, seed=args.seed).matrix
    elif args.method == "qc-square":
        obj = construct.square_qc_mask(args.n, L=args.L, seed=args.seed).matrix
    else:
        print(f"construct: unknown method {args.method}", file=sys.stderr)
        return 2
    _save_matrix(obj, args.out)
    _write_manifest(args.out, "construct", vars(args), args.seed, [], t0)
    return 0


def _cmd_analyze(args) -> int:
    t0 = _now()
    obj = _load_matrix_any(args.infile)
    E = obj if isinstance(obj, qc.ExponentMatrix) else None
    if isinstance(obj, qc.ExponentMatrix):
        H = qc.expand(obj)
    elif isinstance(obj, qc.SparseBinaryMatrix):
        H = obj
    else:
        H = qc.SparseBinaryMatrix.from_dense(np.asarray(obj) != 0)
    G = tanner.tanner(H)
    report: dict = {"vn": G.vn_count, "cn": G.cn_count, "edges": G.edge_count}
    if args.girth:
        g = tanner.girth(G)
        report["girth"] = "acyclic" if g is None else g
    if args.qc_girth:
        if E is None:
            print("analyze: --qc-girth needs an exponent-matrix input", file=sys.stderr)
            return 1
        g, chain = tanner.qc_girth_search(E)
        report["qc_girth"] = "acyclic" if g is None else g
        if chain:
            report["qc_girth_chain"] = [list(c) for c in chain]
    if args.cycles:
        recs = tanner.enumerate_cycles(G, args.cycles)
        report["cycles"] = [
            {"length": r.length, "vnodes": list(r.vnodes), "cnodes": list(r.cnodes),
             "emd": r.emd, "ace": r.ace}
            for r in recs
        ]
    if args.spectrum:
        hist = tanner.emd_spectrum(G, args.spectrum)
        report["spectrum"] = [
            {"length": l, "emd": e, "count": c} for (l, e), c in sorted(hist.items())
        ]
    if args.ts:
        a_max, b_max = args.ts
        reports = tanner.trapping_sets(G, a_max, b_max)
        report["trapping_sets"] = [
            {"a": r.a, "b": r.b, "multiplicity": r.multiplicity, "lower_bound": r.lower_bound}
            for r in reports
        ]
    if args.shbf:
        if E is None:
            print("analyze: --shbf needs an exponent-matrix input", file=sys.stderr)
            return 1
        rep = ising.shbf_gauge_check(E, args.modulus)
        report["shbf"] = {"modulus": rep.modulus, "rows": list(rep.rows), "cols": list(rep.cols)}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest(args.out, "analyze", vars(args), args.seed, [args.infile], t0)
    else:
        print(text, end="")
    return 0


def _cmd_ising_gen(args) -> int:
    t0 = _now()
    if args.mode == "pairs":
        gs = ising.pair_ground_states(args.r1, args.r3)
        print(json.dumps({"e": gs.e, "pairs": [list(p) for p in gs.pairs]}))
        return 0
    if args.mode == "lcm":
        rows = []
        for spec in args.row:
            shifts_txt, size_txt = spec.split("@")
            rows.append(([int(s) for s in shifts_txt.split(",")], int(size_txt)))
        shifts, L = ising.lcm_combine(rows)
        print(json.dumps({"L": L, "shifts": list(shifts)}))
        return 0
    if args.mode == "toroidal":
        E = ising.toroidal_cell(
            [int(v) for v in args.xs.split(",")], [int(v) for v in args.ys.split(",")]
        )
    elif args.mode == "collapse":
        src = _load_matrix_any(args.infile)
        if not isinstance(src, qc.ExponentMatrix):
            print("ising-gen collapse: input must be an exponent matrix", file=sys.stderr)
            return 1
        E = ising.collapse_radial(src, radial_row=args.radial_row)
    elif args.mode == "shell":
        E = ising.spherical_shell_matrix([int(r) for r in args.radii.split(",")], seed=args.seed)
    else:
        return 2
    if args.out:
        _save_matrix(E, args.out)
        inputs = [args.infile] if args.mode == "collapse" else []
        _write_manifest(args.out, "ising-gen", vars(args), args.seed, inputs, t0)
    else:
        buf = io.StringIO()
        qc.write_exponent(E, buf)
        print(buf.getvalue(), end="")
    return 0


def _cmd_bethe(args) -> int:
    t0 = _now()
    W = dataio.load_matrix_market(args.infile)
    out: dict = {"n": int(W.shape[0])}
    if args.exact:
        out["permanent_exact"] = bethe.permanent_exact(W)
    if args.bp:
        res = bethe.bp_sum_product(W, damping=args.alpha, tol=args.tol, max_iter=args.max_iter)
        out["bp"] = {
            "f_bethe": res.f_bethe,
            "perm_bethe": res.perm_bethe,
            "iterations": res.iterations,
            "converged": res.converged,
            "residual": res.residual,
        }
    if args.minsum:
        res = bethe.minsum_matching(W, tol=args.tol, max_iter=args.max_iter)
        out["minsum"] = {
            "assignment": list(res.assignment),
            "iterations": res.iterations,
            "converged": res.converged,
        }
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest(args.out, "bethe", vars(args), args.seed, [args.infile], t0)
    else:
        print(text, end="")
    return 0


def _cmd_nishimori(args) -> int:
    t0 = _now()
    if args.infile:
        with open(args.infile) as fh:
            G = nishimori.read_graph(fh)
        beta_planted = None
    else:
        sample = nishimori.sample_spin_glass(
            n=args.n, avg_degree=args.avg_degree, family=args.family,
            beta_n=args.beta_n, seed=args.seed,
        )
        G = sample.graph
        beta_planted = sample.beta_n
    if args.save_graph:
        with open(args.save_graph, "w") as fh:
            nishimori.write_graph(G, fh)
        _write_manifest(args.save_graph, "nishimori", vars(args), args.seed,
                        [args.infile] if args.infile else [], t0)
    out: dict = {"n": G.n, "edges": G.edge_count}
    if beta_planted is not None:
        out["beta_planted"] = beta_planted
    if args.trace:
        betas = np.linspace(args.beta_hi / args.trace_points, args.beta_hi, args.trace_points)
        pairs = nishimori.beta_trace(G, betas)
        lines = ["beta,lambda_min"] + ["%.6e,%.6e" % p for p in pairs]
        Path(args.trace).write_text("\n".join(lines) + "\n")
        _write_manifest(args.trace, "nishimori", vars(args), args.seed,
                        [args.infile] if args.infile else [], t0)
    if args.estimate:
        try:
            est = nishimori.estimate_beta_nishimori(G, beta_hi=args.beta_hi, tol=args.tol)
            out["beta_hat"] = est
        except nishimori.EstimationError as exc:
            out["beta_hat"] = None
            out["estimate_error"] = str(exc)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_factorize(args) -> int:
    t0 = _now()
    if args.infile:
        X = dataio.load_matrix_market(args.infile)
        name = Path(args.infile).stem
    else:
        kinds = {n: (k, N) for n, k, N in dataio.SYNTHETIC_SUITE}
        if args.dataset not in kinds:
            print(f"factorize: unknown synthetic dataset '{args.dataset}'", file=sys.stderr)
            return 1
        kind, N = kinds[args.dataset]
        X = dataio.synthetic_dataset(args.dataset, kind, N, seed=args.seed)
        name = args.dataset
    N = X.shape[0]
    budget = factorize.Budget.for_size(N)
    mask = factorize.mask_for_method(f"sf_{args.mask}", N, args.seed, budget)
    res = factorize.sf_optimize(X, [mask] * budget.M, iters=args.iters, seed=args.seed)
    row = factorize.ReportRow(
        name, N, f"sf_{args.mask}", mask.provenance, res.factors.total_nnz,
        res.iterations, args.seed, res.final_fnorm, res.elapsed,
    )
    dataio.save_report([row], args.out, fmt="csv")
    if args.save_factors:
        arrays = {f"values_{m}": v for m, v in enumerate(res.factors.values)}
        np.savez(args.save_factors, **arrays)
    _write_manifest(args.out, "factorize", vars(args), args.seed,
                    [args.infile] if args.infile else [], t0)
    return 0


def _cmd_bench(args) -> int:
    t0 = _now()
    datasets: list[tuple[str, object]] = []
    if args.registry:
        specs = dataio.load_registry(args.registry)
        for spec in specs:
            datasets.append((spec.name, (lambda s=spec: dataio.load_dataset(s, seed=args.seed))))
    else:
        for name, kind, N in dataio.SYNTHETIC_SUITE:
            datasets.append((name, (lambda n=name, k=kind, size=N: dataio.synthetic_dataset(n, k, size, seed=args.seed))))
    methods = tuple(args.methods.split(","))
    seeds = tuple(int(s) for s in args.seeds.split(","))
    rows = factorize.benchmark(datasets, methods=methods, iters=args.iters, seeds=seeds, jobs=args.jobs)
    dataio.save_report(rows, args.out, fmt="csv")
    json_out = str(Path(args.out).with_suffix(".json"))
    dataio.save_report(rows, json_out, fmt="json")
    _write_manifest(args.out, "bench", vars(args), args.seed, [args.registry] if args.registry else [], t0)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcfactor", description=__doc__)
    ap.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    ap.add_argument("--jobs", type=int, default=1, help="benchmark parallelism")
    ap.add_argument("--config", default=None, help="JSON config merged under explicit flags")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("atlas", help="emit a published fixture matrix")
    p.add_argument("--name", default=None)
    p.add_argument("--list", action="store_true", help="list atlas names")
    p.add_argument("--out", default=None)

    p = sub.add_parser("construct", help="build parity-check matrices and masks")
    p.add_argument("--method", required=True, choices=["peg", "sa", "chord", "ldpc-square", "qc-square"])
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--ace-depth", type=int, default=16)
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--L", type=int, default=16)
    p.add_argument("--girth", type=int, default=6)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--cooling", type=float, default=0.995)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="structural metrics of a parity-check matrix")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--girth", action="store_true")
    p.add_argument("--qc-girth", action="store_true")
    p.add_argument("--cycles", type=int, default=0, help="enumerate cycles up to this length")
    p.add_argument("--spectrum", type=int, default=0, help="EMD spectrum up to this length")
    p.add_argument("--ts", type=int, nargs=2, metavar=("A_MAX", "B_MAX"), default=None)
    p.add_argument("--shbf", action="store_true")
    p.add_argument("--modulus", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("ising-gen", help="ground-state constructions")
    p.add_argument("--mode", required=True, choices=["pairs", "lcm", "toroidal", "collapse", "shell"])
    p.add_argument("--r1", type=int, default=2)
    p.add_argument("--r3", type=int, default=3)
    p.add_argument("--row", action="append", default=[], help="lcm row 'shifts@L', repeatable")
    p.add_argument("--xs", default="1,1,1,1")
    p.add_argument("--ys", default="1,1,1,1")
    p.add_argument("--radii", default="2,2,3,3,3,3")
    p.add_argument("--radial-row", type=int, default=0)
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bethe", help="permanents and Bethe approximations")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--bp", action="store_true")
    p.add_argument("--minsum", action="store_true")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--out", default=None)

    p = sub.add_parser("nishimori", help="spin-glass sampling and temperature estimation")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--avg-degree", type=float, default=5.0)
    p.add_argument("--family", default="two_point", choices=["two_point", "gaussian_sym"])
    p.add_argument("--beta-n", type=float, default=0.5)
    p.add_argument("--estimate", action="store_true")
    p.add_argument("--beta-hi", type=float, default=3.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--trace", default=None, help="write a beta,lambda_min CSV trace")
    p.add_argument("--trace-points", type=int, default=32)
    p.add_argument("--save-graph", default=None)

    p = sub.add_parser("factorize", help="sparse-factorize one matrix")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--dataset", default=None, help="a built-in synthetic dataset name")
    p.add_argument("--mask", default="chord", choices=["chord", "ldpc_peg", "qc_sa"])
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--save-factors", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="TSVD vs sparse-factorization benchmark")
    p.add_argument("--suite", default="synthetic", choices=["synthetic"])
    p.add_argument("--registry", default=None, help="JSON dataset registry")
    p.add_argument("--methods", default="tsvd,sf_chord,sf_ldpc_peg")
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", required=True)
    return ap


_HANDLERS = {
    "atlas": _cmd_atlas,
    "construct": _cmd_construct,
    "analyze": _cmd_analyze,
    "ising-gen": _cmd_ising_gen,
    "bethe": _cmd_bethe,
    "nishimori": _cmd_nishimori,
    "factorize": _cmd_factorize,
    "bench": _cmd_bench,
}


def _merge_config(ap: argparse.ArgumentParser, argv: list[str], args: argparse.Namespace):
    """Config values apply only where the flag was not given explicitly."""
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise QcFactorError(f"{args.config}: config must be a JSON object")
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=")[0].replace("-", "_"))
    for key, val in cfg.items():
        attr = key.replace("-", "_")
        if attr in explicit:
            continue
        if hasattr(args, attr):
            setattr(args, attr, val)
    return args


def run(argv: list[str]) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args = _merge_config(ap, argv, args)
    handler = _HANDLERS[args.command]
    try:
        return handler(args)
    except QcFactorError as exc:
        print(f"qcfactor {args.command}: {exc}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"qcfactor {args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
