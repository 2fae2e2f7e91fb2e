"""Command-line entry point: ``qatune <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .chimera import ChimeraGraph, build_chimera, choi_clique_embedding, read_working_graph
from .embedding import Embedding, default_kappa_grid, estimate_kappa0, find_embedding, read_embedding, write_embedding
from .errors import ConfigError, GenerationFailure, InfeasibleError, OverLimitError, QatuneError
from .exact import ground_state
from .experiment import load_config, run_experiment
from .generators import CLASSES, generate, planted_consistent, planted_energy, read_instance, write_instance
from .ice import IceModel
from .ising import energy
from .metrics import percentiles, read_csv
from .sampler import V7_T_F, V7_T_P, V7_T_S, AnnealerConfig, chain_shim

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

logger = logging.getLogger("qatune")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _target(args) -> ChimeraGraph:
    if getattr(args, "working_graph", None):
        return read_working_graph(args.working_graph)
    if getattr(args, "k", None) is None:
        raise UsageError("a target graph is required: pass --k or --working-graph")
    return build_chimera(args.k)


def _annealer(args) -> AnnealerConfig:
    return AnnealerConfig(t_p=args.t_p, t_f=args.t_f, t_s=args.t_s, min_t_f=args.min_t_f,
                          sweeps_per_min_anneal=args.sweeps, seed=args.seed)


def _ice(args) -> IceModel:
    return IceModel(args.sigma_h, args.sigma_J, seed=args.seed)


def cmd_generate(args) -> int:
    cls = args.cls.upper()
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    G = None
    if cls in ("RAN", "FL"):
        G = _target(args)
    elif args.n is None:
        raise UsageError(f"{cls} instances need --n")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = int(np.random.SeedSequence([args.seed, i]).generate_state(1)[0])
        try:
            inst = generate(cls, seed, G=G, n=args.n, R=args.R, r=args.r, with_fields=args.with_fields,
                            unique_filter=args.unique, brute_force_cap=args.brute_force_cap)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        name = f"{cls.lower()}{args.R if cls in ('RAN', 'FL') else ''}_{i:04d}.txt"
        write_instance(inst, out / name)
    print(f"wrote {args.count} {cls} instance(s) to {out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    target = _target(args)
    inst = read_instance(args.instance)
    if args.choi:
        size = 4 * target.k
        if inst.H.n > size:
            print(f"clique embedding holds {size} variables; instance has {inst.H.n}", file=sys.stderr)
            return EXIT_DATA
        full = choi_clique_embedding(target.k, target)
        emb = Embedding({i: full.chains[i] for i in range(inst.H.n)}, inst.H.n, target)
    else:
        emb = find_embedding(inst.H, target, seed=args.seed, max_tries=args.tries)
        if emb is None:
            print("no embedding found", file=sys.stderr)
            return EXIT_DATA
    write_embedding(emb, args.out)
    print(f"embedded {inst.H.n} variables on {emb.num_qubits} qubits, longest chain {max(emb.chain_sizes)}")
    return EXIT_OK


def cmd_calibrate_kappa(args) -> int:
    target = _target(args)
    inst = read_instance(args.instance)
    emb = read_embedding(args.embedding, target)
    grid = args.grid or default_kappa_grid(args.grid_cap)
    est = estimate_kappa0(inst.H, emb, _annealer(args), grid, ice=_ice(args), reads=args.reads,
                          gauges=args.gauges, h_bias=args.h_bias or None)
    for kappa, ok in est.trace:
        print(f"kappa={kappa:g} lowest-energy samples intact: {'yes' if ok else 'no'}")
    suffix = " (grid exhausted)" if est.saturated else ""
    print(f"kappa0 = {est.kappa:g}{suffix}")
    return EXIT_OK


def cmd_shim(args) -> int:
    target = _target(args)
    emb = read_embedding(args.embedding, target)
    res = chain_shim(emb, args.kappa, _annealer(args), _ice(args), args.iterations, args.step,
                     reads=args.reads, h_bias=args.h_bias or None)
    before = np.nanmean(np.abs(res.initial))
    after = np.nanmean(np.abs(res.final))
    print(f"mean |polarization| before {before:.4f}, after {after:.4f}")
    if args.out:
        np.savetxt(args.out, res.biases, fmt="%.10g")
        print(f"biases written to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.output:
        cfg = replace(cfg, output=Path(args.output))
    text = run_experiment(cfg)
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        print(f"{len(text.splitlines()) - 1} row(s) written to {cfg.output}")
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = read_instance(args.instance)
    H, spec = inst.H, inst.spec
    planted = spec is not None and spec.cycles is not None
    if planted:
        ok = planted_consistent(H, spec.cycles)
        alpha = H.scale_alpha or 1.0
        print(f"planted energy {energy(H, np.ones(H.n)):.10g} (closed form {planted_energy(spec.cycles) * alpha:.10g}): "
              f"{'consistent' if ok else 'INCONSISTENT'}")
    try:
        gs = ground_state(H, cap=1, limit=args.limit)
    except OverLimitError as exc:
        if planted:
            print(f"exact check skipped: {exc}")
            return EXIT_OK
        print(f"refusing: {exc}; no planted state to check instead", file=sys.stderr)
        return EXIT_DATA
    print(f"ground energy {gs.energy:.10g}")
    print(f"degeneracy {gs.degeneracy}")
    if planted:
        attained = energy(H, np.ones(H.n)) <= gs.energy + 1e-9 * (1 + abs(gs.energy))
        print(f"planted state is a ground state: {'yes' if attained else 'no'}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_csv(args.csv)
    if not rows:
        print("no rows")
        return EXIT_OK
    groups: dict[tuple[str, str, str], list[float]] = {}
    for row in rows:
        key = (row["setting"], row["postprocess"], row["criterion"])
        groups.setdefault(key, []).append(float(row[args.column]))
    levels = tuple(args.levels)
    print("\t".join(["setting", "postprocess", "criterion", "count"] + [f"p{lv}" for lv in levels]))
    for key in sorted(groups):
        pct = percentiles(groups[key], levels)
        print("\t".join([*key, str(len(groups[key]))] + [f"{pct[lv]:.6g}" for lv in levels]))
    return EXIT_OK


def _add_annealer_flags(p):
    p.add_argument("--t-p", type=float, default=V7_T_P, help="programming time, s (default: %(default)s)")
    p.add_argument("--t-f", type=float, default=V7_T_F, help="anneal time per read, s (default: %(default)s)")
    p.add_argument("--t-s", type=float, default=V7_T_S, help="readout time per read, s (default: %(default)s)")
    p.add_argument("--min-t-f", type=float, default=V7_T_F, help="anneal time floor, s (default: %(default)s)")
    p.add_argument("--sweeps", type=int, default=10, help="SA sweeps at the floor (default: %(default)s)")
    p.add_argument("--sigma-h", dest="sigma_h", type=float, default=0.050, help="ICE field std (default: %(default)s)")
    p.add_argument("--sigma-J", dest="sigma_J", type=float, default=0.035, help="ICE coupler std (default: %(default)s)")
    p.add_argument("--h-bias", type=float, default=0.0, help="systematic field on every qubit (default: 0)")
    p.add_argument("--reads", type=int, default=1000, help="reads per measurement (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0)


def _add_target_flags(p):
    p.add_argument("--k", type=int, help="full Chimera C_k target")
    p.add_argument("--working-graph", help="working-graph file instead of a full C_k")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qatune", description="Chimera Ising pipeline emulator and benchmark harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write benchmark instances")
    p.add_argument("cls", metavar="class", type=str.upper, choices=CLASSES)
    _add_target_flags(p)
    p.add_argument("--n", type=int, help="logical size for 3MC/NAE")
    p.add_argument("--R", type=int, default=1, help="precision limit for RAN/FL (default: %(default)s)")
    p.add_argument("--r", type=float, help="loop or clause ratio (FL 0.2, NAE 2.1)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-fields", action="store_true", help="RAN: random integer fields too")
    p.add_argument("--unique", action="store_true", help="NAE: keep only uniquely satisfiable instances")
    p.add_argument("--brute-force-cap", type=int, default=24)
    p.add_argument("--out-dir", default="instances")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("embed", help="minor-embed a logical instance")
    p.add_argument("instance")
    _add_target_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tries", type=int, default=10)
    p.add_argument("--choi", action="store_true", help="use the native clique embedding")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("calibrate-kappa", help="estimate the minimal intact chain strength")
    p.add_argument("instance")
    p.add_argument("embedding")
    _add_target_flags(p)
    _add_annealer_flags(p)
    p.add_argument("--gauges", type=int, default=1)
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument("--grid-cap", type=float, default=10.0)
    p.set_defaults(func=cmd_calibrate_kappa)

    p = sub.add_parser("shim", help="calibrate per-chain compensating fields")
    p.add_argument("embedding")
    _add_target_flags(p)
    _add_annealer_flags(p)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_shim)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--workers", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="exact ground state or planted-state check")
    p.add_argument("instance")
    p.add_argument("--limit", type=int, default=28)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="percentile summary of a results CSV")
    p.add_argument("csv")
    p.add_argument("--column", default="st99_time_s")
    p.add_argument("--levels", type=int, nargs="+", default=[5, 25, 50, 75, 95])
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qatune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QatuneError, GenerationFailure, InfeasibleError, OSError, ValueError) as exc:
        print(f"qatune: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
