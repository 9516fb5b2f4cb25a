"""Command-line entry point: ``notf {synth,factorize,eval,communities,sweep}``.

Exit codes: 0 success, 1 usage or parse error, 2 solver divergence,
3 shape or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .cp_init import CpAlsConfig
from .io import ParseError
from .metrics import DEFAULT_THRESHOLD
from .solver import SolverConfig, SolverDivergence
from .synth import SynthSpec
from .tensor import DimensionError

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_INVALID = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s):
    return [float(v) for v in s.split(",") if v]


def _ints(s):
    out = []
    for part in s.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _add_solver_args(p, rank_default=3):
    g = p.add_argument_group("solver")
    g.add_argument("--rank", type=int, default=rank_default)
    g.add_argument("--tau", type=float, default=10.0, help="ADMM penalty parameter")
    g.add_argument("--eps", type=float, default=1e-3, help="stopping tolerance for both residuals")
    g.add_argument("--variant", choices=["l0", "l1", "l2"], default="l0")
    g.add_argument("--max-outer", type=int, default=500)
    g.add_argument("--max-inner", type=int, default=10)
    g.add_argument("--init-iters", type=int, default=50, help="CP-ALS sweeps for the initializer")


def _solver_config(args, seed=0) -> SolverConfig:
    return SolverConfig(
        rank=args.rank, tau=args.tau, eps=args.eps, variant=args.variant,
        max_outer_iters=args.max_outer, max_inner_iters=args.max_inner,
        init=CpAlsConfig(rank=args.rank, max_iters=args.init_iters, seed=seed),
    )


def _synth_spec(args) -> SynthSpec:
    return SynthSpec(
        dims=tuple(args.dims), true_rank=args.true_rank,
        sparsity_ratios=tuple(args.sparsity), noise_ratio=args.noise, seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="notf", description="Non-negative occurrence tensor factorization")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic benchmark instance")
    p.add_argument("out_dir")
    p.add_argument("--dims", type=int, nargs=3, default=[50, 20, 10])
    p.add_argument("--true-rank", type=int, default=3)
    p.add_argument("--sparsity", type=float, nargs=3, default=[0.7067, 0.55, 0.30])
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standin", action="store_true",
                   help="write a 971x85x27 occurrence count tensor at 1.02%% density instead")
    p.add_argument("--density", type=float, default=None, help="nonzero density for --standin")

    p = sub.add_parser("factorize", help="factorize an occurrence triple file")
    p.add_argument("input")
    p.add_argument("out_dir")
    p.add_argument("--truth", help="triple file with the ground truth, for extra metrics")
    p.add_argument("--seed", type=int, default=0, help="seed of the CP-ALS initializer")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--no-plots", action="store_true")
    _add_solver_args(p)

    p = sub.add_parser("eval", help="score a reconstruction against a reference")
    p.add_argument("reconstruction", help="factor file or triple file")
    p.add_argument("reference", help="triple file (usually the observation)")
    p.add_argument("out_dir")
    p.add_argument("--truth")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--histogram-mode", type=int, choices=[1, 2, 3])
    p.add_argument("--run-report", help="factorize report.json to copy iteration info from")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("communities", help="list the community of each rank-one component")
    p.add_argument("factors")
    p.add_argument("out_dir")
    p.add_argument("--labels", help="triple file whose header carries labels, or a JSON label list")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("sweep", help="run a grid of synthetic experiments")
    p.add_argument("out_dir")
    p.add_argument("--preset", choices=["fig1-noise", "fig1-rank"])
    p.add_argument("--noise-ratios", type=_floats, default=None, help="comma list, e.g. 0.02,0.05")
    p.add_argument("--ranks", type=_ints, default=None, help="comma list or range, e.g. 1-10")
    p.add_argument("--variants", default=None, help="comma list of l0,l1,l2")
    p.add_argument("--seeds", type=_ints, default=[0], help="comma list or range, e.g. 0-4")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--no-run-dirs", action="store_true", help="skip per-run output directories")
    _add_solver_args(p)
    return parser


def _print(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            if args.standin:
                run = ex.cmd_standin(args.out_dir, seed=args.seed, density=args.density)
            else:
                run = ex.cmd_synth(_synth_spec(args), args.out_dir)
            _print(run.to_dict())
        elif args.command == "factorize":
            run = ex.cmd_factorize(args.input, _solver_config(args, args.seed), args.out_dir,
                                   truth_path=args.truth, threshold=args.threshold,
                                   plots=not args.no_plots)
            _print({"eval": run.eval, "trace": run.trace, "artifacts": run.artifacts})
        elif args.command == "eval":
            rep = ex.cmd_eval(args.reconstruction, args.reference, args.out_dir, truth=args.truth,
                              threshold=args.threshold, histogram_mode=args.histogram_mode,
                              run_report=args.run_report, plots=not args.no_plots)
            _print(rep.to_dict())
        elif args.command == "communities":
            comms = ex.cmd_communities(args.factors, args.out_dir, args.labels, args.threshold,
                                       plots=not args.no_plots)
            print((ex.Path(args.out_dir) / "communities.txt").read_text(), end="")
            print(f"{len(comms)} communities, {sum(c.is_empty() for c in comms)} empty")
        elif args.command == "sweep":
            grid = dict(ex.FIG1_NOISE if args.preset == "fig1-noise" else
                        ex.FIG1_RANK if args.preset == "fig1-rank" else
                        dict(noise_ratios=[0.1], ranks=[args.rank], variants=[args.variant]))
            if args.noise_ratios:
                grid["noise_ratios"] = args.noise_ratios
            if args.ranks:
                grid["ranks"] = args.ranks
            if args.variants:
                grid["variants"] = [v.strip() for v in args.variants.split(",") if v.strip()]
            rows = ex.cmd_sweep(args.out_dir, seeds=args.seeds, base=_solver_config(args),
                                threshold=args.threshold, jobs=args.jobs,
                                plots=not args.no_plots, keep_runs=not args.no_run_dirs, **grid)
            failed = sum(r["status"] != "ok" for r in rows)
            print(f"{len(rows)} runs, {failed} failed -> {ex.Path(args.out_dir) / 'sweep.csv'}")
    except SolverDivergence as exc:
        print(f"notf: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ParseError as exc:
        print(f"notf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DimensionError, ValueError) as exc:
        print(f"notf: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"notf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
