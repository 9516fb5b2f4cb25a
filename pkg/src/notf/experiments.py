"""Experiment orchestration behind the command-line interface.

Every ``cmd_*`` function reads and writes files in a given output directory
and returns an in-memory summary, so the CLI stays a thin argument parser.
"""

from __future__ import annotations

import csv
import datetime as _dt
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io, plotting
from .cp_init import CpAlsConfig
from .metrics import DEFAULT_THRESHOLD, EvalReport, evaluate, extract_communities, factor_nonzero_ratio, slice_error_histogram
from .solver import SolverConfig, SolverDivergence, solve
from .synth import SynthSpec, generate, make_occurrence_standin
from .tensor import DimensionError, cp_reconstruct

log = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "variant", "noise_ratio", "rank", "seed", "status", "outer_iterations", "converged",
    "fp_truth", "fn_truth", "fp_observation", "fn_observation",
    "mse_truth", "mse_observation", "nnz_ratio_A", "nnz_ratio_B", "nnz_ratio_C", "error",
]

FIG1_NOISE = dict(noise_ratios=[i / 100 for i in range(1, 11)], ranks=[3], variants=["l0", "l1", "l2"])
FIG1_RANK = dict(noise_ratios=[0.1], ranks=list(range(1, 11)), variants=["l0"])


@dataclass
class RunReport:
    command: str
    config: dict
    artifacts: dict = field(default_factory=dict)
    eval: dict | None = None
    trace: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def solver_config_dict(cfg: SolverConfig) -> dict:
    d = asdict(cfg)
    d["variant"] = cfg.variant.value
    return d


def solver_config_from_dict(d: dict) -> SolverConfig:
    d = dict(d)
    d["init"] = CpAlsConfig(**d.get("init", {}))
    return SolverConfig(**d)


def _out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- synth ------------------------------------------------------------------


def cmd_synth(spec: SynthSpec, out_dir) -> RunReport:
    """Write ground-truth factors, truth X and observation O for `spec`."""
    out = _out(out_dir)
    inst = generate(spec)
    artifacts = {
        "factors": str(io.save_factors(out / "factors_true.txt", inst.factors)),
        "truth": str(io.save_triples(out / "truth.tsv", inst.x)),
        "observation": str(io.save_triples(out / "observation.tsv", inst.o)),
    }
    manifest = {
        "spec": spec.to_dict(),
        "artifacts": artifacts,
        "flipped": len(inst.flipped_positions),
        "truth_zero_fraction": float(1 - inst.x.mean()),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    artifacts["manifest"] = str(io.write_json(out / "manifest.json", manifest))
    return RunReport("synth", {"spec": spec.to_dict()}, artifacts)


def read_manifest(path) -> SynthSpec:
    return SynthSpec.from_dict(json.loads(Path(path).read_text())["spec"])


def cmd_standin(out_dir, seed: int = 0, dims=None, density=None) -> RunReport:
    """Write a desk-scale occurrence tensor with the shape and density of the paper's dataset."""
    out = _out(out_dir)
    kwargs = {"seed": seed}
    if dims is not None:
        kwargs["dims"] = dims
    if density is not None:
        kwargs["density"] = density
    t = make_occurrence_standin(**kwargs)
    labels = [[f"{p}{i}" for i in range(n)] for p, n in zip(("FC", "FI", "ROLE"), t.shape)]
    path = io.save_triples(out / "occurrence.tsv", t, labels=labels)
    return RunReport("standin", {"seed": seed, "dims": list(t.shape), "nonzero_fraction": float(np.count_nonzero(t) / t.size)},
                     {"observation": str(path)})


# --- factorize / eval -------------------------------------------------------


def write_trace(path, trace) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["outer", "res_outer", "res_inner_last", "inner_sweeps", "objective"])
        for rec in trace.records:
            w.writerow([rec.outer, repr(rec.res_outer), repr(rec.res_inner[-1]), rec.inner_sweeps, repr(rec.objective)])
    return Path(path)


def cmd_factorize(input_path, cfg: SolverConfig, out_dir, truth_path=None,
                  threshold: float = DEFAULT_THRESHOLD, plots: bool = True) -> RunReport:
    """Factorize the triple file at `input_path`; writes factors, error tensor, trace and report.

    Raises :class:`SolverDivergence` if the iterates blow up.
    """
    out = _out(out_dir)
    o, labels = io.load_triples(input_path)
    result = solve(o, cfg)
    recon = cp_reconstruct(result.factors)
    truth = io.load_triples(truth_path)[0] if truth_path else None
    report = evaluate(
        recon, o, truth, threshold,
        outer_iterations=result.trace.iterations, converged=result.trace.converged,
        variant=cfg.variant.value, rank=cfg.rank,
    )
    artifacts = {
        "factors": str(io.save_factors(out / "factors.txt", result.factors)),
        "error": str(io.save_triples(out / "error.tsv", result.u, labels=labels, signed=True)),
        "trace": str(write_trace(out / "trace.csv", result.trace)),
    }
    if plots:
        artifacts["convergence_plot"] = str(plotting.plot_convergence(result.trace, out / "convergence.png"))
    run = RunReport(
        "factorize",
        {"input": str(input_path), "truth": str(truth_path) if truth_path else None,
         "solver": solver_config_dict(cfg), "threshold": threshold},
        artifacts, report.to_dict(), result.trace.summary(),
    )
    run.artifacts["report"] = str(out / "report.json")
    io.write_json(out / "report.json", run.to_dict())
    return run


def _load_reconstruction(path):
    path = Path(path)
    with open(path) as fh:
        first = fh.readline().lstrip()
    if first.startswith("{"):
        return io.load_triples(path)[0], None
    f = io.load_factors(path)
    return cp_reconstruct(f), f


def write_eval_csv(path, report: EvalReport) -> Path:
    d = report.to_dict()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(d))
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in d.values()])
    return Path(path)


def cmd_eval(recon_or_factors, reference, out_dir, truth=None, threshold: float = DEFAULT_THRESHOLD,
             histogram_mode: int | None = None, run_report=None, plots: bool = True) -> EvalReport:
    """Compare a reconstruction (factor file or triple file) with a reference triple file.

    `run_report` may point at a factorize ``report.json`` to carry over the
    iteration count, convergence flag, variant and rank.
    """
    out = _out(out_dir)
    recon, _ = _load_reconstruction(recon_or_factors)
    ref, labels = io.load_triples(reference)
    if recon.shape != ref.shape:
        raise DimensionError(f"reconstruction {recon.shape} vs reference {ref.shape}")
    x = io.load_triples(truth)[0] if truth else None
    extra = {}
    if run_report:
        prev = json.loads(Path(run_report).read_text())
        ev = prev.get("eval") or {}
        extra = {k: ev.get(k) for k in ("outer_iterations", "converged", "variant", "rank")}
    report = evaluate(recon, ref, x, threshold, **extra)
    io.write_json(out / "eval.json", report.to_dict())
    write_eval_csv(out / "eval.csv", report)
    if histogram_mode is not None:
        counts = slice_error_histogram(recon, ref, histogram_mode, threshold)
        names = labels[histogram_mode - 1] or [None] * len(counts)
        with open(out / f"slice_errors_mode{histogram_mode}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "label", "errors"])
            for i, (c, name) in enumerate(zip(counts, names)):
                w.writerow([i, "" if name is None else name, c])
        if plots:
            plotting.plot_slice_histogram(counts, out / f"slice_errors_mode{histogram_mode}.png")
    return report


# --- communities ------------------------------------------------------------


def cmd_communities(factors_path, out_dir, labels_path=None, threshold: float = DEFAULT_THRESHOLD,
                    plots: bool = True):
    out = _out(out_dir)
    f = io.load_factors(factors_path)
    labels = io.load_labels(labels_path) if labels_path else None
    comms = extract_communities(f, labels, threshold)
    mode_names = ("mode1", "mode2", "mode3")

    with open(out / "communities.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank_index", "mode", "index", "label", "weight"])
        for c in comms:
            for d, members in enumerate(c.members, start=1):
                for m in members:
                    w.writerow([c.rank_index, d, m.index, m.label or "", repr(m.weight)])
    with open(out / "community_sizes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank_index", *(f"n_{n}" for n in mode_names)])
        for c in comms:
            w.writerow([c.rank_index, *c.sizes()])

    lines = []
    for c in comms:
        lines.append(f"community {c.rank_index}: sizes {'/'.join(str(s) for s in c.sizes())}")
        for name, members in zip(mode_names, c.members):
            shown = ", ".join(
                f"{m.label if m.label is not None else m.index} ({m.weight:.3g})" for m in members[:10]
            )
            more = f", ... (+{len(members) - 10})" if len(members) > 10 else ""
            lines.append(f"  {name}: {shown or '-'}{more}")
    (out / "communities.txt").write_text("\n".join(lines) + "\n")
    ratios = factor_nonzero_ratio(f, threshold)
    io.write_json(out / "nonzero_ratio.json", dict(zip("ABC", ratios)))

    if plots:
        plotting.plot_component_nonzero_ratio(f, out / "nonzero_ratio.png", threshold)
        plotting.plot_factor_supports(f, out / "factor_supports.png")
    return comms


# --- sweep ------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def run_one(variant: str, noise: float, rank: int, seed: int, base: SolverConfig,
            spec: SynthSpec, threshold: float, run_dir=None) -> dict:
    """One synthetic run; the seed drives both the instance and the CP-ALS start."""
    row = {"variant": variant, "noise_ratio": noise, "rank": rank, "seed": seed}
    try:
        inst = generate(replace(spec, noise_ratio=noise, seed=seed))
        cfg = replace(base, rank=rank, variant=variant, init=replace(base.init, seed=seed))
        result = solve(inst.o, cfg)
        recon = cp_reconstruct(result.factors)
        rep = evaluate(recon, inst.o, inst.x, threshold)
        nz = factor_nonzero_ratio(result.factors, threshold)
        row.update(
            status="ok", outer_iterations=result.trace.iterations, converged=result.trace.converged,
            fp_truth=rep.false_positives_vs_truth, fn_truth=rep.false_negatives_vs_truth,
            fp_observation=rep.false_positives, fn_observation=rep.false_negatives,
            mse_truth=rep.mse_vs_truth, mse_observation=rep.mse_vs_observation,
            nnz_ratio_A=nz[0], nnz_ratio_B=nz[1], nnz_ratio_C=nz[2], error=None,
        )
        if run_dir is not None:
            d = _out(run_dir)
            io.save_factors(d / "factors.txt", result.factors)
            io.write_json(d / "report.json", {"row": row, "trace": result.trace.summary()})
    except (SolverDivergence, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("run %s failed: %s", row, exc)
        row.update(status="failed", error=str(exc))
    return row


def sweep_grid(noise_ratios, ranks, variants, seeds):
    return list(itertools.product(variants, noise_ratios, ranks, seeds))


def cmd_sweep(out_dir, noise_ratios, ranks, variants, seeds, base: SolverConfig = SolverConfig(),
              spec: SynthSpec = SynthSpec(), threshold: float = DEFAULT_THRESHOLD, jobs: int = 1,
              plots: bool = True, keep_runs: bool = True) -> list[dict]:
    """Run the full cross product of the grid and write ``sweep.csv``.

    Rows come out in grid order regardless of `jobs`.  Failed runs are
    recorded with ``status=failed`` instead of aborting the sweep.
    """
    grid = sweep_grid(noise_ratios, ranks, variants, seeds)
    if not grid:
        raise ValueError("empty sweep grid")
    out = _out(out_dir)
    tasks = []
    for variant, noise, rank, seed in grid:
        run_dir = out / "runs" / f"{variant}_noise{noise:g}_rank{rank}_seed{seed}" if keep_runs else None
        tasks.append((variant, noise, rank, seed, base, spec, threshold, run_dir))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_one, *zip(*tasks)))
    else:
        rows = [run_one(*t) for t in tasks]

    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in SWEEP_COLUMNS})
    io.write_json(out / "sweep_manifest.json", {
        "grid": {"noise_ratios": list(noise_ratios), "ranks": list(ranks),
                 "variants": list(variants), "seeds": list(seeds)},
        "solver": solver_config_dict(base), "spec": spec.to_dict(), "threshold": threshold,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    })
    if plots:
        if len(set(noise_ratios)) > 1:
            plotting.plot_sweep(rows, out / "sweep_noise.png", x="noise_ratio")
        if len(set(ranks)) > 1:
            plotting.plot_sweep(rows, out / "sweep_rank.png", x="rank")
    return rows


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
