"""Acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS/FAIL`` line (collected again in the
terminal summary).  Tolerances are fixed here and never tuned per run.
"""

import json
import time
from statistics import median

import numpy as np
import pytest

from notf import io
from notf.cli import main
from notf.cp_init import CpAlsConfig
from notf.experiments import cmd_communities, cmd_eval, cmd_factorize, cmd_standin, run_one
from notf.metrics import confusion_counts, slice_error_histogram
from notf.solver import SolverConfig, prox_l0, prox_l1, prox_l2, solve
from notf.synth import SynthSpec, generate
from notf.tensor import cp_reconstruct, fold, khatri_rao, pinv_psd, unfold

from conftest import record_criterion, triple_loop_cp

EPS = 1e-3
NOISES = (0.02, 0.05, 0.10)
SEEDS = range(5)
VARIANTS = ("l0", "l1", "l2")
SYNTH_RUN_SECONDS = 10.0


@pytest.fixture(scope="module")
def grid():
    """The criterion-2 grid, each run timed; the seed drives instance and initializer."""
    out = {}
    for noise in NOISES:
        for seed in SEEDS:
            for v in VARIANTS:
                t0 = time.perf_counter()
                row = run_one(v, noise, 3, seed, SolverConfig(), SynthSpec(), threshold=1e-6)
                row["seconds"] = time.perf_counter() - t0
                out[v, noise, seed] = row
    return out


def test_criterion_01_noiseless_recovery():
    inst = generate(SynthSpec(noise_ratio=0.0))
    res = solve(inst.o, SolverConfig(rank=3, variant="l0", tau=10.0))
    last = res.trace.records[-1]
    counts = confusion_counts(cp_reconstruct(res.factors), inst.x)
    ok = res.trace.converged and last.res_inner[-1] < EPS and last.res_outer < EPS and counts == (0, 0)
    record_criterion(1, ok, f"seed 0, converged={res.trace.converged} in {res.trace.iterations} its, (fp, fn) vs X = {counts}")
    assert res.trace.converged
    assert counts == (0, 0)


def test_criterion_02_error_orderings(grid):
    runs = [(n, s) for n in NOISES for s in SEEDS]
    l0 = [grid["l0", n, s] for n, s in runs]
    l1 = [grid["l1", n, s] for n, s in runs]
    l2 = [grid["l2", n, s] for n, s in runs]
    assert all(r["status"] == "ok" for r in l0 + l1 + l2)
    tp = {(n, s): int(generate(SynthSpec(noise_ratio=n, seed=s)).x.sum()) for n, s in runs}

    fp_zero_share = np.mean([r["fp_truth"] == 0 for r in l0])
    fn_share = median(r["fn_truth"] / tp[r["noise_ratio"], r["seed"]] for r in l0)
    l2_ok = all(b["fn_truth"] == 0 and b["fp_truth"] > a["fp_truth"] for a, b in zip(l0, l2))
    it0, it1 = median(r["outer_iterations"] for r in l0), median(r["outer_iterations"] for r in l1)
    slowest = max(r["seconds"] for r in grid.values())
    ok = fp_zero_share >= 0.8 and fn_share <= 0.05 and l2_ok and it1 > it0 and slowest < SYNTH_RUN_SECONDS
    record_criterion(2, ok, f"l0 fp=0 share {fp_zero_share:.2f}, l0 median fn/TP {fn_share:.3f}, "
                            f"l2 fn=0 & fp>l0 fp in all runs: {l2_ok}, median its l1 {it1} vs l0 {it0}, "
                            f"slowest run {slowest:.2f}s")
    assert fp_zero_share >= 0.8
    assert fn_share <= 0.05
    assert l2_ok
    assert it1 > it0
    assert slowest < SYNTH_RUN_SECONDS


def test_criterion_03_rank6_exact_recovery():
    hits = []
    for seed in range(10):
        row = run_one("l0", 0.10, 6, seed, SolverConfig(), SynthSpec(), threshold=1e-6)
        if row["status"] == "ok" and row["fp_truth"] == 0 and row["fn_truth"] == 0:
            hits.append(seed)
    record_criterion(3, bool(hits), f"R=6, 10% noise, seeds 0-9: exact recovery for seeds {hits}")
    assert hits


def test_criterion_04_denoising_direction(grid):
    runs = [grid["l0", 0.10, s] for s in SEEDS]
    converged = [r for r in runs if r["converged"]]
    ok = bool(converged) and all(r["mse_observation"] >= r["mse_truth"] for r in converged)
    gaps = [round(r["mse_observation"] - r["mse_truth"], 4) for r in converged]
    record_criterion(4, ok, f"l0 at 10% noise, {len(converged)}/5 converged, mse(O) - mse(X) = {gaps}")
    assert converged
    assert all(r["mse_observation"] >= r["mse_truth"] for r in converged)


def test_criterion_05_factor_sparsity(grid):
    wins = 0
    for s in SEEDS:
        a, b = grid["l0", 0.10, s], grid["l2", 0.10, s]
        wins += all(a[f"nnz_ratio_{m}"] < b[f"nnz_ratio_{m}"] for m in "ABC")
    record_criterion(5, wins >= 4, f"l0 nonzero ratio below l2 in all modes for {wins}/5 seeds")
    assert wins >= 4


def test_criterion_06_prox_oracles():
    rng = np.random.default_rng(6)
    z = rng.uniform(-2, 2, size=10_000)
    tau = 10.0
    t = 1 / tau

    l0_expected = np.where(1.0 < z ** 2 / (2 * t), z, 0.0)
    l0_ok = np.array_equal(prox_l0(z, t), l0_expected)

    grid = np.arange(-2.5, 2.5, 2e-4)
    best = np.empty_like(z)
    for s in range(0, z.size, 250):
        zz = z[s:s + 250, None]
        best[s:s + 250] = grid[(np.abs(grid) + (grid - zz) ** 2 / (2 * t)).argmin(axis=1)]
    l1_err = float(np.max(np.abs(prox_l1(z, t) - best)))

    # minimiser of x^2/2 + tau/2 (x - z)^2 from the stationarity condition x + tau (x - z) = 0,
    # cross-checked by a fine grid around it
    closed = z * tau / (1 + tau)
    fine = closed[:, None] + np.linspace(-1e-3, 1e-3, 2001)[None, :]
    grid_best = fine[np.arange(z.size), (0.5 * fine ** 2 + tau / 2 * (fine - z[:, None]) ** 2).argmin(axis=1)]
    l2_err = max(float(np.max(np.abs(prox_l2(z, tau) - closed))), float(np.max(np.abs(prox_l2(z, tau) - grid_best))))
    ok = l0_ok and l1_err < 1e-3 and l2_err < 1e-6
    record_criterion(6, ok, f"l0 exact: {l0_ok}, l1 max err {l1_err:.1e}, l2 max err {l2_err:.1e} on 1e4 entries")
    assert l0_ok
    assert l1_err < 1e-3
    assert l2_err < 1e-6


def test_criterion_07_algebra():
    rng = np.random.default_rng(7)
    t = rng.standard_normal((4, 5, 6))
    round_trip = all(np.array_equal(fold(unfold(t, d), d, t.shape), t) for d in (1, 2, 3))
    from notf.tensor import FactorTriple
    f = FactorTriple(rng.random((4, 3)), rng.random((5, 3)), rng.random((6, 3)))
    x = cp_reconstruct(f)
    A, B, C = f
    cp_err = max(
        np.linalg.norm(unfold(x, 1) - A @ khatri_rao(C, B).T),
        np.linalg.norm(unfold(x, 2) - B @ khatri_rao(C, A).T),
        np.linalg.norm(unfold(x, 3) - C @ khatri_rao(B, A).T),
    )
    loop_err = float(np.max(np.abs(x - triple_loop_cp(f))))
    m = rng.standard_normal((2, 4))
    g = m.T @ m
    p = pinv_psd(g)
    penrose = max(
        np.linalg.norm(g @ p @ g - g), np.linalg.norm(p @ g @ p - p),
        np.linalg.norm((g @ p).T - g @ p), np.linalg.norm((p @ g).T - p @ g),
    )
    ok = round_trip and cp_err < 1e-10 and loop_err < 1e-12 and penrose < 1e-9
    record_criterion(7, ok, f"round trip {round_trip}, CP identity {cp_err:.1e}, triple loop {loop_err:.1e}, "
                            f"Penrose {penrose:.1e}")
    assert round_trip and cp_err < 1e-10 and loop_err < 1e-12 and penrose < 1e-9


def test_criterion_08_structural_invariants():
    inst = generate(SynthSpec(noise_ratio=0.0))
    nonneg = []
    cfg = SolverConfig(rank=3)
    res = solve(inst.o, cfg, callback=lambda state, rec: nonneg.append(state.factors.is_nonnegative()))
    again = solve(inst.o, cfg)
    strip = lambda tr: [(r.res_outer, r.res_inner, r.objective) for r in tr.records]
    deterministic = strip(res.trace) == strip(again.trace) and all(
        np.array_equal(a, b) for a, b in zip(res.factors, again.factors))
    max_inner = max(r.inner_sweeps for r in res.trace.records)
    last = res.trace.records[-1]
    inner_ok = last.res_inner[-1] < EPS and last.inner_sweeps <= 10

    noisy = generate(SynthSpec(noise_ratio=0.1, seed=2))
    nonneg_noisy = []
    for v in VARIANTS:
        solve(noisy.o, SolverConfig(rank=5, variant=v),
              callback=lambda state, rec: nonneg_noisy.append((state.factors.is_nonnegative(), rec.inner_sweeps)))
    ok = (all(nonneg) and all(a for a, _ in nonneg_noisy) and deterministic and max_inner <= 10
          and all(n <= 10 for _, n in nonneg_noisy) and inner_ok)
    record_criterion(8, ok, f"non-negative every iteration: {all(nonneg) and all(a for a, _ in nonneg_noisy)}, "
                            f"deterministic: {deterministic}, max inner sweeps {max_inner}, "
                            f"final inner res {last.res_inner[-1]:.1e} after {last.inner_sweeps} sweeps")
    assert all(nonneg) and all(a for a, _ in nonneg_noisy)
    assert deterministic
    assert max_inner <= 10 and all(n <= 10 for _, n in nonneg_noisy)
    assert inner_ok


def test_criterion_09_pipeline_round_trip(grid, tmp_path):
    mismatches = []
    for noise in NOISES:
        for seed in SEEDS:
            syn = tmp_path / f"syn_{noise}_{seed}"
            assert main(["synth", str(syn), "--noise", str(noise), "--seed", str(seed)]) == 0
            for v in VARIANTS:
                fac = tmp_path / f"fac_{v}_{noise}_{seed}"
                ev = tmp_path / f"ev_{v}_{noise}_{seed}"
                assert main(["factorize", str(syn / "observation.tsv"), str(fac), "--variant", v,
                             "--seed", str(seed), "--no-plots"]) == 0
                assert main(["eval", str(fac / "factors.txt"), str(syn / "observation.tsv"), str(ev),
                             "--truth", str(syn / "truth.tsv"), "--run-report", str(fac / "report.json"),
                             "--no-plots"]) == 0
                rep = json.loads((ev / "eval.json").read_text())
                row = grid[v, noise, seed]
                got = (rep["false_positives_vs_truth"], rep["false_negatives_vs_truth"],
                       rep["false_positives"], rep["false_negatives"],
                       rep["mse_vs_truth"], rep["mse_vs_observation"], rep["outer_iterations"])
                want = (row["fp_truth"], row["fn_truth"], row["fp_observation"], row["fn_observation"],
                        row["mse_truth"], row["mse_observation"], row["outer_iterations"])
                if got != want:
                    mismatches.append((v, noise, seed, got, want))

    syn = tmp_path / f"syn_{NOISES[0]}_0"
    stable = []
    for name in ("truth.tsv", "observation.tsv"):
        t, labels = io.load_triples(syn / name)
        stable.append(io.save_triples(tmp_path / f"re_{name}", t, labels).read_bytes() == (syn / name).read_bytes())
    fac = tmp_path / f"fac_l0_{NOISES[0]}_0"
    stable.append(io.save_factors(tmp_path / "re_f.txt", io.load_factors(fac / "factors.txt")).read_bytes()
                  == (fac / "factors.txt").read_bytes())
    t, labels = io.load_triples(fac / "error.tsv")
    stable.append(io.save_triples(tmp_path / "re_u.tsv", t, labels, signed=True).read_bytes()
                  == (fac / "error.tsv").read_bytes())
    ok = not mismatches and all(stable)
    record_criterion(9, ok, f"{len(NOISES) * len(SEEDS) * len(VARIANTS)} file-based runs, "
                            f"{len(mismatches)} mismatches vs in-memory; byte-stable round trips {stable}")
    assert not mismatches, mismatches[:3]
    assert all(stable)


@pytest.mark.slow
def test_criterion_10_occurrence_standin(tmp_path):
    st = cmd_standin(tmp_path / "data", seed=0)
    o_path = st.artifacts["observation"]
    o, labels = io.load_triples(o_path)
    density = np.count_nonzero(o) / o.size
    cfg = SolverConfig(rank=20, max_outer_iters=100, init=CpAlsConfig(rank=20, seed=0))
    t0 = time.perf_counter()
    run = cmd_factorize(o_path, cfg, tmp_path / "fac")
    seconds = time.perf_counter() - t0
    cmd_eval(tmp_path / "fac" / "factors.txt", o_path, tmp_path / "eval", histogram_mode=1)
    comms = cmd_communities(tmp_path / "fac" / "factors.txt", tmp_path / "com", labels_path=o_path)
    hist_csv = tmp_path / "eval" / "slice_errors_mode1.csv"
    hist_rows = hist_csv.read_text().splitlines()[1:]
    fi_counts = sorted(c.sizes()[1] for c in comms)
    outputs = [hist_csv, tmp_path / "eval" / "slice_errors_mode1.png", tmp_path / "com" / "communities.csv",
               tmp_path / "com" / "communities.txt", tmp_path / "com" / "nonzero_ratio.png"]
    total_errors = sum(int(r.split(",")[-1]) for r in hist_rows)
    ok = (o.shape == (971, 85, 27) and abs(density - 0.0102) < 1e-4 and len(hist_rows) == 971
          and len(comms) == 20 and all(p.exists() for p in outputs))
    record_criterion(10, ok, f"971x85x27 at density {density:.4%}, R=20: {run.trace['outer_iterations']} its "
                             f"in {seconds:.0f}s without divergence, converged={run.trace['converged']}, "
                             f"error count vs O {total_errors}, FIs per community {fi_counts}")
    assert o.shape == (971, 85, 27)
    assert abs(density - 0.0102) < 1e-4
    assert len(hist_rows) == 971
    assert len(comms) == 20
    assert all(p.exists() for p in outputs)
    assert total_errors == sum(slice_error_histogram(cp_reconstruct(io.load_factors(tmp_path / "fac" / "factors.txt")), o, 1))
