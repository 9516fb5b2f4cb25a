"""Unconstrained CP-ALS used to warm start the ADMM solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import FactorTriple, cp_reconstruct, frobenius_norm, khatri_rao, pinv_psd, unfold


@dataclass(frozen=True)
class CpAlsConfig:
    rank: int = 3
    max_iters: int = 50
    rel_change_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_change_tol > 0:
            raise ValueError(f"rel_change_tol must be > 0, got {self.rel_change_tol}")


def nn_project(f: FactorTriple) -> FactorTriple:
    """Clamp every factor entry to be non-negative."""
    return FactorTriple(*(np.maximum(m, 0.0) for m in f))


def als_sweep(m: np.ndarray, f: FactorTriple, rcond: float = 1e-10) -> FactorTriple:
    """One unconstrained alternating least-squares pass over A, B, C (in order)."""
    A, B, C = f
    A = unfold(m, 1) @ khatri_rao(C, B) @ pinv_psd((C.T @ C) * (B.T @ B), rcond)
    B = unfold(m, 2) @ khatri_rao(C, A) @ pinv_psd((C.T @ C) * (A.T @ A), rcond)
    C = unfold(m, 3) @ khatri_rao(B, A) @ pinv_psd((B.T @ B) * (A.T @ A), rcond)
    return FactorTriple(A, B, C)


def random_factors(dims, rank: int, seed: int) -> FactorTriple:
    rng = np.random.default_rng(seed)
    return FactorTriple(*(rng.random((n, rank)) for n in dims))


def cp_als(o: np.ndarray, cfg: CpAlsConfig = CpAlsConfig(), history: list | None = None) -> FactorTriple:
    """CP decomposition of `o` by alternating least squares, then clamped to >= 0.

    Starts from uniform [0, 1) factors drawn with ``cfg.seed`` and stops after
    ``cfg.max_iters`` sweeps or once the relative change of the reconstruction
    drops below ``cfg.rel_change_tol``.  If `history` is given, the squared fit
    error after each sweep (before clamping) is appended to it.
    """
    o = np.asarray(o, dtype=np.float64)
    if not np.isfinite(o).all():
        raise ValueError("input tensor has non-finite entries")
    f = random_factors(o.shape, cfg.rank, cfg.seed)
    prev = cp_reconstruct(f)
    for _ in range(cfg.max_iters):
        f = als_sweep(o, f)
        recon = cp_reconstruct(f)
        if history is not None:
            history.append(frobenius_norm(recon - o) ** 2)
        denom = frobenius_norm(prev)
        change = frobenius_norm(recon - prev)
        prev = recon
        if change == 0 or (denom > 0 and change / denom < cfg.rel_change_tol):
            break
    return nn_project(f)
