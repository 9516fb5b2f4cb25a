"""ADMM solver for non-negative occurrence tensor factorization.

Splits ``min ||[[A,B,C]] - O||_0  s.t. A, B, C >= 0`` into

    U      <- prox_{1/tau}([[A,B,C]] - O - lam)
    A,B,C  <- projected ALS fit of U + O + lam
    lam    <- lam + U - [[A,B,C]] + O

where the prox is hard thresholding for the l0 model and soft thresholding or
shrinkage for the l1 / l2 baselines.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cp_init import CpAlsConfig, cp_als
from .tensor import FactorTriple, count_nonzero, cp_reconstruct, frobenius_norm, khatri_rao, pinv_psd, unfold

__all__ = [
    "NormVariant",
    "SolverConfig",
    "SolverTrace",
    "IterationRecord",
    "AdmmState",
    "SolverDivergence",
    "SolveResult",
    "prox_l0",
    "prox_l1",
    "prox_l2",
    "inner_als_sweep",
    "res_inner",
    "res_outer",
    "relative_change",
    "solve",
]


NUMERICAL_ZERO = 1e-12


class NormVariant(str, enum.Enum):
    L0 = "l0"
    L1 = "l1"
    L2 = "l2"


class SolverDivergence(RuntimeError):
    """Raised when the iterates stop being finite."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite values at outer iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    rank: int = 3
    tau: float = 10.0
    eps: float = 1e-3
    max_outer_iters: int = 500
    max_inner_iters: int = 10
    variant: NormVariant = NormVariant.L0
    init: CpAlsConfig = field(default_factory=CpAlsConfig)
    rcond: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "variant", NormVariant(self.variant))
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class IterationRecord:
    outer: int
    res_outer: float
    res_inner: list[float]
    objective: float
    seconds: float

    @property
    def inner_sweeps(self) -> int:
        return len(self.res_inner)


@dataclass
class SolverTrace:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "outer_iterations": self.iterations,
            "converged": self.converged,
            "final_res_outer": last.res_outer if last else None,
            "final_res_inner": last.res_inner[-1] if last else None,
            "final_objective": last.objective if last else None,
            "total_inner_sweeps": sum(r.inner_sweeps for r in self.records),
            "seconds": sum(r.seconds for r in self.records),
        }


@dataclass
class AdmmState:
    u: np.ndarray
    lam: np.ndarray
    factors: FactorTriple
    outer_iter: int = 0
    recon: np.ndarray | None = None

    def __post_init__(self):
        if self.recon is None:
            self.recon = cp_reconstruct(self.factors)


@dataclass
class SolveResult:
    factors: FactorTriple
    u: np.ndarray
    trace: SolverTrace

    def __iter__(self):
        return iter((self.factors, self.u, self.trace))


# --- proximal operators -----------------------------------------------------


def prox_l0(z: np.ndarray, t: float) -> np.ndarray:
    """Hard thresholding: keep entries with ``|z| > sqrt(2 t)``."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    z = np.asarray(z, dtype=np.float64)
    return np.where(np.abs(z) > math.sqrt(2.0 * t), z, 0.0)


def prox_l1(z: np.ndarray, t: float) -> np.ndarray:
    """Soft thresholding ``sign(z) * max(|z| - t, 0)``."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_l2(z: np.ndarray, tau: float) -> np.ndarray:
    """Minimizer of ``x**2 / 2 + tau / 2 * (x - z)**2``, entrywise."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    return (tau / (1.0 + tau)) * np.asarray(z, dtype=np.float64)


def _error_update(z: np.ndarray, tau: float, variant: NormVariant) -> np.ndarray:
    if variant is NormVariant.L0:
        return prox_l0(z, 1.0 / tau)
    if variant is NormVariant.L1:
        return prox_l1(z, 1.0 / tau)
    return prox_l2(z, tau)


def _objective(u: np.ndarray, variant: NormVariant) -> float:
    if variant is NormVariant.L0:
        return float(count_nonzero(u))
    if variant is NormVariant.L1:
        return float(np.abs(u).sum())
    return 0.5 * frobenius_norm(u) ** 2


# --- factor subproblem ------------------------------------------------------


def inner_als_sweep(factors: FactorTriple, m: np.ndarray, rcond: float = 1e-10) -> FactorTriple:
    """One projected ALS pass: update A, then B, then C, each clamped at zero.

    Each update is ``max(M_(d) V pinv(Gram * Gram), 0)`` with `V` the
    Khatri-Rao product of the other two (current) factors.
    """
    A, B, C = factors
    A = np.maximum(unfold(m, 1) @ khatri_rao(C, B) @ pinv_psd((C.T @ C) * (B.T @ B), rcond), 0.0)
    B = np.maximum(unfold(m, 2) @ khatri_rao(C, A) @ pinv_psd((C.T @ C) * (A.T @ A), rcond), 0.0)
    C = np.maximum(unfold(m, 3) @ khatri_rao(B, A) @ pinv_psd((B.T @ B) * (A.T @ A), rcond), 0.0)
    return FactorTriple(A, B, C)


# --- residuals --------------------------------------------------------------


def relative_change(prev: np.ndarray, new: np.ndarray, atol: float = 0.0) -> float:
    """``||new - prev||_F / ||prev||_F`` with 0/0 = 0 and x/0 = inf.

    Norms at or below `atol` count as zero, so round-off sized iterates do
    not produce O(1) ratios.
    """
    num = frobenius_norm(np.asarray(new) - np.asarray(prev))
    den = frobenius_norm(prev)
    if den <= atol:
        return 0.0 if num <= atol else math.inf
    return num / den


def res_inner(prev: FactorTriple, new: FactorTriple, atol: float = 0.0) -> float:
    return relative_change(cp_reconstruct(prev), cp_reconstruct(new), atol)


def res_outer(prev_state: AdmmState, next_state: AdmmState, atol: float = 0.0) -> float:
    return max(
        relative_change(prev_state.recon, next_state.recon, atol),
        relative_change(prev_state.lam, next_state.lam, atol),
    )


def zero_floor(o: np.ndarray) -> float:
    """Norm below which iterates of a problem with observation `o` are treated as zero."""
    return NUMERICAL_ZERO * max(frobenius_norm(o), 1.0)


# --- driver -----------------------------------------------------------------


def _finite(*arrays) -> bool:
    return all(bool(np.isfinite(a).all()) for a in arrays)


def solve(o: np.ndarray, cfg: SolverConfig = SolverConfig(), init: FactorTriple | None = None,
          callback=None) -> SolveResult:
    """Factorize the occurrence tensor `o` as a non-negative CP model plus sparse error.

    Parameters
    ----------
    o : ndarray, shape (N1, N2, N3)
        Non-negative observation tensor.
    cfg : SolverConfig
        Rank, penalty ``tau``, tolerance ``eps``, iteration caps and error model.
    init : FactorTriple, optional
        Starting factors.  Defaults to a clamped CP-ALS fit of `o`.
    callback : callable, optional
        Called as ``callback(state, record)`` after each outer iteration.

    Returns
    -------
    SolveResult
        Final factors, final error tensor ``U`` (reconstruction minus
        observation, sparse for the l0 model) and the iteration trace.
    """
    o = np.asarray(o, dtype=np.float64)
    if o.ndim != 3:
        raise ValueError(f"expected a 3-mode tensor, got shape {o.shape}")
    if not np.isfinite(o).all():
        raise ValueError("observation has non-finite entries")
    if (o < 0).any():
        raise ValueError("observation must be non-negative")

    if init is None:
        init = cp_als(o, replace(cfg.init, rank=cfg.rank))
    elif init.dims != o.shape or init.rank != cfg.rank:
        raise ValueError("initial factors do not match observation dims / rank")

    state = AdmmState(u=np.zeros_like(o), lam=np.zeros_like(o), factors=init)
    trace = SolverTrace()
    atol = zero_floor(o)
    for p in range(1, cfg.max_outer_iters + 1):
        t0 = time.perf_counter()
        u = _error_update(state.recon - o - state.lam, cfg.tau, cfg.variant)
        m = u + o + state.lam

        factors, recon = state.factors, state.recon
        inner = []
        for _ in range(cfg.max_inner_iters):
            new_factors = inner_als_sweep(factors, m, cfg.rcond)
            new_recon = cp_reconstruct(new_factors)
            inner.append(relative_change(recon, new_recon, atol))
            factors, recon = new_factors, new_recon
            if inner[-1] < cfg.eps:
                break

        lam = state.lam + u - recon + o
        if not _finite(u, lam, recon):
            raise SolverDivergence(p)

        new_state = AdmmState(u=u, lam=lam, factors=factors, outer_iter=p, recon=recon)
        r2 = res_outer(state, new_state, atol)
        record = IterationRecord(p, r2, inner, _objective(u, cfg.variant), time.perf_counter() - t0)
        trace.records.append(record)
        state = new_state
        if callback is not None:
            callback(state, record)
        if inner[-1] < cfg.eps and r2 < cfg.eps:
            trace.converged = True
            break

    return SolveResult(state.factors, state.u, trace)
