"""Reconstruction metrics and community extraction."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .tensor import DimensionError, FactorTriple

DEFAULT_THRESHOLD = 1e-6


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise DimensionError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def binarize(t: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """1 where ``t > threshold``, else 0."""
    if not threshold > 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    return (np.asarray(t) > threshold).astype(np.float64)


def _error_masks(recon, reference, threshold):
    _same_shape(recon, reference)
    pos = np.asarray(recon) > threshold
    truth = np.asarray(reference) != 0
    return pos & ~truth, ~pos & truth


def confusion_counts(recon: np.ndarray, reference: np.ndarray,
                     threshold: float = DEFAULT_THRESHOLD) -> tuple[int, int]:
    """(false positives, false negatives) of the binarized `recon` against `reference`.

    Nonzero entries of `reference` are positives; `recon` entries above
    `threshold` are predicted positives.
    """
    if not threshold > 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    fp, fn = _error_masks(recon, reference, threshold)
    return int(fp.sum()), int(fn.sum())


def mse(recon: np.ndarray, reference: np.ndarray) -> float:
    _same_shape(recon, reference)
    return float(np.mean(np.square(np.asarray(recon) - np.asarray(reference))))


def slice_error_histogram(recon: np.ndarray, reference: np.ndarray, mode: int = 1,
                          threshold: float = DEFAULT_THRESHOLD) -> list[int]:
    """fp + fn count inside each slice along `mode` (1-based)."""
    if mode not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {mode!r}")
    fp, fn = _error_masks(recon, reference, threshold)
    axes = tuple(a for a in range(3) if a != mode - 1)
    return [int(v) for v in (fp | fn).sum(axis=axes)]


def factor_nonzero_ratio(f: FactorTriple, threshold: float = DEFAULT_THRESHOLD) -> tuple[float, float, float]:
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    return tuple(float(np.mean(m > threshold)) for m in f)


@dataclass
class EvalReport:
    false_positives: int
    false_negatives: int
    mse_vs_observation: float
    mse_vs_truth: float | None = None
    false_positives_vs_truth: int | None = None
    false_negatives_vs_truth: int | None = None
    outer_iterations: int | None = None
    converged: bool | None = None
    variant: str | None = None
    rank: int | None = None
    noise_ratio: float | None = None
    threshold: float = DEFAULT_THRESHOLD

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(recon: np.ndarray, observation: np.ndarray, truth: np.ndarray | None = None,
             threshold: float = DEFAULT_THRESHOLD, **extra) -> EvalReport:
    """Confusion counts and MSE of `recon` against the observation and, if given, the truth."""
    fp, fn = confusion_counts(recon, observation, threshold)
    report = EvalReport(fp, fn, mse(recon, observation), threshold=threshold, **extra)
    if truth is not None:
        report.false_positives_vs_truth, report.false_negatives_vs_truth = confusion_counts(recon, truth, threshold)
        report.mse_vs_truth = mse(recon, truth)
    return report


@dataclass
class Member:
    index: int
    weight: float
    label: str | None = None


@dataclass
class Community:
    rank_index: int
    members: tuple[list[Member], list[Member], list[Member]] = field(default_factory=lambda: ([], [], []))

    def sizes(self) -> tuple[int, int, int]:
        return tuple(len(m) for m in self.members)

    def is_empty(self) -> bool:
        return not any(self.members)


def extract_communities(f: FactorTriple, labels=None,
                        membership_threshold: float = DEFAULT_THRESHOLD) -> list[Community]:
    """One community per rank-one component, members above `membership_threshold`.

    `labels` is an optional sequence of three per-mode label lists (entries
    may be ``None`` for unlabeled modes).  Members are sorted by descending
    weight, ties broken by index.
    """
    if not membership_threshold > 0:
        raise ValueError("membership_threshold must be > 0")
    labels = list(labels) if labels is not None else [None, None, None]
    if len(labels) != 3:
        raise DimensionError("labels must have one entry per mode")
    for d, (mat, lab) in enumerate(zip(f, labels), start=1):
        if lab is not None and len(lab) != mat.shape[0]:
            raise DimensionError(
                f"mode-{d} labels have length {len(lab)}, expected {mat.shape[0]}"
            )

    out = []
    for r in range(f.rank):
        per_mode = []
        for mat, lab in zip(f, labels):
            col = mat[:, r]
            idx = np.flatnonzero(col >= membership_threshold)
            idx = idx[np.lexsort((idx, -col[idx]))]
            per_mode.append([
                Member(int(i), float(col[i]), None if lab is None else str(lab[i]))
                for i in idx
            ])
        out.append(Community(r, tuple(per_mode)))
    return out
