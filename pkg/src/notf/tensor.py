"""Dense 3-mode tensor algebra.

Tensors are plain ``numpy.ndarray`` objects of shape ``(N1, N2, N3)`` and
dtype float64.  Unfoldings use the column ordering under which

    X_(1) = A (C kr B)^T,  X_(2) = B (C kr A)^T,  X_(3) = C (B kr A)^T

hold, i.e. the mode-1 column index is ``j + N2*k``, mode-2 is ``i + N1*k``
and mode-3 is ``i + N1*j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "FactorTriple",
    "as_tensor",
    "unfold",
    "fold",
    "khatri_rao",
    "cp_reconstruct",
    "pinv_psd",
    "count_nonzero",
    "frobenius_norm",
]


class DimensionError(ValueError):
    """Raised when array shapes are inconsistent."""


def _check_mode(mode: int) -> None:
    if mode not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {mode!r}")


def as_tensor(values, dims=None) -> np.ndarray:
    """Return `values` as a float64 3-mode tensor, optionally reshaped to `dims`.

    A flat input is interpreted in the canonical (mode-1 fastest) layout.
    """
    arr = np.asarray(values, dtype=np.float64)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if arr.size != int(np.prod(dims)):
            raise DimensionError(f"{arr.size} values cannot fill dims {dims}")
        arr = arr.reshape(dims, order="F")
    if arr.ndim != 3:
        raise DimensionError(f"expected a 3-mode tensor, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise DimensionError(f"dims must be positive, got {arr.shape}")
    return arr


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-`mode` unfolding (1-based) of a 3-mode tensor."""
    _check_mode(mode)
    t = np.asarray(t)
    if t.ndim != 3:
        raise DimensionError(f"expected a 3-mode tensor, got shape {t.shape}")
    moved = np.moveaxis(t, mode - 1, 0)
    return moved.reshape(t.shape[mode - 1], -1, order="F")


def fold(m: np.ndarray, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise DimensionError(f"dims must have three entries, got {dims}")
    m = np.asarray(m)
    n = dims[mode - 1]
    rest = int(np.prod(dims)) // n
    if m.shape != (n, rest):
        raise DimensionError(
            f"matrix of shape {m.shape} cannot fold to mode-{mode} of {dims}"
        )
    others = [d for i, d in enumerate(dims) if i != mode - 1]
    moved = m.reshape((n, *others), order="F")
    return np.moveaxis(moved, 0, mode - 1)


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; column r is ``kron(a[:, r], b[:, r])``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"column counts differ: {a.shape[1]} != {b.shape[1]}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1])


@dataclass(frozen=True)
class FactorTriple:
    """Factor matrices A (N1 x R), B (N2 x R), C (N3 x R) of a CP model."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        mats = []
        for name in "ABC":
            m = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2:
                raise DimensionError(f"factor {name} must be a matrix, got {m.shape}")
            mats.append(m)
            object.__setattr__(self, name, m)
        ranks = {m.shape[1] for m in mats}
        if len(ranks) != 1:
            raise DimensionError(
                f"factors must share a column count, got {[m.shape[1] for m in mats]}"
            )

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.A.shape[0], self.B.shape[0], self.C.shape[0])

    def __iter__(self):
        return iter((self.A, self.B, self.C))

    @classmethod
    def zeros(cls, dims, rank: int) -> "FactorTriple":
        return cls(*(np.zeros((n, rank)) for n in dims))

    def is_nonnegative(self) -> bool:
        return all(bool((m >= 0).all()) for m in self)


def cp_reconstruct(f: FactorTriple) -> np.ndarray:
    """Sum of rank-one tensors ``a_r o b_r o c_r``."""
    # fixed layout keeps downstream reductions bit-reproducible
    return np.ascontiguousarray(np.einsum("ir,jr,kr->ijk", f.A, f.B, f.C, optimize=True))


def pinv_psd(g: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric PSD matrix.

    Uses a symmetric eigendecomposition; eigenvalues at or below
    ``rcond * max_eigenvalue`` are treated as zero.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"pinv_psd expects a square matrix, got {g.shape}")
    w, v = np.linalg.eigh(0.5 * (g + g.T))
    top = w.max(initial=0.0)
    if top <= 0:
        return np.zeros_like(g)
    keep = w > rcond * top
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    return (v * inv_w) @ v.T


def count_nonzero(t: np.ndarray) -> int:
    """Number of entries that are exactly nonzero (the l0 "norm")."""
    return int(np.count_nonzero(t))


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(t))))
