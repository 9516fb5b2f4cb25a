"""Seeded synthetic benchmark: sparse factors, binary truth, flip noise."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .tensor import FactorTriple, cp_reconstruct


@dataclass(frozen=True)
class SynthSpec:
    """Generation parameters.

    ``sparsity_ratios`` are the fractions of zero entries in A, B and C.
    """

    dims: tuple[int, int, int] = (50, 20, 10)
    true_rank: int = 3
    sparsity_ratios: tuple[float, float, float] = (0.7067, 0.55, 0.30)
    noise_ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "sparsity_ratios", tuple(float(s) for s in self.sparsity_ratios))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if self.true_rank < 1:
            raise ValueError(f"true_rank must be >= 1, got {self.true_rank}")
        if len(self.sparsity_ratios) != 3 or not all(0 <= s <= 1 for s in self.sparsity_ratios):
            raise ValueError(f"sparsity ratios must be three values in [0, 1], got {self.sparsity_ratios}")
        if not 0 <= self.noise_ratio <= 1:
            raise ValueError(f"noise_ratio must be in [0, 1], got {self.noise_ratio}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["sparsity_ratios"] = list(self.sparsity_ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(
            dims=tuple(d["dims"]),
            true_rank=int(d["true_rank"]),
            sparsity_ratios=tuple(d["sparsity_ratios"]),
            noise_ratio=float(d["noise_ratio"]),
            seed=int(d["seed"]),
        )


@dataclass
class SynthInstance:
    spec: SynthSpec
    factors: FactorTriple
    x: np.ndarray
    o: np.ndarray
    flipped_positions: list[tuple[int, int, int]] = field(default_factory=list)


def streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for factor sampling and for noise."""
    factor_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(factor_ss), np.random.default_rng(noise_ss)


def gen_sparse_factor(n: int, r: int, sparsity: float, rng: np.random.Generator) -> np.ndarray:
    """`n` x `r` matrix with exactly ``round(sparsity*n*r)`` zeros, others uniform on (0, 1)."""
    if not 0 <= sparsity <= 1:
        raise ValueError(f"sparsity must be in [0, 1], got {sparsity}")
    size = n * r
    n_zero = int(round(sparsity * size))
    values = rng.random(size)
    # Generator.random is on [0, 1); map exact zeros into the open interval
    values[values == 0.0] = np.nextafter(0.0, 1.0)
    zeros = rng.choice(size, size=n_zero, replace=False)
    values[zeros] = 0.0
    return values.reshape(n, r)


def make_ground_truth(f: FactorTriple) -> np.ndarray:
    """Indicator tensor of the nonzero entries of the CP reconstruction."""
    return (cp_reconstruct(f) > 0).astype(np.float64)


def apply_flip_noise(x: np.ndarray, noise_ratio: float, rng: np.random.Generator):
    """Flip ``round(noise_ratio * x.size)`` distinct entries of a binary tensor.

    Returns the noisy tensor and the flipped ``(i, j, k)`` positions in the
    order they were drawn.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.isin(x, (0.0, 1.0)).all():
        raise ValueError("flip noise needs a binary tensor")
    if not 0 <= noise_ratio <= 1:
        raise ValueError(f"noise_ratio must be in [0, 1], got {noise_ratio}")
    n_flip = int(round(noise_ratio * x.size))
    flat = rng.choice(x.size, size=n_flip, replace=False)
    idx = np.unravel_index(flat, x.shape)
    o = x.copy()
    o[idx] = 1.0 - o[idx]
    positions = [tuple(int(v) for v in p) for p in zip(*idx)]
    return o, positions


def generate(spec: SynthSpec) -> SynthInstance:
    factor_rng, noise_rng = streams(spec.seed)
    mats = [
        gen_sparse_factor(n, spec.true_rank, s, factor_rng)
        for n, s in zip(spec.dims, spec.sparsity_ratios)
    ]
    factors = FactorTriple(*mats)
    x = make_ground_truth(factors)
    o, flips = apply_flip_noise(x, spec.noise_ratio, noise_rng)
    return SynthInstance(spec, factors, x, o, flips)


RESMBS_DIMS = (971, 85, 27)
RESMBS_DENSITY = 0.0102


def make_occurrence_standin(dims=RESMBS_DIMS, density: float = RESMBS_DENSITY,
                            seed: int = 0, spurious_ratio: float = 0.002) -> np.ndarray:
    """Count tensor shaped like an (FC, FI, Role) occurrence tensor.

    Blocks of a few dozen first-mode indices, one or two second-mode indices
    and a handful of third-mode indices are stacked until the nonzero count
    reaches ``round(density * size)``; overlapping blocks add up to counts
    above one.  A `spurious_ratio` share of the nonzeros is then moved to
    random positions to mimic extraction errors.  The nonzero count is exact.
    """
    dims = tuple(int(d) for d in dims)
    rng = np.random.default_rng(seed)
    t = np.zeros(dims)
    size = t.size
    target = int(round(density * size))
    if target == 0:
        return t
    while np.count_nonzero(t) < target:
        rows = rng.choice(dims[0], size=min(dims[0], int(rng.integers(10, 80))), replace=False)
        cols = rng.choice(dims[1], size=min(dims[1], int(rng.integers(1, 3))), replace=False)
        tubes = rng.choice(dims[2], size=min(dims[2], int(rng.integers(1, 5))), replace=False)
        t[np.ix_(rows, cols, tubes)] += 1.0
    nz = np.flatnonzero(t)
    excess = len(nz) - target
    if excess > 0:
        t.flat[rng.choice(nz, size=excess, replace=False)] = 0.0
    n_move = int(round(spurious_ratio * target))
    if n_move:
        nz = np.flatnonzero(t)
        zeros = np.flatnonzero(t == 0)
        t.flat[rng.choice(nz, size=n_move, replace=False)] = 0.0
        t.flat[rng.choice(zeros, size=n_move, replace=False)] = 1.0
    return t
