"""Non-negative occurrence tensor factorization.

Recovers a low-rank non-negative CP model plus a sparse error tensor from a
noisy occurrence tensor with an ADMM splitting solver.
"""

from .cp_init import CpAlsConfig, cp_als, nn_project
from .metrics import (
    Community,
    EvalReport,
    binarize,
    confusion_counts,
    evaluate,
    extract_communities,
    factor_nonzero_ratio,
    mse,
    slice_error_histogram,
)
from .solver import (
    AdmmState,
    NormVariant,
    SolverConfig,
    SolverDivergence,
    SolverTrace,
    inner_als_sweep,
    prox_l0,
    prox_l1,
    prox_l2,
    res_inner,
    res_outer,
    solve,
)
from .synth import SynthInstance, SynthSpec, apply_flip_noise, gen_sparse_factor, generate, make_ground_truth
from .tensor import (
    DimensionError,
    FactorTriple,
    count_nonzero,
    cp_reconstruct,
    fold,
    frobenius_norm,
    khatri_rao,
    pinv_psd,
    unfold,
)

__version__ = "0.1.0"
