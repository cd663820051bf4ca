"""Total-correlation Wasserstein autoencoder lab.

Objectives (TCWAE with minibatch-weighted or adversarial KL estimators,
plus the family of baselines), a procedural factor dataset, disentanglement
metrics, and a reproducible experiment driver, all on a small numpy
reverse-mode tape with compiled conv kernels.
"""

__version__ = "0.1.0"

from .estimators import (  # noqa: F401
    KernelConfig,
    LatentBatch,
    default_kernel_config,
    density_ratio_kl,
    imq_kernel,
    mmd_unbiased,
    mws_log_qz,
    mws_log_qz_dims,
    permute_dims,
    tc_and_dimwise_kl_mws,
)
from .gaussians import (  # noqa: F401
    DiagonalGaussian,
    gaussian_log_prob,
    gaussian_sample,
    kl_diag_gaussian_to_standard,
    standard_prior,
)
from .numerics import logsumexp  # noqa: F401
from .objectives import HyperParams, LossBreakdown  # noqa: F401
from .rng import RngState  # noqa: F401
