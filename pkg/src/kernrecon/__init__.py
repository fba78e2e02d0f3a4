"""kernrecon: train kernel models, then reconstruct their training data
by querying them.

The package splits into kernels (closed forms and gradients), models (the
attacked predictors behind a query-only oracle), optim (Adam + OneCycle),
attack (the reconstruction loop and its post-processing), metrics
(reconstruction quality), verify (soundness suites), and cli (experiment
orchestration with bit-stable file formats).
"""

from .attack import (
    AttackConfig,
    AttackResult,
    FileQueries,
    FixedQueries,
    GridQueries,
    MatchReport,
    MixtureQueries,
    NormalQueries,
    QuerySet,
    ReconstructionParams,
    UniformBoxQueries,
    canonicalize,
    loss_gradients,
    match_to_truth,
    query_count_bound,
    reconstruction_loss,
    run_attack,
    run_attack_pca,
    sample_queries,
)
from .errors import ConfigError, NumericalError
from .kernels import (
    BandwidthGaussianKernel,
    KernelSpec,
    LaplaceKernel,
    NtkKernel,
    PolynomialKernel,
    RbfKernel,
    kappa0,
    kappa1,
    kernel_grad,
    kernel_matrix,
    kernel_value,
    ntk_value,
)
from .metrics import ImageShape, ReconReport, dssim, l2, mutual_nn_recovery, report
from .models import (
    Dataset,
    KdeModel,
    ModelOracle,
    TrainedKernelModel,
    hinge_objective,
    scott_bandwidths,
    train_kde,
    train_krr,
    train_svm_gd,
)
from .optim import Adam, OneCycleSchedule
from .verify import (
    SoundnessTrial,
    bracketing_queries,
    gram_positivity_trials,
    joint_gram_min_eig,
    soundness_instance,
    zero_loss_soundness,
)

__version__ = "0.1.0"
