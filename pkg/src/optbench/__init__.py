"""Adam-family optimizers, toy training problems, ensemble fusion, and a
deterministic benchmark harness."""

from .bench import (
    CSV_HEADER,
    TASKS,
    DivergenceError,
    EnsembleReport,
    ExperimentConfig,
    FusionScores,
    MemberResult,
    RunRecord,
    emit_csv,
    format_report,
    run_ensemble,
    run_training,
)
from .ensemble import (
    ConfusionMatrix,
    ProbabilityMatrix,
    accuracy,
    confusion,
    fuse_average,
    fuse_weighted_sum,
    probs_from_csv,
    probs_to_csv,
    weighted_f_score,
    weighted_g_mean,
)
from .optim import (
    AVG_MODES,
    NORM_SCOPES,
    VARIANTS,
    NonFiniteGradientError,
    Optimizer,
    OptimizerConfig,
    OptimizerState,
    ParamState,
    ShapeDriftError,
    StepReport,
    UnknownParameterError,
    bias_correct,
    cyclic_rate,
    delta_vs_average,
    ema_update,
    exp_modulator,
    explr_modulator,
    from_snapshot,
    normalize_delta,
    to_snapshot,
)
from .problems import (
    Dataset,
    Problem,
    dataset_from_csv,
    dataset_to_csv,
    finite_diff_check,
    logreg_problem,
    mlp_problem,
    quadratic_problem,
    rosenbrock_problem,
    softmax_xent,
    synth_blobs,
)
from .tensor import (
    ShapeMismatchError,
    Tensor,
    absolute,
    add,
    divide,
    elem_max_scalar,
    fill,
    hadamard,
    hadamard_exp,
    maximum,
    ones_like,
    scale,
    sigmoid,
    sqrt,
    square,
    sub,
    tensor,
    zeros,
    zeros_like,
)

__version__ = "0.1.0"
