"""Sequential model-based tuner for convolutional architecture genomes.

Seed a run with uniform random trials, then repeatedly split the trial
database at an error quantile, fit per-parameter densities over the good
and bad sets, and evaluate the best-ranked of a fresh batch of uniform
candidates; a probabilistic hybrid switches between the density-ratio
score and a good-density-only score.  Trials persist in an append-only
line-JSON store that supports deterministic resume.
"""

from .acquisition import (
    AcquisitionConfig,
    SplitResult,
    propose_next,
    score_simplified,
    score_tpe,
    split_trials,
)
from .dcn import (
    ArchitectureDescription,
    ConvBlockSpec,
    HiddenLayerSpec,
    InvalidArchitecture,
    RangeProfile,
    TrialConfigExporter,
    build_space,
    count_params,
    decode,
    export_config,
    is_genome_space,
)
from .density import DensityModel
from .evaluators import (
    ArchValidityGate,
    EvaluationResult,
    EvaluatorError,
    ExternalEvaluator,
    SurfaceSpec,
    SurrogateEvaluator,
    eval_external,
    eval_surrogate,
)
from .optimizer import OptimizerConfig, RunState, config_digest, resume, run_optimizer
from .report import CurvePoint, compute_curves, curves_to_csv
from .space import (
    Assignment,
    Condition,
    ParamSpec,
    SearchSpace,
    SpaceError,
    SpaceFormatError,
    load_space,
    log_uniform_density,
    sample_uniform,
    space_from_json,
    space_to_json,
    validate,
)
from .store import (
    RunHeader,
    StoreError,
    Trial,
    TrialDatabase,
    TrialStore,
    load,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "ArchValidityGate",
    "ArchitectureDescription",
    "Assignment",
    "Condition",
    "ConvBlockSpec",
    "CurvePoint",
    "DensityModel",
    "EvaluationResult",
    "EvaluatorError",
    "ExternalEvaluator",
    "HiddenLayerSpec",
    "InvalidArchitecture",
    "OptimizerConfig",
    "ParamSpec",
    "RangeProfile",
    "RunHeader",
    "RunState",
    "SearchSpace",
    "SpaceError",
    "SpaceFormatError",
    "SplitResult",
    "StoreError",
    "SurfaceSpec",
    "SurrogateEvaluator",
    "Trial",
    "TrialConfigExporter",
    "TrialDatabase",
    "TrialStore",
    "build_space",
    "compute_curves",
    "config_digest",
    "count_params",
    "curves_to_csv",
    "decode",
    "eval_external",
    "eval_surrogate",
    "export_config",
    "is_genome_space",
    "load",
    "load_space",
    "log_uniform_density",
    "propose_next",
    "resume",
    "run_optimizer",
    "sample_uniform",
    "score_simplified",
    "score_tpe",
    "space_from_json",
    "space_to_json",
    "split_trials",
    "validate",
    "__version__",
]
