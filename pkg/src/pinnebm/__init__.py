"""Physics-informed neural networks with a learned noise model.

Trains networks that fit noisy measurements of a PDE solution while
estimating unknown equation parameters. Three data-loss variants are
provided: plain least squares, least squares with a trainable offset, and
a negative log-likelihood under an energy-based noise density learned
jointly with the solution.
"""

from .ebm import EBMState, ebm_data_loss, ebm_pdf, init_ebm, pdf_on_grid
from .metrics import RunMetrics, aggregate, evaluate
from .network import MLP, MLPConfig, Normalizer, fit_normalizer, init_mlp, mlp_config
from .noise import NoiseSpec, make_noise
from .problems import (
    Dataset,
    ProblemSpec,
    load_external_dataset,
    problem_by_name,
    synth_dataset,
    true_solution,
)
from .trainer import TrainConfig, TrainResult, Variant, train

__all__ = [
    "Dataset",
    "EBMState",
    "MLP",
    "MLPConfig",
    "NoiseSpec",
    "Normalizer",
    "ProblemSpec",
    "RunMetrics",
    "TrainConfig",
    "TrainResult",
    "Variant",
    "aggregate",
    "ebm_data_loss",
    "ebm_pdf",
    "evaluate",
    "fit_normalizer",
    "init_ebm",
    "init_mlp",
    "load_external_dataset",
    "make_noise",
    "mlp_config",
    "pdf_on_grid",
    "problem_by_name",
    "synth_dataset",
    "train",
    "true_solution",
]
