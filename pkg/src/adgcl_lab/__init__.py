"""Adversarial edge-dropping graph contrastive learning on a small numpy autodiff engine."""

__version__ = "0.1.0"

from .augmenter import apply_augmentation, augmenter_logits, expected_drop_ratio, gumbel_relax, sample_hard
from .datasets import MotifSpec, RegressionSpec, generate_planted_motif, generate_regression_degree_target
from .encoder import encode, project
from .evaluation import L2_GRID, evaluate_encoder, kfold_probe, logistic_probe, ridge_probe, roc_auc
from .graphs import Graph, GraphBatch, load_jsonl, make_batch, save_jsonl, split_dataset
from .objectives import assemble_losses, cosine_similarity_matrix, info_nce
from .params import init_augmenter, init_encoder, init_head
from .tensor import Tape, Tensor, TensorError, backward, finite_difference_check
from .training import LAMBDA_GRID, TrainConfig, sweep_lambda, train, train_adgcl, train_infomax, train_nadgcl
from .wl import wl_equivalent, wl_refine
