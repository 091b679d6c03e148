"""Hierarchical Transformer video co-summarisation on precomputed frame features."""

from .autodiff import Tensor, backward
from .hierarchy import VjmhtConfig, VjmhtParams, forward, forward_single, init_params, load_params, save_params
from .segmentation import KtsConfig, kts
from .summarize import generate_summary, knapsack_select
from .evaluation import f_measure, kendall_tau, spearman_rho
from .training import TrainConfig, train

__version__ = "0.1.0"
