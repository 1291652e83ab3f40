"""Diversity-regularized actor-critic with stochastic-mapping actors.

Train multimodal continuous-control policies by reparameterized policy
gradient plus a log-distance diversity regularizer whose temperature is
auto-tuned toward a target diversity. Ships a multi-goal point-maze
benchmark with removal/obstacle robustness evaluation.
"""

__version__ = "0.1.0"

from .actors import ActorKind, AmortizedActor, DiffusionActor, GaussianActor, make_actor, make_schedule
from .autodiff import Array, finite_difference_check, gradients
from .diversity import estimate_diversity, geometric_mean_distance, log_distance, mean_pairwise_distance
from .evaluation import EvalReport, evaluate, five_episode_success, robustness_suite
from .maze import MazeEnv, MazeSpec, builtin_map_path, load_map, parse_map, perturb
from .training import TrainConfig, TrainResult, target_diversity, train

__all__ = [
    "ActorKind",
    "AmortizedActor",
    "Array",
    "DiffusionActor",
    "EvalReport",
    "GaussianActor",
    "MazeEnv",
    "MazeSpec",
    "TrainConfig",
    "TrainResult",
    "builtin_map_path",
    "estimate_diversity",
    "evaluate",
    "finite_difference_check",
    "five_episode_success",
    "geometric_mean_distance",
    "gradients",
    "load_map",
    "log_distance",
    "make_actor",
    "make_schedule",
    "mean_pairwise_distance",
    "parse_map",
    "perturb",
    "robustness_suite",
    "target_diversity",
    "train",
]
