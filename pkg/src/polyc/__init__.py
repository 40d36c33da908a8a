"""POLYC: policy optimization with self-learned Lyapunov critics, plus a
sample-based Almost Lyapunov certification engine."""

__version__ = "0.1.0"

from .nn import MlpNetwork, GaussianPolicy, Optimizer
from .critic import LyapunovCritic, lyapunov_risk, sampled_lie_derivative
from .training import PolycConfig, polyc_train, run_episode
from .validator import (CertificationReport, ClosedLoopSystem, certify_band,
                        certify_slice, monte_carlo_validate)
from .config import RunConfig, load_run_config
from .envs import make_env

__all__ = [
    "MlpNetwork", "GaussianPolicy", "Optimizer",
    "LyapunovCritic", "lyapunov_risk", "sampled_lie_derivative",
    "PolycConfig", "polyc_train", "run_episode",
    "CertificationReport", "ClosedLoopSystem", "certify_band",
    "certify_slice", "monte_carlo_validate",
    "RunConfig", "load_run_config", "make_env",
    "__version__",
]
