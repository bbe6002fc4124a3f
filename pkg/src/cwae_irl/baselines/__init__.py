from .birl import BirlConfig, BirlResult, birl_log_posterior, birl_policywalk
from .maxent import (
    DeepMaxEntConfig,
    MaxEntConfig,
    deep_maxent_irl,
    empirical_svf,
    expected_svf,
    maxent_irl,
    maxent_log_likelihood,
    reward_gradient,
)
