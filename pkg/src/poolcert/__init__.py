"""poolcert: certified robustness bounds for small MaxPool networks.

Computes sound lower bounds on the adversarial perturbation radius of small
feed-forward classifiers (affine / convolution / activation / maxpool layers)
by linear relaxation, backsubstitution to the input, dual-norm concretization
and a fixed-budget binary search, together with sampling-based oracles that
stress the soundness and tightness of the produced bounds.
"""

__version__ = "0.1.0"

from .bounds import (GlobalLinearBounds, IntervalBounds, PerturbationSpec,
                     RelaxationRow, concretize, dual_norm)
from .certify import CertificationResult, batch_certify, binary_search, verify_at
from .engine import LayerAnalysis, RobustnessVerdict, analyze, check_robust
from .model import (Layer, Network, VerificationQuery, load_model, load_queries,
                    materialize_affine, pool_index_sets, save_model)
from .oracle import (block_volume_trial, brute_force_output_interval, falsify,
                     forward_eval, volume_benchmark)
from .pooling import (PoolRule, deeppoly_style_relax, interval_constant_relax,
                      maxlin_relax, relax_soundness_check)

__all__ = [
    "GlobalLinearBounds", "IntervalBounds", "PerturbationSpec", "RelaxationRow",
    "concretize", "dual_norm",
    "CertificationResult", "batch_certify", "binary_search", "verify_at",
    "LayerAnalysis", "RobustnessVerdict", "analyze", "check_robust",
    "Layer", "Network", "VerificationQuery", "load_model", "load_queries",
    "materialize_affine", "pool_index_sets", "save_model",
    "block_volume_trial", "brute_force_output_interval", "falsify",
    "forward_eval", "volume_benchmark",
    "PoolRule", "deeppoly_style_relax", "interval_constant_relax",
    "maxlin_relax", "relax_soundness_check",
]
