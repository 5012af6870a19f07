"""Patterned beam training for large uniform linear arrays.

Build probe/combining pattern pairs, score them on the gain matrix and
estimate beam-alignment error probability by Monte Carlo simulation.
"""

from ._validation import DegeneratePatternError
from .estimators import OMPBeamDetector, PatternedBeamTrainer, make_pattern
from .model import (
    ArrayConfig,
    ChannelConfig,
    ChannelRealization,
    dft_codebook,
    grid_angle,
    optimal_beam_index,
    sample_channel,
    steering_vector,
)
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    TraceRow,
    gradient,
    objective,
    optimize_pattern,
)
from .patterns import (
    GainMetrics,
    HashCodebook,
    PatternPair,
    combining_from_probe,
    gain_matrix,
    gain_metrics,
    hash_codebook,
    metric_p1,
    metric_p2,
    metric_p3,
    pattern_exhaustive,
    pattern_multiarm,
    pattern_multiarm_random_phase,
    pattern_random,
    pattern_zc,
)
from .training import (
    SimConfig,
    SimResult,
    SnrPoint,
    TrialOutcome,
    combine,
    detect,
    error_probability,
    omp_detect,
    receive_exhaustive,
    receive_probe,
    run_trial,
    snr_to_noise_variance,
)

__version__ = "0.1.0"
