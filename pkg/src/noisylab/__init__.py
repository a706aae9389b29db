"""noisylab: instance-level label-noise analysis with verified probability bounds.

The package models instances by how often they appear in a training set
(long-tail frequency priors), quantifies each appearance count's importance
weight for generalization, and compares three treatments of noisy labels —
loss correction, label smoothing, peer loss — three ways at once: closed-form
bounds, exact binomial probabilities, and seeded Monte-Carlo simulation.
"""
from .bounds import (
    BoundKind,
    BoundValue,
    bernoulli_kl,
    binom_tail,
    improvement_bound,
    lc_failure_lower,
    lc_success_lower,
    max_l_for_failure,
    min_l_for_delta,
    peer_failure_lower,
    peer_success_lower,
)
from .freqmodel import (
    FrequencySample,
    PriorSpec,
    TauEstimate,
    TauMcEstimate,
    WeightEstimate,
    build_prior,
    capped,
    estimate_tau,
    large_interval,
    sample_frequencies,
    small_interval,
    tau_exact,
    tau_lower_large,
    tau_lower_small,
    tau_monte_carlo,
    weight_estimate,
)
from .memorize import (
    ExcessRecord,
    LabelDist,
    argmax_error,
    empirical_distribution,
    impact_lower_bound,
    individual_excess,
    memorization_error,
    total_excess,
)
from .mcsim import (
    BoundCheck,
    BoundReport,
    InstanceScenario,
    Treatment,
    TrialTally,
    bound_report,
    run_trials,
    sweep,
    wilson_interval,
)
from .noise import (
    BinaryNoiseRates,
    InstanceNoiseSynth,
    TransitionMatrix,
    binary_transition,
    combine_rate,
    index_to_label,
    invert_transition,
    label_to_index,
    sample_noisy_labels,
    synth_instance_noise,
    truncated_normal,
)
from .treatments import (
    Comparison,
    CorrectedLabel,
    PeerDecision,
    PeerLossDecomposition,
    PeerTrainingDecomposition,
    TieRule,
    as_loss_vector,
    compare_ls_lc,
    corrected_label,
    lc_empirical_loss,
    lc_loss_vector,
    paradox_gap,
    peer_expected_loss,
    peer_instance_objective,
    peer_loss_pairs_mc,
    peer_predict,
    peer_training_expectation,
    peer_vertex_check,
    smoothed_label,
)

__version__ = "0.1.0"
