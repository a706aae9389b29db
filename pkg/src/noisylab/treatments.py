"""The three noisy-label treatments: loss correction, label smoothing, peer loss.

Loss correction inverts the noise transition, either on the loss vector
(surrogate loss T^-1 l) or on the empirical label distribution (corrected
labels, capped back into the simplex when the inversion exits it).  Label
smoothing mixes the empirical distribution toward uniform.  Peer loss pairs
the cross-entropy on observed labels with a penalty on labels drawn
independently of the features; its expectation decomposes into a difference
of KL divergences and pushes predictions to the simplex boundary.

All binary vectors use the package class order: index 0 = label -1,
index 1 = label +1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .memorize import LabelDist, empirical_distribution, memorization_error
from .noise import BinaryNoiseRates, TransitionMatrix, binary_transition, invert_transition, label_to_index

__all__ = [
    "Comparison",
    "TieRule",
    "CorrectedLabel",
    "PeerDecision",
    "PeerLossDecomposition",
    "PeerTrainingDecomposition",
    "as_loss_vector",
    "corrected_label",
    "lc_loss_vector",
    "lc_empirical_loss",
    "smoothed_label",
    "compare_ls_lc",
    "peer_predict",
    "peer_expected_loss",
    "peer_training_expectation",
    "peer_loss_pairs_mc",
    "peer_instance_objective",
    "peer_vertex_check",
    "paradox_gap",
]

_TIE_EPS = 1e-12


class Comparison(enum.Enum):
    LC_BETTER = "LC_better"
    LS_BETTER = "LS_better"
    TIE = "tie"


class TieRule(enum.Enum):
    """What peer_predict does at zero margin."""

    CLEAN_PRIOR = "clean_prior"  # side with the larger clean prior; fallback +1
    PLUS = "plus"
    MINUS = "minus"


def as_loss_vector(loss) -> np.ndarray:
    """Validate and return a per-class loss vector l(h(x), y') as an array."""
    arr = np.asarray(loss, dtype=float).ravel()
    if arr.size < 2:
        raise ValueError("loss vector needs at least two classes")
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss vector entries must be finite")
    return arr


@dataclass(frozen=True)
class CorrectedLabel:
    """Noise-inverted label distribution, raw and capped.

    raw = (T^-1)^T applied to the empirical distribution; its entries sum
    to one but may exit [0, 1].  capped is raw when already proper and
    otherwise the one-hot vector on the side the violation points to.
    Algebraic identities (the empirical-loss equivalence, unbiasedness)
    hold for raw only; memorization-style error comparisons use capped.
    """

    raw: LabelDist
    capped: LabelDist
    was_capped: bool


def corrected_label(dist: LabelDist, rates: BinaryNoiseRates) -> CorrectedLabel:
    """Apply the inverse binary transition to an empirical label distribution.

    raw[+1] = ((1-e_minus) P[+1] - e_minus P[-1]) / (1 - e_plus - e_minus)
    and raw[-1] = ((1-e_plus) P[-1] - e_plus P[+1]) / (1 - e_plus - e_minus):
    each class sheds the cross-contamination flowing into it, so the two
    entries always sum to 1.  The correction amplifies the majority class
    exactly when the rates are equal (raw[+1] - P[+1] has the sign of
    e_plus P[+1] - e_minus P[-1] in general).  raw[+1] > 1 caps to [0, 1];
    raw[+1] < 0 caps to [1, 0].
    """
    if dist.m != 2:
        raise ValueError("corrected labels are defined for the binary case")
    p_minus, p_plus = float(dist.probs[0]), float(dist.probs[1])
    gap = 1.0 - rates.e_plus - rates.e_minus
    raw_plus = ((1.0 - rates.e_minus) * p_plus - rates.e_minus * p_minus) / gap
    raw_minus = ((1.0 - rates.e_plus) * p_minus - rates.e_plus * p_plus) / gap
    raw = LabelDist(np.array([raw_minus, raw_plus]), signed=True)
    if raw_plus > 1.0:
        return CorrectedLabel(raw=raw, capped=LabelDist(np.array([0.0, 1.0])), was_capped=True)
    if raw_plus < 0.0:
        return CorrectedLabel(raw=raw, capped=LabelDist(np.array([1.0, 0.0])), was_capped=True)
    return CorrectedLabel(raw=raw, capped=LabelDist(raw.probs.copy()), was_capped=False)


def lc_loss_vector(loss, noise) -> np.ndarray:
    """Surrogate loss T^-1 l whose noisy expectation is the clean loss."""
    arr = as_loss_vector(loss)
    if isinstance(noise, BinaryNoiseRates):
        transition = binary_transition(noise)
    elif isinstance(noise, TransitionMatrix):
        transition = noise
    else:
        raise TypeError(f"expected BinaryNoiseRates or TransitionMatrix, got {type(noise)!r}")
    if arr.size != transition.m:
        raise ValueError(f"loss vector has {arr.size} classes, transition has {transition.m}")
    return invert_transition(transition) @ arr


def lc_empirical_loss(labels, rates: BinaryNoiseRates, loss) -> float:
    """Mean corrected loss over observed labels, (1/l) sum_i l_LC(y_i).

    Equal (to float accuracy) to the raw corrected label dotted with the
    uncorrected loss — training on corrected losses and training on
    (uncapped) corrected labels are the same computation.
    """
    arr = as_loss_vector(loss)
    dist = empirical_distribution(labels, m=arr.size)
    surrogate = lc_loss_vector(arr, rates)
    return float(dist.probs @ surrogate)


def smoothed_label(dist: LabelDist, a: float) -> LabelDist:
    """Convex combination (1 - a) dist + (a/m) ones."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"smoothing weight must lie in [0, 1], got {a}")
    if dist.signed:
        raise ValueError("smoothing applies to proper distributions")
    return LabelDist((1.0 - a) * dist.probs + a / dist.m)


def compare_ls_lc(dist: LabelDist, y: int, rates: BinaryNoiseRates, a: float) -> Comparison:
    """Which treated label memorizes better: capped corrected vs smoothed.

    Under equal rates the empirical mass on the true label decides: above
    1/2 the corrected label wins, below 1/2 the smoothed label wins, and
    [0.5, 0.5] is an exact tie (the corrected label is a fixed point there,
    so both errors coincide; testing the mass directly keeps the tie exact
    instead of comparing two float error values that agree only to
    rounding).  Under unequal rates the even split is not a fixed point, so
    the two memorization errors are compared directly.
    """
    if dist.m != 2:
        raise ValueError("the comparison is defined for the binary case")
    if not 0.0 < a < 1.0:
        raise ValueError(f"smoothing weight must lie in (0, 1), got {a}")
    p_true = dist.prob_of(y)
    if rates.e_plus == rates.e_minus and abs(p_true - 0.5) <= _TIE_EPS:
        return Comparison.TIE
    err_lc = memorization_error(corrected_label(dist, rates).capped, y)
    err_ls = memorization_error(smoothed_label(dist, a), y)
    if err_lc == err_ls:
        return Comparison.TIE
    return Comparison.LC_BETTER if err_lc < err_ls else Comparison.LS_BETTER


@dataclass(frozen=True)
class PeerDecision:
    """Peer-loss-optimal prediction for one instance."""

    predicted: int
    margin: float
    tie: bool

    def __post_init__(self) -> None:
        if self.predicted not in (-1, 1):
            raise ValueError(f"predicted label must be -1 or +1, got {self.predicted}")
        if self.tie != (abs(self.margin) <= _TIE_EPS):
            raise ValueError("tie flag must mirror a zero margin")


def peer_predict(
    dist_local: LabelDist,
    global_noisy_positive_rate: float,
    tie_rule: TieRule = TieRule.CLEAN_PRIOR,
    clean_positive_prior: float | None = None,
) -> PeerDecision:
    """Predict +1 iff the local noisy positive mass exceeds the global one.

    margin = P[+1 | x] - global rate.  At zero margin the objective is
    flat and tie_rule decides: CLEAN_PRIOR picks the side whose clean prior
    is larger (falling back to +1 when no prior is given or they are equal).
    """
    if dist_local.m != 2:
        raise ValueError("peer prediction is defined for the binary case")
    if not 0.0 <= global_noisy_positive_rate <= 1.0:
        raise ValueError(f"global rate must lie in [0, 1], got {global_noisy_positive_rate}")
    margin = float(dist_local.probs[1]) - global_noisy_positive_rate
    if abs(margin) > _TIE_EPS:
        return PeerDecision(predicted=1 if margin > 0 else -1, margin=margin, tie=False)
    if tie_rule is TieRule.PLUS:
        predicted = 1
    elif tie_rule is TieRule.MINUS:
        predicted = -1
    else:
        predicted = -1 if (clean_positive_prior is not None and clean_positive_prior < 0.5) else 1
    return PeerDecision(predicted=predicted, margin=margin, tie=True)


def _clamped(predictor: np.ndarray, q_min: float) -> np.ndarray:
    """Shrink rows toward uniform so every entry sits in [q_min, 1-(m-1)q_min]."""
    m = predictor.shape[1]
    if not 0.0 < q_min < 1.0 / m:
        raise ValueError(f"q_min must lie in (0, 1/m), got {q_min}")
    return (1.0 - m * q_min) * predictor + q_min


def _check_joint_predictor(joint, predictor) -> tuple[np.ndarray, np.ndarray]:
    joint = np.asarray(joint, dtype=float)
    predictor = np.asarray(predictor, dtype=float)
    if joint.ndim != 2 or joint.shape != predictor.shape:
        raise ValueError(
            f"joint and predictor must be matching 2-d tables, got {joint.shape} vs {predictor.shape}"
        )
    if np.any(joint < 0.0) or abs(joint.sum() - 1.0) > 1e-9:
        raise ValueError("joint must be a proper distribution over X x Y")
    if np.any(joint.sum(axis=1) <= 0.0):
        raise ValueError("every feature must carry positive probability")
    if np.any(predictor < 0.0) or np.any(np.abs(predictor.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("predictor rows must be proper distributions")
    return joint, predictor


@dataclass(frozen=True)
class PeerLossDecomposition:
    """Expected peer loss under the model's own label draws, with its KL form.

    value = E_{x}[ E_{k ~ Q(.|x)}[-log P(y=k|x)] - E_{k ~ Q(.|x)}[-log P(y=k)] ];
    exactly kl_model_vs_joint - kl_model_vs_product, where the model joint
    is Q(y|x) P(x).
    """

    value: float
    kl_model_vs_joint: float
    kl_model_vs_product: float


def peer_expected_loss(joint, predictor, q_min: float = 1e-3) -> PeerLossDecomposition:
    """Expected peer loss and its exact KL decomposition.

    joint is the data table P(x, y~) over finite X x Y; predictor rows are
    Q(y~ | x), clamped toward uniform by q_min before use.  The expectation
    weighs the cross-entropy terms by the model joint Q(y~|x) P(x): under
    that weighting the difference of the conditional and marginal CE terms
    equals KL(Q || P) - KL(Q || P_x x P_y~) identically.  Minimizing over Q
    therefore rewards matching the joint while diverging from the
    independent product — confident predictions.  The complementary
    data-weighted expectation is peer_training_expectation.
    """
    joint, predictor = _check_joint_predictor(joint, predictor)
    q = _clamped(predictor, q_min)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    if np.any(py <= 0.0):
        raise ValueError("every label must carry positive probability")
    model_joint = q * px[:, None]
    cond = joint / px[:, None]
    ce_conditional = -(model_joint * np.log(cond)).sum()
    ce_marginal = -(model_joint * np.log(py)[None, :]).sum()
    value = ce_conditional - ce_marginal
    kl_vs_joint = float((model_joint * np.log(model_joint / joint)).sum())
    kl_vs_product = float((model_joint * np.log(model_joint / (px[:, None] * py[None, :]))).sum())
    return PeerLossDecomposition(
        value=float(value), kl_model_vs_joint=kl_vs_joint, kl_model_vs_product=kl_vs_product
    )


@dataclass(frozen=True)
class PeerTrainingDecomposition:
    """Expected peer loss under data-drawn labels, with its exact identity.

    value = E_{(x,y~) ~ P}[-log Q(y~|x)] - E_{x ~ P_x, y~ ~ P_y~}[-log Q(y~|x)];
    exactly kl_joint_vs_model - kl_product_vs_model - mutual_information.
    """

    value: float
    kl_joint_vs_model: float
    kl_product_vs_model: float
    mutual_information: float


def peer_training_expectation(joint, predictor, q_min: float = 1e-3) -> PeerTrainingDecomposition:
    """Peer loss as a training objective: labels drawn from the data joint.

    The first term is the usual expected CE of the (clamped) predictor; the
    peer term redraws the feature and label independently from their
    marginals.  Subtracting, the predictor-independent entropy pieces cancel
    into the mutual information of the joint, giving the identity recorded
    on the result type.
    """
    joint, predictor = _check_joint_predictor(joint, predictor)
    q = _clamped(predictor, q_min)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    product = px[:, None] * py[None, :]
    log_q = np.log(q)
    value = float(-(joint * log_q).sum() + (product * log_q).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        joint_terms = np.where(joint > 0.0, joint * np.log(joint / (q * px[:, None])), 0.0)
        mi_terms = np.where(joint > 0.0, joint * np.log(joint / product), 0.0)
    kl_joint_vs_model = float(joint_terms.sum())
    kl_product_vs_model = float((product * np.log(product / (q * px[:, None]))).sum())
    mutual_information = float(mi_terms.sum())
    return PeerTrainingDecomposition(
        value=value,
        kl_joint_vs_model=kl_joint_vs_model,
        kl_product_vs_model=kl_product_vs_model,
        mutual_information=mutual_information,
    )


def peer_loss_pairs_mc(
    joint, predictor, pairs: int, rng: np.random.Generator, q_min: float = 1e-3
) -> tuple[float, float]:
    """Literal pair-sampling estimate of the training peer loss.

    Each of `pairs` draws takes (x_i, y~_i) from the joint for the CE term
    and independent x_p ~ P_x, y~_p ~ P_y~ for the peer term.  Returns
    (mean, standard error); the mean converges to
    peer_training_expectation(...).value.
    """
    if pairs < 2:
        raise ValueError(f"pairs must be >= 2, got {pairs}")
    joint, predictor = _check_joint_predictor(joint, predictor)
    log_q = np.log(_clamped(predictor, q_min))
    n_x, n_y = joint.shape
    flat = joint.ravel()
    draws = rng.choice(n_x * n_y, size=pairs, p=flat / flat.sum())
    xi, yi = np.divmod(draws, n_y)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    xp = rng.choice(n_x, size=pairs, p=px / px.sum())
    yp = rng.choice(n_y, size=pairs, p=py / py.sum())
    samples = -log_q[xi, yi] + log_q[xp, yp]
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(pairs))


def peer_instance_objective(
    dist_local: LabelDist, global_rate: float, q, q_min: float = 1e-3
) -> np.ndarray:
    """Per-instance expected peer loss at prediction mass q = P[h(x) = +1].

    CE on the local noisy distribution minus CE on the global noisy label
    rate, with the prediction clamped to [q_min, 1 - q_min]:
    -(p log q + (1-p) log(1-q)) + (r log q + (1-r) log(1-q)).
    The coefficient of -log q is the decision margin, so the objective is
    monotone in q and flat exactly when the margin vanishes.
    """
    if dist_local.m != 2:
        raise ValueError("the peer objective is defined for the binary case")
    if not 0.0 <= global_rate <= 1.0:
        raise ValueError(f"global rate must lie in [0, 1], got {global_rate}")
    q = np.clip(np.asarray(q, dtype=float), q_min, 1.0 - q_min)
    p = float(dist_local.probs[1])
    ce_local = -(p * np.log(q) + (1.0 - p) * np.log1p(-q))
    ce_global = -(global_rate * np.log(q) + (1.0 - global_rate) * np.log1p(-q))
    return ce_local - ce_global


def peer_vertex_check(
    dist_local: LabelDist, global_rate: float, grid_points: int = 1001, q_min: float = 1e-3
) -> float:
    """Grid argmin of the per-instance peer objective over [q_min, 1 - q_min].

    A nonzero margin makes the objective strictly monotone, so the argmin
    sits at a grid boundary; a zero margin leaves it flat (the returned
    point is then the first grid entry).
    """
    if grid_points < 3:
        raise ValueError(f"grid needs at least 3 points, got {grid_points}")
    grid = np.linspace(q_min, 1.0 - q_min, grid_points)
    objective = peer_instance_objective(dist_local, global_rate, grid, q_min=q_min)
    return float(grid[int(np.argmin(objective))])


def paradox_gap(labels, rates: BinaryNoiseRates, loss, y: int) -> float:
    """Corrected empirical loss minus the clean loss l(y).

    The unbiasedness argument for corrected losses conditions on the model
    being independent of the label draws; a memorizing model is not, and
    this gap is the per-instance discrepancy.  It vanishes exactly when the
    empirical distribution matches the true noisy posterior of y.
    """
    arr = as_loss_vector(loss)
    return lc_empirical_loss(labels, rates, arr) - float(arr[label_to_index(y, arr.size)])
