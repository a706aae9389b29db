"""Closed-form probability bounds for treatment success and failure.

Everything here is a deterministic function of (l, noise rates); the Monte
Carlo machinery checks these expressions against exact binomial tails and
empirical event rates.  Success events are strict-majority events; failure
bounds are stated for the tie-inclusive complement (wrong >= l/2) and are
only asserted as true lower bounds at even l, where the tie carries the
mass the l/sqrt term needs.  Odd-l values are still computed for reporting
but carry regime_ok=False.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "BoundKind",
    "BoundValue",
    "bernoulli_kl",
    "binom_tail",
    "lc_success_lower",
    "lc_failure_lower",
    "min_l_for_delta",
    "max_l_for_failure",
    "peer_success_lower",
    "peer_failure_lower",
    "improvement_bound",
]


class BoundKind(str, enum.Enum):
    """Which closed form produced a BoundValue."""

    HOEFFDING_SUCCESS = "hoeffding_success"
    BINOMIAL_FAILURE_LOWER = "binomial_failure_lower"
    PEER_SUCCESS = "peer_success"
    PEER_FAILURE_LOWER = "peer_failure_lower"
    IMPACT = "impact"
    IMPROVEMENT = "improvement"


@dataclass(frozen=True)
class BoundValue:
    """A bound together with what produced it and whether its regime held.

    regime_ok records whether the assumptions under which the bound is
    asserted were satisfied; when False the value is reported for reference
    only and no ordering against exact probabilities is claimed.
    """

    kind: BoundKind
    value: float
    params: dict = field(default_factory=dict)
    regime_ok: bool = True

    _PROBABILITY_KINDS = frozenset(
        {
            BoundKind.HOEFFDING_SUCCESS,
            BoundKind.BINOMIAL_FAILURE_LOWER,
            BoundKind.PEER_SUCCESS,
            BoundKind.PEER_FAILURE_LOWER,
        }
    )

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"bound value must be finite, got {self.value}")
        if self.kind in self._PROBABILITY_KINDS and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.kind.value} bound must lie in [0, 1], got {self.value}")
        if self.value < 0.0:
            raise ValueError(f"bound values are nonnegative, got {self.value}")


def bernoulli_kl(a: float, b: float) -> float:
    """KL(a || b) between Bernoulli(a) and Bernoulli(b), with 0*log 0 = 0.

    b in {0, 1} is only admissible when a pins the same point mass;
    otherwise the divergence is infinite and we refuse rather than return inf.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"a must lie in [0, 1], got {a}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    if b == 0.0 and a != 0.0:
        raise ValueError("KL(a || 0) diverges for a > 0")
    if b == 1.0 and a != 1.0:
        raise ValueError("KL(a || 1) diverges for a < 1")
    out = 0.0
    if a > 0.0:
        out += a * math.log(a / b)
    if a < 1.0:
        out += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    return out


def binom_tail(l: int, p: float, k: int) -> float:
    """Exact upper tail P[Bin(l, p) >= k].

    Summed in log space from binomial log-pmf terms (gammaln + logsumexp) so
    deep tails keep relative accuracy; the result is clipped to [0, 1].
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not 0 <= k <= l:
        raise ValueError(f"threshold must lie in [0, l], got k={k} with l={l}")
    if k == 0:
        return 1.0
    if p == 0.0:
        return 0.0  # k >= 1 here
    if p == 1.0:
        return 1.0
    j = np.arange(k, l + 1)
    log_terms = (
        gammaln(l + 1)
        - gammaln(j + 1)
        - gammaln(l - j + 1)
        + j * math.log(p)
        + (l - j) * math.log1p(-p)
    )
    return float(np.clip(np.exp(logsumexp(log_terms)), 0.0, 1.0))


def lc_success_lower(l: int, e: float) -> float:
    """Lower bound 1 - exp(-2l(1/2 - e)^2) on strict-majority success.

    Covers the event that more than half of l noisy draws keep the true
    label when each flips independently with rate e <= 1/2.  At e = 1/2 the
    bound is vacuously 0.
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"e must lie in [0, 1/2], got {e}")
    return -math.expm1(-2.0 * l * (0.5 - e) ** 2)


def min_l_for_delta(delta: float, e: float) -> int:
    """Smallest l with lc_success_lower(l, e) >= 1 - delta.

    Closed form l >= ln(1/delta) / (2(1/2 - e)^2) - rounded up with a small
    backoff so values that are integers up to float noise are not bumped a
    step too high.  e = 1/2 admits no l and raises.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"e must lie in [0, 1/2], got {e}")
    if e == 0.5:
        raise ValueError("e = 1/2 carries no signal; no l achieves the target")
    need = math.log(1.0 / delta) / (2.0 * (0.5 - e) ** 2)
    l = max(1, math.ceil(need - 1e-12))
    # The backoff can undershoot only when `need` sat within 1e-12 of an
    # integer; one verification step repairs either direction.
    while lc_success_lower(l, e) < 1.0 - delta:
        l += 1
    return l


def lc_failure_lower(l: int, e: float) -> float:
    """Anti-concentration floor (1/sqrt(2l)) * exp(-l * KL(1/2 || e)).

    Lower-bounds the tie-inclusive failure probability
    P[Bin(l, e) >= l/2]; asserted only at even l, where the tie point k=l/2
    is part of the event.  Requires e in (0, 1).
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if not 0.0 < e < 1.0:
        raise ValueError(f"e must lie in (0, 1), got {e}")
    return math.exp(-l * bernoulli_kl(0.5, e)) / math.sqrt(2.0 * l)


def max_l_for_failure(delta: float, e: float) -> int | None:
    """Largest l with lc_failure_lower(l, e) >= delta, or None when unbounded.

    Uses the sqrt(2l) >= sqrt(2) relaxation, giving the closed form
    l <= ln(1/(sqrt(2) delta)) / KL(1/2 || e); hence delta must sit below
    1/sqrt(2).  At e = 1/2 the KL vanishes and every l qualifies (None).
    Raises when even l = 1 misses the relaxed target.
    """
    if not 0.0 < delta < 1.0 / math.sqrt(2.0):
        raise ValueError(f"delta must lie in (0, 1/sqrt(2)), got {delta}")
    if not 0.0 < e < 1.0:
        raise ValueError(f"e must lie in (0, 1), got {e}")
    kl = bernoulli_kl(0.5, e)
    if kl == 0.0:
        return None
    l = math.floor(math.log(1.0 / (math.sqrt(2.0) * delta)) / kl + 1e-12)
    if l < 1:
        raise ValueError(
            f"no sample size satisfies the floor: delta={delta} already exceeds "
            f"the relaxed bound at l=1 for e={e}"
        )
    return l


def peer_success_lower(
    l: int, p_opposite: float, e_plus: float, e_minus: float, form: str = "hoeffding_corrected"
) -> float:
    """Lower bound on the peer decision's strict-success probability.

    The margin between the correct-label vote rate and the global noisy
    positive rate concentrates at p_opposite * (1 - e_plus - e_minus), so
    form="hoeffding_corrected" (the asserted default) returns
    1 - exp(-2 l (p_opposite (1 - e_plus - e_minus))^2).  The variant
    form="reciprocal_margin", 1 - exp(-2l / (p_opposite^2
    (1-e_plus-e_minus)^2)), divides by the squared margin instead of
    multiplying and is kept for reporting only: its exponent grows as the
    margin shrinks, so it is not a valid bound and is never asserted.
    """
    if l < 0:
        raise ValueError(f"l must be >= 0, got {l}")
    if not 0.0 < p_opposite < 1.0:
        raise ValueError(f"p_opposite must lie in (0, 1), got {p_opposite}")
    gap = 1.0 - e_plus - e_minus
    if gap <= 0.0:
        raise ValueError("e_plus + e_minus must be < 1")
    if form == "hoeffding_corrected":
        return -math.expm1(-2.0 * l * (p_opposite * gap) ** 2)
    if form == "reciprocal_margin":
        return -math.expm1(-2.0 * l / (p_opposite * gap) ** 2)
    raise ValueError(f"unknown form {form!r}")


def peer_failure_lower(l: int, e: float) -> float:
    """Tie-inclusive failure floor for the peer decision, symmetric regime.

    With p_plus = p_minus = 1/2 and e_plus = e_minus = e, the peer decision
    fails (ties included) exactly when at least half of the l draws flip,
    which is the same binomial event lc_failure_lower floors; asserted at
    even l only.
    """
    return lc_failure_lower(l, e)


def improvement_bound(tau_lower: float, err_term: float) -> float:
    """Guaranteed reduction of excess generalization error, tau_lower * err_term.

    tau_lower is an importance-weight lower bound for the instance; err_term
    is the error mass the treatment removes (1 for a whole-instance claim,
    or the off-label mass sum_{k != y} P[k] for the per-instance version).
    """
    if tau_lower < 0.0 or err_term < 0.0:
        raise ValueError(
            f"inputs must be nonnegative, got tau_lower={tau_lower}, err_term={err_term}"
        )
    return tau_lower * err_term
