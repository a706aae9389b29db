"""Instance-frequency priors, the generative sampling process, and importance weights.

The model: a prior set pi = {pi_1..pi_N} of positive values summing to one.
A dataset realization draws, for each of N instance slots, a value p_x
uniformly from the set, then normalizes: D(x) = p_x / sum_x p_x.  An
instance appearing l times in an n-sample carries importance weight

    tau_l = E[alpha^(l+1) (1-alpha)^(n-l)] / E[alpha^l (1-alpha)^(n-l)],

a ratio of prior moments of the instance frequency alpha.  tau_exact takes
the expectation uniformly over the raw prior values (the unnormalized mode,
matching the algebra the closed-form lower bounds are derived in);
tau_monte_carlo estimates the normalized-mode variant by sampling whole
realizations.  weight(pi, [b1, b2]) — the expected fraction of total mass
carried by instances whose realized frequency lands in the interval — has
no closed form for general priors and is estimated by Monte Carlo.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "PriorSpec",
    "FrequencySample",
    "TauEstimate",
    "WeightEstimate",
    "TauMcEstimate",
    "build_prior",
    "capped",
    "sample_frequencies",
    "weight_estimate",
    "tau_exact",
    "tau_monte_carlo",
    "tau_lower_large",
    "tau_lower_small",
    "large_interval",
    "small_interval",
    "estimate_tau",
]

_CHUNK_ROWS = 2000  # replicate rows drawn per chunk; keeps (rows x N) matrices small

# Regime under which the large-l importance-weight bound is asserted.
_REGIME_MIN_N = 10**3
_REGIME_MIN_VALUES = 10**2
_REGIME_PI_MAX = 1.0 / 20.0


@dataclass(frozen=True)
class PriorSpec:
    """An instance-frequency prior: a set of candidate frequency values.

    Values lie in (0, 1] and are stored exactly as given — the generative
    process renormalizes realized draws, so overall scale never affects
    sampling, but it does define the raw moment ratios tau_exact computes.
    Generated families (uniform, zipf) are built summing to one; explicit
    sets may carry any total.  generator records which constructor built
    the values ("uniform", "zipf(s=1.1)", "explicit", with a "+cap" suffix
    after waterfilling).
    """

    values: np.ndarray
    generator: str = "explicit"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("prior needs at least one value")
        if np.any(values <= 0.0) or not np.all(np.isfinite(values)) or np.any(values > 1.0):
            raise ValueError("prior values must lie in (0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def n_values(self) -> int:
        return int(self.values.size)

    @property
    def normalized(self) -> bool:
        return bool(abs(self.values.sum() - 1.0) <= 1e-9)

    def pi_max(self) -> float:
        return float(self.values.max())

    def regime_ok(self, n: int, l: int) -> bool:
        """Whether (n, N, l, pi_max) sit inside the asserted bound regime."""
        return (
            n >= _REGIME_MIN_N
            and self.n_values >= _REGIME_MIN_VALUES
            and l <= n / 10
            and self.pi_max() <= _REGIME_PI_MAX + 1e-15
        )


@dataclass(frozen=True)
class FrequencySample:
    """One realized dataset frequency vector D(x), x = 1..N."""

    d: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float).ravel()
        object.__setattr__(self, "d", d)
        if np.any(d < 0.0):
            raise ValueError("realized frequencies must be nonnegative")
        if abs(d.sum() - 1.0) > 1e-12:
            raise ValueError(f"realized frequencies must sum to 1, got {d.sum()!r}")


@dataclass(frozen=True)
class WeightEstimate:
    """Monte-Carlo estimate of weight(pi, [b1, b2]) with its standard error."""

    value: float
    stderr: float
    replicates: int
    interval: tuple[float, float]


@dataclass(frozen=True)
class TauMcEstimate:
    """Normalized-mode Monte-Carlo tau with a delta-method standard error."""

    value: float
    stderr: float
    replicates: int


@dataclass(frozen=True)
class TauEstimate:
    """Importance weight of l-appearance instances, all routes side by side."""

    l: int
    n: int
    exact: float
    lower_large: float
    lower_small: float
    mc: float | None = None
    mc_stderr: float | None = None
    regime_ok: bool = True


def build_prior(
    generator: str,
    *,
    n: int | None = None,
    exponent: float | None = None,
    values=None,
    cap: float | None = None,
) -> PriorSpec:
    """Construct a normalized prior.

    generator "uniform" needs n; "zipf" needs n and exponent (weights
    k^-exponent, k = 1..n); "explicit" needs positive values.  A cap, when
    given, waterfills the normalized prior so no value exceeds it.
    """
    if generator == "uniform":
        if n is None or n < 1:
            raise ValueError("uniform prior needs n >= 1")
        prior = PriorSpec(np.full(n, 1.0 / n), generator="uniform")
    elif generator == "zipf":
        if n is None or n < 1:
            raise ValueError("zipf prior needs n >= 1")
        if exponent is None or exponent <= 0.0:
            raise ValueError("zipf prior needs exponent > 0")
        weights = np.arange(1, n + 1, dtype=float) ** (-float(exponent))
        prior = PriorSpec(weights / weights.sum(), generator=f"zipf(s={exponent:g})")
    elif generator == "explicit":
        if values is None:
            raise ValueError("explicit prior needs values")
        prior = PriorSpec(np.asarray(values, dtype=float), generator="explicit")
    else:
        raise ValueError(f"unknown prior generator {generator!r}")
    if cap is not None:
        prior = capped(prior, cap)
    return prior


def capped(prior: PriorSpec, cap: float) -> PriorSpec:
    """Rescale a prior so no value exceeds cap while the total is preserved.

    Waterfilling: the largest entries are pinned at cap and the remainder
    is scaled by a common factor c solving sum_i min(c * v_i, cap) = total.
    Feasible only when N * cap >= total.
    """
    if not 0.0 < cap <= 1.0:
        raise ValueError(f"cap must lie in (0, 1], got {cap}")
    values = prior.values
    n = values.size
    total = float(values.sum())
    if n * cap < total * (1.0 - 1e-12):
        raise ValueError(f"cap {cap} is infeasible for {n} values summing to {total}")
    order = np.argsort(values)[::-1]
    sorted_vals = values[order]
    tail_sums = np.concatenate([np.cumsum(sorted_vals[::-1])[::-1], [0.0]])
    out_sorted = None
    for k in range(n + 1):
        # k largest entries pinned at cap, the rest scaled by c
        budget = total - k * cap
        if budget < -1e-15:
            break
        if k == n:
            out_sorted = np.full(n, cap)
            break
        c = budget / tail_sums[k]
        if c * sorted_vals[k] <= cap * (1.0 + 1e-12) and (
            k == 0 or c * sorted_vals[k - 1] >= cap * (1.0 - 1e-12)
        ):
            out_sorted = np.minimum(c * sorted_vals, cap)
            break
    if out_sorted is None:
        raise RuntimeError("waterfilling failed to find a feasible scale")
    out = np.empty_like(values)
    out[order] = out_sorted
    return PriorSpec(out, generator=f"{prior.generator}+cap({cap:g})")


def sample_frequencies(prior: PriorSpec, rng: np.random.Generator) -> FrequencySample:
    """One realization: each slot draws p_x uniformly from the value set,
    then D(x) = p_x / sum p_x."""
    p = prior.values[rng.integers(0, prior.n_values, size=prior.n_values)]
    return FrequencySample(p / p.sum())


def _draw_frequency_matrix(
    prior: PriorSpec, rows: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """(rows x N) raw draws and their row sums."""
    p = prior.values[rng.integers(0, prior.n_values, size=(rows, prior.n_values))]
    return p, p.sum(axis=1)


def weight_estimate(
    prior: PriorSpec,
    interval: tuple[float, float],
    replicates: int,
    rng: np.random.Generator,
) -> WeightEstimate:
    """Monte-Carlo weight(pi, [b1, b2]) = E[sum_x D(x) 1(D(x) in [b1, b2])].

    Per replicate the captured mass is (sum of selected p_x) / (sum of all
    p_x), so the full interval [0, 1] yields exactly 1.0 in every replicate.
    The standard error is the sample standard deviation of the per-replicate
    masses over sqrt(replicates).
    """
    b1, b2 = float(interval[0]), float(interval[1])
    if not 0.0 <= b1 <= b2 <= 1.0:
        raise ValueError(f"need 0 <= b1 <= b2 <= 1, got [{b1}, {b2}]")
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    masses = np.empty(replicates)
    done = 0
    while done < replicates:
        rows = min(_CHUNK_ROWS, replicates - done)
        p, totals = _draw_frequency_matrix(prior, rows, rng)
        d = p / totals[:, None]
        selected = np.where((d >= b1) & (d <= b2), p, 0.0).sum(axis=1)
        masses[done : done + rows] = selected / totals
        done += rows
    value = float(masses.mean())
    stderr = float(masses.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return WeightEstimate(value=value, stderr=stderr, replicates=replicates, interval=(b1, b2))


def _log_moment_weights(values: np.ndarray, n: int, l: int) -> np.ndarray:
    """log of alpha^l (1-alpha)^(n-l) elementwise, with the n == l edge kept
    free of 0 * log(0)."""
    w = l * np.log(values)
    if n > l:
        with np.errstate(divide="ignore"):
            w = w + (n - l) * np.log1p(-values)
    return w


def tau_exact(prior: PriorSpec, n: int, l: int) -> float:
    """Closed-form tau_l, expectation uniform over the raw prior values.

    Computed as the den-weighted mean of the values:
    tau = sum_j pi_j u_j / sum_j u_j with u_j = exp(w_j - max w) and
    w_j = l log pi_j + (n-l) log(1-pi_j), so n up to 1e7 cannot underflow.
    A prior whose values are all equal short-circuits to that value: the
    common factor cancels exactly, and cancelling it symbolically keeps the
    point-mass identity exact in floating point.
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if l > n:
        raise ValueError(f"l must not exceed n, got l={l}, n={n}")
    values = prior.values
    first = values[0]
    if np.all(values == first):
        return float(first)
    w = _log_moment_weights(values, n, l)
    top = float(np.max(w))
    if not math.isfinite(top):
        raise ValueError("tau is undefined: every prior value has zero moment weight")
    u = np.exp(w - top)
    return float(np.dot(values, u) / np.sum(u))


def tau_monte_carlo(
    prior: PriorSpec, n: int, l: int, replicates: int, rng: np.random.Generator
) -> TauMcEstimate:
    """Normalized-mode tau_l: sample whole frequency realizations, normalize,
    and form the ratio-of-means estimator over all slots.

    Per replicate r both moments are averaged over the N exchangeable slots
    in log space; the final ratio and its delta-method standard error come
    from the per-replicate (numerator, denominator) pairs rescaled by a
    common shift, which cancels in both.
    """
    if l < 1 or l > n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    if replicates < 2:
        raise ValueError(f"replicates must be >= 2 for a standard error, got {replicates}")
    log_n_slots = math.log(prior.n_values)
    lnum = np.empty(replicates)
    lden = np.empty(replicates)
    done = 0
    while done < replicates:
        rows = min(_CHUNK_ROWS, replicates - done)
        p, totals = _draw_frequency_matrix(prior, rows, rng)
        d = p / totals[:, None]
        w = _log_moment_weights(d, n, l)
        lden[done : done + rows] = logsumexp(w, axis=1) - log_n_slots
        lnum[done : done + rows] = logsumexp(w + np.log(d), axis=1) - log_n_slots
        done += rows
    shift = float(np.max(lden))
    num = np.exp(lnum - shift)
    den = np.exp(lden - shift)
    num_mean = float(num.mean())
    den_mean = float(den.mean())
    value = num_mean / den_mean
    # Delta method for a ratio of means over paired replicates.
    resid = num - value * den
    stderr = float(
        math.sqrt(np.dot(resid, resid) / (replicates - 1) / replicates) / den_mean
    )
    return TauMcEstimate(value=value, stderr=stderr, replicates=replicates)


def tau_lower_large(n: int, l: int, weight_value: float) -> float:
    """Large-regime lower bound 0.4 * l(l-1)/(n(n-1)) * weight_value.

    weight_value is weight(pi, [2/3 (l-1)/(n-1), 4/3 l/n]); asserted when
    n >= 1e3, N >= 1e2, l <= n/10, and pi_max <= 1/20.  Vacuous at l = 1.
    """
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    if not 0.0 <= weight_value <= 1.0:
        raise ValueError(f"weight_value must lie in [0, 1], got {weight_value}")
    return 0.4 * (l * (l - 1.0)) / (n * (n - 1.0)) * weight_value


def tau_lower_small(n: int, l: int, weight_value: float) -> float:
    """Small-l lower bound 0.4 * ((l-1)/(n-1)) * 1.1^-l * weight_value.

    weight_value is weight(pi, [0.7 (l-1)/(n-1), 4/3 (l-1)/(n-1)]).  The
    geometric factor makes the bound less informative as l grows; at l = 1
    it is vacuous (zero) and a warning is issued.
    """
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    if not 0.0 <= weight_value <= 1.0:
        raise ValueError(f"weight_value must lie in [0, 1], got {weight_value}")
    if l == 1:
        warnings.warn("small-l tau bound is vacuous at l = 1", stacklevel=2)
        return 0.0
    return 0.4 * ((l - 1.0) / (n - 1.0)) * (1.1 ** -l) * weight_value


def large_interval(n: int, l: int) -> tuple[float, float]:
    """Frequency window the large-regime bound weighs: [2/3 (l-1)/(n-1), 4/3 l/n]."""
    return (2.0 / 3.0) * (l - 1.0) / (n - 1.0), (4.0 / 3.0) * l / n


def small_interval(n: int, l: int) -> tuple[float, float]:
    """Frequency window the small-l bound weighs: [0.7, 4/3] * (l-1)/(n-1)."""
    base = (l - 1.0) / (n - 1.0)
    return 0.7 * base, (4.0 / 3.0) * base


def estimate_tau(
    prior: PriorSpec,
    n: int,
    l: int,
    rng: np.random.Generator,
    *,
    mc_replicates: int = 0,
    weight_replicates: int = 10**4,
) -> TauEstimate:
    """Assemble exact tau, optional normalized-mode MC, and both lower bounds.

    The bounds need weight(pi, .) over their respective frequency windows;
    those are estimated with weight_replicates draws from rng.  mc_replicates
    = 0 skips the MC route.
    """
    exact = tau_exact(prior, n, l)
    lo, hi = large_interval(n, l)
    w_large = weight_estimate(prior, (lo, min(hi, 1.0)), weight_replicates, rng)
    lo_large = tau_lower_large(n, l, min(1.0, w_large.value))
    b1, b2 = small_interval(n, l)
    if l == 1:
        lo_small = tau_lower_small(n, l, 0.0)
    else:
        w_small = weight_estimate(prior, (b1, min(b2, 1.0)), weight_replicates, rng)
        lo_small = tau_lower_small(n, l, min(1.0, w_small.value))
    mc = mc_stderr = None
    if mc_replicates:
        est = tau_monte_carlo(prior, n, l, mc_replicates, rng)
        mc, mc_stderr = est.value, est.stderr
    return TauEstimate(
        l=l,
        n=n,
        exact=exact,
        lower_large=lo_large,
        lower_small=lo_small,
        mc=mc,
        mc_stderr=mc_stderr,
        regime_ok=prior.regime_ok(n, l),
    )
