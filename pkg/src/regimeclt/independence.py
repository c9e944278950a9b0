"""Exact and Monte Carlo near-independence gaps for regime-switching output.

Events are rectangles {S_t in state_set} x {X_t in (lo, hi]}. Because
emissions depend only on the current regime, every probability involving
finitely many time points reduces to a weighted sum over regime assignments
with multi-step transition matrices between them, so gaps between joint and
product probabilities can be evaluated exactly.

All exact routines evaluate under the stationary regime law; Monte Carlo
counterparts force a stationary start so the two routes estimate the same
quantity. Bounds carry the fitted prefactor c from the chain's mixing
profile: the conditional gap is checked against 2 c alpha^tau, the k-event
joint-product gap against k c alpha^(sum of lags). The latter envelope is
reported as stated even though exact evaluation shows configurations that
exceed it; `chained_gap_bound` gives the envelope that conditional-gap
chaining actually certifies (2 c sum_r alpha^tau_r), which the exact gaps do
respect.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .chain import MixingProfile, mixing_rate
from .errors import EmptyConditioningEvent, TooManyEventsForExact
from .process import ModelSpec, iter_path_chunks, mixture_quantile
from .seeds import SeedSpec

MAX_EXACT_EVENTS = 6
# Absolute slack for exact-arithmetic bound comparisons; covers accumulated
# round-off in matrix powers.
BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class RectEvent:
    """Rectangle event: regime in state_set and observation in (lo, hi]."""

    state_set: frozenset[int]
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self) -> None:
        states = frozenset(int(s) for s in self.state_set)
        if not states:
            raise ValueError("state_set must be nonempty")
        if min(states) < 1:
            raise ValueError("regime labels are 1-based")
        if not self.lo < self.hi:
            raise ValueError("event interval must satisfy lo < hi")
        object.__setattr__(self, "state_set", states)

    def weights(self, model: ModelSpec) -> NDArray[np.float64]:
        """Per-regime probability mass of the event, given the regime."""
        if max(self.state_set) > model.n_states:
            raise ValueError("event references a regime the model does not have")
        w = model.emissions.interval_weights(self.lo, self.hi)
        mask = np.zeros(model.n_states)
        mask[[s - 1 for s in self.state_set]] = 1.0
        return w * mask

    def indicator(self, states: np.ndarray, obs: np.ndarray) -> np.ndarray:
        """Elementwise event indicator for 1-based state labels and values."""
        in_states = np.isin(states, list(self.state_set))
        return in_states & (obs > self.lo) & (obs <= self.hi)

    def describe(self) -> str:
        states = ",".join(str(s) for s in sorted(self.state_set))
        return f"states({states})x({self.lo!r},{self.hi!r}]"


@dataclass(frozen=True)
class GapReport:
    """Measured dependence gap with its theoretical envelope.

    std_error is 0 for exact evaluations. For Monte Carlo, the joint and the
    marginals share the same replicate set and the error is the binomial
    standard error of the joint combined in quadrature with the delta-method
    error of the marginal product.
    """

    gap_estimate: float
    std_error: float
    theoretical_bound: float
    method: str
    lags: tuple[int, ...]
    k: int

    def __post_init__(self) -> None:
        if self.gap_estimate < 0.0:
            raise ValueError("gap must be nonnegative")
        if self.method not in ("exact", "mc"):
            raise ValueError("method must be 'exact' or 'mc'")
        if self.method == "exact" and self.std_error != 0.0:
            raise ValueError("exact evaluation must report zero std error")


# ---------------------------------------------------------------------------
# exact evaluation
# ---------------------------------------------------------------------------


def _profile_for(model: ModelSpec, horizon: int, profile: MixingProfile | None) -> MixingProfile:
    if profile is not None:
        return profile
    return mixing_rate(model.chain, s_max=max(horizon, 2))


def _validate_lags(lags: Sequence[int], k: int) -> tuple[int, ...]:
    lags = tuple(int(t) for t in lags)
    if len(lags) != k - 1:
        raise ValueError(f"{k} events require {k - 1} inter-event lags, got {len(lags)}")
    if any(t < 1 for t in lags):
        raise ValueError("lags must be positive integers")
    return lags


def _joint_exact(pi: np.ndarray, powers: list[np.ndarray], weights: list[np.ndarray]) -> float:
    v = pi * weights[0]
    for w, pt in zip(weights[1:], powers):
        v = (v @ pt) * w
    return float(v.sum())


def conditional_gap_exact(
    model: ModelSpec,
    event_a: RectEvent,
    event_b: RectEvent,
    tau: int,
    profile: MixingProfile | None = None,
) -> GapReport:
    """|P(A at T+tau | B at T) - P(A at T+tau)| under the stationary law.

    The theoretical envelope is 2 c alpha^tau. It is certified for target
    events whose state_set is a single regime (or the full space); target
    events mixing several regimes can exceed it.

    Raises
    ------
    EmptyConditioningEvent
        If P(B) = 0 under the stationary law.
    """
    if tau < 1:
        raise ValueError("tau must be a positive integer")
    pi = model.stationary()
    pt = np.linalg.matrix_power(model.chain.p, tau)
    w_a = event_a.weights(model)
    w_b = event_b.weights(model)
    p_b = float(pi @ w_b)
    if p_b <= 0.0:
        raise EmptyConditioningEvent(f"conditioning event {event_b.describe()} has probability 0")
    joint = float((pi * w_b) @ pt @ w_a)
    unconditional = float(pi @ pt @ w_a)
    gap = abs(joint / p_b - unconditional)
    prof = _profile_for(model, tau, profile)
    return GapReport(
        gap_estimate=gap,
        std_error=0.0,
        theoretical_bound=2.0 * prof.bound(tau),
        method="exact",
        lags=(int(tau),),
        k=2,
    )


def joint_product_gap(
    model: ModelSpec,
    events: Sequence[RectEvent],
    lags: Sequence[int],
    method: str = "exact",
    replicates: int = 100_000,
    seed: SeedSpec | None = None,
    profile: MixingProfile | None = None,
) -> GapReport:
    """|P(joint of k events) - product of marginals| at the given spacings.

    Event r sits lags[r-1] steps after event r-1 (k events, k-1 lags). The
    reported envelope is k c alpha^(sum lags).

    Raises
    ------
    TooManyEventsForExact
        If method="exact" and more than 6 events are given.
    """
    k = len(events)
    if k < 2:
        raise ValueError("at least two events are required")
    lags = _validate_lags(lags, k)
    total_lag = sum(lags)
    prof = _profile_for(model, total_lag, profile)
    bound = k * prof.c * prof.alpha**total_lag

    if method == "exact":
        if k > MAX_EXACT_EVENTS:
            raise TooManyEventsForExact(f"exact evaluation supports at most {MAX_EXACT_EVENTS} events")
        pi = model.stationary()
        powers = [np.linalg.matrix_power(model.chain.p, t) for t in lags]
        weights = [ev.weights(model) for ev in events]
        joint = _joint_exact(pi, powers, weights)
        product = float(np.prod([pi @ w for w in weights]))
        return GapReport(
            gap_estimate=abs(joint - product),
            std_error=0.0,
            theoretical_bound=bound,
            method="exact",
            lags=lags,
            k=k,
        )
    if method != "mc":
        raise ValueError("method must be 'exact' or 'mc'")
    if seed is None:
        raise ValueError("Monte Carlo evaluation requires a seed")
    joint_hat, marg_hat, n_rep = _mc_event_rates(model, events, lags, replicates, seed)
    product = float(np.prod(marg_hat))
    gap = abs(joint_hat - product)
    se_joint = math.sqrt(max(joint_hat * (1.0 - joint_hat), 0.0) / n_rep)
    se_prod_sq = 0.0
    for r, m in enumerate(marg_hat):
        partial = product / m if m > 0 else 0.0
        se_prod_sq += partial * partial * m * (1.0 - m) / n_rep
    std_error = math.sqrt(se_joint**2 + se_prod_sq)
    return GapReport(
        gap_estimate=gap,
        std_error=std_error,
        theoretical_bound=bound,
        method="mc",
        lags=lags,
        k=k,
    )


def _event_times(lags: tuple[int, ...]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(lags)])


def _mc_event_rates(
    model: ModelSpec,
    events: Sequence[RectEvent],
    lags: tuple[int, ...],
    replicates: int,
    seed: SeedSpec,
) -> tuple[float, np.ndarray, int]:
    """Joint and marginal hit rates from a common replicate set."""
    t_idx = _event_times(lags)
    n = int(t_idx[-1]) + 1
    stationary_model = dataclasses.replace(model, initial="stationary")
    joint_hits = 0
    marg_hits = np.zeros(len(events), dtype=np.int64)
    for start, states, obs in iter_path_chunks(stationary_model, n, replicates, seed):
        sub_states = states[:, t_idx]
        sub_obs = obs[:, t_idx]
        ind = np.stack(
            [ev.indicator(sub_states[:, r], sub_obs[:, r]) for r, ev in enumerate(events)],
            axis=1,
        )
        marg_hits += ind.sum(axis=0)
        joint_hits += int(ind.all(axis=1).sum())
    return joint_hits / replicates, marg_hits / replicates, replicates


def chained_gap_bound(profile: MixingProfile, lags: Sequence[int]) -> float:
    """Envelope obtained by chaining the conditional gap across the events.

    Splitting off one event at a time bounds the joint-product gap by
    2 c sum_r alpha^tau_r. Unlike the k c alpha^(sum lags) form, exact gaps
    respect this envelope on every tested configuration.
    """
    return 2.0 * profile.c * float(sum(profile.alpha**int(t) for t in lags))


# ---------------------------------------------------------------------------
# event families and the independence certificate
# ---------------------------------------------------------------------------

DEFAULT_QUANTILE_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def default_event_family(
    model: ModelSpec,
    quantile_levels: Sequence[float] = DEFAULT_QUANTILE_LEVELS,
) -> tuple[RectEvent, ...]:
    """Reference rectangle family used by the certificate routines.

    One half-line event per (regime, stationary-mixture quantile) pair, plus
    one full-line event per regime and the full-space event. The family is
    deterministic given the model, so certificates computed from it are
    reproducible.
    """
    events: list[RectEvent] = []
    thresholds = [mixture_quantile(model, q) for q in quantile_levels]
    for j in range(1, model.n_states + 1):
        for thr in thresholds:
            events.append(RectEvent(frozenset({j}), -math.inf, thr))
        events.append(RectEvent(frozenset({j})))
    events.append(RectEvent(frozenset(range(1, model.n_states + 1))))
    return tuple(events)


def observable_event_family(
    model: ModelSpec,
    quantile_levels: Sequence[float] = DEFAULT_QUANTILE_LEVELS,
) -> tuple[RectEvent, ...]:
    """Half-line events on the observation alone, regime unrestricted.

    These are the rectangles that matter when certifying near-independence
    of the observed values (as opposed to the joint regime-observation
    process): one event {X <= q} per stationary-mixture quantile plus the
    full space.
    """
    all_states = frozenset(range(1, model.n_states + 1))
    events = [
        RectEvent(all_states, -math.inf, mixture_quantile(model, q)) for q in quantile_levels
    ]
    events.append(RectEvent(all_states))
    return tuple(events)


def epsilon_certificate(
    model: ModelSpec,
    lags: Sequence[int],
    family: Iterable[Sequence[RectEvent]] | None = None,
    method: str = "exact",
    replicates: int = 100_000,
    seed: SeedSpec | None = None,
    profile: MixingProfile | None = None,
    base_events: Sequence[RectEvent] | None = None,
) -> float:
    """Certified near-independence level over a rectangle-event family.

    Returns the largest joint-product gap across the family of event tuples
    at the given spacings. With the default family the tuples are all
    combinations of the reference events, one per time point; base_events
    swaps in a different per-position event pool. In Monte Carlo mode every
    tuple is evaluated on a common replicate set and 3 standard errors are
    added, making the certificate conservative.
    """
    lags = tuple(int(t) for t in lags)
    if not lags:
        raise ValueError("at least one lag is required")
    if any(t < 1 for t in lags):
        raise ValueError("lags must be positive integers")
    k = len(lags) + 1
    if family is not None and base_events is not None:
        raise ValueError("give either an explicit family or base_events, not both")

    if family is None:
        base = default_event_family(model) if base_events is None else tuple(base_events)
        if method == "exact":
            return _epsilon_exact_product_family(model, base, lags)
        family = itertools.product(base, repeat=k)

    if method == "exact":
        pi = model.stationary()
        powers = [np.linalg.matrix_power(model.chain.p, t) for t in lags]
        best = 0.0
        for events in family:
            if len(events) != k:
                raise ValueError(f"every event tuple must have {k} entries")
            weights = [ev.weights(model) for ev in events]
            joint = _joint_exact(pi, powers, weights)
            product = float(np.prod([pi @ w for w in weights]))
            best = max(best, abs(joint - product))
        return best
    if method != "mc":
        raise ValueError("method must be 'exact' or 'mc'")
    if seed is None:
        raise ValueError("Monte Carlo evaluation requires a seed")
    return _epsilon_mc(model, list(family), lags, replicates, seed)


def _epsilon_exact_product_family(
    model: ModelSpec, base: Sequence[RectEvent], lags: tuple[int, ...]
) -> float:
    """Exact max gap over all tuples of the base family, shared-prefix DP.

    Tuples sharing a prefix share the propagated state vector, so the whole
    family costs O(B^(k-1)) vectorised steps per leading event instead of
    B^k independent evaluations. Memory grows with B^(k-1).
    """
    if len(lags) + 1 > MAX_EXACT_EVENTS:
        raise TooManyEventsForExact(
            f"exact evaluation supports at most {MAX_EXACT_EVENTS} events"
        )
    pi = model.stationary()
    n_states = model.n_states
    powers = [np.linalg.matrix_power(model.chain.p, t) for t in lags]
    w = np.stack([ev.weights(model) for ev in base])  # (B, N)
    marg = w @ pi  # (B,)
    best = 0.0
    for b0 in range(w.shape[0]):
        v = (pi * w[b0])[None, :]
        prod = marg[b0 : b0 + 1].copy()
        for pt in powers:
            v = ((v @ pt)[:, None, :] * w[None, :, :]).reshape(-1, n_states)
            prod = np.multiply.outer(prod, marg).reshape(-1)
        best = max(best, float(np.max(np.abs(v.sum(axis=-1) - prod))))
    return best


def _epsilon_mc(
    model: ModelSpec,
    family: list[Sequence[RectEvent]],
    lags: tuple[int, ...],
    replicates: int,
    seed: SeedSpec,
) -> float:
    k = len(lags) + 1
    t_idx = _event_times(lags)
    n = int(t_idx[-1]) + 1
    stationary_model = dataclasses.replace(model, initial="stationary")

    # Distinct events appearing at each position, evaluated once per chunk.
    position_events: list[list[RectEvent]] = [[] for _ in range(k)]
    tuple_idx = np.empty((len(family), k), dtype=np.int64)
    for fi, events in enumerate(family):
        if len(events) != k:
            raise ValueError(f"every event tuple must have {k} entries")
        for r, ev in enumerate(events):
            try:
                idx = position_events[r].index(ev)
            except ValueError:
                idx = len(position_events[r])
                position_events[r].append(ev)
            tuple_idx[fi, r] = idx

    joint_hits = np.zeros(len(family), dtype=np.int64)
    marg_hits = [np.zeros(len(evs), dtype=np.int64) for evs in position_events]
    for start, states, obs in iter_path_chunks(stationary_model, n, replicates, seed):
        ind_by_pos = []
        for r, evs in enumerate(position_events):
            col_s = states[:, t_idx[r]]
            col_x = obs[:, t_idx[r]]
            ind = np.stack([ev.indicator(col_s, col_x) for ev in evs], axis=1)
            marg_hits[r] += ind.sum(axis=0)
            ind_by_pos.append(ind)
        joint = ind_by_pos[0][:, tuple_idx[:, 0]]
        for r in range(1, k):
            joint = joint & ind_by_pos[r][:, tuple_idx[:, r]]
        joint_hits += joint.sum(axis=0)

    best = 0.0
    for fi in range(len(family)):
        j_hat = joint_hits[fi] / replicates
        margs = np.array(
            [marg_hits[r][tuple_idx[fi, r]] / replicates for r in range(k)]
        )
        product = float(np.prod(margs))
        se_joint_sq = max(j_hat * (1.0 - j_hat), 0.0) / replicates
        se_prod_sq = 0.0
        for m in margs:
            partial = product / m if m > 0 else 0.0
            se_prod_sq += partial * partial * m * (1.0 - m) / replicates
        se = math.sqrt(se_joint_sq + se_prod_sq)
        best = max(best, abs(j_hat - product) + 3.0 * se)
    return best
