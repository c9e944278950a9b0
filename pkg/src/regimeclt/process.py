"""Regime-switching process simulation and filtering.

A hidden finite-state chain selects, at every step, which emission
distribution produces the observed value. Emissions depend on the current
regime only, so given the regime path the observations are independent. The
observable law of X_t given the observation history is the mixture

    f(x | history) = sum_j f_j(x) * P(S_t = j | history),

with the regime predictive computed by a one-step-ahead forward filter.

Conventions: regime labels are 1-based in all public records. The model's
initial distribution describes the regime *before* the first emitted
observation; the first recorded state is one transition past it, so the
predictive for an empty history is the initial distribution propagated one
step (stationary initials are therefore fixed points).
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, optimize, special

from .chain import ROW_SUM_TOL, TransitionMatrix, is_ergodic, stationary_distribution
from .errors import InvalidModel, ZeroLikelihood
from .seeds import SeedSpec

DENSITY_INTEGRAL_TOL = 1e-6
_DENSITY_GRID_POINTS = 40_001
_SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# emission families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    """Normal emission with mean mu and standard deviation sigma > 0."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)) or self.sigma <= 0:
            raise InvalidModel("gaussian emission requires finite mu and sigma > 0")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.sigma**2

    def pdf(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * _SQRT_2PI)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=np.float64) - self.mu) / self.sigma)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=np.float64), 1e-300, None)
        return self.mu + self.sigma * special.ndtri(u)

    def abs_third_moment(self, center: float = 0.0) -> float:
        # E|X - center|^3 via the folded-normal third moment.
        d = (self.mu - center) / self.sigma
        phi = math.exp(-0.5 * d * d) / _SQRT_2PI
        cum = special.ndtr(d)
        val = (d**3 + 3.0 * d) * (2.0 * cum - 1.0) + 2.0 * (d * d + 2.0) * phi
        return self.sigma**3 * float(val)

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def effective_support(self) -> tuple[float, float]:
        return (self.mu - 10.0 * self.sigma, self.mu + 10.0 * self.sigma)

    def to_json_dict(self) -> dict:
        return {"family": "gaussian", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Uniform:
    """Uniform emission on [a, b], a < b."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a >= self.b:
            raise InvalidModel("uniform emission requires finite a < b")

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def variance(self) -> float:
        return (self.b - self.a) ** 2 / 12.0

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)

    def ppf(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=np.float64)

    def abs_third_moment(self, center: float = 0.0) -> float:
        a, b, c = self.a, self.b, center
        w = b - a
        if c <= a:
            return ((b - c) ** 4 - (a - c) ** 4) / (4.0 * w)
        if c >= b:
            return ((c - a) ** 4 - (c - b) ** 4) / (4.0 * w)
        return ((c - a) ** 4 + (b - c) ** 4) / (4.0 * w)

    def support(self) -> tuple[float, float]:
        return (self.a, self.b)

    def effective_support(self) -> tuple[float, float]:
        return (self.a, self.b)

    def to_json_dict(self) -> dict:
        return {"family": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class ShiftedExponential:
    """Exponential emission with the given rate, shifted to start at `shift`."""

    rate: float
    shift: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and math.isfinite(self.shift)) or self.rate <= 0:
            raise InvalidModel("shifted exponential emission requires finite shift and rate > 0")

    @property
    def mean(self) -> float:
        return self.shift + 1.0 / self.rate

    @property
    def variance(self) -> float:
        return 1.0 / self.rate**2

    def pdf(self, x):
        y = np.asarray(x, dtype=np.float64) - self.shift
        out = np.where(y >= 0.0, self.rate * np.exp(-self.rate * np.clip(y, 0.0, None)), 0.0)
        return out

    def cdf(self, x):
        y = np.asarray(x, dtype=np.float64) - self.shift
        return np.where(y >= 0.0, -np.expm1(-self.rate * np.clip(y, 0.0, None)), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        return self.shift - np.log1p(-u) / self.rate

    def abs_third_moment(self, center: float = 0.0) -> float:
        # E|Y - d|^3 for Y ~ Exp(rate), d = center - shift, via the partial
        # moments M_k(d) = int_0^d y^k rate e^(-rate y) dy.
        lam = self.rate
        d = center - self.shift
        if d <= 0.0:
            return 6.0 / lam**3 - 6.0 * d / lam**2 + 3.0 * d * d / lam - d**3
        e = math.exp(-lam * d)
        m0 = 1.0 - e
        m1 = m0 / lam - d * e
        m2 = 2.0 * m1 / lam - d * d * e
        m3 = 3.0 * m2 / lam - d**3 * e
        below = d**3 * m0 - 3.0 * d * d * m1 + 3.0 * d * m2 - m3
        above = 6.0 * e / lam**3
        return below + above

    def support(self) -> tuple[float, float]:
        return (self.shift, math.inf)

    def effective_support(self) -> tuple[float, float]:
        return (self.shift, self.shift + 50.0 / self.rate)

    def to_json_dict(self) -> dict:
        return {"family": "shifted_exponential", "rate": self.rate, "shift": self.shift}


Emission = Union[Gaussian, Uniform, ShiftedExponential]

_FAMILY_PARSERS = {
    "gaussian": lambda o: Gaussian(float(o["mu"]), float(o["sigma"])),
    "uniform": lambda o: Uniform(float(o["a"]), float(o["b"])),
    "shifted_exponential": lambda o: ShiftedExponential(float(o["rate"]), float(o.get("shift", 0.0))),
}


def emission_from_json_dict(obj: dict) -> Emission:
    family = obj.get("family")
    if family not in _FAMILY_PARSERS:
        raise InvalidModel(f"unknown emission family {family!r}")
    return _FAMILY_PARSERS[family](obj)


@dataclass(frozen=True)
class EmissionSpec:
    """Per-regime emission distributions, one component per state.

    Each component density is integrated numerically on a grid over its
    effective support at construction time and must come out to 1 within
    1e-6; this guards against malformed parameterizations reaching the
    simulation and bound machinery.
    """

    components: tuple[Emission, ...]

    def __post_init__(self) -> None:
        components = tuple(self.components)
        if not components:
            raise InvalidModel("at least one emission component is required")
        object.__setattr__(self, "components", components)
        for idx, comp in enumerate(components):
            lo, hi = comp.effective_support()
            grid = np.linspace(lo, hi, _DENSITY_GRID_POINTS)
            total = float(integrate.simpson(comp.pdf(grid), x=grid))
            if abs(total - 1.0) > DENSITY_INTEGRAL_TOL:
                raise InvalidModel(
                    f"component {idx} density integrates to {total!r}, expected 1 "
                    f"within {DENSITY_INTEGRAL_TOL}"
                )

    @property
    def n_states(self) -> int:
        return len(self.components)

    def means(self) -> NDArray[np.float64]:
        return np.array([c.mean for c in self.components])

    def variances(self) -> NDArray[np.float64]:
        return np.array([c.variance for c in self.components])

    def pdf_matrix(self, x) -> NDArray[np.float64]:
        """Stack of component densities evaluated at x; shape (n_states, ...)."""
        return np.stack([np.asarray(c.pdf(x), dtype=np.float64) for c in self.components])

    def interval_weights(self, lo: float, hi: float) -> NDArray[np.float64]:
        """Per-component probability of the interval (lo, hi]."""
        out = np.empty(self.n_states)
        for j, comp in enumerate(self.components):
            upper = 1.0 if hi == math.inf else float(comp.cdf(hi))
            lower = 0.0 if lo == -math.inf else float(comp.cdf(lo))
            out[j] = max(upper - lower, 0.0)
        return out

    def ppf_by_state(self, states0, u) -> NDArray[np.float64]:
        """Inverse-CDF transform of uniforms u under the 0-based state array."""
        states0 = np.asarray(states0)
        u = np.asarray(u, dtype=np.float64)
        out = np.empty(u.shape, dtype=np.float64)
        for j, comp in enumerate(self.components):
            mask = states0 == j
            if np.any(mask):
                out[mask] = comp.ppf(u[mask])
        return out

    def to_json_list(self) -> list[dict]:
        return [c.to_json_dict() for c in self.components]


# ---------------------------------------------------------------------------
# model and path records
# ---------------------------------------------------------------------------

Initial = Union[str, int, tuple]


@dataclass(frozen=True)
class ModelSpec:
    """Hidden-regime model: chain, per-state emissions, initial regime law.

    initial is one of:
      * "stationary" -- start from the stationary distribution;
      * an int j in 1..n_states -- start from the fixed regime j;
      * an explicit probability vector of length n_states.
    """

    chain: TransitionMatrix
    emissions: EmissionSpec
    initial: Initial = "stationary"

    def __post_init__(self) -> None:
        if self.chain.n_states != self.emissions.n_states:
            raise InvalidModel(
                f"chain has {self.chain.n_states} states but "
                f"{self.emissions.n_states} emission components were given"
            )
        init = self.initial
        if isinstance(init, str):
            if init != "stationary":
                raise InvalidModel(f"unknown initial specification {init!r}")
        elif isinstance(init, (int, np.integer)):
            if not 1 <= int(init) <= self.n_states:
                raise InvalidModel(f"fixed initial state must lie in 1..{self.n_states}")
            object.__setattr__(self, "initial", int(init))
        else:
            vec = np.asarray(init, dtype=np.float64)
            if vec.shape != (self.n_states,):
                raise InvalidModel("explicit initial vector has the wrong length")
            if np.any(vec < 0.0) or abs(vec.sum() - 1.0) > ROW_SUM_TOL:
                raise InvalidModel("explicit initial vector must be a probability vector")
            object.__setattr__(self, "initial", tuple(float(v) for v in vec))

    @property
    def n_states(self) -> int:
        return self.chain.n_states

    def stationary(self) -> NDArray[np.float64]:
        return stationary_distribution(self.chain).pi

    def initial_distribution(self) -> NDArray[np.float64]:
        if self.initial == "stationary":
            return self.stationary()
        if isinstance(self.initial, int):
            vec = np.zeros(self.n_states)
            vec[self.initial - 1] = 1.0
            return vec
        return np.asarray(self.initial, dtype=np.float64)

    def to_json_dict(self) -> dict:
        if self.initial == "stationary":
            init_obj: object = "stationary"
        elif isinstance(self.initial, int):
            init_obj = {"fixed_state": self.initial}
        else:
            init_obj = {"probs": list(self.initial)}
        return {
            "chain": self.chain.to_json_dict(),
            "emissions": self.emissions.to_json_list(),
            "initial": init_obj,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ModelSpec":
        try:
            chain = TransitionMatrix.from_json_dict(obj["chain"])
            emissions = EmissionSpec(tuple(emission_from_json_dict(e) for e in obj["emissions"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidModel(f"malformed model specification: {exc}") from exc
        init_obj = obj.get("initial", "stationary")
        initial: Initial
        if init_obj == "stationary":
            initial = "stationary"
        elif isinstance(init_obj, dict) and "fixed_state" in init_obj:
            initial = int(init_obj["fixed_state"])
        elif isinstance(init_obj, dict) and "probs" in init_obj:
            initial = tuple(float(v) for v in init_obj["probs"])
        else:
            raise InvalidModel(f"unknown initial specification {init_obj!r}")
        return cls(chain=chain, emissions=emissions, initial=initial)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class PathSample:
    """One simulated trajectory: 1-based regime labels, observations, seed."""

    states: NDArray[np.int64]
    observations: NDArray[np.float64]
    seed: SeedSpec

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.int64)
        obs = np.asarray(self.observations, dtype=np.float64)
        if states.ndim != 1 or obs.ndim != 1 or states.shape != obs.shape:
            raise ValueError("states and observations must be 1-d arrays of equal length")
        if states.size and states.min() < 1:
            raise ValueError("regime labels are 1-based")
        states.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "observations", obs)

    def __len__(self) -> int:
        return self.states.size

    def to_csv(self, path) -> None:
        """Write columns t, state, x with t starting at 1."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "state", "x"])
            for t, (s, x) in enumerate(zip(self.states, self.observations), start=1):
                writer.writerow([t, int(s), repr(float(x))])


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _cumulative_rows(chain: TransitionMatrix) -> NDArray[np.float64]:
    cum = np.cumsum(chain.p, axis=1)
    cum[:, -1] = 1.0  # guard against row sums a hair under 1
    return cum


def sample_path(model: ModelSpec, n: int, seed: SeedSpec) -> PathSample:
    """Simulate n steps of the hidden chain and its emissions.

    The generator is consumed in a fixed order (initial draw if the initial
    law is random, then n state uniforms, then n observation uniforms), so a
    given (model, n, seed) reproduces the path bit for bit.
    """
    if n < 1:
        raise InvalidModel("path length must be >= 1")
    rng = seed.rng()
    if isinstance(model.initial, int):
        state0 = model.initial - 1
    else:
        init = model.initial_distribution()
        cum_init = np.cumsum(init)
        cum_init[-1] = 1.0
        state0 = int(np.searchsorted(cum_init, rng.random(), side="right"))
    u_state = rng.random(n)
    u_obs = rng.random(n)

    cum = _cumulative_rows(model.chain)
    cum_lists = [row.tolist() for row in cum]
    n_states = model.n_states
    states0 = np.empty(n, dtype=np.int64)
    current = state0
    u_list = u_state.tolist()
    for t in range(n):
        current = bisect_right(cum_lists[current], u_list[t])
        if current >= n_states:
            current = n_states - 1
        states0[t] = current
    observations = model.emissions.ppf_by_state(states0, u_obs)
    return PathSample(states=states0 + 1, observations=observations, seed=seed)


def iter_path_chunks(
    model: ModelSpec,
    n: int,
    n_paths: int,
    seed: SeedSpec,
    max_elements: int = 10_000_000,
) -> Iterator[tuple[int, NDArray[np.int16], NDArray[np.float64]]]:
    """Simulate many replicate paths, yielding (start_index, states, obs) chunks.

    Each replicate r draws from its own stream derived from (seed.base,
    seed.stream, r), so the output is independent of chunking and of any
    scheduling order. states chunks are (chunk, n) 1-based int16, obs chunks
    (chunk, n) float64.
    """
    if n < 1 or n_paths < 1:
        raise InvalidModel("n and n_paths must be >= 1")
    draws_per_rep = 2 * n + 1
    chunk_size = max(1, min(n_paths, max_elements // draws_per_rep))
    cum = _cumulative_rows(model.chain)
    fixed_initial = isinstance(model.initial, int)
    if fixed_initial:
        state0 = model.initial - 1
        cum_init = None
    else:
        cum_init = np.cumsum(model.initial_distribution())
        cum_init[-1] = 1.0

    start = 0
    while start < n_paths:
        size = min(chunk_size, n_paths - start)
        u = np.empty((size, draws_per_rep))
        for i in range(size):
            u[i] = seed.replicate_rng(start + i).random(draws_per_rep)
        if fixed_initial:
            s = np.full(size, state0, dtype=np.int64)
        else:
            s = np.searchsorted(cum_init, u[:, 0], side="right")
        states = np.empty((size, n), dtype=np.int16)
        for t in range(n):
            s = (cum[s] <= u[:, 1 + t][:, None]).sum(axis=1)
            states[:, t] = s
        obs = model.emissions.ppf_by_state(states, u[:, n + 1 :])
        yield start, states + np.int16(1), obs
        start += size


def sample_stationary_mixture(model: ModelSpec, size: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Draw iid values from the stationary observable mixture of the model."""
    pi = model.stationary()
    cum_pi = np.cumsum(pi)
    cum_pi[-1] = 1.0
    states0 = np.searchsorted(cum_pi, rng.random(size), side="right")
    return model.emissions.ppf_by_state(states0, rng.random(size))


# ---------------------------------------------------------------------------
# filtering and the conditional observable density
# ---------------------------------------------------------------------------


def predictive_state_probs(model: ModelSpec, observations: Sequence[float]) -> NDArray[np.float64]:
    """One-step-ahead regime probabilities given an observation prefix.

    An empty prefix returns the initial distribution propagated one step.

    Raises
    ------
    ZeroLikelihood
        If some prefix observation has zero density under every regime.
    """
    p = model.chain.p
    pred = model.initial_distribution() @ p
    for t, x in enumerate(observations):
        like = np.array([float(c.pdf(x)) for c in model.emissions.components])
        post = pred * like
        norm = post.sum()
        if norm <= 0.0 or not math.isfinite(norm):
            raise ZeroLikelihood(f"observation {x!r} at prefix position {t} has zero likelihood")
        pred = (post / norm) @ p
    return pred


def conditional_density(model: ModelSpec, x, observations: Sequence[float] = ()) -> np.ndarray | float:
    """Mixture density of the next observation given an observation prefix.

    Accepts scalar or array x; the regime weights are the one-step-ahead
    predictive probabilities for the given prefix.
    """
    pred = predictive_state_probs(model, observations)
    values = pred @ model.emissions.pdf_matrix(x)
    if np.ndim(x) == 0:
        return float(values)
    return values


# ---------------------------------------------------------------------------
# stationary-mixture summaries
# ---------------------------------------------------------------------------


def mixture_mean(model: ModelSpec) -> float:
    pi = model.stationary()
    return float(pi @ model.emissions.means())


def mixture_variance(model: ModelSpec) -> float:
    pi = model.stationary()
    means = model.emissions.means()
    mu = float(pi @ means)
    return float(pi @ (model.emissions.variances() + (means - mu) ** 2))


def mixture_abs_third_moment(model: ModelSpec, center: float | None = None) -> float:
    """E|X - center|^3 under the stationary mixture (default: its own mean)."""
    pi = model.stationary()
    if center is None:
        center = mixture_mean(model)
    vals = np.array([c.abs_third_moment(center) for c in model.emissions.components])
    return float(pi @ vals)


def mixture_cdf(model: ModelSpec, x) -> np.ndarray | float:
    pi = model.stationary()
    vals = pi @ np.stack([np.asarray(c.cdf(x), dtype=np.float64) for c in model.emissions.components])
    if np.ndim(x) == 0:
        return float(vals)
    return vals


def mixture_quantile(model: ModelSpec, q: float) -> float:
    """Quantile of the stationary observable mixture, by bracketed root solve."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie strictly between 0 and 1")
    los, his = [], []
    for comp in model.emissions.components:
        lo, hi = comp.effective_support()
        los.append(lo)
        his.append(hi)
    lo, hi = min(los) - 1.0, max(his) + 1.0
    return float(optimize.brentq(lambda x: mixture_cdf(model, x) - q, lo, hi, xtol=1e-12))
