"""Ground-truth preference models, comparison datasets and samplers.

Arms are 0-indexed throughout. Rewards enter every probability only through
differences, so all functions here are invariant to a constant shift of ``r``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError

GENERATOR = "numpy.random.PCG64"


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator; ``seed`` may be an int or a tuple of ints."""
    return np.random.Generator(np.random.PCG64(seed))


def generator_id() -> str:
    return f"{GENERATOR}@numpy-{np.__version__}"


@dataclass(frozen=True)
class RewardVector:
    """Per-arm rewards; ``reference_arm`` is the arm pinned to 0 by :meth:`normalized`."""

    values: np.ndarray
    reference_arm: int = -1

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ConfigurationError("a reward vector needs at least two arms")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("rewards must be finite")
        ref = self.reference_arm % values.size
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "reference_arm", ref)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size

    @property
    def K(self) -> int:
        return self.values.size

    def normalized(self) -> "RewardVector":
        return RewardVector(self.values - self.values[self.reference_arm], self.reference_arm)


@dataclass(frozen=True)
class ComparisonDistribution:
    """Symmetric mass over unordered arm pairs.

    ``pair_mass[a, b]`` is the probability that a sample compares ``a`` and
    ``b``; the mass of each unordered pair is stored in both triangles.
    """

    pair_mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.pair_mass, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ConfigurationError("pair_mass must be a square K x K matrix with K >= 2")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ConfigurationError("pair masses must be finite and non-negative")
        if np.any(np.diag(m) != 0):
            raise ConfigurationError("an arm cannot be compared with itself")
        if not np.allclose(m, m.T, rtol=0, atol=1e-15):
            raise ConfigurationError("pair_mass must be symmetric")
        total = np.triu(m, 1).sum()
        if total <= 0:
            raise ConfigurationError("comparison distribution has no mass")
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"pair masses sum to {total!r}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "pair_mass", m)

    @property
    def K(self) -> int:
        return self.pair_mass.shape[0]

    @property
    def marginals(self) -> np.ndarray:
        return self.pair_mass.sum(axis=1)

    def pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Upper-triangle pairs ``(a, b, mass)`` with ``a < b``."""
        a, b = np.triu_indices(self.K, 1)
        return a, b, self.pair_mass[a, b]

    @classmethod
    def uniform(cls, K: int) -> "ComparisonDistribution":
        m = np.full((K, K), 1.0 / (K * (K - 1) / 2))
        np.fill_diagonal(m, 0.0)
        return cls(m)


@dataclass(frozen=True)
class PairwiseDataset:
    """Records ``(first[i], second[i], y[i])`` where ``y = 1`` means ``first`` won."""

    first: np.ndarray
    second: np.ndarray
    y: np.ndarray
    K: int
    seed: int | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        first = np.array(self.first, dtype=np.int64)
        second = np.array(self.second, dtype=np.int64)
        y = np.array(self.y, dtype=float)
        if not (first.shape == second.shape == y.shape) or first.ndim != 1:
            raise ConfigurationError("record arrays must be one-dimensional and equal length")
        if first.size == 0:
            raise ConfigurationError("dataset is empty")
        for arr in (first, second):
            if arr.min() < 0 or arr.max() >= self.K:
                raise IndexError("arm index out of range")
        if np.any(first == second):
            raise ConfigurationError("a record compares an arm with itself")
        if np.any((y != 0) & (y != 1)):
            raise ConfigurationError("labels must be binary")
        for name, arr in (("first", first), ("second", second), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.first.size

    @property
    def wins(self) -> np.ndarray:
        """``wins[a, b]`` = number of records in which ``a`` beat ``b``."""
        if "wins" not in self._cache:
            winner = np.where(self.y == 1, self.first, self.second)
            loser = np.where(self.y == 1, self.second, self.first)
            w = np.zeros((self.K, self.K), dtype=np.int64)
            np.add.at(w, (winner, loser), 1)
            w.setflags(write=False)
            self._cache["wins"] = w
        return self._cache["wins"]

    @property
    def counts(self) -> np.ndarray:
        """Symmetric ``n(a, b)``."""
        w = self.wins
        return w + w.T

    @property
    def n_plus(self) -> np.ndarray:
        return self.wins.sum(axis=1)

    @property
    def n_minus(self) -> np.ndarray:
        return self.wins.sum(axis=0)

    @property
    def n_arm(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def subset(self, idx) -> "PairwiseDataset":
        return PairwiseDataset(self.first[idx], self.second[idx], self.y[idx], self.K, self.seed)


@dataclass(frozen=True)
class MultiwiseDataset:
    """M-wise rankings: ``actions[i]`` is the offered tuple, ``sigma[i, j]`` the
    position (within ``actions[i]``) of the arm ranked ``j``-th."""

    actions: np.ndarray
    sigma: np.ndarray
    K: int
    seed: int | None = None

    def __post_init__(self):
        actions = np.array(self.actions, dtype=np.int64)
        sigma = np.array(self.sigma, dtype=np.int64)
        if actions.ndim != 2 or actions.shape != sigma.shape or actions.shape[0] == 0:
            raise ConfigurationError("actions and sigma must be non-empty n x M arrays")
        if actions.shape[1] < 2:
            raise ConfigurationError("comparison arity M must be at least 2")
        if actions.min() < 0 or actions.max() >= self.K:
            raise IndexError("arm index out of range")
        M = actions.shape[1]
        if not np.all(np.sort(sigma, axis=1) == np.arange(M)):
            raise ConfigurationError("every sigma must be a permutation of range(M)")
        if np.any(np.diff(np.sort(actions, axis=1), axis=1) == 0):
            raise ConfigurationError("actions within a record must be distinct")
        for name, arr in (("actions", actions), ("sigma", sigma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    @property
    def M(self) -> int:
        return self.actions.shape[1]

    @property
    def ranked(self) -> np.ndarray:
        """Arms in ranked order, best first."""
        return np.take_along_axis(self.actions, self.sigma, axis=1)

    def to_pairwise(self) -> PairwiseDataset:
        """Exact reduction for M = 2: ``y = 1`` iff ``actions[i, 0]`` was ranked first."""
        if self.M != 2:
            raise ConfigurationError("only 2-wise datasets reduce to pairwise records")
        y = (self.sigma[:, 0] == 0).astype(float)
        return PairwiseDataset(self.actions[:, 0], self.actions[:, 1], y, self.K, self.seed)


def _check_arms(r: np.ndarray, *arms) -> None:
    for a in arms:
        if not -r.size <= a < r.size:
            raise IndexError(f"arm {a} out of range for {r.size} arms")


def btl_prob(r, a: int, b: int) -> float:
    """P(a beats b) under Bradley-Terry-Luce, as the logistic of r[a] - r[b]."""
    r = np.asarray(r, dtype=float)
    _check_arms(r, a, b)
    if a % r.size == b % r.size:
        raise ConfigurationError("btl_prob needs two different arms")
    return float(expit(r[a] - r[b]))


def pl_log_prob(r, actions: Sequence[int], sigma: Sequence[int]) -> float:
    r = np.asarray(r, dtype=float)
    actions = np.asarray(actions, dtype=np.int64)
    sigma = np.asarray(sigma, dtype=np.int64)
    _check_arms(r, *actions)
    M = actions.size
    if sigma.shape != (M,) or sorted(sigma.tolist()) != list(range(M)):
        raise ConfigurationError("sigma must be a permutation of range(M)")
    if len(set(actions.tolist())) != M:
        raise ConfigurationError("actions must be distinct")
    u = r[actions[sigma]]
    suffix = np.logaddexp.accumulate(u[::-1])[::-1]
    return float(np.sum(u - suffix))


def pl_permutation_prob(r, actions: Sequence[int], sigma: Sequence[int]) -> float:
    """Plackett-Luce probability of ranking ``actions`` in the order ``sigma``.

    ``sigma[j]`` is the position in ``actions`` of the arm ranked ``j``-th.
    """
    return float(np.exp(pl_log_prob(r, actions, sigma)))


def sample_pairwise_dataset(mu: ComparisonDistribution, r_star, n: int, seed: int) -> PairwiseDataset:
    """Draw ``n`` i.i.d. comparisons: a pair from ``mu`` (random orientation),
    then a Bernoulli label from the BTL model of ``r_star``."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    r = np.asarray(r_star, dtype=float)
    if r.size != mu.K:
        raise ConfigurationError("reward vector and comparison distribution disagree on K")
    a, b, mass = mu.pairs()
    rng = make_rng(seed)
    pick = rng.choice(a.size, size=n, p=mass / mass.sum())
    swap = rng.random(n) < 0.5
    first = np.where(swap, b[pick], a[pick])
    second = np.where(swap, a[pick], b[pick])
    y = (rng.random(n) < expit(r[first] - r[second])).astype(float)
    return PairwiseDataset(first, second, y, mu.K, seed)


def uniform_tuples(K: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """All M-subsets of the arms with equal probability."""
    if M > K:
        raise ConfigurationError(f"cannot draw {M} distinct arms out of {K}")
    if M < 2:
        raise ConfigurationError("comparison arity M must be at least 2")
    tuples = np.array(list(itertools.combinations(range(K), M)), dtype=np.int64)
    return tuples, np.full(len(tuples), 1.0 / len(tuples))


def sample_multiwise_dataset(tuples, probs, r_star, n: int, seed: int) -> MultiwiseDataset:
    """Draw ``n`` M-wise rankings; the offered tuple comes from ``(tuples, probs)``
    and the ranking from Plackett-Luce (sampled with the Gumbel-max trick)."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    r = np.asarray(r_star, dtype=float)
    tuples = np.atleast_2d(np.asarray(tuples, dtype=np.int64))
    probs = np.asarray(probs, dtype=float)
    K = r.size
    if tuples.shape[1] > K:
        raise ConfigurationError(f"cannot draw {tuples.shape[1]} distinct arms out of {K}")
    if probs.shape != (tuples.shape[0],) or np.any(probs < 0) or probs.sum() <= 0:
        raise ConfigurationError("invalid tuple distribution")
    rng = make_rng(seed)
    actions = tuples[rng.choice(len(tuples), size=n, p=probs / probs.sum())]
    scores = r[actions] + rng.gumbel(size=actions.shape)
    sigma = np.argsort(-scores, axis=1, kind="stable")
    return MultiwiseDataset(actions, sigma, K, seed)


def hard_instance(K: int, n: int) -> tuple[RewardVector, ComparisonDistribution]:
    """Long-tailed instance: arm 0 is best (reward 1) and is compared with arm 1
    most of the time; every other arm meets arm 0 with probability 1/n."""
    if K < 3:
        raise ConfigurationError("the hard instance needs at least 3 arms")
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    rest = 1.0 - (K - 2) / n
    if rest < 0:
        raise ConfigurationError(f"n={n} too small for K={K}: pair (0, 1) would get negative mass")
    m = np.zeros((K, K))
    m[0, 2:] = m[2:, 0] = 1.0 / n
    m[0, 1] = m[1, 0] = rest
    r = np.zeros(K)
    r[0] = 1.0
    return RewardVector(r), ComparisonDistribution(m)
