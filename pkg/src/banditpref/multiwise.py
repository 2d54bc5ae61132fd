"""M-wise ranking losses and their smoothed-label counterparts.

Three label layouts are supported:

``pairwise-split``
    one label per record and action pair ``j < k`` (positions in the offered
    tuple), the probability that action ``j`` beats action ``k``;
``ranking``
    one label per record and rank position, the weight on "the arm ranked
    ``j``-th is the best of the remaining ones";
``full-permutation``
    one label per record, permutation and position (enumerates ``M!``
    permutations, so ``M <= 4``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError
from .estimators import TrainConfig, _bce, _descend, _PairwiseProblem
from .preference_model import MultiwiseDataset

VARIANTS = ("pairwise-split", "ranking", "full-permutation")
MAX_ENUMERATION_M = 4


@dataclass
class MultiwiseSoftLabels:
    variant: str
    values: np.ndarray


def _pair_positions(M):
    return np.array(list(itertools.combinations(range(M), 2)), dtype=np.int64)


def _permutations(M):
    if M > MAX_ENUMERATION_M:
        raise ConfigurationError(f"full-permutation labels enumerate M! rankings; M={M} exceeds {MAX_ENUMERATION_M}")
    return np.array(list(itertools.permutations(range(M))), dtype=np.int64)


def _ranks(data: MultiwiseDataset):
    """``rank[i, j]`` = rank (0 = best) of the action at position ``j``."""
    return np.argsort(data.sigma, axis=1)


def initial_labels(data: MultiwiseDataset, variant: str = "pairwise-split") -> MultiwiseSoftLabels:
    if variant == "pairwise-split":
        pos = _pair_positions(data.M)
        rank = _ranks(data)
        values = (rank[:, pos[:, 0]] < rank[:, pos[:, 1]]).astype(float)
    elif variant == "ranking":
        values = np.ones((data.n, data.M))
    elif variant == "full-permutation":
        perms = _permutations(data.M)
        match = np.all(perms[None, :, :] == data.sigma[:, None, :], axis=2)
        values = np.repeat(match[:, :, None].astype(float), data.M, axis=2)
    else:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return MultiwiseSoftLabels(variant, values)


def _check(labels: MultiwiseSoftLabels, variant: str):
    if labels.variant != variant:
        raise ConfigurationError(f"expected {variant} labels, got {labels.variant}")


def _pairwise_rows(data: MultiwiseDataset):
    pos = _pair_positions(data.M)
    return data.actions[:, pos[:, 0]], data.actions[:, pos[:, 1]]


def _suffix_terms(ranked, r):
    """log softmax of each ranked arm over itself and everything ranked below it."""
    u = r[ranked]
    suffix = np.flip(np.logaddexp.accumulate(np.flip(u, -1), axis=-1), -1)
    return u - suffix


def _suffix_gradient(ranked, labels, r, norm):
    """Gradient of ``-sum labels * log-suffix-softmax / norm`` in ``r``."""
    u = r[ranked]
    M = ranked.shape[-1]
    grad = np.zeros(r.size)
    # arm at position k receives softmax mass from every position j <= k
    for j in range(M - 1):
        tail = u[..., j:]
        sm = np.exp(tail - np.logaddexp.reduce(tail, axis=-1)[..., None])
        lab = labels[..., j][..., None]
        np.add.at(grad, ranked[..., j:].ravel(), (lab * sm).ravel())
        np.add.at(grad, ranked[..., j].ravel(), -labels[..., j].ravel())
    return grad / norm


def _ranked_for(data: MultiwiseDataset, variant: str):
    if variant == "ranking":
        return data.ranked
    perms = _permutations(data.M)
    return data.actions[:, perms]


def mle2_loss(data: MultiwiseDataset, labels: MultiwiseSoftLabels | None, r) -> float:
    """Soft-label cross-entropy summed over all action pairs of a record,
    averaged over records."""
    r = np.asarray(r, dtype=float)
    labels = labels or initial_labels(data, "pairwise-split")
    _check(labels, "pairwise-split")
    a, b = _pairwise_rows(data)
    return float(np.sum(_bce(labels.values, r[a] - r[b])) / data.n)


def mleM_loss(data: MultiwiseDataset, labels: MultiwiseSoftLabels | None, r) -> float:
    """Label-weighted negative Plackett-Luce log-likelihood of the observed rankings."""
    r = np.asarray(r, dtype=float)
    labels = labels or initial_labels(data, "ranking")
    _check(labels, "ranking")
    return float(-np.sum(labels.values * _suffix_terms(data.ranked, r)) / data.n)


def mleM_full_permutation_loss(data: MultiwiseDataset, labels: MultiwiseSoftLabels | None, r) -> float:
    r = np.asarray(r, dtype=float)
    labels = labels or initial_labels(data, "full-permutation")
    _check(labels, "full-permutation")
    ranked = _ranked_for(data, "full-permutation")
    return float(-np.sum(labels.values * _suffix_terms(ranked, r)) / data.n)


def loss_gradient(data: MultiwiseDataset, labels: MultiwiseSoftLabels, r) -> np.ndarray:
    """Gradient in ``r`` of the loss matching ``labels.variant``."""
    r = np.asarray(r, dtype=float)
    if labels.variant == "pairwise-split":
        a, b = _pairwise_rows(data)
        g = (labels.values - expit(r[a] - r[b])).ravel()
        return (np.bincount(b.ravel(), g, r.size) - np.bincount(a.ravel(), g, r.size)) / data.n
    return _suffix_gradient(_ranked_for(data, labels.variant), labels.values, r, data.n)


def _targets(data: MultiwiseDataset, variant: str, r):
    if variant == "pairwise-split":
        a, b = _pairwise_rows(data)
        return expit(r[a] - r[b])
    target = np.exp(_suffix_terms(_ranked_for(data, variant), r))
    if variant == "full-permutation":
        # per position j the conditional probabilities sum to M!/(M-j) over
        # permutations; rescale so each (record, position) stays on the simplex
        M = data.M
        target = target * (np.arange(M, 0, -1) / math.factorial(M))
    return target


def multiwise_label_update(data: MultiwiseDataset, labels: MultiwiseSoftLabels, r, beta: float) -> MultiwiseSoftLabels:
    """Convex step of size ``beta`` from the labels towards the model's predictions."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError("beta must lie in [0, 1]")
    target = _targets(data, labels.variant, np.asarray(r, dtype=float))
    return MultiwiseSoftLabels(labels.variant, (1.0 - beta) * labels.values + beta * target)


class _SuffixProblem:
    def __init__(self, data: MultiwiseDataset, variant: str, beta: float):
        self.data = data
        self.K = data.K
        self.beta = beta
        self.n_units = data.n
        self.ranked = _ranked_for(data, variant)
        self.labels = initial_labels(data, variant)

    def loss(self, r, idx=None):
        ranked, lab = (self.ranked, self.labels.values) if idx is None else (
            self.ranked[idx], self.labels.values[idx])
        n = self.n_units if idx is None else len(idx)
        return float(-np.sum(lab * _suffix_terms(ranked, r)) / n)

    def gradient(self, r, idx=None):
        ranked, lab = (self.ranked, self.labels.values) if idx is None else (
            self.ranked[idx], self.labels.values[idx])
        n = self.n_units if idx is None else len(idx)
        return _suffix_gradient(ranked, lab, r, n)

    def update_labels(self, r):
        if self.beta:
            self.labels = multiwise_label_update(self.data, self.labels, r, self.beta)

    def state(self, epoch):
        return self.labels


def fit_ids_multiwise(data: MultiwiseDataset, cfg: TrainConfig, variant: str = "pairwise-split", *,
                      truth=None, weighting="uniform"):
    """Smoothed-label descent on M-wise data; batches are drawn over records.

    With ``M = 2`` and the pairwise-split layout this is exactly
    :func:`banditpref.estimators.fit_ids` on :meth:`MultiwiseDataset.to_pairwise`.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if cfg.restore_best:
        raise ConfigurationError("checkpoint restoration is only supported for pairwise fits")
    if variant == "pairwise-split":
        a, b = _pairwise_rows(data)
        y = initial_labels(data, variant).values
        P = a.shape[1]
        groups = np.arange(data.n * P).reshape(data.n, P)
        problem = _PairwiseProblem(a.ravel(), b.ravel(), y.ravel(), data.K, mode="ids", beta=cfg.beta,
                                   groups=None if P == 1 else groups)
    else:
        problem = _SuffixProblem(data, variant, cfg.beta)
    r, trace, _ = _descend(problem, cfg, truth=truth, weighting=weighting)
    return r, trace
