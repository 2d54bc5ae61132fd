"""Cross-entropy reward estimators for pairwise preference data.

Three estimators share one training loop: plain MLE (hard labels), iterative
data smoothing (IDS, soft labels pulled towards the model after every step)
and the confidence-weighted IDS variant. Pessimistic MLE is MLE followed by a
per-arm penalty read off the comparison-graph Laplacian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, NumericError
from .linalg import inv_sqrt_psd
from .preference_model import ComparisonDistribution, PairwiseDataset, RewardVector, make_rng

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12


def _log_clamped(p):
    return np.log(np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP))


def _bce(target, logits):
    """Binary cross-entropy of BTL(logits) against soft targets, per element."""
    return -(target * _log_clamped(expit(logits)) + (1.0 - target) * _log_clamped(expit(-logits)))


@dataclass
class SoftLabelState:
    """Per-record soft labels (IDS) or confidences (IDS V2) after ``epoch`` epochs."""

    labels: np.ndarray
    confidences: np.ndarray | None = None
    epoch: int = 0


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.01
    beta: float = 0.0
    epochs: int = 2000
    batch_size: int | None = None
    seed: int = 0
    eval_every: int = 1
    tol: float = 1e-6
    restore_best: bool = False
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError("beta must lie in [0, 1]")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive (or None for full batch)")
        if self.eval_every < 1:
            raise ConfigurationError("eval_every must be at least 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must lie in (0, 1)")


@dataclass
class TrainTrace:
    K: int
    epochs: list = field(default_factory=list)
    empirical_loss: list = field(default_factory=list)
    population_loss: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def append(self, epoch, empirical, population, reward):
        if self.epochs and epoch <= self.epochs[-1]:
            raise ValueError("trace epochs must be strictly increasing")
        self.epochs.append(int(epoch))
        self.empirical_loss.append(float(empirical))
        self.population_loss.append(float(population))
        self.rewards.append(np.array(reward, dtype=float))

    def __len__(self):
        return len(self.epochs)

    def population(self) -> np.ndarray:
        return np.asarray(self.population_loss)

    def rows(self):
        for e, emp, pop, r in zip(self.epochs, self.empirical_loss, self.population_loss, self.rewards):
            yield (e, emp, pop, *r)


@dataclass(frozen=True)
class LaplacianMatrix:
    entries: np.ndarray
    epsilon: float


# ---------------------------------------------------------------------------
# losses


def _labels(data: PairwiseDataset, labels) -> np.ndarray:
    if labels is None:
        return data.y
    if isinstance(labels, SoftLabelState):
        labels = labels.labels
    labels = np.asarray(labels, dtype=float)
    if labels.shape != (data.n,):
        raise ConfigurationError(f"expected {data.n} labels, got shape {labels.shape}")
    return labels


def empirical_ce_loss(data: PairwiseDataset, labels, r) -> float:
    """Mean soft-label cross-entropy; ``labels=None`` uses the observed hard labels."""
    r = np.asarray(r, dtype=float)
    y = _labels(data, labels)
    return float(np.mean(_bce(y, r[data.first] - r[data.second])))


def empirical_ce_gradient(data: PairwiseDataset, labels, r) -> np.ndarray:
    """Gradient of :func:`empirical_ce_loss` (of the unclamped loss) in ``r``."""
    r = np.asarray(r, dtype=float)
    y = _labels(data, labels)
    g = y - expit(r[data.first] - r[data.second])
    K = r.size
    return (np.bincount(data.second, g, K) - np.bincount(data.first, g, K)) / data.n


def population_ce_loss(r_star, r, weighting="uniform") -> float:
    """Expected cross-entropy of BTL(r) against BTL(r_star).

    ``weighting`` is ``"uniform"`` (average over all unordered pairs) or a
    :class:`ComparisonDistribution`. Unlike the empirical loss, no clamping is
    needed: the log-sigmoid is evaluated exactly for any finite reward gap.
    """
    r_star = np.asarray(r_star, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.shape != r_star.shape:
        raise ConfigurationError("reward vectors differ in length")
    a, b = np.triu_indices(r.size, 1)
    if isinstance(weighting, ComparisonDistribution):
        w = weighting.pair_mass[a, b]
    elif weighting == "uniform":
        w = np.ones(a.size)
    else:
        raise ConfigurationError(f"unknown weighting {weighting!r}")
    p_star = expit(r_star[a] - r_star[b])
    d = r[a] - r[b]
    # exact -log sigmoid, so the loss keeps growing as predictions saturate
    per = p_star * np.logaddexp(0.0, -d) + (1.0 - p_star) * np.logaddexp(0.0, d)
    return float(np.sum(w * per) / np.sum(w))


# ---------------------------------------------------------------------------
# training loop


class _PairwiseProblem:
    """Soft-label pairwise CE over records, optionally grouped into units
    (several records per unit) for batching and normalisation."""

    def __init__(self, first, second, y, K, *, mode="mle", beta=0.0, groups=None):
        self.first = first
        self.second = second
        self.y = np.asarray(y, dtype=float)
        self.K = K
        self.mode = mode
        self.beta = beta
        self.groups = groups
        self.n_units = first.size if groups is None else groups.shape[0]
        self.labels = self.y.copy()
        self.conf = np.ones_like(self.y) if mode == "ids_v2" else None

    def _rows(self, idx):
        if idx is None or self.groups is None:
            return idx
        return self.groups[idx].ravel()

    def _weights(self, rows):
        if self.conf is None:
            return None
        c = self.conf if rows is None else self.conf[rows]
        return np.maximum(2.0 * c - 1.0, 0.0)

    def loss(self, r, idx=None):
        rows = self._rows(idx)
        f, s, lab = (self.first, self.second, self.labels) if rows is None else (
            self.first[rows], self.second[rows], self.labels[rows])
        per = _bce(lab, r[f] - r[s])
        w = self._weights(rows)
        if w is not None:
            per = w * per
        n_units = self.n_units if idx is None else len(idx)
        return float(np.sum(per) / n_units)

    def gradient(self, r, idx=None):
        rows = self._rows(idx)
        f, s, lab = (self.first, self.second, self.labels) if rows is None else (
            self.first[rows], self.second[rows], self.labels[rows])
        g = lab - expit(r[f] - r[s])
        w = self._weights(rows)
        if w is not None:
            g = w * g
        n_units = self.n_units if idx is None else len(idx)
        return (np.bincount(s, g, self.K) - np.bincount(f, g, self.K)) / n_units

    def update_labels(self, r):
        if self.mode == "mle":
            return
        p = expit(r[self.first] - r[self.second])
        if self.mode == "ids":
            self.labels = (1.0 - self.beta) * self.labels + self.beta * p
        else:
            self.conf = (1.0 - self.beta) * self.conf + self.beta * p

    def state(self, epoch):
        return SoftLabelState(self.labels.copy(), None if self.conf is None else self.conf.copy(), epoch)


def _descend(problem, cfg: TrainConfig, *, truth=None, weighting="uniform", reference_arm=-1, val_loss=None):
    """Gradient descent with optional per-step label updates.

    One iteration = one (mini-)batch gradient step followed by a label update
    of every record using the post-step model. Full batch gives one
    iteration per epoch.
    """
    K = problem.K
    r = np.zeros(K)
    trace = TrainTrace(K)
    rng = make_rng(cfg.seed)
    best = (np.inf, r.copy(), 0)

    def record(epoch):
        emp = problem.loss(r)
        pop = population_ce_loss(truth, r, weighting) if truth is not None else np.nan
        if not np.isfinite(emp) or not np.all(np.isfinite(r)):
            raise NumericError(f"non-finite loss or reward at epoch {epoch}: loss={emp}, r={r}")
        trace.append(epoch, emp, pop, RewardVector(r, reference_arm).normalized().values)

    record(0)
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        before = r.copy()
        if cfg.batch_size is None or cfg.batch_size >= problem.n_units:
            batches = [None]
        else:
            order = rng.permutation(problem.n_units)
            batches = [order[i:i + cfg.batch_size] for i in range(0, problem.n_units, cfg.batch_size)]
        for idx in batches:
            r -= cfg.alpha * problem.gradient(r, idx)
            problem.update_labels(r)
        converged = np.max(np.abs(r - before)) < cfg.tol
        if not np.all(np.isfinite(r)):
            raise NumericError(f"reward diverged to non-finite values at epoch {epoch}")
        if val_loss is not None:
            v = val_loss(r)
            if v < best[0]:
                best = (v, r.copy(), epoch)
        if epoch % cfg.eval_every == 0 or converged or epoch == cfg.epochs:
            record(epoch)
        if converged:
            log.debug("converged after %d epochs", epoch)
            break
    if val_loss is not None:
        r = best[1]
        log.debug("restored checkpoint from epoch %d (validation loss %.6g)", best[2], best[0])
    return RewardVector(r, reference_arm).normalized(), trace, problem.state(epoch)


def _fit(data: PairwiseDataset, cfg: TrainConfig, mode, truth, weighting, beta):
    val_loss = None
    if cfg.restore_best:
        perm = make_rng((cfg.seed, 1)).permutation(data.n)
        n_val = max(1, int(round(cfg.validation_fraction * data.n)))
        if n_val >= data.n:
            raise ConfigurationError("dataset too small for a validation split")
        val, data = data.subset(np.sort(perm[:n_val])), data.subset(np.sort(perm[n_val:]))
        val_loss = lambda r: empirical_ce_loss(val, None, r)  # noqa: E731
    problem = _PairwiseProblem(data.first, data.second, data.y, data.K, mode=mode, beta=beta)
    return _descend(problem, cfg, truth=truth, weighting=weighting, val_loss=val_loss)


def fit_mle(data: PairwiseDataset, cfg: TrainConfig, *, truth=None, weighting="uniform"):
    """Gradient descent on the hard-label empirical cross-entropy.

    Returns the reward (normalised so the last arm is 0) and the trace. When
    ``truth`` is given the trace carries the population loss.
    """
    r, trace, _ = _fit(data, cfg, "mle", truth, weighting, 0.0)
    return r, trace


def fit_ids(data: PairwiseDataset, cfg: TrainConfig, *, truth=None, weighting="uniform"):
    """Iterative data smoothing: after each gradient step every label moves a
    fraction ``cfg.beta`` towards the model's predicted win probability."""
    return _fit(data, cfg, "ids", truth, weighting, cfg.beta)


def fit_ids_v2(data: PairwiseDataset, cfg: TrainConfig, *, truth=None, weighting="uniform"):
    """Confidence-weighted variant: labels stay hard, each record's loss is
    scaled by ``max(2c - 1, 0)`` and the confidence ``c`` (initially 1) is
    smoothed towards the predicted probability that the first arm wins."""
    return _fit(data, cfg, "ids_v2", truth, weighting, cfg.beta)


def fit_mle_from_wins(wins, alpha: float, epochs: int) -> np.ndarray:
    """Full-batch MLE descent run on a stack of win-count matrices at once.

    ``wins`` has shape ``(..., K, K)``; equivalent to :func:`fit_mle` from a
    zero start, but vectorised over the leading axes. Returns raw rewards.
    """
    w = np.asarray(wins, dtype=float)
    n = w.sum(axis=(-2, -1))[..., None]
    r = np.zeros(w.shape[:-1])
    for _ in range(epochs):
        d = r[..., :, None] - r[..., None, :]
        grad = (np.sum(np.swapaxes(w, -1, -2) * expit(d), axis=-1) - np.sum(w * expit(-d), axis=-1)) / n
        r -= alpha * grad
    return r


# ---------------------------------------------------------------------------
# one-step analysis and pessimism


def one_step_gd(data: PairwiseDataset, alpha: float) -> RewardVector:
    """Reward after a single full-batch step from the all-zero start (not normalised)."""
    return RewardVector(-alpha * empirical_ce_gradient(data, None, np.zeros(data.K)))


def laplacian(data: PairwiseDataset, epsilon: float = 1e-2) -> LaplacianMatrix:
    """Normalised comparison-graph Laplacian: ``n(a)/n`` on the diagonal, ``-n(a,b)/n`` off it."""
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    c = data.counts.astype(float)
    L = (np.diag(c.sum(axis=1)) - c) / data.n
    return LaplacianMatrix(L, float(epsilon))


def pessimism_penalties(L: LaplacianMatrix, n: int) -> np.ndarray:
    """Per-arm confidence widths ``||(L + eps I)^{-1/2} e_a||_2 / sqrt(n)``."""
    m = L.entries + L.epsilon * np.eye(L.entries.shape[0])
    return np.linalg.norm(inv_sqrt_psd(m), axis=0) * np.sqrt(1.0 / n)


def fit_pessimistic_mle(data: PairwiseDataset, cfg: TrainConfig, epsilon: float = 1e-2, *,
                        truth=None, weighting="uniform"):
    """MLE shifted down per arm by its pessimism penalty; the trace reports the
    penalised reward at every evaluation."""
    r_mle, mle_trace = fit_mle(data, cfg)
    penalty = pessimism_penalties(laplacian(data, epsilon), data.n)
    trace = TrainTrace(data.K)
    for epoch, snap in zip(mle_trace.epochs, mle_trace.rewards):
        r = RewardVector(snap - penalty, r_mle.reference_arm).normalized().values
        pop = population_ce_loss(truth, r, weighting) if truth is not None else np.nan
        trace.append(epoch, empirical_ce_loss(data, None, r), pop, r)
    return RewardVector(r_mle.values - penalty, r_mle.reference_arm).normalized(), trace


# ---------------------------------------------------------------------------
# population stationarity


@dataclass(frozen=True)
class StationarityResidual:
    reward: np.ndarray
    labels: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.reward)), np.max(np.abs(self.labels))))


def ids_population_residual(mu: ComparisonDistribution, r_star, r_hat, labels, variant="v1"):
    """Population fixed-point residuals of IDS (``"v1"``) or its confidence
    variant (``"v2"``) in the infinite-sample limit.

    ``labels[a, b]`` is the smoothed label (v1) or confidence (v2) attached to
    the ordered pair ``(a, b)``. The reward residual of arm ``a`` sums, over
    partners ``b`` weighted by ``mu(a, b)``, the population gradient term; the
    label residual is ``labels[a, b] - P_hat(a beats b)``. Both vanish exactly
    at a stationary point.
    """
    r_star = np.asarray(r_star, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    lab = np.asarray(labels, dtype=float)
    K = r_hat.size
    if lab.shape != (K, K) or r_star.size != K or mu.K != K:
        raise ConfigurationError("shape mismatch between rewards, labels and distribution")
    off = ~np.eye(K, dtype=bool)
    d = r_hat[:, None] - r_hat[None, :]
    s = expit(d)
    p = expit(r_star[:, None] - r_star[None, :])
    if variant == "v1":
        term = (p * lab + (1 - p) * (1 - lab)) * (1 - s) - ((1 - p) * lab + p * (1 - lab)) * s
    elif variant == "v2":
        term = np.maximum(2 * lab - 1, 0) * (p * (1 - s) - (1 - p) * s)
    else:
        raise ConfigurationError(f"unknown variant {variant!r}")
    reward = np.sum(np.where(off, mu.pair_mass * term, 0.0), axis=1)
    label_res = np.where(off & (mu.pair_mass > 0), lab - s, 0.0)
    return StationarityResidual(reward, label_res)
