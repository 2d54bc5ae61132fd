"""Experiment pipeline, Monte Carlo verifiers and small reproducible demos."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from . import __version__
from . import io as bio
from .errors import ConfigurationError
from .estimators import (TrainConfig, fit_ids, fit_ids_v2, fit_mle, fit_mle_from_wins,
                         fit_pessimistic_mle)
from .policy import DEFAULT_LAMBDA_GRID, kl_reward_curve
from .preference_model import (ComparisonDistribution, PairwiseDataset, RewardVector,
                               generator_id, hard_instance, make_rng, sample_pairwise_dataset)

log = logging.getLogger(__name__)

ESTIMATORS = ("mle", "pessimistic", "ids", "ids_v2")

# long-budget fit used to detect the "MLE prefers a rarely compared arm" event
LONG_BUDGET_ALPHA = 1.0
LONG_BUDGET_EPOCHS = 5000
DIVERGENCE_THRESHOLD = 10.0


def sub_seed(seed: int, index: int) -> int:
    """Independent integer seed for trial ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def fit_estimator(name: str, data: PairwiseDataset, cfg: TrainConfig, *, epsilon: float = 1e-2,
                  truth=None, weighting="uniform"):
    """Dispatch to one of the four estimators; returns ``(reward, trace)``."""
    if name == "mle":
        return fit_mle(data, cfg, truth=truth, weighting=weighting)
    if name == "pessimistic":
        return fit_pessimistic_mle(data, cfg, epsilon, truth=truth, weighting=weighting)
    if name == "ids":
        r, trace, _ = fit_ids(data, cfg, truth=truth, weighting=weighting)
        return r, trace
    if name == "ids_v2":
        r, trace, _ = fit_ids_v2(data, cfg, truth=truth, weighting=weighting)
        return r, trace
    raise ConfigurationError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")


# ---------------------------------------------------------------------------
# experiment pipeline


@dataclass
class ExperimentConfig:
    """Settings for the loss-vs-epoch and KL-reward experiment.

    ``data_path`` replaces the hard instance with a dataset file; ``r_star`` is
    then required for population losses and true rewards. ``overrides`` maps
    an estimator name to TrainConfig fields that differ from the shared ones.
    """

    K: int = 10
    n: int = 60
    estimators: tuple = ("mle", "pessimistic", "ids")
    alpha: float = 0.01
    beta: float = 0.001
    epsilon: float = 1e-2
    epochs: int = 2000
    batch_size: int | None = 1
    eval_every: int = 1
    tol: float = 1e-6
    lam_grid: tuple = tuple(DEFAULT_LAMBDA_GRID)
    trials: int = 1
    seed: int = 0
    out: str = "results"
    weighting: str = "uniform"
    data_path: str | None = None
    r_star: tuple | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.estimators = tuple(self.estimators)
        self.lam_grid = tuple(float(x) for x in self.lam_grid)
        if not self.estimators:
            raise ConfigurationError("at least one estimator is required")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigurationError(f"unknown estimators {bad}; expected a subset of {ESTIMATORS}")
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if self.weighting not in ("uniform", "mu"):
            raise ConfigurationError("weighting must be 'uniform' or 'mu'")
        if self.data_path is not None and self.weighting == "mu":
            raise ConfigurationError("mu weighting needs the generating distribution (hard instance only)")
        for name in self.overrides:
            if name not in ESTIMATORS:
                raise ConfigurationError(f"override for unknown estimator {name!r}")
        for name in self.estimators:
            self.train_config(name)

    def train_config(self, estimator: str, seed: int | None = None) -> TrainConfig:
        beta = self.beta if estimator in ("ids", "ids_v2") else 0.0
        base = TrainConfig(alpha=self.alpha, beta=beta, epochs=self.epochs, batch_size=self.batch_size,
                           seed=self.seed if seed is None else seed, eval_every=self.eval_every, tol=self.tol)
        return replace(base, **self.overrides.get(estimator, {}))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = list(self.estimators)
        d["lam_grid"] = list(self.lam_grid)
        d["r_star"] = None if self.r_star is None else list(self.r_star)
        return d


def _instance(cfg: ExperimentConfig, seed: int):
    if cfg.data_path is None:
        r_star, mu = hard_instance(cfg.K, cfg.n)
        data = sample_pairwise_dataset(mu, r_star, cfg.n, seed)
        return data, r_star, (mu if cfg.weighting == "mu" else "uniform")
    data = bio.read_dataset(cfg.data_path)
    if not isinstance(data, PairwiseDataset):
        raise ConfigurationError("the experiment pipeline takes pairwise datasets")
    if cfg.r_star is None:
        raise ConfigurationError("a custom dataset needs r_star for population losses and true rewards")
    r_star = RewardVector(np.asarray(cfg.r_star, dtype=float))
    if r_star.K != data.K:
        raise ConfigurationError("r_star length does not match the dataset")
    return data, r_star, "uniform"


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Fit every configured estimator and write its trace and KL-reward curve.

    Layout: ``<out>/[trial_<k>/]{dataset.txt, <est>_trace.csv, <est>_curve.csv}``
    plus ``<out>/manifest.json``. Returns the manifest.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    summary = {}
    for k in range(cfg.trials):
        seed = cfg.seed if cfg.trials == 1 else sub_seed(cfg.seed, k)
        where = out if cfg.trials == 1 else out / f"trial_{k}"
        where.mkdir(exist_ok=True)
        data, r_star, weighting = _instance(cfg, seed)
        bio.write_dataset(where / "dataset.txt", data)
        files.append(str((where / "dataset.txt").relative_to(out)))
        for name in cfg.estimators:
            tcfg = cfg.train_config(name, seed)
            r_hat, trace = fit_estimator(name, data, tcfg, epsilon=cfg.epsilon, truth=r_star, weighting=weighting)
            meta = dict(estimator=name, seed=seed, generator=generator_id())
            bio.write_trace(where / f"{name}_trace.csv", trace, **meta)
            curve = kl_reward_curve(r_hat, r_star, lam_grid=cfg.lam_grid)
            bio.write_curve(where / f"{name}_curve.csv", curve, **meta)
            files += [str((where / f"{name}_{kind}.csv").relative_to(out)) for kind in ("trace", "curve")]
            pop = trace.population()
            summary.setdefault(name, []).append(dict(
                seed=seed, reward=[float(v) for v in r_hat.values], final_population_loss=float(pop[-1]),
                min_population_loss=float(np.nanmin(pop)), final_true_reward=curve[-1].true_reward))
            log.info("trial %d %s: final population CE %.4f", k, name, pop[-1])
    manifest = dict(config=cfg.to_dict(), seed=cfg.seed, generator=generator_id(),
                    library="banditpref", version=__version__, files=files, summary=summary)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


# ---------------------------------------------------------------------------
# Monte Carlo verifiers


@dataclass(frozen=True)
class MonteCarloReport:
    trials: int
    counts: dict

    def frequency(self, event: str) -> float:
        return self.counts[event] / self.trials

    def interval(self, event: str, level: float = 0.95) -> tuple[float, float]:
        """Wilson score interval for the event probability."""
        ci = binomtest(int(self.counts[event]), self.trials).proportion_ci(confidence_level=level, method="wilson")
        return float(ci.low), float(ci.high)

    def lines(self):
        for event in self.counts:
            lo, hi = self.interval(event)
            yield f"{event}: {self.counts[event]}/{self.trials} = {self.frequency(event):.4f} [{lo:.4f}, {hi:.4f}]"


def _strongly_connected(wins) -> bool:
    """True when every compared arm can reach every other through won comparisons,
    i.e. the MLE exists (finite) on this component."""
    from scipy.sparse.csgraph import connected_components

    compared = (wins + wins.T).sum(axis=1) > 0
    w = wins[np.ix_(compared, compared)]
    n_weak, weak = connected_components(w + w.T, directed=False)
    n_strong, _ = connected_components(w, directed=True, connection="strong")
    return n_weak == n_strong


def montecarlo_theorem2(n: int = 501, trials: int = 10_000, seed: int = 0,
                        long_budget: bool = True) -> MonteCarloReport:
    """Sample the 3-arm hard instance ``trials`` times and count:

    ``single_tail``  arm 2 was compared (with arm 0) exactly once;
    ``joint``        that single comparison was won by arm 2;
    ``argmax_wrong`` the long-budget MLE fit prefers some arm other than 0;
    ``mle_infinite`` the MLE does not exist (a compared arm is never beaten or never wins);
    ``diverged``     a fitted reward exceeds the divergence threshold in magnitude.

    ``long_budget=False`` skips the fits and reports only the sampling events.
    """
    if n <= 500:
        raise ConfigurationError("the lower bound is stated for n > 500")
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    r_star, mu = hard_instance(3, n)
    wins = np.empty((trials, 3, 3))
    for k in range(trials):
        wins[k] = sample_pairwise_dataset(mu, r_star, n, sub_seed(seed, k)).wins
    single = (wins[:, 0, 2] + wins[:, 2, 0]) == 1
    joint = single & (wins[:, 2, 0] == 1)
    if not long_budget:
        return MonteCarloReport(trials, dict(single_tail=int(single.sum()), joint=int(joint.sum())))
    # many trials share a win matrix; fit each distinct one once
    uniq, inverse = np.unique(wins.reshape(trials, -1), axis=0, return_inverse=True)
    uniq = uniq.reshape(-1, 3, 3)
    inverse = inverse.ravel()
    r = fit_mle_from_wins(uniq, LONG_BUDGET_ALPHA, LONG_BUDGET_EPOCHS)
    wrong = (np.argmax(r, axis=1) != 0)[inverse]
    r_norm = r - r[:, -1:]
    diverged = np.any(np.abs(r_norm) > DIVERGENCE_THRESHOLD, axis=1)[inverse]
    infinite = np.array([not _strongly_connected(w) for w in uniq])[inverse]
    counts = dict(single_tail=int(single.sum()), joint=int(joint.sum()), argmax_wrong=int(wrong.sum()),
                  mle_infinite=int(infinite.sum()), diverged=int(diverged.sum()))
    return MonteCarloReport(trials, counts)


def consistency_check(K: int, n: int, seed: int, r_star=None, alpha: float = 1.0,
                      epochs: int = 20_000) -> float:
    """Sup-norm error of the full-batch MLE under uniform pair sampling."""
    r_star = np.eye(K)[0] if r_star is None else np.asarray(r_star, dtype=float)
    if r_star.size != K:
        raise ConfigurationError("r_star must have K entries")
    data = sample_pairwise_dataset(ComparisonDistribution.uniform(K), r_star, n, seed)
    cfg = TrainConfig(alpha=alpha, epochs=epochs, tol=1e-9, eval_every=epochs, seed=seed)
    r_hat, _ = fit_mle(data, cfg)
    return float(np.max(np.abs(r_hat.values - RewardVector(r_star).normalized().values)))


def is_misleading(wins, alpha: float = LONG_BUDGET_ALPHA, epochs: int = LONG_BUDGET_EPOCHS) -> np.ndarray:
    """Long-budget MLE prefers an arm other than arm 0 (the true best arm)."""
    r = fit_mle_from_wins(wins, alpha, epochs)
    return np.argmax(r, axis=-1) != 0


def find_misleading_seed(K: int, n: int, start: int = 0, limit: int = 1000, batch: int = 50) -> int:
    """First seed ``>= start`` whose hard-instance sample triggers :func:`is_misleading`."""
    r_star, mu = hard_instance(K, n)
    for lo in range(start, start + limit, batch):
        seeds = range(lo, min(lo + batch, start + limit))
        wins = np.stack([sample_pairwise_dataset(mu, r_star, n, s).wins for s in seeds])
        hit = np.flatnonzero(is_misleading(wins))
        if hit.size:
            return seeds[hit[0]]
    raise ConfigurationError(f"no misleading seed in [{start}, {start + limit})")


@dataclass(frozen=True)
class OveroptimizationResult:
    seed: int
    mle_curve: list
    ids_curve: list
    mle_reward: np.ndarray
    ids_reward: np.ndarray

    @property
    def mle_drop(self) -> float:
        true = [p.true_reward for p in self.mle_curve]
        return max(true) - true[-1]

    @property
    def ids_final(self) -> float:
        return self.ids_curve[-1].true_reward


def overoptimization(K: int = 3, n: int = 60, seed: int | None = None, epochs: int = 2000,
                     lr: float = 0.01, beta: float = 0.001, batch_size: int | None = 1,
                     lam_grid=DEFAULT_LAMBDA_GRID) -> OveroptimizationResult:
    """KL-reward curves of MLE and IDS on a hard-instance sample whose sparse
    comparisons mislead the MLE (found by :func:`find_misleading_seed` unless given)."""
    seed = find_misleading_seed(K, n) if seed is None else seed
    r_star, mu = hard_instance(K, n)
    data = sample_pairwise_dataset(mu, r_star, n, seed)
    cfg = TrainConfig(alpha=lr, epochs=epochs, batch_size=batch_size, seed=seed)
    r_mle, _ = fit_mle(data, cfg)
    r_ids, _, _ = fit_ids(data, replace(cfg, beta=beta))
    return OveroptimizationResult(seed, kl_reward_curve(r_mle, r_star, lam_grid=lam_grid),
                                  kl_reward_curve(r_ids, r_star, lam_grid=lam_grid),
                                  r_mle.values, r_ids.values)


# ---------------------------------------------------------------------------
# three-arm illustration


def figure1_dataset(seed: int, n_main: int = 1000) -> PairwiseDataset:
    """``n_main`` comparisons of arms 0 and 1 plus a single one of arms 0 and 2,
    labels drawn from BTL with rewards (1, 0, 0)."""
    rng = make_rng(seed)
    first = np.zeros(n_main + 1, dtype=np.int64)
    second = np.ones(n_main + 1, dtype=np.int64)
    second[-1] = 2
    y = (rng.random(n_main + 1) < 1.0 / (1.0 + np.exp(-1.0))).astype(float)
    return PairwiseDataset(first, second, y, 3, seed)


@dataclass(frozen=True)
class ThreeArmReport:
    seed: int
    tail_won_by_arm2: bool
    empirical_win_rate: float
    mle_gap_02: list
    mle_reward: np.ndarray
    ids_reward: np.ndarray

    @property
    def mle_diverging(self) -> bool:
        """Gap between arms 0 and 2 strictly decreasing over the recorded snapshots."""
        return bool(np.all(np.diff(self.mle_gap_02) < 0))

    @property
    def ids_p01(self) -> float:
        return float(1.0 / (1.0 + np.exp(-(self.ids_reward[0] - self.ids_reward[1]))))


def figure1_demo(seed: int, mle_epochs: int = 100_000, ids_epochs: int = 2000) -> ThreeArmReport:
    """Long-budget MLE versus IDS on the three-arm illustration."""
    data = figure1_dataset(seed)
    r_mle, trace = fit_mle(data, TrainConfig(alpha=2.0, epochs=mle_epochs, eval_every=1000, tol=0.0, seed=seed))
    gaps = [float(r[0] - r[2]) for r in trace.rewards[1:]]
    r_ids, _, _ = fit_ids(data, TrainConfig(alpha=1.0, beta=0.01, epochs=ids_epochs, tol=0.0, seed=seed))
    main = data.second == 1
    return ThreeArmReport(seed, bool(data.y[-1] == 0), float(data.y[main].mean()), gaps,
                         r_mle.values, r_ids.values)
