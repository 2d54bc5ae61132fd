"""KL-regularised policies over K arms and the KL / true-reward trade-off.

``lam`` multiplies the reward in the exponent, so larger ``lam`` means
weaker regularisation; ``lam = 0`` returns the reference policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DomainError

DEFAULT_LAMBDA_GRID = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 40)])


@dataclass(frozen=True)
class PolicyVector:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError("a policy must be a non-negative vector summing to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    @classmethod
    def uniform(cls, K: int) -> "PolicyVector":
        return cls(np.full(K, 1.0 / K))


@dataclass(frozen=True)
class KlRewardPoint:
    lam: float
    kl: float
    true_reward: float
    proxy_reward: float


def _reference(pi0, K):
    if pi0 is None:
        return np.full(K, 1.0 / K)
    pi0 = np.asarray(pi0, dtype=float)
    if pi0.shape != (K,):
        raise ConfigurationError("reference policy and reward differ in length")
    return pi0


def _tilt(r_hat, pi0, lam):
    """Log-weights ``log pi0 + lam * r`` shifted by their log-normaliser."""
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    r = np.asarray(r_hat, dtype=float)
    pi0 = _reference(pi0, r.size)
    with np.errstate(divide="ignore"):
        logw = np.log(pi0) + lam * (r - r.max())
    return logw - logsumexp(logw), pi0


def closed_form_policy(r_hat, pi0=None, lam: float = 1.0) -> PolicyVector:
    """``pi(a) ∝ pi0(a) exp(lam * r_hat(a))`` (``pi0`` defaults to uniform)."""
    if lam == 0:
        return PolicyVector(_reference(pi0, np.asarray(r_hat).size))
    logp, _ = _tilt(r_hat, pi0, lam)
    p = np.exp(logp)
    return PolicyVector(p / p.sum())


def kl_closed_form(r_hat, pi0=None, lam: float = 1.0) -> float:
    """KL(pi_lam || pi0) as ``E_pi[lam r] - log E_pi0[exp(lam r)]``."""
    if lam == 0:
        return 0.0
    logp, pi0 = _tilt(r_hat, pi0, lam)
    r = np.asarray(r_hat, dtype=float)
    u = lam * (r - r.max())
    support = pi0 > 0
    with np.errstate(divide="ignore"):
        log_z = logsumexp(np.log(pi0[support]) + u[support])
    kl = float(np.sum(np.exp(logp[support]) * u[support]) - log_z)
    return max(kl, 0.0)


def expected_true_reward(pi, r_star) -> float:
    return float(np.dot(np.asarray(pi, dtype=float), np.asarray(r_star, dtype=float)))


def suboptimality(pi, r_star) -> float:
    """Gap between the best arm's reward and the policy's expected reward."""
    r_star = np.asarray(r_star, dtype=float)
    return float(max(r_star.max() - expected_true_reward(pi, r_star), 0.0))


def kl_reward_curve(r_hat, r_star, pi0=None, lam_grid=DEFAULT_LAMBDA_GRID) -> list[KlRewardPoint]:
    lam_grid = np.asarray(lam_grid, dtype=float)
    if lam_grid.ndim != 1 or lam_grid.size == 0:
        raise ConfigurationError("lambda grid must be a non-empty 1-d sequence")
    if np.any(lam_grid < 0) or np.any(np.diff(lam_grid) < 0):
        raise ConfigurationError("lambda grid must be non-negative and ascending")
    out = []
    for lam in lam_grid:
        pi = closed_form_policy(r_hat, pi0, lam)
        out.append(KlRewardPoint(float(lam), kl_closed_form(r_hat, pi0, lam),
                                 expected_true_reward(pi, r_star), expected_true_reward(pi, r_hat)))
    return out
