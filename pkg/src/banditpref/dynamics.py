"""Continuous-time limit of smoothing on one arm pair.

State: ``d`` (reward difference of the pair) and ``y`` (smoothed label,
starting at 1). The reward difference relaxes at rate ``alpha * n`` towards
the label-mixed empirical frequency; the label relaxes at rate ``beta``
towards the model's prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError
from .estimators import fit_ids

REFINE_TOL = 1e-8
MAX_HALVINGS = 12


@dataclass(frozen=True)
class OdeParams:
    alpha: float
    beta: float
    n: float
    mu: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta >= 0 and self.n > 0):
            raise ConfigurationError("alpha and n must be positive, beta non-negative")
        if not 0.0 < self.mu < 1.0:
            raise ConfigurationError("mu must lie strictly between 0 and 1")

    @property
    def rate(self) -> float:
        return self.alpha * self.n

    def default_step(self) -> float:
        return min(0.01, 0.1 / self.rate)


@dataclass(frozen=True)
class OdeState:
    d: float = 0.0
    y: float = 1.0
    t: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    d: np.ndarray
    y: np.ndarray
    step: float
    refinement_gap: float

    @property
    def sigma_d(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.d))

    @property
    def final(self) -> OdeState:
        return OdeState(float(self.d[-1]), float(self.y[-1]), float(self.t[-1]))

    def rows(self):
        return zip(self.t, self.d, self.y, self.sigma_d)


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def ode_rhs(s: OdeState, p: OdeParams) -> tuple[float, float]:
    return _rhs(s.d, s.y, p.rate, p.mu, p.beta)


def _rhs(d, y, rate, mu, beta):
    sd = _sigmoid(d)
    push = mu * y + (1.0 - mu) * (1.0 - y)
    pull = (1.0 - mu) * y + mu * (1.0 - y)
    return rate * (push * (1.0 - sd) - pull * sd), beta * (sd - y)


def _rk4(p: OdeParams, T: float, h: float, init: OdeState):
    steps = max(1, int(math.ceil(T / h - 1e-9)))
    h = T / steps
    rate, mu, beta = p.rate, p.mu, p.beta
    ds = np.empty(steps + 1)
    ys = np.empty(steps + 1)
    d, y = init.d, init.y
    ds[0], ys[0] = d, y
    for i in range(steps):
        k1d, k1y = _rhs(d, y, rate, mu, beta)
        k2d, k2y = _rhs(d + 0.5 * h * k1d, y + 0.5 * h * k1y, rate, mu, beta)
        k3d, k3y = _rhs(d + 0.5 * h * k2d, y + 0.5 * h * k2y, rate, mu, beta)
        k4d, k4y = _rhs(d + h * k3d, y + h * k3y, rate, mu, beta)
        d += h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        ds[i + 1], ys[i + 1] = d, y
    return h, ds, ys


def integrate(p: OdeParams, T: float, h: float | None = None, init: OdeState = OdeState(),
              tol: float = REFINE_TOL) -> Trajectory:
    """Classical RK4, halving the step until two successive solutions agree to
    ``tol`` (sup norm over the coarse grid, both components).

    The returned trajectory is the finer of the last two solutions, sampled on
    the coarser grid.
    """
    if T < 0:
        raise ConfigurationError("horizon must be non-negative")
    if T == 0:
        return Trajectory(np.zeros(1), np.array([init.d]), np.array([init.y]), 0.0, 0.0)
    h = p.default_step() if h is None else h
    if not h > 0:
        raise ConfigurationError("step must be positive")
    h, d0, y0 = _rk4(p, T, h, init)
    for _ in range(MAX_HALVINGS):
        h1, d1, y1 = _rk4(p, T, h / 2, init)
        gap = max(np.max(np.abs(d1[::2] - d0)), np.max(np.abs(y1[::2] - y0)))
        if not np.isfinite(gap):
            raise NumericError("integration produced non-finite values")
        if gap < tol:
            t = init.t + np.arange(d0.size) * h
            return Trajectory(t, d1[::2], y1[::2], h, float(gap))
        h, d0, y0 = h1, d1, y1
    raise NumericError(f"step refinement did not reach tolerance {tol} (step {h:.3e}, gap {gap:.3e})")


@dataclass(frozen=True)
class BoundCheck:
    bound: float
    deviation: float
    y_final: float
    y_floor: float
    in_regime: bool
    passed: bool | None


def theorem5_check(p: OdeParams, T: float, eps: float, tol: float = 1e-6) -> BoundCheck:
    """Compare ``|sigma(d(T)) - mu|`` with ``max(2(1 - e^-eps), e^{-mu(1-mu) alpha n T})``.

    Pass/fail is only asserted inside the regime ``eps <= 0.1`` and
    ``alpha n T >= 10``; outside it ``passed`` is None.
    """
    if p.beta * T > eps:
        raise DomainError(f"beta*T = {p.beta * T:g} exceeds eps = {eps:g}")
    traj = integrate(p, T)
    bound = max(2.0 * (1.0 - math.exp(-eps)), math.exp(-p.mu * (1 - p.mu) * p.rate * T))
    deviation = abs(float(traj.sigma_d[-1]) - p.mu)
    in_regime = eps <= 0.1 and p.rate * T >= 10
    passed = (deviation <= bound + tol) if in_regime else None
    return BoundCheck(bound, deviation, float(traj.y[-1]), math.exp(-eps), in_regime, passed)


def discrete_vs_ode(data, cfg, h: float | None = None):
    """Largest gap between the discrete smoothing trajectory of ``d`` and the
    ODE solution, sampled at epoch boundaries (two-arm, full-batch data).

    One full-batch step moves both rewards, so ``d`` changes by
    ``2 alpha (mean label - sigma(d))`` per epoch; the ODE is matched to that
    rate (``alpha n = 2 alpha``) with ``mu`` the empirical win rate of arm 0.
    Returns ``(gap, discrete_d, trajectory)``.
    """
    if data.K != 2:
        raise ConfigurationError("discrete_vs_ode needs a two-arm dataset")
    if cfg.batch_size is not None and cfg.batch_size < data.n:
        raise ConfigurationError("discrete_vs_ode compares full-batch updates only")
    mu = min(max(data.wins[0, 1] / data.n, 1e-12), 1 - 1e-12)
    _, trace, _ = fit_ids(data, replace(cfg, eval_every=1, tol=0.0, restore_best=False))
    # arm 1 is the reference arm, so the normalised reward of arm 0 is d
    d_disc = np.array([snap[0] for snap in trace.rewards])
    p = OdeParams(alpha=2 * cfg.alpha / data.n, beta=cfg.beta, n=data.n, mu=mu)
    if h is None:
        h = 1.0 / max(1, math.ceil(10 * p.rate))
    traj = integrate(p, float(cfg.epochs), h=h)
    stride = int(round(1.0 / traj.step))
    if not math.isclose(stride * traj.step, 1.0):
        raise ConfigurationError("ODE step must divide one epoch")
    d_ode = traj.d[::stride]
    return float(np.max(np.abs(d_disc - d_ode))), d_disc, traj
