"""One-dimensional learners for OLO with switching costs.

Every learner is a small state machine with a strict ``predict`` /
``observe`` alternation starting with ``predict``. Gradients are checked
against the learner's Lipschitz bound ``G``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .potential import LearnerConfig, grad_s, grad_s_array

# relative slack when comparing |g| against G (surrogates hit the bound exactly)
_BOUND_RTOL = 1e-12


class LifecycleError(RuntimeError):
    """predict/observe called out of order."""


class GradientBoundError(ValueError):
    """A gradient exceeded the learner's Lipschitz bound."""


class InfeasibleFixedPointError(ValueError):
    """The wealth equation has no guaranteed unique solution."""


def check_gradient(g, G: float) -> None:
    if isinstance(g, (float, int)):
        if not math.isfinite(g):
            raise GradientBoundError(f"gradient must be finite, got {g}")
        if abs(g) > G * (1.0 + _BOUND_RTOL):
            raise GradientBoundError(f"|g| = {abs(g)} exceeds G = {G}")
        return
    if not np.all(np.isfinite(g)):
        raise GradientBoundError(f"gradient must be finite, got {g}")
    if np.max(np.abs(g)) > G * (1.0 + _BOUND_RTOL):
        raise GradientBoundError(f"|g| = {np.max(np.abs(g))} exceeds G = {G}")


class OnlineLearner:
    """Alternation bookkeeping shared by every learner."""

    _awaiting_predict = True

    def _start_predict(self):
        if not self._awaiting_predict:
            raise LifecycleError("predict() called twice without observe()")
        self._awaiting_predict = False

    def _start_observe(self):
        if self._awaiting_predict:
            raise LifecycleError("observe() called before predict()")
        self._awaiting_predict = True


@dataclass
class ScalarState:
    t: int
    S: float
    last_prediction: float | None


class PotentialLearner(OnlineLearner):
    """Discrete-derivative potential learner.

    Predicts ``x_t = (V(t, S_{t-1} + 1) - V(t, S_{t-1} - 1)) / 2`` and updates
    ``S_t = S_{t-1} - g_t / G``.
    """

    def __init__(self, cfg: LearnerConfig):
        self.cfg = cfg
        self.G = cfg.G
        self.lam = cfg.lam
        self.t = 1
        self.S = 0.0
        self.last_prediction: float | None = None

    @classmethod
    def make(cls, C: float = 1.0, G: float = 1.0, lam: float = 0.0, alpha: float | None = None):
        return cls(LearnerConfig(C, G, lam, alpha))

    @property
    def state(self) -> ScalarState:
        return ScalarState(self.t, self.S, self.last_prediction)

    def predict(self) -> float:
        self._start_predict()
        x = grad_s(self.cfg.C, self.cfg.alpha, self.t, self.S)
        self.last_prediction = x
        return x

    def observe(self, g: float) -> None:
        check_gradient(g, self.G)
        self._start_observe()
        self.S -= g / self.G
        self.t += 1

    def replay(self, gradients) -> np.ndarray:
        """Predictions of a fresh learner fed ``gradients`` (shape ``(T, ...)``).

        Trailing axes are independent copies. Equivalent to the
        predict/observe loop, but vectorised because S only depends on the
        gradients.
        """
        return potential_predictions(self.cfg, gradients)


def potential_predictions(cfg: LearnerConfig, gradients) -> np.ndarray:
    g = np.asarray(gradients, dtype=float)
    check_gradient(g, cfg.G) if g.size else None
    T = g.shape[0]
    S = np.zeros_like(g)
    if T > 1:
        S[1:] = -np.cumsum(g[:-1], axis=0) / cfg.G
    t = np.arange(1, T + 1, dtype=float).reshape((T,) + (1,) * (g.ndim - 1))
    return grad_s_array(cfg.C, cfg.alpha, t, S)


# ---------------------------------------------------------------------------
# betting baseline


def solve_wealth_fixed_point(wealth_prev: float, g: float, beta_t: float,
                             beta_next: float, lam: float) -> float:
    """Unique W with ``W = (1 - g beta_t) W_prev - lam |beta_t W_prev - beta_next W|``.

    The right-hand side is piecewise linear in W with slope of magnitude
    ``lam |beta_next| < 1``, so exactly one branch is sign-consistent.
    """
    if lam * abs(beta_next) >= 1.0:
        raise InfeasibleFixedPointError(
            f"lam * |beta_next| = {lam * abs(beta_next)} must be < 1"
        )
    a = (1.0 - g * beta_t) * wealth_prev
    b = beta_t * wealth_prev
    c = beta_next
    w_pos = (a - lam * b) / (1.0 - lam * c)  # branch b - c W >= 0
    w_neg = (a + lam * b) / (1.0 + lam * c)  # branch b - c W <= 0
    r_pos = b - c * w_pos
    r_neg = b - c * w_neg
    ok_pos = r_pos >= 0
    ok_neg = r_neg <= 0
    if ok_pos and ok_neg:
        assert abs(w_pos - w_neg) <= 1e-12 * max(1.0, abs(w_pos)), (w_pos, w_neg)
        return w_pos
    if ok_pos:
        return w_pos
    if ok_neg:
        return w_neg
    # both rejected only through rounding at the kink; take the smaller miss
    return w_pos if -r_pos <= r_neg else w_neg


@dataclass
class BaselineState:
    wealth: float
    beta: float
    grad_sum: float
    t: int
    K: float


class BaselineLearner(OnlineLearner):
    """Coin-betting learner with a hard threshold on the betting fraction."""

    def __init__(self, C: float = 1.0, G: float = 1.0, lam: float = 0.0):
        if not C > 0 or not G > 0 or not lam >= 0:
            raise ValueError("need C > 0, G > 0, lam >= 0")
        self.C, self.G, self.lam = C, G, lam
        self.K = G + lam
        self.wealth = C * self.K
        self.beta = 0.0
        self.grad_sum = 0.0
        self.t = 1

    @property
    def state(self) -> BaselineState:
        return BaselineState(self.wealth, self.beta, self.grad_sum, self.t, self.K)

    def threshold(self, t: int) -> float:
        """Cap on |beta_{t+1}| chosen after round t."""
        return 1.0 / (self.K * math.sqrt(2.0 * t))

    def predict(self) -> float:
        self._start_predict()
        return self.beta * self.wealth

    def observe(self, g: float) -> None:
        check_gradient(g, self.G)
        self._start_observe()
        t = self.t
        self.grad_sum += g
        beta_hat = -self.grad_sum / (2.0 * self.K**2 * t)
        cap = self.threshold(t)
        beta_next = min(max(beta_hat, -cap), cap)
        self.wealth = solve_wealth_fixed_point(self.wealth, g, self.beta, beta_next, self.lam)
        self.beta = beta_next
        self.t = t + 1

    def replay(self, gradients) -> np.ndarray:
        return baseline_predictions(self.C, self.G, self.lam, gradients)


def baseline_predictions(C, G: float, lam: float, gradients) -> np.ndarray:
    """Vectorised replay of :class:`BaselineLearner` over trailing axes.

    ``C`` may be a scalar or broadcastable to ``gradients.shape[1:]``.
    """
    g = np.asarray(gradients, dtype=float)
    if g.size:
        check_gradient(g, G)
    K = G + lam
    T = g.shape[0]
    shape = g.shape[1:]
    wealth = np.broadcast_to(np.asarray(C, dtype=float) * K, shape).astype(float)
    beta = np.zeros(shape)
    grad_sum = np.zeros(shape)
    out = np.empty_like(g)
    for i in range(T):
        t = i + 1
        out[i] = beta * wealth
        grad_sum = grad_sum + g[i]
        cap = 1.0 / (K * math.sqrt(2.0 * t))
        beta_next = np.clip(-grad_sum / (2.0 * K**2 * t), -cap, cap)
        a = (1.0 - g[i] * beta) * wealth
        b = beta * wealth
        w_pos = (a - lam * b) / (1.0 - lam * beta_next)
        w_neg = (a + lam * b) / (1.0 + lam * beta_next)
        r_pos = b - beta_next * w_pos
        r_neg = b - beta_next * w_neg
        use_pos = (r_pos >= 0) | ((r_neg > 0) & (-r_pos <= r_neg))
        wealth = np.where(use_pos, w_pos, w_neg)
        beta = beta_next
    return out


# ---------------------------------------------------------------------------
# wrappers


@dataclass(frozen=True)
class DomainInterval:
    lower: float
    upper: float
    offset: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if not self.lower <= self.offset <= self.upper:
            raise ValueError(f"offset {self.offset} outside [{self.lower}, {self.upper}]")

    @property
    def diameter(self) -> float:
        return self.upper - self.lower

    def project(self, x: float) -> float:
        return min(max(x, self.lower), self.upper)


class ConstrainedLearner(OnlineLearner):
    """Run an unconstrained learner around ``offset`` and clip to the domain.

    The base sees the gradient only when the clipped point did not already
    do at least as well as the unclipped one; otherwise it sees 0.
    """

    def __init__(self, base, domain: DomainInterval, G: float):
        self.base = base
        self.domain = domain
        self.G = G
        self.lam = getattr(base, "lam", 0.0)
        self._shifted = 0.0
        self._x = 0.0

    def predict(self) -> float:
        self._start_predict()
        self._shifted = self.base.predict() + self.domain.offset
        self._x = self.domain.project(self._shifted)
        return self._x

    def surrogate(self, g: float) -> float:
        return g if g * self._shifted >= g * self._x else 0.0

    def observe(self, g: float) -> None:
        check_gradient(g, self.G)
        self._start_observe()
        self.base.observe(self.surrogate(g))


class DoublingLearner(OnlineLearner):
    """Restart a potential learner on epochs ``[2^m, 2^(m+1) - 1]`` with ``C 2^-m``."""

    def __init__(self, C: float = 1.0, G: float = 1.0, lam: float = 0.0):
        self.C, self.G, self.lam = C, G, lam
        self.t = 1
        self.epoch = -1
        self.current: PotentialLearner | None = None
        self.epoch_C: list[float] = []

    @staticmethod
    def epoch_of(t: int) -> int:
        return t.bit_length() - 1

    def predict(self) -> float:
        self._start_predict()
        m = self.epoch_of(self.t)
        if m != self.epoch:
            self.epoch = m
            cfg = LearnerConfig.for_doubling(self.C * 2.0**-m, self.G, self.lam)
            self.current = PotentialLearner(cfg)
            self.epoch_C.append(cfg.C)
        return self.current.predict()

    def observe(self, g: float) -> None:
        check_gradient(g, self.G)
        self._start_observe()
        self.current.observe(g)
        self.t += 1

    def replay(self, gradients) -> np.ndarray:
        """Vectorised predictions of a fresh wrapper, epoch by epoch."""
        g = np.asarray(gradients, dtype=float)
        out = np.empty_like(g)
        start, m = 1, 0
        while start <= g.shape[0]:
            stop = min(2 * start, g.shape[0] + 1)
            cfg = LearnerConfig.for_doubling(self.C * 2.0**-m, self.G, self.lam)
            out[start - 1:stop - 1] = potential_predictions(cfg, g[start - 1:stop - 1])
            start, m = 2 * start, m + 1
        return out

    @property
    def epochs_started(self) -> int:
        return len(self.epoch_C)


class MetaLearner(OnlineLearner):
    """Freeze the base output until the accumulated gradient exceeds max(lam, G).

    ``make_base(lipschitz)`` must build the base learner; it is called with
    ``max(lam, G) + G`` since that bounds every flushed accumulator.
    """

    def __init__(self, G: float, lam: float, make_base: Callable[[float], OnlineLearner]):
        self.G, self.lam = G, lam
        self.threshold = max(lam, G)
        self.base = make_base(self.threshold + G)
        self.Z = 0.0
        self.flushes = 0
        self.w = self.base.predict()

    @classmethod
    def over_baseline(cls, C: float = 1.0, G: float = 1.0, lam: float = 0.0) -> "MetaLearner":
        return cls(G, lam, lambda lip: BaselineLearner(C, lip, lam))

    @classmethod
    def over_potential(cls, C: float = 1.0, G: float = 1.0, lam: float = 0.0) -> "MetaLearner":
        return cls(G, lam, lambda lip: PotentialLearner(LearnerConfig(C, lip, lam)))

    def predict(self) -> float:
        self._start_predict()
        return self.w

    def observe(self, g: float) -> None:
        check_gradient(g, self.G)
        self._start_observe()
        self.Z += g
        if abs(self.Z) > self.threshold:
            self.base.observe(self.Z)
            self.Z = 0.0
            self.flushes += 1
            self.w = self.base.predict()
