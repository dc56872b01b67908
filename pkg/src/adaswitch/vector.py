"""d-dimensional learners: coordinate-wise OLO under L1 switching costs and
the OLO to experts (LEA) conversion on the probability simplex."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .potential import LearnerConfig, grad_s_array
from .scalar import (
    BaselineLearner,
    ConstrainedLearner,
    DomainInterval,
    OnlineLearner,
    PotentialLearner,
    baseline_predictions,
    check_gradient,
    potential_predictions,
)

SIMPLEX_ATOL = 1e-12


class DimensionError(ValueError):
    """Vector length does not match the learner dimension."""


class SupportError(ValueError):
    """u puts mass where p has none."""


@dataclass(frozen=True)
class SimplexPoint:
    """Probability vector; renormalised on construction."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d sequence")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"weights must be finite and nonnegative, got {w}")
        total = w.sum()
        if not total > 0:
            raise ValueError("weights must not all be zero")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, d: int) -> "SimplexPoint":
        return cls(np.full(d, 1.0 / d))

    @classmethod
    def vertex(cls, d: int, i: int) -> "SimplexPoint":
        e = np.zeros(d)
        e[i] = 1.0
        return cls(e)

    @property
    def d(self) -> int:
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)


def _as_vector(g, d: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (d,):
        raise DimensionError(f"expected shape ({d},), got {g.shape}")
    return g


class CoordinateOLO(OnlineLearner):
    """d independent potential learners, each with hyperparameter C/d."""

    def __init__(self, d: int, C: float = 1.0, G: float = 1.0, lam: float = 0.0,
                 alpha: float | None = None):
        if d < 1:
            raise ValueError("d must be positive")
        self.d = d
        self.G, self.lam = G, lam
        self.cfg = LearnerConfig(C / d, G, lam, alpha)
        self.t = 1
        self.S = np.zeros(d)

    def predict(self) -> np.ndarray:
        self._start_predict()
        return grad_s_array(self.cfg.C, self.cfg.alpha, self.t, self.S)

    def observe(self, g) -> None:
        g = _as_vector(g, self.d)
        check_gradient(g, self.G)
        self._start_observe()
        self.S = self.S - g / self.G
        self.t += 1

    def replay(self, gradients) -> np.ndarray:
        """Predictions for a whole ``(T, d, ...)`` gradient array at once."""
        g = np.asarray(gradients, dtype=float)
        if g.ndim < 2 or g.shape[1] != self.d:
            raise DimensionError(f"expected shape (T, {self.d}, ...), got {g.shape}")
        return potential_predictions(self.cfg, g)


class CoordinateBaseline(OnlineLearner):
    """Coordinate-wise betting baseline, each copy with hyperparameter C/d."""

    def __init__(self, d: int, C: float = 1.0, G: float = 1.0, lam: float = 0.0):
        self.d = d
        self.C, self.G, self.lam = C, G, lam
        self.copies = [BaselineLearner(C / d, G, lam) for _ in range(d)]

    def predict(self) -> np.ndarray:
        self._start_predict()
        return np.array([c.predict() for c in self.copies])

    def observe(self, g) -> None:
        g = _as_vector(g, self.d)
        check_gradient(g, self.G)
        self._start_observe()
        for c, gi in zip(self.copies, g):
            c.observe(gi)

    def replay(self, gradients) -> np.ndarray:
        g = np.asarray(gradients, dtype=float)
        if g.ndim < 2 or g.shape[1] != self.d:
            raise DimensionError(f"expected shape (T, {self.d}, ...), got {g.shape}")
        return baseline_predictions(self.C / self.d, self.G, self.lam, g)


def lea_project(w) -> SimplexPoint:
    """Map nonnegative weights to the simplex with minimal L1 movement.

    Mass deficit is spread uniformly; surplus is removed by rescaling.
    """
    return SimplexPoint(_project(np.asarray(w, dtype=float)))


def _project(w: np.ndarray) -> np.ndarray:
    if np.any(w < 0):
        raise ValueError(f"weights must be nonnegative, got {w}")
    n1 = w.sum()
    return (w + max(0.0, 1.0 - n1) / w.size) / max(n1, 1.0)


class SurrogateVariant(str, Enum):
    PAPER = "paper"
    MAXSHIFT = "maxshift"
    INNERSHIFT = "innershift"


def lea_surrogate(g, l1_norm_w: float, variant: SurrogateVariant | str = "paper",
                  x=None) -> np.ndarray:
    """Shifted loss fed to the per-expert learners.

    ``x`` (the current simplex prediction) is needed only by ``innershift``
    when the weights overshoot.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    variant = SurrogateVariant(variant)
    if l1_norm_w == 1.0:
        return g.copy()
    below = l1_norm_w < 1.0
    if variant is SurrogateVariant.PAPER:
        shift = np.max(np.abs(g))
        return g - shift if below else g + shift
    if variant is SurrogateVariant.MAXSHIFT:
        return g - (g.max() if below else g.min())
    # innershift: average gain below the simplex, realised loss above it
    if below:
        return g - g.mean()
    if x is None:
        raise ValueError("innershift needs the current prediction x")
    return g - float(np.dot(g, np.asarray(x, dtype=float)))


class LEALearner(OnlineLearner):
    """Experts learner built from per-expert constrained potential learners.

    Expert i runs a potential learner with hyperparameter pi_i on [0, inf)
    around offset pi_i, with Lipschitz constant 2G and switching weight 4λ.
    State is held as vectors; :meth:`composed` builds the equivalent
    per-coordinate object graph.
    """

    def __init__(self, prior: SimplexPoint | None = None, G: float = 1.0, lam: float = 0.0,
                 variant: SurrogateVariant | str = "paper", d: int | None = None):
        if prior is None:
            if d is None:
                raise ValueError("need a prior or a dimension")
            prior = SimplexPoint.uniform(d)
        elif not isinstance(prior, SimplexPoint):
            prior = SimplexPoint(prior)
        if np.any(prior.weights <= 0):
            raise ValueError("prior must be strictly positive")
        self.prior = prior
        self.d = prior.d
        self.G, self.lam = G, lam
        self.variant = SurrogateVariant(variant)
        self.inner_cfg = LearnerConfig(1.0, 2.0 * G, 4.0 * lam)  # C enters per coordinate
        self.pi = prior.weights
        self.t = 1
        self.S = np.zeros(self.d)
        self._shifted = self.pi.copy()
        self.w = self.pi.copy()
        self.x = self.pi.copy()

    @property
    def alpha(self) -> float:
        return self.inner_cfg.alpha

    def composed(self) -> list[ConstrainedLearner]:
        """Fresh per-coordinate learners equivalent to this one at round 1."""
        out = []
        for p in self.pi:
            cfg = LearnerConfig(float(p), self.inner_cfg.G, self.inner_cfg.lam)
            out.append(ConstrainedLearner(PotentialLearner(cfg),
                                          DomainInterval(0.0, math.inf, float(p)),
                                          self.inner_cfg.G))
        return out

    def predict(self) -> SimplexPoint:
        self._start_predict()
        base = grad_s_array(self.pi, self.alpha, self.t, self.S)
        self._shifted = base + self.pi
        self.w = np.maximum(self._shifted, 0.0)
        self.x = _project(self.w)
        return SimplexPoint(self.x)

    def observe(self, g) -> None:
        g = _as_vector(g, self.d)
        check_gradient(g, self.G)
        self._start_observe()
        z = lea_surrogate(g, float(self.w.sum()), self.variant, self.x)
        # constrained-domain surrogate, coordinatewise
        keep = z * self._shifted >= z * self.w
        z_tilde = np.where(keep, z, 0.0)
        check_gradient(z_tilde, self.inner_cfg.G)
        self.S = self.S - z_tilde / self.inner_cfg.G
        self.t += 1


def f_lemma(x):
    """``|x - 1| log(1 + |x - 1|)``."""
    a = np.abs(np.asarray(x, dtype=float) - 1.0)
    return a * np.log1p(a)


def kl_upper(x):
    """``2 (1 - x + x log x)`` with ``0 log 0 = 0``."""
    x = np.asarray(x, dtype=float)
    xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return 2.0 * (1.0 - x + xlogx)


@dataclass(frozen=True)
class Divergences:
    tv: float
    kl: float
    f_div: float


def divergences(u, p) -> Divergences:
    """Total variation, KL(u || p) and the f-divergence used in the experts bound."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    if u.shape != p.shape:
        raise DimensionError(f"shape mismatch {u.shape} vs {p.shape}")
    tv = 0.5 * float(np.abs(u - p).sum())
    bad = (u > 0) & (p <= 0)
    if np.any(bad):
        raise SupportError(f"u has mass outside the support of p at {np.flatnonzero(bad)}")
    pos = u > 0
    kl = float(np.sum(u[pos] * np.log(u[pos] / p[pos])))
    live = p > 0
    f_div = float(np.sum(p[live] * f_lemma(u[live] / p[live])))
    return Divergences(tv, kl, f_div)


def tv_kl_example(d: int) -> tuple[SimplexPoint, SimplexPoint]:
    """Pair with tv * kl <= 1 but kl growing like sqrt(log d).

    The heavy coordinate has mass 1/sqrt(log d) under p and 1/d of that under
    q; the rest is spread uniformly.
    """
    if d < 3:
        raise ValueError("need d >= 3")
    s = math.sqrt(math.log(d))
    p = np.full(d, (1.0 - 1.0 / s) / (d - 1))
    q = np.full(d, (1.0 - 1.0 / (d * s)) / (d - 1))
    p[0] = 1.0 / s
    q[0] = 1.0 / (d * s)
    return SimplexPoint(p), SimplexPoint(q)
