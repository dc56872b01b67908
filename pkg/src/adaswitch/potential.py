"""Switching-adjusted potential and its derivatives.

The potential is

    V(t, S) = C * sqrt(alpha * t) * [2 * Phi(y) - 1],   y = S / sqrt(4 * alpha * t),

where ``Phi(y) = int_0^y erfi(u) du`` and ``erfi(z) = int_0^z exp(x^2) dx``
(note: no 2/sqrt(pi) factor). Integrating by parts gives the closed form
``2 * Phi(y) - 1 = 2 * y * erfi(y) - exp(y^2)``.

Everything here is a pure function. Scalar entry points use ``math`` so the
learner loop stays cheap; the ``*_array`` variants are the numpy versions
used by batch replays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# exp(700) ~ 1e304; anything larger overflows double precision.
EXP_GUARD = 700.0

# Below this |z| the Maclaurin series is summed; above it the asymptotic
# expansion is accurate to rounding (its smallest term is ~exp(-z^2)).
SERIES_CUTOFF = 7.0

_SERIES_RTOL = 1e-17
_SMALL_BATCH = 32


class PotentialRangeError(OverflowError):
    """Raised when exp(y^2) would overflow double precision."""

    def __init__(self, y: float, t: float | None = None, S: float | None = None,
                 alpha: float | None = None):
        self.y, self.t, self.S, self.alpha = y, t, S, alpha
        where = f" at t={t}, S={S}, alpha={alpha}" if t is not None else ""
        super().__init__(
            f"y^2 = {y * y:.6g} exceeds the overflow guard {EXP_GUARD}{where}"
        )


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters shared by the potential-based learners.

    ``alpha`` defaults to ``4 * lam / G + 2``; use :meth:`for_doubling` for
    the ``8 * lam / G + 2`` variant used inside the doubling wrapper.
    """

    C: float
    G: float
    lam: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        for name in ("C", "G", "lam"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.G > 0:
            raise ValueError(f"G must be positive, got {self.G}")
        if not self.lam >= 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 4.0 * self.lam / self.G + 2.0)
        elif not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @classmethod
    def for_doubling(cls, C: float, G: float, lam: float = 0.0) -> "LearnerConfig":
        return cls(C, G, lam, alpha=8.0 * lam / G + 2.0)

    @property
    def alpha_is_admissible(self) -> bool:
        """Whether alpha is large enough for the residual to be nonpositive."""
        return self.alpha >= 4.0 * self.lam / self.G + 2.0


class PotentialPoint(NamedTuple):
    t: float
    S: float


class DiscreteDerivs(NamedTuple):
    grad_s: float
    grad_t: float
    lapl_s: float


class AnalyticDerivs(NamedTuple):
    dS: float
    dt: float
    dSS: float
    dSSS: float


# ---------------------------------------------------------------------------
# special functions


def _check_finite(z: float) -> None:
    if not math.isfinite(z):
        raise ValueError(f"argument must be finite, got {z}")


def _asymptotic_tail(z2: float) -> float:
    """sum_{k>=1} (2k-1)!! / (2 z^2)^k, truncated at its smallest term."""
    total = 0.0
    term = 1.0
    k = 1
    while True:
        nxt = term * (2 * k - 1) / (2.0 * z2)
        if nxt >= term or nxt < _SERIES_RTOL * (1.0 + total):
            if nxt < term:
                total += nxt
            break
        total += nxt
        term = nxt
        k += 1
    return total


def _erfi_series(z: float) -> float:
    z2 = z * z
    a = z  # z^(2k+1) / k!
    total = z
    k = 0
    while True:
        k += 1
        a *= z2 / k
        term = a / (2 * k + 1)
        total += term
        if abs(term) <= _SERIES_RTOL * abs(total):
            return total


def erfi(z: float) -> float:
    """``int_0^z exp(x^2) dx``.

    Raises :class:`PotentialRangeError` when ``z^2 > 700``.
    """
    _check_finite(z)
    if z == 0.0:
        return 0.0
    z2 = z * z
    if z2 > EXP_GUARD:
        raise PotentialRangeError(z)
    if abs(z) <= SERIES_CUTOFF:
        return _erfi_series(z)
    return math.exp(z2) / (2.0 * z) * (1.0 + _asymptotic_tail(z2))


def erfi_scaled(z: float) -> float:
    """``exp(-z^2) * erfi(z)`` (Dawson's integral); never overflows."""
    _check_finite(z)
    if z == 0.0:
        return 0.0
    z2 = z * z
    if abs(z) <= SERIES_CUTOFF:
        return math.exp(-z2) * _erfi_series(z)
    return (1.0 + _asymptotic_tail(z2)) / (2.0 * z)


def erfi_inv(y: float) -> float:
    """Inverse of :func:`erfi`; odd, so negative inputs are accepted.

    The root is bracketed by ``[0, 1 + sqrt(log(1 + y))]``, narrowed by
    bisection and polished with safeguarded Newton steps.
    """
    _check_finite(y)
    if y < 0:
        return -erfi_inv(-y)
    if y == 0.0:
        return 0.0
    # erfi(z) >= z, so y itself is also an upper bracket
    lo, hi = 0.0, min(1.0 + math.sqrt(math.log1p(y)), y)
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if erfi(mid) < y:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    for _ in range(60):
        f = erfi(z) - y
        if f < 0:
            lo = z
        else:
            hi = z
        step = f / math.exp(z * z)
        z_new = z - step
        if not lo <= z_new <= hi:
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= 4e-16 * z_new:
            return z_new
        z = z_new
    return z


def phi(y: float) -> float:
    """``int_0^y erfi(u) du`` for ``y^2 <= 700``; even in ``y``."""
    y = abs(y)
    if y == 0.0:
        return 0.0
    y2 = y * y
    if y2 > EXP_GUARD:
        raise PotentialRangeError(y)
    if y <= SERIES_CUTOFF:
        # sum y^(2k+2) / (k! (2k+1) (2k+2)): positive terms, no cancellation
        a = y2  # y^(2k+2) / k!
        total = 0.5 * y2
        k = 0
        while True:
            k += 1
            a *= y2 / k
            term = a / ((2 * k + 1) * (2 * k + 2))
            total += term
            if term <= _SERIES_RTOL * total:
                return total
    # Phi = exp(y^2) (y * D(y) - 1/2) + 1/2 with y * D(y) - 1/2 = tail / 2
    return 0.5 * math.exp(y2) * _asymptotic_tail(y2) + 0.5


def phi_scaled(y: float, log_scale: float) -> float:
    """``Phi(y) * exp(-log_scale)`` without forming ``exp(y^2)``."""
    y = abs(y)
    y2 = y * y
    if y2 <= EXP_GUARD and log_scale <= EXP_GUARD:
        return phi(y) * math.exp(-log_scale)
    if y <= SERIES_CUTOFF:
        return phi(y) * math.exp(-log_scale)
    return 0.5 * math.exp(y2 - log_scale) * _asymptotic_tail(y2) + 0.5 * math.exp(-log_scale)


# ---------------------------------------------------------------------------
# potential and derivatives


def _y(alpha: float, t: float, S: float) -> float:
    y = S / math.sqrt(4.0 * alpha * t)
    if y * y > EXP_GUARD:
        raise PotentialRangeError(y, t, S, alpha)
    return y


def potential_value(cfg: LearnerConfig, t: float, S: float) -> float:
    """V(t, S). By convention V(0, S) = 0."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return 0.0
    y = _y(cfg.alpha, t, S)
    return cfg.C * math.sqrt(cfg.alpha * t) * (2.0 * phi(y) - 1.0)


def potential_increment(cfg: LearnerConfig, t: float, S: float) -> float:
    """V(t, S) - V(t, 0), computed without the constant offset."""
    if t <= 0:
        return 0.0
    return 2.0 * cfg.C * math.sqrt(cfg.alpha * t) * phi(_y(cfg.alpha, t, S))


def grad_s(C: float, alpha: float, t: float, S: float) -> float:
    """Discrete spatial derivative (V(t, S+1) - V(t, S-1)) / 2."""
    r = math.sqrt(4.0 * alpha * t)
    yp, ym = (S + 1.0) / r, (S - 1.0) / r
    if yp * yp > EXP_GUARD or ym * ym > EXP_GUARD:
        raise PotentialRangeError(max(abs(yp), abs(ym)), t, S, alpha)
    return C * math.sqrt(alpha * t) * (phi(yp) - phi(ym))


def discrete_derivs(cfg: LearnerConfig, t: float, S: float) -> DiscreteDerivs:
    """Discrete derivatives of V at (t, S); requires t >= 1."""
    if t < 1:
        raise ValueError(f"discrete derivatives need t >= 1, got {t}")
    C, a = cfg.C, cfg.alpha
    scale = C * math.sqrt(a * t)
    p0 = phi(_y(a, t, S))
    pp = phi(_y(a, t, S + 1.0))
    pm = phi(_y(a, t, S - 1.0))
    gs = scale * (pp - pm)
    gt = potential_value(cfg, t, S) - potential_value(cfg, t - 1, S)
    ls = 2.0 * scale * (pp + pm - 2.0 * p0)
    return DiscreteDerivs(gs, gt, ls)


def analytic_derivs(cfg: LearnerConfig, t: float, S: float) -> AnalyticDerivs:
    if not t > 0:
        raise ValueError(f"analytic derivatives need t > 0, got {t}")
    C, a = cfg.C, cfg.alpha
    y = _y(a, t, S)
    e = math.exp(y * y)
    at = a * t
    return AnalyticDerivs(
        dS=C * erfi(y),
        dt=-C * math.sqrt(a) / (2.0 * math.sqrt(t)) * e,
        dSS=C / (2.0 * math.sqrt(at)) * e,
        dSSS=C * S / (4.0 * at**1.5) * e,
    )


def heat_residual(cfg: LearnerConfig, t: float, S: float, diffusivity: float | None = None) -> float:
    """``dV/dt + diffusivity * d2V/dS2``; zero when diffusivity equals alpha."""
    d = analytic_derivs(cfg, t, S)
    k = cfg.alpha if diffusivity is None else diffusivity
    return d.dt + k * d.dSS


def heat_residual_relative(cfg: LearnerConfig, t: float, S: float,
                           diffusivity: float | None = None) -> float:
    """``heat_residual / max(1, |dV/dt|)`` with exp(y^2) factored out.

    Both derivatives carry the same exp(y^2) factor, so this stays finite
    past the overflow guard.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    C, a = cfg.C, cfg.alpha
    k = a if diffusivity is None else diffusivity
    y2 = S * S / (4.0 * a * t)
    dt_m = -C * math.sqrt(a) / (2.0 * math.sqrt(t))
    dss_m = C / (2.0 * math.sqrt(a * t))
    floor = math.exp(-y2) if y2 < EXP_GUARD else 0.0
    return (dt_m + k * dss_m) / max(floor, abs(dt_m))


def heat_residual_relative_array(cfg: LearnerConfig, t, S, diffusivity: float | None = None) -> np.ndarray:
    """Vectorised :func:`heat_residual_relative`."""
    t, S = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(S, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    C, a = cfg.C, cfg.alpha
    k = a if diffusivity is None else diffusivity
    y2 = S * S / (4.0 * a * t)
    dt_m = -C * math.sqrt(a) / (2.0 * np.sqrt(t))
    dss_m = C / (2.0 * np.sqrt(a * t))
    floor = np.where(y2 < EXP_GUARD, np.exp(-np.minimum(y2, EXP_GUARD)), 0.0)
    return (dt_m + k * dss_m) / np.maximum(floor, np.abs(dt_m))


def _delta_terms(cfg: LearnerConfig, t: float, S: float):
    a = cfg.alpha
    r = math.sqrt(4.0 * a * t)
    ys = [(S + 1.0) / r, (S - 1.0) / r, (S + 2.0) / r, (S - 2.0) / r, S / r]
    yprev = S / math.sqrt(4.0 * a * (t - 1)) if t > 1 else 0.0
    return ys, yprev


def residual_delta(cfg: LearnerConfig, t: float, S: float) -> float:
    """One-step residual of the potential argument at (t, S = S_{t-1}).

    ``gradT + lapl_S / 2 + (lam / G) * (gradS(t, S+1) - gradS(t, S-1))``,
    arranged so the constant offsets of V cancel analytically.
    """
    if t < 1:
        raise ValueError(f"residual needs t >= 1, got {t}")
    C, a = cfg.C, cfg.alpha
    ys, yprev = _delta_terms(cfg, t, S)
    for y in ys + [yprev]:
        if y * y > EXP_GUARD:
            raise PotentialRangeError(y, t, S, a)
    pp, pm, pp2, pm2, p0 = (phi(y) for y in ys)
    st = math.sqrt(a * t)
    out = C * st * (pp + pm)
    if t > 1:
        out -= 2.0 * C * math.sqrt(a * (t - 1)) * phi(yprev)
    out -= C * math.sqrt(a) / (math.sqrt(t) + math.sqrt(t - 1))
    out += cfg.lam / cfg.G * C * st * ((pp2 + pm2) - 2.0 * p0)
    return out


def residual_delta_scaled(cfg: LearnerConfig, t: float, S: float) -> tuple[float, float]:
    """Residual as ``(mantissa, log_scale)`` with ``delta = mantissa * exp(log_scale)``.

    Inside the overflow guard this is ``(residual_delta(...), 0.0)``. Past
    it every term is divided by ``exp(log_scale)`` (the largest y^2 that
    appears), so the sign and relative size survive.
    """
    if t < 1:
        raise ValueError(f"residual needs t >= 1, got {t}")
    ys, yprev = _delta_terms(cfg, t, S)
    E = max(y * y for y in ys + [yprev])
    if E <= EXP_GUARD:
        return residual_delta(cfg, t, S), 0.0
    C, a = cfg.C, cfg.alpha
    pp, pm, pp2, pm2, p0 = (phi_scaled(y, E) for y in ys)
    st = math.sqrt(a * t)
    out = C * st * (pp + pm)
    if t > 1:
        out -= 2.0 * C * math.sqrt(a * (t - 1)) * phi_scaled(yprev, E)
    out -= C * math.sqrt(a) / (math.sqrt(t) + math.sqrt(t - 1)) * math.exp(-E)
    out += cfg.lam / cfg.G * C * st * ((pp2 + pm2) - 2.0 * p0)
    return out, E


# ---------------------------------------------------------------------------
# numpy versions for batch replay


def _series_tail_array(z2: np.ndarray) -> np.ndarray:
    total = np.zeros_like(z2)
    term = np.ones_like(z2)
    active = np.ones(z2.shape, dtype=bool)
    k = 1
    while active.any():
        nxt = term * (2 * k - 1) / (2.0 * z2)
        stop = (nxt >= term) | (nxt < _SERIES_RTOL * (1.0 + total))
        add = active & (nxt < term)
        total = np.where(add, total + nxt, total)
        term = np.where(active, nxt, term)
        active &= ~stop
        k += 1
    return total


def _phi_series_array(y2: np.ndarray) -> np.ndarray:
    a = y2.copy()
    total = 0.5 * y2
    k = 0
    idx = np.arange(y2.size)
    while idx.size:
        k += 1
        a[idx] *= y2[idx] / k
        term = a[idx] / ((2 * k + 1) * (2 * k + 2))
        total[idx] += term
        idx = idx[term > _SERIES_RTOL * total[idx]]
    return total


def phi_array(y) -> np.ndarray:
    """Vectorised :func:`phi`."""
    y = np.abs(np.asarray(y, dtype=float))
    if y.size <= _SMALL_BATCH:
        # the per-term loop below only pays off on large batches
        return np.array([phi(v) for v in y.flat]).reshape(y.shape)
    y2 = y * y
    if np.any(y2 > EXP_GUARD):
        bad = float(y.flat[np.argmax(y2)])
        raise PotentialRangeError(bad)
    out = np.empty_like(y)
    small = y <= SERIES_CUTOFF
    if small.any():
        out[small] = _phi_series_array(y2[small])
    big = ~small
    if big.any():
        b2 = y2[big]
        out[big] = 0.5 * np.exp(b2) * _series_tail_array(b2) + 0.5
    return out


def phi_scaled_array(y, log_scale) -> np.ndarray:
    """Vectorised :func:`phi_scaled`; ``log_scale >= y^2 - EXP_GUARD`` keeps it finite."""
    y = np.abs(np.asarray(y, dtype=float))
    E = np.broadcast_to(np.asarray(log_scale, dtype=float), y.shape)
    y2 = y * y
    out = np.empty_like(y)
    small = y <= SERIES_CUTOFF
    if small.any():
        out[small] = _phi_series_array(y2[small]) * np.exp(-E[small])
    big = ~small
    if big.any():
        b2, e = y2[big], E[big]
        out[big] = 0.5 * np.exp(b2 - e) * _series_tail_array(b2) + 0.5 * np.exp(-e)
    return out


def residual_delta_array(cfg: LearnerConfig, t, S) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`residual_delta_scaled`; ``t`` and ``S`` broadcast."""
    t, S = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(S, dtype=float))
    if np.any(t < 1):
        raise ValueError("residual needs t >= 1")
    C, a = cfg.C, cfg.alpha
    r = np.sqrt(4.0 * a * t)
    ys = [(S + 1.0) / r, (S - 1.0) / r, (S + 2.0) / r, (S - 2.0) / r, S / r]
    yprev = S / np.sqrt(4.0 * a * np.maximum(t - 1, 1.0))
    E = np.max([y * y for y in ys + [yprev]], axis=0)
    E = np.where(E > EXP_GUARD, E, 0.0)
    pp, pm, pp2, pm2, p0 = (phi_scaled_array(y, E) for y in ys)
    st = np.sqrt(a * t)
    prev = np.where(t > 1, 2.0 * C * np.sqrt(a * (t - 1)) * phi_scaled_array(yprev, E), 0.0)
    out = C * st * (pp + pm) - prev
    out -= C * math.sqrt(a) / (np.sqrt(t) + np.sqrt(t - 1)) * np.exp(-E)
    out += cfg.lam / cfg.G * C * st * ((pp2 + pm2) - 2.0 * p0)
    return out, E


def grad_s_array(C, alpha, t, S) -> np.ndarray:
    """Vectorised :func:`grad_s`; arguments broadcast."""
    t = np.asarray(t, dtype=float)
    S = np.asarray(S, dtype=float)
    r = np.sqrt(4.0 * alpha * t)
    try:
        return C * np.sqrt(alpha * t) * (phi_array((S + 1.0) / r) - phi_array((S - 1.0) / r))
    except PotentialRangeError as e:
        # report the first offending entry, which in replay order is the earliest round
        y = np.maximum(np.abs(S + 1.0), np.abs(S - 1.0)) / r
        i = int(np.argmax((y * y > EXP_GUARD).ravel()))
        tb, Sb = np.broadcast_arrays(t, S)
        raise PotentialRangeError(float(y.ravel()[i]), float(tb.ravel()[i]), float(Sb.ravel()[i]),
                                  float(np.max(alpha))) from e
