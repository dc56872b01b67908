"""Adversaries, episode ledgers, regret accounting, theorem right-hand sides
and sweep drivers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import potential as pc
from .potential import LearnerConfig

RNG_ALGORITHM = "numpy.random.PCG64"
SOUND_RTOL = 1e-9


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# adversaries


class AdversaryKind(str, Enum):
    SIGN = "sign"
    CONSTANT = "constant"
    ALTERNATING = "alternating"
    UNIFORM_RANDOM = "uniform_random"
    SINUSOIDAL = "sinusoidal"


@dataclass(frozen=True)
class AdversarySpec:
    """Gradient source.

    ``sign`` plays ``magnitude * sgn(x_t - center)`` with ties going to
    ``+magnitude``. Oblivious kinds use the per-coordinate pattern ``(-1)^i``
    so vector learners see gradients that differ across coordinates.
    ``sign`` scales the constant direction (default: push predictions up).
    """

    kind: AdversaryKind | str
    magnitude: float = 1.0
    seed: int = 0
    phase: float = 0.0
    period: float = 64.0
    sign: float = -1.0
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AdversaryKind(self.kind))
        if not self.magnitude > 0:
            raise ValueError("magnitude must be positive")
        if self.sign not in (-1.0, 1.0):
            raise ValueError("sign must be +1 or -1")

    @property
    def label(self) -> str:
        return self.kind.value

    @property
    def oblivious(self) -> bool:
        return self.kind is not AdversaryKind.SIGN

    def gradients(self, T: int, d: int = 1) -> np.ndarray:
        """All T oblivious gradients at once, shape ``(T, d)``."""
        if not self.oblivious:
            raise ValueError("the sign adversary depends on the predictions")
        m = self.magnitude
        pattern = (-1.0) ** np.arange(d)
        t = np.arange(1, T + 1, dtype=float)[:, None]
        k = self.kind
        if k is AdversaryKind.CONSTANT:
            return np.broadcast_to(self.sign * m * pattern, (T, d)).copy()
        if k is AdversaryKind.ALTERNATING:
            return self.sign * m * pattern * (-1.0) ** (t - 1)
        if k is AdversaryKind.UNIFORM_RANDOM:
            return make_rng(self.seed).uniform(-m, m, size=(T, d))
        shift = np.arange(d) / d
        return m * np.sin(2.0 * np.pi * (t / self.period + self.phase + shift))

    def respond(self, x, G: float) -> np.ndarray:
        """Adaptive response to prediction ``x`` (sign adversary only)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.where(x - self.center < 0, -self.magnitude, self.magnitude)


def scalar_suite(G: float, seed: int = 0) -> list[AdversarySpec]:
    """The four adversaries used by the soundness sweeps."""
    return [
        AdversarySpec("sign", G),
        AdversarySpec("constant", G),
        AdversarySpec("alternating", G),
        AdversarySpec("uniform_random", G, seed=seed),
    ]


def lea_suite(G: float, d: int, seed: int = 0) -> list[AdversarySpec]:
    """Vector counterpart; the sign adversary punishes above-uniform weight."""
    return [
        AdversarySpec("sign", G, center=1.0 / d),
        AdversarySpec("constant", G),
        AdversarySpec("alternating", G),
        AdversarySpec("uniform_random", G, seed=seed),
    ]


# ---------------------------------------------------------------------------
# ledger


def _as_rows(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    return a.reshape(a.shape[0], int(np.prod(a.shape[1:])))


@dataclass
class EpisodeLedger:
    predictions: np.ndarray  # (T, d)
    gradients: np.ndarray  # (T, d)
    lam: float
    G: float
    adversary: str = ""
    switch_costs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.predictions = _as_rows(self.predictions)
        self.gradients = _as_rows(self.gradients)
        if self.predictions.shape != self.gradients.shape:
            raise ValueError(f"shape mismatch {self.predictions.shape} vs {self.gradients.shape}")
        if self.gradients.size and np.max(np.abs(self.gradients)) > self.G * (1 + 1e-12):
            raise ValueError("recorded gradient exceeds G")
        self.switch_costs = np.abs(np.diff(self.predictions, axis=0)).sum(axis=1)

    @property
    def T(self) -> int:
        return self.predictions.shape[0]

    @property
    def d(self) -> int:
        return self.predictions.shape[1]

    def _u(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.d,):
            raise ValueError(f"comparator has shape {u.shape}, ledger has d = {self.d}")
        return u

    def losses(self) -> np.ndarray:
        """Per-round linear loss of the learner."""
        return np.einsum("ti,ti->t", self.gradients, self.predictions)

    def prefix_loss_with_switching(self) -> np.ndarray:
        """``L_t = sum_{s<=t} <g_s, x_s> + lam sum_{s<t} ||x_s - x_{s+1}||_1``."""
        sw = np.concatenate([[0.0], np.cumsum(self.switch_costs)])
        return np.cumsum(self.losses()) + self.lam * sw[: self.T]

    def prefix_regrets(self, u) -> np.ndarray:
        """Augmented regret at every prefix length 1..T."""
        u = self._u(u)
        return self.prefix_loss_with_switching() - np.cumsum(self.gradients @ u)

    def prefix_regrets_many(self, us: np.ndarray) -> np.ndarray:
        """``(T, len(us))`` prefix regrets for a batch of comparators."""
        us = np.asarray(us, dtype=float).reshape(len(us), self.d)
        return self.prefix_loss_with_switching()[:, None] - np.cumsum(self.gradients @ us.T, axis=0)

    def to_rows(self) -> list[dict]:
        rows = []
        for t in range(self.T):
            rows.append({
                "t": t + 1,
                "x": self.predictions[t].tolist(),
                "g": self.gradients[t].tolist(),
                "switch": float(self.switch_costs[t]) if t < self.T - 1 else 0.0,
            })
        return rows


def augmented_regret(ledger: EpisodeLedger, u) -> float:
    if ledger.T == 0:
        ledger._u(u)
        return 0.0
    return float(ledger.prefix_regrets(u)[-1])


def run_episode(learner, adversary: AdversarySpec, T: int, d: int | None = None) -> EpisodeLedger:
    """Play ``T`` rounds of predict, respond, observe.

    Oblivious adversaries are replayed in one vectorised call when the
    learner offers ``replay``; the result matches the interactive loop.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if d is None:
        d = getattr(learner, "d", 1)
    scalar = d == 1 and not hasattr(learner, "d")
    G = learner.G
    if adversary.oblivious:
        grads = adversary.gradients(T, d)
        feed = grads[:, 0] if scalar else grads
        if hasattr(learner, "replay") and T > 0:
            preds = learner.replay(feed)
        else:
            preds = np.empty((T, d))
            for t in range(T):
                preds[t] = np.asarray(learner.predict(), dtype=float)
                learner.observe(feed[t])
        return EpisodeLedger(np.asarray(preds).reshape(T, d), grads, learner.lam, G, adversary.label)
    preds = np.empty((T, d))
    grads = np.empty((T, d))
    for t in range(T):
        x = np.asarray(learner.predict(), dtype=float)
        g = adversary.respond(x, G)
        learner.observe(float(g[0]) if scalar else g)
        preds[t] = x
        grads[t] = g
    return EpisodeLedger(preds, grads, learner.lam, G, adversary.label)


# ---------------------------------------------------------------------------
# theorem right-hand sides


class Theorem(str, Enum):
    POTENTIAL = "potential"  # 1-D potential learner
    BASELINE = "baseline"  # hard-threshold betting learner
    META = "meta"  # gradient-adaptive wrapper; only up to an unknown log factor
    DOUBLING = "doubling"
    CONSTRAINED = "constrained"  # regret part of the bounded-domain reduction
    INTERVAL_SWITCHING = "interval_switching"  # switching cost on a window
    COORDINATE = "coordinate"  # d-dim OLO, L1 switching
    LEA = "lea"  # experts, explicit form before constants are absorbed


_REQUIRED = {
    Theorem.POTENTIAL: ("C", "G", "lam"),
    Theorem.BASELINE: ("C", "G", "lam"),
    Theorem.META: ("C", "G", "lam", "grad_abs_sum", "log_factor"),
    Theorem.DOUBLING: ("C", "G", "lam"),
    Theorem.CONSTRAINED: ("C", "G", "lam", "x_star"),
    Theorem.INTERVAL_SWITCHING: ("C", "D"),
    Theorem.COORDINATE: ("C", "G", "lam"),
    Theorem.LEA: ("G", "lam", "prior"),
}


class MissingParameterError(KeyError):
    pass


def _xlog(a, b):
    """``a * log(b)`` with the ``a = 0`` limit taken as 0."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a == 0, 0.0, a * np.log(np.where(a == 0, 1.0, b)))


def theoretical_bound(theorem: Theorem | str, params: Mapping, u, T):
    """Right-hand side of the named guarantee; ``T`` may be an array.

    For ``interval_switching`` the argument ``T`` is the window length
    ``T2 - T1``.
    """
    th = Theorem(theorem)
    missing = [k for k in _REQUIRED[th] if k not in params]
    if missing:
        raise MissingParameterError(f"{th.value} needs {missing}")
    p = params
    T = np.asarray(T, dtype=float)
    if th is Theorem.INTERVAL_SWITCHING:
        D, C = p["D"], p["C"]
        return 22.0 * np.sqrt(T) * (2 * D + C + 2 * D * math.sqrt(math.log1p(D / C)))
    if th is Theorem.LEA:
        pi = np.asarray(p["prior"], dtype=float)
        diff = np.abs(np.asarray(u, dtype=float) - pi)
        n1 = diff.sum()
        weighted = float(np.sum(diff * np.log1p(diff / pi)))
        G, lam = p["G"], p["lam"]
        return np.sqrt((32 * lam * G + 8 * G * G) * T) * (1 + 2 * n1 + 2 * math.sqrt(n1) * math.sqrt(weighted))
    C, G, lam = p["C"], p["G"], p["lam"]
    if th is Theorem.COORDINATE:
        uu = np.atleast_1d(np.asarray(u, dtype=float))
        d = uu.size
        n1, ninf = np.abs(uu).sum(), np.abs(uu).max(initial=0.0)
        alpha = 4 * lam / G + 2
        return G * np.sqrt(alpha * T) * (C + n1 * (math.sqrt(4 * math.log1p(ninf * d / C)) + 2))
    a = abs(float(np.squeeze(u)))
    if th is Theorem.CONSTRAINED:
        a = abs(float(np.squeeze(u)) - p["x_star"])
    if th in (Theorem.POTENTIAL, Theorem.CONSTRAINED):
        return np.sqrt((4 * lam * G + 2 * G * G) * T) * (C + a * (math.sqrt(4 * math.log1p(a / C)) + 2))
    if th is Theorem.BASELINE:
        inner = a * np.sqrt(2 * T) * 1.5 + _xlog(a * np.sqrt(2 * T), math.sqrt(2) * a * T**2.5 / C)
        return (G + lam) * (C + inner)
    if th is Theorem.DOUBLING:
        alpha = 8 * lam / G + 2
        return (math.sqrt(2 * alpha) * G / (math.sqrt(2) - 1)) * (
            C + a * np.sqrt(T) * (np.sqrt(8 * np.log1p(a * T / C)) + 2 * math.sqrt(2)))
    if th is Theorem.META:
        m = max(G, lam)
        return (G + lam) * C + a * p["log_factor"] * (m + math.sqrt(m * p["grad_abs_sum"])) + 0 * T
    raise AssertionError(th)


# ---------------------------------------------------------------------------
# bound verification


@dataclass
class BoundReport:
    comparator: list
    measured_regret: float
    bound_value: float
    slack: float
    theorem_id: str
    adversary: str = ""
    T: int = 0
    worst_prefix: int = 0
    config: dict = field(default_factory=dict)
    control: bool = False

    @property
    def sound(self) -> bool:
        return self.slack >= -SOUND_RTOL * max(1.0, abs(self.bound_value))


def _as_comparator(u, d: int) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size == 1 and d > 1:
        raise ValueError("scalar comparator for a vector ledger")
    return u


def check_ledger(ledger: EpisodeLedger, theorem: Theorem | str, params: Mapping,
                 u_grid: Iterable, config: dict | None = None,
                 control: bool = False) -> list[BoundReport]:
    """One report per comparator, at the prefix with the smallest
    normalised slack."""
    reports = []
    T = ledger.T
    for u in u_grid:
        uu = _as_comparator(u, ledger.d)
        if T == 0:
            reports.append(BoundReport(uu.tolist(), 0.0, 0.0, 0.0, Theorem(theorem).value,
                                       ledger.adversary, 0, 0, dict(config or {}), control))
            continue
        reg = ledger.prefix_regrets(uu)
        ts = np.arange(1, T + 1)
        bound = np.broadcast_to(theoretical_bound(theorem, params, uu, ts), reg.shape)
        slack = bound - reg
        score = slack / np.maximum(1.0, np.abs(bound))
        k = int(np.argmin(score))
        reports.append(BoundReport(uu.tolist(), float(reg[k]), float(bound[k]), float(slack[k]),
                                   Theorem(theorem).value, ledger.adversary, T, k + 1,
                                   dict(config or {}), control))
    return reports


def verify_bounds(learner_factory: Callable[[], object], adversary_suite: Sequence[AdversarySpec],
                  u_grid: Iterable, T: int, theorem: Theorem | str, params: Mapping,
                  config: dict | None = None, control: bool = False) -> list[BoundReport]:
    """Run each adversary against a fresh learner and check every prefix."""
    u_grid = list(u_grid)
    out = []
    for adv in adversary_suite:
        ledger = run_episode(learner_factory(), adv, T)
        out.extend(check_ledger(ledger, theorem, params, u_grid, config, control))
    return out


def all_sound(reports: Iterable[BoundReport]) -> bool:
    return all(r.sound for r in reports)


def worst_report(reports: Sequence[BoundReport]) -> BoundReport:
    return min(reports, key=lambda r: r.slack / max(1.0, abs(r.bound_value)))


# ---------------------------------------------------------------------------
# invariant sweeps


class InvariantKind(str, Enum):
    RESIDUAL_DELTA = "residual_delta"
    SWITCH_LEMMA = "switch_lemma"
    HEAT_PDE = "heat_pde"
    MONOTONE_POLICY = "monotone_policy"


DEFAULT_T_GRID = tuple(range(1, 1001)) + tuple(2**k for k in range(10, 15))


@dataclass
class SweepReport:
    kind: str
    points: int
    worst_violation: float
    worst_point: dict
    tolerance: float
    control: bool = False

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tolerance


def _s_points(t: int, n: int) -> np.ndarray:
    return np.linspace(-(t - 1), t - 1, n) if t > 1 else np.zeros(1)


def invariant_sweep(kind: InvariantKind | str, grid: Mapping | None = None) -> SweepReport:
    """Evaluate one inequality or identity exhaustively on a grid.

    ``grid`` keys: ``t`` (iterable of ints), ``n_s`` (S points per t),
    ``lams``, ``Gs``, ``Cs``, ``alpha`` (None for the admissible default,
    or a fixed float), ``diffusivity`` (heat_pde only), ``control``.
    The returned violation is in the units of the named check: absolute for
    residual_delta (mantissa when y^2 is past the exp guard, where the sign
    is what matters) and relative for heat_pde.
    """
    kind = InvariantKind(kind)
    g = dict(grid or {})
    ts = list(g.get("t", DEFAULT_T_GRID))
    n_s = g.get("n_s", 200)
    lams = g.get("lams", (0.0, 0.1, 1.0, 10.0))
    Gs = g.get("Gs", (1.0, 15.0))
    Cs = g.get("Cs", (1.0,))
    fixed_alpha = g.get("alpha")
    control = bool(g.get("control", False))
    worst, where, count = -math.inf, {}, 0

    def cfgs():
        for lam in lams:
            for G in Gs:
                for C in Cs:
                    yield LearnerConfig(C, G, lam, fixed_alpha)

    T_all = np.concatenate([np.full(_s_points(t, n_s).size, float(t)) for t in ts])
    S_all = np.concatenate([_s_points(t, n_s) for t in ts])

    if kind is InvariantKind.RESIDUAL_DELTA:
        tol = 1e-12
        for cfg in cfgs():
            m, E = pc.residual_delta_array(cfg, T_all, S_all)
            count += m.size
            i = int(np.argmax(m))
            if m[i] > worst:
                worst, where = float(m[i]), {"t": int(T_all[i]), "S": float(S_all[i]), "lam": cfg.lam,
                                             "G": cfg.G, "alpha": cfg.alpha, "exp_scale": float(E[i])}
    elif kind is InvariantKind.HEAT_PDE:
        tol = 1e-9
        k = g.get("diffusivity")
        for cfg in cfgs():
            r = np.abs(pc.heat_residual_relative_array(cfg, T_all, S_all, k))
            count += r.size
            i = int(np.argmax(r))
            if r[i] > worst:
                worst, where = float(r[i]), {"t": int(T_all[i]), "S": float(S_all[i]), "alpha": cfg.alpha}
    elif kind is InvariantKind.SWITCH_LEMMA:
        # |x_t - x_{t+1}| against the spread of the policy on [S-1, S+1]
        tol = 0.0
        for cfg in cfgs():
            C, a = cfg.C, cfg.alpha
            spread = pc.grad_s_array(C, a, T_all, S_all + 1) - pc.grad_s_array(C, a, T_all, S_all - 1)
            x_t = pc.grad_s_array(C, a, T_all, S_all)
            for step in (-1.0, -0.5, 0.0, 0.5, 1.0):
                nxt = pc.grad_s_array(C, a, T_all + 1, S_all + step)
                v = np.abs(x_t - nxt) - spread - 1e-12
                i = int(np.argmax(v))
                count += v.size
                if v[i] > worst:
                    worst, where = float(v[i]), {"t": int(T_all[i]), "S": float(S_all[i]), "step": step}
    else:
        tol = 0.0
        T_m = np.concatenate([np.full(_s_points(t, max(n_s, 3)).size, float(t)) for t in ts])
        S_m = np.concatenate([_s_points(t, max(n_s, 3)) for t in ts])
        same_t = T_m[1:] == T_m[:-1]
        for cfg in cfgs():
            x = pc.grad_s_array(cfg.C, cfg.alpha, T_m, S_m)
            xr = pc.grad_s_array(cfg.C, cfg.alpha, T_m, -S_m)
            drop = np.where(same_t, x[:-1] - x[1:], -np.inf)
            v = np.maximum(np.abs(x + xr), np.concatenate([drop, [-np.inf]]))
            i = int(np.argmax(v))
            count += v.size
            if v[i] > worst:
                worst, where = float(v[i]), {"t": int(T_m[i]), "S": float(S_m[i]), "alpha": cfg.alpha}
    return SweepReport(kind.value, count, float(worst), where, tol, control)


# ---------------------------------------------------------------------------
# report writers


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Enum):
        return o.value
    raise TypeError(type(o))


def report_dicts(reports: Iterable) -> list[dict]:
    out = []
    for r in reports:
        row = asdict(r)
        if isinstance(r, BoundReport):
            row["sound"] = r.sound
        elif isinstance(r, SweepReport):
            row["passed"] = r.passed
        out.append(row)
    return out


def write_reports_json(path, reports: Iterable, meta: dict | None = None) -> None:
    doc = {"rng": RNG_ALGORITHM, **(meta or {}), "reports": report_dicts(reports)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


BOUND_CSV_FIELDS = ("theorem_id", "adversary", "u", "T", "measured", "bound", "slack")


def write_reports_csv(path, reports: Iterable[BoundReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BOUND_CSV_FIELDS)
        for r in reports:
            u = r.comparator[0] if len(r.comparator) == 1 else " ".join(repr(v) for v in r.comparator)
            w.writerow([r.theorem_id, r.adversary, u, r.T, repr(r.measured_regret),
                        repr(r.bound_value), repr(r.slack)])
