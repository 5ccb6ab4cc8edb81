"""Box-constrained limited-memory BFGS with projection.

Variables sitting on a bound with the gradient pushing outward are frozen
for the iteration; the quasi-Newton direction is built on the remaining
free variables from the stored ``(s, y)`` pairs, and the trial point is
projected back onto the box before a backtracking Armijo test.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OptimizerConfig",
    "IterationRecord",
    "OptimizationHistory",
    "OptimizationResult",
    "initial_guess",
    "project",
    "projected_gradient_norm",
    "optimize",
]


@dataclass(frozen=True)
class OptimizerConfig:
    alpha_max: float = np.inf
    memory: int = 10
    tol: float = 1e-5
    max_iter: int = 200
    seed: int = 0
    init_amplitude: float = 0.01
    max_backtracks: int = 30
    armijo: float = 1e-4

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.memory < 1:
            raise ValueError(f"memory must be at least 1, got {self.memory}")
        if not self.alpha_max > 0:
            raise ValueError(f"alpha_max must be positive, got {self.alpha_max}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.init_amplitude < 0:
            raise ValueError("init_amplitude must be non-negative")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be non-negative")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")


@dataclass
class IterationRecord:
    iteration: int
    J1h: float
    J2h: float
    total: float
    pg_norm: float
    step: float
    n_fev: int
    n_gev: int


@dataclass
class OptimizationHistory:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path) -> None:
        cols = ["iteration", "J1h", "J2h", "total", "pg_norm", "step", "n_fev", "n_gev"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.records:
                w.writerow([repr(getattr(r, c)) for c in cols])


@dataclass
class OptimizationResult:
    alpha: np.ndarray
    value: float
    gradient: np.ndarray
    pg_norm: float
    status: str
    iterations: int
    history: OptimizationHistory
    breakdown: object = None
    backtracks: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        out = {
            "status": self.status,
            "iterations": self.iterations,
            "value": self.value,
            "pg_norm": self.pg_norm,
            "n_fev": self.history[-1].n_fev if len(self.history) else 0,
            "n_gev": self.history[-1].n_gev if len(self.history) else 0,
            "backtracks": self.backtracks,
        }
        if self.breakdown is not None and hasattr(self.breakdown, "to_dict"):
            out["objective"] = self.breakdown.to_dict()
        return out


def initial_guess(D: int, config: OptimizerConfig) -> np.ndarray:
    """Uniform draw in ``[-a, a]``, ``a = config.init_amplitude``, clipped to the box."""
    rng = np.random.default_rng(config.seed)
    a = config.init_amplitude
    return project(rng.uniform(-a, a, D), -config.alpha_max, config.alpha_max)


def project(x, lo, hi) -> np.ndarray:
    return np.minimum(np.maximum(x, lo), hi)


def projected_gradient_norm(x, g, lo, hi) -> float:
    return float(np.max(np.abs(x - project(x - g, lo, hi)), initial=0.0))


def _split(value):
    # fg may return a plain float or a breakdown object with J1h/J2h/total
    if hasattr(value, "total"):
        return float(value.total), float(getattr(value, "J1h", np.nan)), float(
            getattr(value, "J2h", np.nan)
        )
    v = float(value)
    return v, np.nan, np.nan


def _two_loop(g, pairs, free):
    q = np.where(free, g, 0.0)
    kept = []
    for s, y in pairs:
        sf, yf = s * free, y * free
        sy = float(sf @ yf)
        if sy > 1e-12 * float(yf @ yf) and sy > 0:
            kept.append((sf, yf, 1.0 / sy))
    if not kept:
        return -q, False
    alphas = []
    for sf, yf, rho in reversed(kept):
        a = rho * float(sf @ q)
        alphas.append(a)
        q = q - a * yf
    sf, yf, rho = kept[-1]
    q = q * (1.0 / (rho * float(yf @ yf)))
    for (sf, yf, rho), a in zip(kept, reversed(alphas)):
        b = rho * float(yf @ q)
        q = q + (a - b) * sf
    return -q, True


def optimize(fg, alpha0, config: OptimizerConfig, lower=None, upper=None, callback=None):
    """Minimize ``fg`` over the box ``[lower, upper]`` (default ``±config.alpha_max``).

    ``fg(alpha)`` returns ``(value, gradient)``; ``value`` may be a float or
    an object exposing ``total`` (and optionally ``J1h``, ``J2h``).
    ``callback(k, alpha, value)`` is called after every accepted iterate.
    """
    x = np.array(alpha0, dtype=float)
    D = x.size
    lo = np.full(D, -config.alpha_max) if lower is None else np.broadcast_to(lower, (D,)).astype(float)
    hi = np.full(D, config.alpha_max) if upper is None else np.broadcast_to(upper, (D,)).astype(float)
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    x = project(x, lo, hi)
    width = hi - lo
    first_scale = 0.05 * float(np.min(width)) if np.all(np.isfinite(width)) else 1.0

    n_eval = 0

    def call(z):
        nonlocal n_eval
        n_eval += 1
        val, grad = fg(z)
        return val, np.asarray(grad, dtype=float)

    raw, g = call(x)
    f, J1, J2 = _split(raw)
    history = OptimizationHistory()
    pg = projected_gradient_norm(x, g, lo, hi)
    history.records.append(IterationRecord(0, J1, J2, f, pg, 0.0, n_eval, n_eval))
    if callback is not None:
        callback(0, x.copy(), f)

    pairs: deque = deque(maxlen=config.memory)
    status = "max_iter"
    total_backtracks = 0
    k = 0
    while True:
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            status = "non_finite"
            break
        if pg <= config.tol:
            status = "converged"
            break
        if k >= config.max_iter:
            status = "max_iter"
            break
        at_lo = (x <= lo) & (g > 0)
        at_hi = (x >= hi) & (g < 0)
        free = ~(at_lo | at_hi)
        d, curved = _two_loop(g, pairs, free)
        slope = float(g @ d)
        if not slope < 0:
            pairs.clear()
            d, curved = -np.where(free, g, 0.0), False
            slope = float(g @ d)
        t = 1.0
        if not curved:
            dmax = float(np.max(np.abs(d)))
            t = first_scale / dmax if dmax > 0 else 1.0

        accepted = False
        for bt in range(config.max_backtracks + 1):
            x_new = project(x + t * d, lo, hi)
            step = x_new - x
            raw_new, g_new = call(x_new)
            f_new, J1n, J2n = _split(raw_new)
            if math.isfinite(f_new) and f_new <= f + config.armijo * float(g @ step):
                accepted = True
                break
            total_backtracks += 1
            t *= 0.5
        if not accepted:
            status = "line_search_failed"
            break

        s = x_new - x
        y = g_new - g
        if float(s @ y) > 1e-12 * float(y @ y) and float(s @ y) > 0:
            pairs.append((s, y))
        x, g, f, raw, J1, J2 = x_new, g_new, f_new, raw_new, J1n, J2n
        k += 1
        pg = projected_gradient_norm(x, g, lo, hi)
        history.records.append(
            IterationRecord(k, J1, J2, f, pg, float(np.max(np.abs(s))), n_eval, n_eval)
        )
        if callback is not None:
            callback(k, x.copy(), f)

    return OptimizationResult(
        alpha=x,
        value=f,
        gradient=g,
        pg_norm=pg,
        status=status,
        iterations=k,
        history=history,
        breakdown=raw if hasattr(raw, "total") else None,
        backtracks=total_backtracks,
    )
