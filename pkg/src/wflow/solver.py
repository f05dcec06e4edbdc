"""Gradient descent runs with per-iteration diagnostics.

A run iterates x <- x - eta * grad f(x) from a random, data-dependent, or
caller-supplied initial point, and records the error (modulo the global sign
ambiguity), the signal/orthogonal split (alpha, beta), the loss, and the
worst-case alignment with the sensing vectors. The same loop driven by the
design-averaged gradient gives the infinite-sample reference trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import objective
from .model import (GAUSSIAN, STREAM_DIRECTION, STREAM_INIT, DesignEnsemble,
                    Signal, decompose, stream)

INIT_RANDOM = "random"
INIT_DATA = "data"
INIT_FIXED = "fixed"
INIT_MODES = (INIT_RANDOM, INIT_DATA, INIT_FIXED)

# Iterates this far above the signal scale only occur for oversized step
# sizes; the analysis keeps well-behaved runs bounded by a small constant.
_DIVERGENCE_FACTOR = 10.0


class DivergenceError(RuntimeError):
    """Step size too large: an iterate blew up or went non-finite."""

    def __init__(self, message: str, last_finite_t: int, sequence: str = "base"):
        super().__init__(message)
        self.last_finite_t = last_finite_t
        self.sequence = sequence


@dataclass
class RunConfig:
    n: int
    m: int
    eta: float = 0.1
    max_iters: int = 500
    tol: float = 1e-5                 # relative: stop once dist <= tol * ||x*||
    design_kind: str = GAUSSIAN
    init_mode: str = INIT_RANDOM
    seed: int = 0
    record_every: int = 1
    diagnostics: frozenset = frozenset({"incoherence"})  # + "residuals", "snapshots"

    def __post_init__(self):
        # eta = 0 is allowed (a stationary run used by algebraic tests);
        # the CLI is stricter and rejects nonpositive step sizes.
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"unknown init mode {self.init_mode!r}")
        self.diagnostics = frozenset(self.diagnostics)


@dataclass
class TrajectoryRecord:
    """Diagnostics of one run, sampled every record_every iterations.

    alpha is the (signed) coefficient of the iterate along the unit signal
    direction and beta the norm of the orthogonal remainder; ratio = alpha/beta.
    dist is min(||x - x*||, ||x + x*||). snapshots, when kept, holds the full
    iterate at each recorded step.
    """

    t: np.ndarray
    dist: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    ratio: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    incoherence: np.ndarray
    iterations_run: int
    converged: bool
    signal_norm: float
    r1_abs: Optional[np.ndarray] = None
    snapshots: Optional[np.ndarray] = None
    stage_times: Optional[dict] = None

    @property
    def dist_rel(self) -> np.ndarray:
        return self.dist / self.signal_norm


def random_init(n: int, signal_norm: float, seed: int,
                stream_id: int = STREAM_INIT) -> np.ndarray:
    """Gaussian start with per-entry variance signal_norm^2 / n."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return stream(seed, stream_id).standard_normal(n) * (signal_norm / np.sqrt(n))


def data_dependent_init(design: DesignEnsemble, seed: int,
                        stream_id: int = STREAM_DIRECTION) -> np.ndarray:
    """Start of norm sqrt(mean(y)) in a uniformly random direction.

    The norm estimates ||x*|| from the data alone, so no oracle knowledge of
    the signal scale is needed.
    """
    u = stream(seed, stream_id).standard_normal(design.n)
    u /= np.linalg.norm(u)
    return float(np.sqrt(np.mean(design.measurements))) * u


def dist(x: np.ndarray, signal: Signal) -> float:
    """Euclidean error modulo the unrecoverable global sign."""
    x = np.asarray(x, dtype=np.float64)
    xs = signal.entries
    return float(min(np.linalg.norm(x - xs), np.linalg.norm(x + xs)))


class _Recorder:
    def __init__(self, config: RunConfig, signal: Signal, design: Optional[DesignEnsemble]):
        self.config = config
        self.signal = signal
        self.design = design
        self.unit = signal.entries / signal.norm
        self.cols = {k: [] for k in
                     ("t", "dist", "alpha", "beta", "ratio", "loss",
                      "grad_norm", "incoherence")}
        self.r1_abs = [] if "residuals" in config.diagnostics else None
        self.snapshots = [] if "snapshots" in config.diagnostics else None

    def record(self, t, x, s, grad, loss_val):
        c = self.cols
        alpha = float(x @ self.unit)
        beta = float(np.linalg.norm(x - alpha * self.unit))
        c["t"].append(t)
        c["dist"].append(dist(x, self.signal))
        c["alpha"].append(alpha)
        c["beta"].append(beta)
        c["ratio"].append(alpha / beta if beta > 0 else np.inf)
        c["loss"].append(loss_val)
        c["grad_norm"].append(float(np.linalg.norm(grad)))
        nx = float(np.linalg.norm(x))
        if s is None or nx == 0.0:
            c["incoherence"].append(np.nan)
        else:
            c["incoherence"].append(float(np.max(np.abs(s))) / nx)
        if self.r1_abs is not None:
            if self.design is not None:
                fl = objective.fluctuation(self.design, x, self.signal)
                self.r1_abs.append(abs(fl.r1))
            else:
                self.r1_abs.append(np.nan)
        if self.snapshots is not None:
            self.snapshots.append(x.copy())

    def finish(self, iterations_run, converged) -> TrajectoryRecord:
        c = self.cols
        return TrajectoryRecord(
            t=np.array(c["t"], dtype=np.int64),
            dist=np.array(c["dist"]),
            alpha=np.array(c["alpha"]),
            beta=np.array(c["beta"]),
            ratio=np.array(c["ratio"]),
            loss=np.array(c["loss"]),
            grad_norm=np.array(c["grad_norm"]),
            incoherence=np.array(c["incoherence"]),
            iterations_run=iterations_run,
            converged=converged,
            signal_norm=self.signal.norm,
            r1_abs=None if self.r1_abs is None else np.array(self.r1_abs),
            snapshots=None if self.snapshots is None else np.array(self.snapshots),
        )


def run(config: RunConfig, design: DesignEnsemble, signal: Signal,
        x0: np.ndarray) -> TrajectoryRecord:
    """Gradient descent on the empirical loss; deterministic given the inputs."""
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (design.n,) or signal.n != design.n:
        raise ValueError("x0, signal, and design dimensions must agree")
    if signal.norm == 0.0:
        raise ValueError("cannot run against a zero signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    rows, y = design.rows, design.measurements
    rec = _Recorder(config, signal, design)
    threshold = config.tol * signal.norm
    guard = _DIVERGENCE_FACTOR * signal.norm
    converged = False
    t = 0
    while True:
        s = rows @ x
        grad = objective._grad_core(rows, y, s)
        r = s * s - y
        loss_val = float(r @ r) / (4.0 * design.m)
        d = dist(x, signal)
        done = d <= threshold or t >= config.max_iters
        if t % config.record_every == 0 or done:
            rec.record(t, x, s, grad, loss_val)
        if done:
            converged = d <= threshold
            break
        x = x - config.eta * grad
        t += 1
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > guard:
            raise DivergenceError(
                f"iterate diverged at t={t} (eta={config.eta} too large?)",
                last_finite_t=t - 1)
    return rec.finish(iterations_run=t, converged=converged)


def run_population(x0: np.ndarray, signal: Signal, eta: float,
                   max_iters: int = 500, tol: float = 1e-5,
                   record_every: int = 1,
                   diagnostics: frozenset = frozenset()) -> TrajectoryRecord:
    """The same loop driven by the design-averaged gradient (infinite samples).

    Incoherence has no meaning without a design and is recorded as NaN.
    """
    config = RunConfig(n=signal.n, m=1, eta=eta, max_iters=max_iters, tol=tol,
                       record_every=record_every,
                       diagnostics=frozenset(diagnostics))
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != signal.entries.shape:
        raise ValueError("x0 and signal must have the same length")
    if signal.norm == 0.0:
        raise ValueError("cannot run against a zero signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    rec = _Recorder(config, signal, None)
    threshold = tol * signal.norm
    guard = _DIVERGENCE_FACTOR * signal.norm
    converged = False
    t = 0
    while True:
        grad = objective.population_gradient(x, signal)
        loss_val = objective.population_loss(x, signal)
        d = dist(x, signal)
        done = d <= threshold or t >= max_iters
        if t % record_every == 0 or done:
            rec.record(t, x, None, grad, loss_val)
        if done:
            converged = d <= threshold
            break
        x = x - eta * grad
        t += 1
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > guard:
            raise DivergenceError(
                f"iterate diverged at t={t} (eta={eta} too large?)",
                last_finite_t=t - 1)
    return rec.finish(iterations_run=t, converged=converged)
