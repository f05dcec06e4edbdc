"""Two-dimensional recursion tracking the signal and orthogonal strengths.

With alpha the coefficient along the signal direction and beta the orthogonal
norm, the infinite-sample dynamics of one gradient step reduce to

    alpha' = {1 + 3 eta [1 - (alpha^2 + beta^2)]} alpha
    beta'  = {1 + eta [1 - 3 (alpha^2 + beta^2)]} beta

with fixed points (1, 0) (minimizer, up to sign), (0, 0) (maximizer), and
(0, 1/sqrt(3)) (saddle circle). Finite-sample traces follow the same recursion
up to per-step perturbations (zeta_t, rho_t), which this module extracts by
inverting the recursion, alongside the stage boundaries of the two-phase
convergence picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

DEFAULT_GAMMA = 0.1
DEFAULT_C4 = 0.1
DEFAULT_C6 = 1.0
# Largest sound lower bound on beta strictly before t_gamma when gamma = 0.1:
# beta only drops below gamma/2 at t_gamma itself.
DEFAULT_C5 = 0.05


class DegenerateStepError(ValueError):
    """Perturbation extraction hit a zero alpha or beta mid-trace."""

    def __init__(self, message: str, t: int):
        super().__init__(message)
        self.t = t


class SEPoint(NamedTuple):
    alpha: float
    beta: float


@dataclass
class StageTimes:
    """First hitting times of the three stage predicates (None if never hit).

    t0: first t with alpha_{t+1} >= c6 / log^5 m  (signal no longer negligible)
    t1: first t with alpha_{t+1} > c4             (signal of constant size)
    t_gamma: first t with |alpha_t - 1| <= gamma/2 and beta_t <= gamma/2
    """

    t0: Optional[int]
    t1: Optional[int]
    t_gamma: Optional[int]

    def as_dict(self) -> dict:
        return {"t0": self.t0, "t1": self.t1, "t_gamma": self.t_gamma}


@dataclass
class SETrace:
    """A sequence of (alpha_t, beta_t) pairs with optional extracted data."""

    points: list
    eta: float
    zetas: Optional[np.ndarray] = None
    rhos: Optional[np.ndarray] = None
    stage_times: Optional[StageTimes] = None

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.points])

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def population_step(p: SEPoint, eta: float) -> SEPoint:
    """One step of the infinite-sample recursion."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    s = p.alpha * p.alpha + p.beta * p.beta
    alpha = (1.0 + 3.0 * eta * (1.0 - s)) * p.alpha
    beta = (1.0 + eta * (1.0 - 3.0 * s)) * p.beta
    return SEPoint(alpha, beta)


def population_run(p0: SEPoint, eta: float, max_iters: int = 10_000,
                   gamma: float = DEFAULT_GAMMA) -> SETrace:
    """Iterate the recursion until the (gamma/2)-box around (1, 0) is reached."""
    p = SEPoint(float(p0[0]), float(p0[1]))
    if not (math.isfinite(p.alpha) and math.isfinite(p.beta)):
        raise ValueError("p0 must be finite")
    points = [p]
    for _ in range(max_iters):
        if abs(p.alpha - 1.0) <= gamma / 2 and p.beta <= gamma / 2:
            break
        p = population_step(p, eta)
        points.append(p)
    return SETrace(points=points, eta=eta)


def _as_points(trace_or_points) -> list:
    if isinstance(trace_or_points, SETrace):
        return list(trace_or_points.points)
    return [SEPoint(float(a), float(b)) for a, b in trace_or_points]


def extract_perturbations(trace_or_points, eta: float) -> SETrace:
    """Invert the recursion on a trace, recovering (zeta_t, rho_t) per step.

    zeta_t = (alpha_{t+1}/alpha_t - 1 - 3 eta [1 - (alpha_t^2 + beta_t^2)]) / eta
    rho_t  = (beta_{t+1}/beta_t  - 1 -   eta [1 - 3 (alpha_t^2 + beta_t^2)]) / eta

    A trailing run of exact zeros (a fully converged tail) truncates the
    extraction at the last usable step; a zero alpha_t or beta_t that is
    followed by nonzero values raises DegenerateStepError for that t.
    """
    points = _as_points(trace_or_points)
    if len(points) < 2:
        return SETrace(points=points, eta=eta,
                       zetas=np.empty(0), rhos=np.empty(0))
    alphas = np.array([p.alpha for p in points])
    betas = np.array([p.beta for p in points])

    steps = len(points) - 1
    for t in range(steps):
        converged_tail = False
        if alphas[t] == 0.0:
            if np.any(alphas[t:] != 0.0):
                raise DegenerateStepError(f"alpha is zero at step t={t} but recovers later", t)
            converged_tail = True
        if betas[t] == 0.0:
            if np.any(betas[t:] != 0.0):
                raise DegenerateStepError(f"beta is zero at step t={t} but recovers later", t)
            converged_tail = True
        if converged_tail:
            steps = t
            break

    a0, a1 = alphas[:steps], alphas[1:steps + 1]
    b0, b1 = betas[:steps], betas[1:steps + 1]
    s = a0 * a0 + b0 * b0
    zetas = (a1 / a0 - 1.0 - 3.0 * eta * (1.0 - s)) / eta
    rhos = (b1 / b0 - 1.0 - eta * (1.0 - 3.0 * s)) / eta
    return SETrace(points=points, eta=eta, zetas=zetas, rhos=rhos)


def apply_perturbations(p0: SEPoint, zetas: Sequence[float], rhos: Sequence[float],
                        eta: float) -> SETrace:
    """Rebuild a trace from its start and per-step perturbations (inverse of
    extract_perturbations)."""
    zetas = np.asarray(zetas, dtype=np.float64)
    rhos = np.asarray(rhos, dtype=np.float64)
    if zetas.shape != rhos.shape:
        raise ValueError("zetas and rhos must have equal length")
    p = SEPoint(float(p0[0]), float(p0[1]))
    points = [p]
    for z, r in zip(zetas, rhos):
        s = p.alpha * p.alpha + p.beta * p.beta
        alpha = (1.0 + 3.0 * eta * (1.0 - s) + eta * z) * p.alpha
        beta = (1.0 + eta * (1.0 - 3.0 * s) + eta * r) * p.beta
        p = SEPoint(alpha, beta)
        points.append(p)
    return SETrace(points=points, eta=eta, zetas=zetas, rhos=rhos)


def stage_times(trace_or_points, gamma: float = DEFAULT_GAMMA,
                c4: float = DEFAULT_C4, c6: float = DEFAULT_C6,
                m: int = 0) -> StageTimes:
    """First hitting times of the stage predicates on an (alpha, beta) trace.

    The t0 threshold c6/log^5(m) needs the sample count m of the run being
    analyzed; natural log throughout. m <= 1 disables t0 (threshold
    undefined), which only arises in synthetic traces.
    """
    points = _as_points(trace_or_points)
    if not points:
        raise ValueError("trace must be nonempty")
    alphas = np.array([p.alpha for p in points])
    betas = np.array([p.beta for p in points])

    t0 = None
    if m > 1:
        thresh0 = c6 / math.log(m) ** 5
        hit = np.nonzero(alphas[1:] >= thresh0)[0]
        t0 = int(hit[0]) if hit.size else None
    hit1 = np.nonzero(alphas[1:] > c4)[0]
    t1 = int(hit1[0]) if hit1.size else None
    hitg = np.nonzero((np.abs(alphas - 1.0) <= gamma / 2) & (betas <= gamma / 2))[0]
    t_gamma = int(hitg[0]) if hitg.size else None
    return StageTimes(t0=t0, t1=t1, t_gamma=t_gamma)
