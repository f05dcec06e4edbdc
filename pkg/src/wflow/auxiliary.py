"""Leave-one-out and random-sign companion sequences run in lockstep.

Four families of gradient descent trajectories share one initial point and one
step size: the original sequence, per-index leave-one-out sequences whose
updates never touch the left-out row, a random-sign sequence driven by designs
with independently re-signed first entries (which produce identical
measurements against a first-axis signal), and the combination of both. Their
pairwise gaps quantify how weakly the iterates depend on any single sensing
vector or on the sign pattern of the first coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from . import objective
from .model import DesignEnsemble, Signal, SignFlipVector, flip_first_entry
from .solver import DivergenceError, RunConfig, TrajectoryRecord, _DIVERGENCE_FACTOR, _Recorder, dist


@dataclass
class AuxiliaryBundle:
    """Lockstep trajectories; snapshot arrays are (T+1, n), row t = iterate t."""

    base: TrajectoryRecord
    loo: Dict[int, np.ndarray]
    sgn: np.ndarray
    sgn_loo: Dict[int, np.ndarray]
    flips: SignFlipVector
    eta: float

    @property
    def loo_indices(self) -> list:
        return sorted(self.loo.keys())


@dataclass
class DifferenceCurves:
    """Per-step gaps between the original and companion sequences.

    Raw curves: d_loo[t] = max_l ||x^t - x^{t,(l)}||, d_loo_par the same for
    the signal coordinate, d_sgn[t] = ||x^t - x^{t,sgn}||, and d_double[t] the
    second-order difference max_l ||x^t - x^{t,sgn} - x^{t,(l)} + x^{t,sgn,(l)}||.
    Normalized variants divide by beta_t (for d_loo) or |alpha_t| (the rest),
    mirroring how the gaps track the two strengths. Leave-one-out curves are
    None when no indices were sampled.
    """

    t: np.ndarray
    d_sgn: np.ndarray
    d_sgn_over_alpha: np.ndarray
    d_loo: Optional[np.ndarray] = None
    d_loo_par: Optional[np.ndarray] = None
    d_double: Optional[np.ndarray] = None
    d_loo_over_beta: Optional[np.ndarray] = None
    d_loo_par_over_alpha: Optional[np.ndarray] = None
    d_double_over_alpha: Optional[np.ndarray] = None


def _gradient_excluding(rows: np.ndarray, y: np.ndarray, x: np.ndarray,
                        skip: int) -> np.ndarray:
    # Two complementary views around the skipped row: row `skip` and y[skip]
    # are never read, which is what makes the sequence independent of them.
    m = rows.shape[0]
    g = np.zeros_like(x)
    for sl in (slice(0, skip), slice(skip + 1, m)):
        block = rows[sl]
        s = block @ x
        g += block.T @ ((s * s - y[sl]) * s)
    return g / m


def loo_gradient(design: DesignEnsemble, x: np.ndarray, l: int) -> np.ndarray:
    """Gradient of the loss with row l dropped (1/m normalization kept).

    Equals the full gradient minus the l-th summand over m, but is computed
    without ever reading row l or measurement l.
    """
    if not 0 <= l < design.m:
        raise IndexError(f"row index {l} out of range for m={design.m}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (design.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({design.n},)")
    return _gradient_excluding(design.rows, design.measurements, x, l)


def run_bundle(config: RunConfig, design: DesignEnsemble, signal: Signal,
               x0: np.ndarray, loo_indices: Sequence[int],
               flips: Optional[SignFlipVector] = None,
               flips_seed: Optional[int] = None) -> AuxiliaryBundle:
    """Advance all companion sequences in lockstep from the shared x0.

    The sign flips come either from `flips` or from the fair-coin stream of
    `flips_seed`. The run stops when the base sequence converges (relative
    dist <= tol) or at max_iters, and every sequence is snapshotted at every
    step so the difference curves are exact.
    """
    loo_indices = sorted(set(int(l) for l in loo_indices))
    for l in loo_indices:
        if not 0 <= l < design.m:
            raise IndexError(f"loo index {l} out of range for m={design.m}")
    if flips is None:
        if flips_seed is None:
            raise ValueError("provide either flips or flips_seed")
        flips = SignFlipVector.random(design.m, flips_seed)
    elif flips.flips.shape != (design.m,):
        raise ValueError("flips length must equal m")

    sgn_design = flip_first_entry(design, flips)
    rows, y = design.rows, design.measurements
    rows_s, y_s = sgn_design.rows, sgn_design.measurements

    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (design.n,):
        raise ValueError("x0 length must equal n")

    # Sequence state; every trajectory starts from the identical point.
    x = x0.copy()
    x_loo = {l: x0.copy() for l in loo_indices}
    x_sgn = x0.copy()
    x_sgn_loo = {l: x0.copy() for l in loo_indices}

    base_rec = _Recorder(
        RunConfig(**{**config.__dict__,
                     "diagnostics": config.diagnostics | {"snapshots"}}),
        signal, design)
    snaps_loo = {l: [x0.copy()] for l in loo_indices}
    snaps_sgn = [x0.copy()]
    snaps_sgn_loo = {l: [x0.copy()] for l in loo_indices}

    threshold = config.tol * signal.norm
    guard = _DIVERGENCE_FACTOR * signal.norm
    eta = config.eta

    def _advance(rows_, y_, xv, name, t, skip=None):
        if skip is None:
            s = rows_ @ xv
            g = objective._grad_core(rows_, y_, s)
        else:
            g = _gradient_excluding(rows_, y_, xv, skip)
        xn = xv - eta * g
        if not np.all(np.isfinite(xn)) or np.linalg.norm(xn) > guard:
            raise DivergenceError(
                f"sequence {name!r} diverged at t={t + 1}",
                last_finite_t=t, sequence=name)
        return xn

    t = 0
    while True:
        s = rows @ x
        grad = objective._grad_core(rows, y, s)
        r = s * s - y
        base_rec.record(t, x, s, grad, float(r @ r) / (4.0 * design.m))
        d = dist(x, signal)
        if d <= threshold or t >= config.max_iters:
            converged = d <= threshold
            break
        x = x - eta * grad
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > guard:
            raise DivergenceError(f"sequence 'base' diverged at t={t + 1}",
                                  last_finite_t=t, sequence="base")
        x_sgn = _advance(rows_s, y_s, x_sgn, "sgn", t)
        for l in loo_indices:
            x_loo[l] = _advance(rows, y, x_loo[l], f"loo[{l}]", t, skip=l)
            x_sgn_loo[l] = _advance(rows_s, y_s, x_sgn_loo[l], f"sgn_loo[{l}]", t, skip=l)
        t += 1
        snaps_sgn.append(x_sgn.copy())
        for l in loo_indices:
            snaps_loo[l].append(x_loo[l].copy())
            snaps_sgn_loo[l].append(x_sgn_loo[l].copy())

    base = base_rec.finish(iterations_run=t, converged=converged)
    return AuxiliaryBundle(
        base=base,
        loo={l: np.array(snaps_loo[l]) for l in loo_indices},
        sgn=np.array(snaps_sgn),
        sgn_loo={l: np.array(snaps_sgn_loo[l]) for l in loo_indices},
        flips=flips,
        eta=eta,
    )


def difference_curves(bundle: AuxiliaryBundle, signal: Signal) -> DifferenceCurves:
    """Raw and normalized gap curves between the sequences of a bundle."""
    base = bundle.base
    if base.snapshots is None:
        raise ValueError("bundle base record has no snapshots")
    X = base.snapshots
    T = X.shape[0]
    unit = signal.entries / signal.norm
    alphas = X @ unit
    betas = np.linalg.norm(X - np.outer(alphas, unit), axis=1)

    d_sgn = np.linalg.norm(X - bundle.sgn, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_sgn_over_alpha = d_sgn / np.abs(alphas)

    if not bundle.loo:
        return DifferenceCurves(t=np.arange(T), d_sgn=d_sgn,
                                d_sgn_over_alpha=d_sgn_over_alpha)

    ls = bundle.loo_indices
    diffs = np.stack([X - bundle.loo[l] for l in ls])            # (L, T, n)
    ddbl = np.stack([X - bundle.sgn - bundle.loo[l] + bundle.sgn_loo[l] for l in ls])
    d_loo = np.linalg.norm(diffs, axis=2).max(axis=0)
    par = np.abs(diffs @ unit).max(axis=0)
    d_double = np.linalg.norm(ddbl, axis=2).max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return DifferenceCurves(
            t=np.arange(T),
            d_sgn=d_sgn,
            d_sgn_over_alpha=d_sgn_over_alpha,
            d_loo=d_loo,
            d_loo_par=par,
            d_double=d_double,
            d_loo_over_beta=d_loo / betas,
            d_loo_par_over_alpha=par / np.abs(alphas),
            d_double_over_alpha=d_double / np.abs(alphas),
        )


def incoherence_profile(design: DesignEnsemble, snapshots: np.ndarray) -> np.ndarray:
    """max_i |a_i^T x^t| / ||x^t|| per snapshot; NaN flags a zero iterate."""
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2 or snapshots.shape[1] != design.n:
        raise ValueError("snapshots must be (T, n)")
    proj = np.abs(design.rows @ snapshots.T)       # (m, T)
    norms = np.linalg.norm(snapshots, axis=1)
    out = np.full(snapshots.shape[0], np.nan)
    ok = norms > 0
    out[ok] = proj[:, ok].max(axis=0) / norms[ok]
    return out
