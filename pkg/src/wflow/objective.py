"""Quartic least-squares objective: loss, derivatives, and fluctuation analysis.

The loss is f(x) = (1/4m) sum_i [(a_i^T x)^2 - y_i]^2 with analytic gradient
(1/m) sum_i [(a_i^T x)^2 - y_i] (a_i^T x) a_i and Hessian
(1/m) sum_i [3 (a_i^T x)^2 - y_i] a_i a_i^T. Averaging the gradient over the
Gaussian design gives the closed-form mean field
grad_F(x) = (3 ||x||^2 - ||x*||^2) x - 2 <x*, x> x*, and the gap between the
two is the fluctuation this module decomposes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import DesignEnsemble, Signal

# Rows per block when accumulating the dense Hessian; keeps the m x n
# temporaries bounded while the reduction order stays fixed (seed-stable).
_HESS_CHUNK = 8192


class UnsupportedConventionError(ValueError):
    """Raised when a first-axis-frame analysis is requested in another frame."""


def _check_dims(design: DesignEnsemble, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (design.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({design.n},)")
    return x


def _grad_core(rows: np.ndarray, y: np.ndarray, s: np.ndarray) -> np.ndarray:
    # s = rows @ x precomputed by the caller; the single canonical gradient
    # expression shared by the solver and the auxiliary sequences.
    return rows.T @ ((s * s - y) * s) / rows.shape[0]


def loss(design: DesignEnsemble, x: np.ndarray) -> float:
    """f(x) = (1/4m) sum_i [(a_i^T x)^2 - y_i]^2."""
    x = _check_dims(design, x)
    s = design.rows @ x
    r = s * s - design.measurements
    return float(r @ r) / (4.0 * design.m)


def gradient(design: DesignEnsemble, x: np.ndarray) -> np.ndarray:
    """Analytic gradient of the loss."""
    x = _check_dims(design, x)
    s = design.rows @ x
    return _grad_core(design.rows, design.measurements, s)


def hessian(design: DesignEnsemble, x: np.ndarray) -> np.ndarray:
    """Dense n x n Hessian, accumulated over row blocks, exactly symmetrized."""
    x = _check_dims(design, x)
    rows, y = design.rows, design.measurements
    n = design.n
    H = np.zeros((n, n))
    for start in range(0, design.m, _HESS_CHUNK):
        block = rows[start:start + _HESS_CHUNK]
        s = block @ x
        w = 3.0 * s * s - y[start:start + _HESS_CHUNK]
        H += block.T @ (block * w[:, None])
    H /= design.m
    return 0.5 * (H + H.T)


def hessian_matvec(design: DesignEnsemble, x: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Matrix-free v -> hessian(design, x) @ v, for spectral checks at larger n."""
    x = _check_dims(design, x)
    rows, y = design.rows, design.measurements
    s = rows @ x
    w = 3.0 * s * s - y

    def matvec(v: np.ndarray) -> np.ndarray:
        return rows.T @ (w * (rows @ v)) / design.m

    return matvec


def population_gradient(x: np.ndarray, signal: Signal) -> np.ndarray:
    """Design-averaged gradient (3||x||^2 - ||x*||^2) x - 2 <x*, x> x*."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != signal.entries.shape:
        raise ValueError("x and signal must have the same length")
    xs = signal.entries
    return (3.0 * (x @ x) - signal.norm ** 2) * x - 2.0 * (xs @ x) * xs


def population_loss(x: np.ndarray, signal: Signal) -> float:
    """Design-averaged loss; its gradient is population_gradient."""
    x = np.asarray(x, dtype=np.float64)
    xs = signal.entries
    nx2 = float(x @ x)
    ns2 = signal.norm ** 2
    inner = float(xs @ x)
    return 0.25 * (3.0 * nx2 ** 2 - 2.0 * nx2 * ns2 - 4.0 * inner ** 2 + 3.0 * ns2 ** 2)


@dataclass(frozen=True)
class ResidualBreakdown:
    """Fluctuation r(x) = grad f - grad F and the split of its first coordinate.

    In the first-axis frame the signal coordinate of one gradient step obeys
    x1' = {1 + 3 eta (1 - ||x||^2)} x1 - eta * r1, and r1 splits into four
    sample averages as r1 = i1 + i2 - i3 - i4 (i-terms None outside the frame;
    see fluctuation()).
    """

    fluctuation: np.ndarray
    fluctuation_norm: float
    r1: float
    i1: Optional[float] = None
    i2: Optional[float] = None
    i3: Optional[float] = None
    i4: Optional[float] = None

    @property
    def has_breakdown(self) -> bool:
        return self.i1 is not None


def fluctuation(design: DesignEnsemble, x: np.ndarray, signal: Signal,
                require_breakdown: bool = False) -> ResidualBreakdown:
    """Fluctuation vector r(x) plus, in the first-axis frame, the r1 split.

    With the unit first-axis signal, write a_i = (a_i1, a_iperp) and
    w_i = a_iperp^T x_perp. The four pieces are

        i1 = (x1^2 - 1) x1 ((1/m) sum a_i1^4 - 3)
        i2 = (3 x1^2 - 1) (1/m) sum a_i1^3 w_i
        i3 = -3 x1 ((1/m) sum a_i1^2 w_i^2 - ||x_perp||^2)
        i4 = -(1/m) sum a_i1 w_i^3

    chosen so that both r1 = i1 + i2 - i3 - i4 and the signal-coordinate
    step identity hold exactly. For other signals only r(x) is produced;
    pass require_breakdown=True to make that an error instead.
    """
    x = _check_dims(design, x)
    grad = gradient(design, x)
    fluct = grad - population_gradient(x, signal)
    r1 = float(fluct[0])

    if not signal.is_first_axis():
        if require_breakdown:
            raise UnsupportedConventionError(
                "the r1 breakdown is defined only for the unit first-axis signal; "
                "rotate the problem into that frame first")
        return ResidualBreakdown(fluctuation=fluct,
                                 fluctuation_norm=float(np.linalg.norm(fluct)),
                                 r1=r1)

    a1 = design.rows[:, 0]
    xpar = x[0]
    xperp = x[1:]
    w = design.rows[:, 1:] @ xperp
    a1sq = a1 * a1
    i1 = (xpar * xpar - 1.0) * xpar * (float(np.mean(a1sq * a1sq)) - 3.0)
    i2 = (3.0 * xpar * xpar - 1.0) * float(np.mean(a1sq * a1 * w))
    i3 = -3.0 * xpar * (float(np.mean(a1sq * w * w)) - float(xperp @ xperp))
    i4 = -float(np.mean(a1 * w ** 3))
    return ResidualBreakdown(fluctuation=fluct,
                             fluctuation_norm=float(np.linalg.norm(fluct)),
                             r1=r1, i1=i1, i2=i2, i3=i3, i4=i4)
