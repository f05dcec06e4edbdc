"""Monte Carlo verifiers for the concentration behavior the analysis relies on.

Each checker draws independent trials from seeded substreams, evaluates a
statistic of the Gaussian design, and reports the observed values against a
configurable envelope: extreme-entry bounds, spectral concentration of the
measurement-weighted second moment, a local smoothness bound on the Hessian,
and six polynomial sample means with known Gaussian expectations. Reports keep
the raw per-trial values so tightened constants can be evaluated later.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from . import objective
from .model import GAUSSIAN, DesignEnsemble, Signal, generate_design, stream

# Substream bases so trials, probe vectors, and power-iteration starts never
# collide under a single seed.
_TRIAL_BASE = 1 << 20
_PROBE_BASE = 1 << 21
_POWER_BASE = 1 << 22

# Polynomial sample means over (a_i1, a_iperp^T z): expectation constant and
# the power of ||z|| that normalizes the deviation.
POLY_CASES: Dict[int, dict] = {
    1: {"expect": 0.0, "power": 1, "label": "mean a1^3 (aperp.z)"},
    2: {"expect": 0.0, "power": 3, "label": "mean a1 (aperp.z)^3"},
    3: {"expect": 1.0, "power": 2, "label": "mean a1^2 (aperp.z)^2"},
    4: {"expect": 15.0, "power": 2, "label": "mean a1^6 (aperp.z)^2"},
    5: {"expect": 15.0, "power": 6, "label": "mean a1^2 (aperp.z)^6"},
    6: {"expect": 3.0, "power": 4, "label": "mean a1^2 (aperp.z)^4"},
}


@dataclass
class ConcentrationReport:
    """Per-trial observations of one statistic against a theory envelope.

    observed holds signed values where a sign is meaningful (deviations) and
    magnitudes otherwise; violation_rate is the fraction with |observed|
    exceeding bound. scaling_slope, when present, is the log-log slope of the
    median observation against the sample count m.
    """

    statistic_name: str
    trials: int
    observed: np.ndarray
    bound: float
    violation_rate: float
    scaling_slope: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.observed = np.asarray(self.observed, dtype=np.float64)
        if self.observed.size != self.trials:
            raise ValueError("observed length must equal trials")


def _make_report(name, observed, bound, slope=None, **extras) -> ConcentrationReport:
    observed = np.asarray(observed, dtype=np.float64)
    rate = float(np.mean(np.abs(observed) > bound)) if observed.size else 0.0
    return ConcentrationReport(statistic_name=name, trials=observed.size,
                               observed=observed, bound=bound,
                               violation_rate=rate, scaling_slope=slope,
                               extras=extras)


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> tuple:
    """Least-squares slope and R^2 of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def power_iteration(matvec: Callable[[np.ndarray], np.ndarray], n: int,
                    rng: np.random.Generator, tol: float = 1e-8,
                    max_steps: int = 1000) -> tuple:
    """Dominant eigenvalue (by magnitude, signed) of a symmetric operator.

    Converges on the relative change of the Rayleigh quotient; returns
    (eigenvalue, vector, converged).
    """
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_steps):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v, True
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new, v, True
        lam = lam_new
    return lam, v, False


def spectral_norm(matvec: Callable[[np.ndarray], np.ndarray], n: int,
                  rng: np.random.Generator, tol: float = 1e-8,
                  max_steps: int = 1000) -> tuple:
    """Spectral norm of a symmetric (possibly indefinite) operator.

    First pass finds the eigenvalue of largest magnitude; a second pass on the
    operator shifted by it reaches the opposite end of the spectrum, and the
    norm is the larger magnitude of the two. Returns (norm, converged).
    """
    lam1, _, ok1 = power_iteration(matvec, n, rng, tol, max_steps)

    def shifted(v):
        return matvec(v) - lam1 * v

    lam2s, _, ok2 = power_iteration(shifted, n, rng, tol, max_steps)
    lam2 = lam2s + lam1
    return max(abs(lam1), abs(lam2)), ok1 and ok2


def check_design_maxima(n: int, m: int, trials: int, seed: int,
                        first_entry_constant: float = 5.0,
                        norm_constant: float = 6.0) -> Dict[str, ConcentrationReport]:
    """Per-trial max |a_i1| vs 5 sqrt(log m) and max ||a_i|| vs sqrt(6 n)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    max_first = np.empty(trials)
    max_norm = np.empty(trials)
    for k in range(trials):
        rows = stream(seed, _TRIAL_BASE + k).standard_normal((m, n))
        max_first[k] = np.max(np.abs(rows[:, 0]))
        max_norm[k] = np.max(np.linalg.norm(rows, axis=1))
    return {
        "max_abs_first_entry": _make_report(
            "max_i |a_i1|", max_first, first_entry_constant * math.sqrt(math.log(m)),
            n=n, m=m),
        "max_row_norm": _make_report(
            "max_i ||a_i||", max_norm, math.sqrt(norm_constant * n), n=n, m=m),
    }


def second_moment_deviation(rows: np.ndarray, signal_vec: np.ndarray) -> float:
    """|| (1/m) sum (a_i.x)^2 a_i a_i^T - ||x||^2 I - 2 x x^T ||_2 (dense)."""
    rows = np.asarray(rows, dtype=np.float64)
    x = np.asarray(signal_vec, dtype=np.float64)
    m = rows.shape[0]
    w = (rows @ x) ** 2
    M = rows.T @ (rows * w[:, None]) / m
    M -= float(x @ x) * np.eye(x.size) + 2.0 * np.outer(x, x)
    M = 0.5 * (M + M.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(M)))) if x.size > 1 else float(abs(M[0, 0]))


def check_hessian_concentration(n: int, m_list: Sequence[int], trials: int,
                                seed: int) -> ConcentrationReport:
    """Spectral deviation of the measurement-weighted second moment vs m.

    The deviation of (1/m) sum y_i a_i a_i^T from its mean I + 2 x* x*^T
    (unit signal) should shrink like sqrt(1/m) up to logs; the report carries
    the per-m medians and the log-log slope of the median against m.
    """
    if n > 500:
        raise ValueError("dense spectral norms are only supported for n <= 500")
    m_list = sorted(int(m) for m in m_list)
    x = np.zeros(n)
    x[0] = 1.0
    per_m = {}
    ratios = []
    for j, m in enumerate(m_list):
        devs = np.empty(trials)
        for k in range(trials):
            rows = stream(seed, _TRIAL_BASE + j * trials + k).standard_normal((m, n))
            devs[k] = second_moment_deviation(rows, x)
        per_m[m] = devs
        # Envelope sqrt(n log^3 m / m) per sample count (unit constant).
        ratios.append(devs / math.sqrt(n * math.log(m) ** 3 / m))
    medians = [float(np.median(per_m[m])) for m in m_list]
    slope = None
    if len(m_list) >= 2:
        slope, _ = fit_loglog_slope(m_list, medians)
    return _make_report("second-moment spectral deviation over envelope",
                        np.concatenate(ratios), 1.0, slope=slope,
                        n=n, m_list=m_list, medians=medians, per_m=per_m)


def check_local_smoothness(n: int, m: int, z_samples: int, seed: int,
                           norm_range: tuple = (0.5, 2.0)) -> ConcentrationReport:
    """Spectral norm of the Hessian at design-independent probes z.

    observed is ||hessian(z)|| / (10 ||z||^2 + 4), so the envelope is 1.
    Probes whose power iteration fails to converge are discarded and counted
    in extras["discarded"].
    """
    signal = Signal.standard(n)
    design = generate_design(n, m, GAUSSIAN, signal, seed)
    lo, hi = norm_range
    ratios = []
    discarded = 0
    for k in range(z_samples):
        rng = stream(seed, _PROBE_BASE + k)
        z = rng.standard_normal(n)
        z *= (lo + (hi - lo) * rng.random()) / np.linalg.norm(z)
        norm, ok = spectral_norm(objective.hessian_matvec(design, z), n,
                                 stream(seed, _POWER_BASE + k))
        if not ok:
            warnings.warn(f"power iteration did not converge for probe {k}; discarded")
            discarded += 1
            continue
        ratios.append(norm / (10.0 * float(z @ z) + 4.0))
    return _make_report("hessian norm over smoothness envelope",
                        np.array(ratios), 1.0, n=n, m=m, discarded=discarded)


def polynomial_deviation(case: int, a1: np.ndarray, aperp: np.ndarray,
                         z: np.ndarray) -> tuple:
    """Signed normalized deviation of one polynomial sample mean.

    Returns (deviation, degenerate): the sample mean minus its Gaussian
    expectation, divided by ||z||^power. A zero z makes the raw deviation
    exactly 0 but the normalization undefined; that is flagged degenerate and
    reported as 0.
    """
    if case not in POLY_CASES:
        raise ValueError(f"unknown case {case}; valid cases are 1..6")
    spec = POLY_CASES[case]
    z = np.asarray(z, dtype=np.float64)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        return 0.0, True
    w = aperp @ z
    if case == 1:
        stat = float(np.mean(a1 ** 3 * w))
    elif case == 2:
        stat = float(np.mean(a1 * w ** 3))
    elif case == 3:
        stat = float(np.mean((a1 * w) ** 2))
    elif case == 4:
        stat = float(np.mean(a1 ** 6 * w ** 2))
    elif case == 5:
        stat = float(np.mean(a1 ** 2 * w ** 6))
    else:
        stat = float(np.mean(a1 ** 2 * w ** 4))
    scale = nz ** spec["power"]
    return (stat - spec["expect"] * scale) / scale, False


def check_polynomial_concentration(case: int, n: int, m: int, trials: int,
                                   seed: int, epsilon: float = 0.1) -> ConcentrationReport:
    """Pointwise concentration of one polynomial sample mean at fresh probes.

    Each trial draws a fresh design and an independent z in R^{n-1}; observed
    holds the signed normalized deviations, compared to the envelope epsilon.
    extras carries the implied sample constant (expectation plus median
    deviation) for the nonzero-mean cases.
    """
    if case not in POLY_CASES:
        raise ValueError(f"unknown case {case}; valid cases are 1..6")
    devs = np.empty(trials)
    degenerate = 0
    for k in range(trials):
        rows = stream(seed, _TRIAL_BASE + k).standard_normal((m, n))
        z = stream(seed, _PROBE_BASE + k).standard_normal(n - 1)
        dev, degen = polynomial_deviation(case, rows[:, 0], rows[:, 1:], z)
        devs[k] = dev
        degenerate += degen
    spec = POLY_CASES[case]
    sample_constant = spec["expect"] + float(np.median(devs))
    return _make_report(f"case {case}: {spec['label']}", devs, epsilon,
                        n=n, m=m, case=case, degenerate=degenerate,
                        sample_constant=sample_constant,
                        median_abs=float(np.median(np.abs(devs))))
