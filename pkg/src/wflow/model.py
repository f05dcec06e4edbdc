"""Measurement model: sensing vectors, quadratic measurements, signal-frame geometry.

One experiment's random environment is a DesignEnsemble: m sensing vectors a_i
(rows of a dense matrix) together with the measurements y_i = (a_i^T x*)^2 they
produce against a ground-truth signal x*. Everything downstream (solver runs,
auxiliary sequences, Monte Carlo verifiers) consumes these immutable objects.

Randomness comes from counter-based Philox streams keyed by (seed, stream_id),
so one seed spawns many mutually independent substreams. This is what lets a
leave-one-out experiment hold the design fixed while drawing sign flips or
initial points from their own streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
DESIGN_KINDS = (GAUSSIAN, RADEMACHER)

# Conventional stream ids. Callers may use any 64-bit value; these just keep
# the standard experiment layout collision-free under a single seed.
STREAM_DESIGN = 0
STREAM_INIT = 1
STREAM_FLIPS = 2
STREAM_DIRECTION = 3
STREAM_SIGNAL = 4

_MASK64 = 0xFFFFFFFFFFFFFFFF


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic generator for the (seed, stream_id) substream.

    Philox is a counter-based generator keyed by the pair, so draws are a pure
    function of (seed, stream_id, draw index): same key, same bits, and
    distinct stream ids under one seed are independent. Gaussian variates are
    produced by numpy's ziggurat transform of the uniform stream, which is
    deterministic within a given numpy build.
    """
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signal:
    """Ground-truth signal x* with its cached Euclidean norm."""

    entries: np.ndarray
    norm: float

    def __post_init__(self):
        entries = _frozen(self.entries)
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 1 or entries.size < 2:
            raise ValueError("signal must be a vector of length n >= 2")
        # A zero signal is representable (it measures to y = 0); operations
        # that need a direction (decompose, solver runs) reject it themselves.
        recomputed = float(np.linalg.norm(entries))
        if abs(self.norm - recomputed) > 1e-12 * max(recomputed, 1e-300):
            raise ValueError("cached norm disagrees with recomputed norm")

    @property
    def n(self) -> int:
        return self.entries.size

    @classmethod
    def from_entries(cls, entries) -> "Signal":
        entries = np.asarray(entries, dtype=np.float64)
        return cls(entries=entries, norm=float(np.linalg.norm(entries)))

    @classmethod
    def standard(cls, n: int) -> "Signal":
        """Unit signal along the first coordinate axis (the default frame)."""
        e1 = np.zeros(n)
        e1[0] = 1.0
        return cls(entries=e1, norm=1.0)

    @classmethod
    def random_unit(cls, n: int, seed: int, stream_id: int = STREAM_SIGNAL) -> "Signal":
        """Uniformly random unit-norm signal (an isometry applied to e1)."""
        v = stream(seed, stream_id).standard_normal(n)
        v /= np.linalg.norm(v)
        return cls(entries=v, norm=1.0)

    def is_first_axis(self, tol: float = 1e-12) -> bool:
        """True when the signal is the unit first basis vector."""
        e = self.entries
        return abs(e[0] - 1.0) <= tol and not np.any(e[1:])


@dataclass(frozen=True)
class DesignEnsemble:
    """m sensing vectors (rows) plus the measurements they took of one signal."""

    rows: np.ndarray          # (m, n)
    kind: str
    measurements: np.ndarray  # (m,), y_i = <a_i, x*>^2
    seed: int
    stream_id: int

    def __post_init__(self):
        rows = _frozen(self.rows)
        meas = _frozen(self.measurements)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "measurements", meas)
        if rows.ndim != 2:
            raise ValueError("rows must be an (m, n) array")
        if meas.shape != (rows.shape[0],):
            raise ValueError("measurements length must equal the number of rows")
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}")
        if np.any(meas < 0):
            raise ValueError("measurements must be nonnegative")

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class SignFlipVector:
    """m signs in {-1, +1} used to randomize the first entry of each row."""

    flips: np.ndarray

    def __post_init__(self):
        flips = _frozen(self.flips)
        object.__setattr__(self, "flips", flips)
        if flips.ndim != 1:
            raise ValueError("flips must be a vector")
        if not np.all(np.abs(flips) == 1.0):
            raise ValueError("flips must take values in {-1, +1}")

    @classmethod
    def random(cls, m: int, seed: int, stream_id: int = STREAM_FLIPS) -> "SignFlipVector":
        """Fair-coin signs, independent of any design drawn from other streams."""
        bits = stream(seed, stream_id).integers(0, 2, size=m)
        return cls(flips=2.0 * bits - 1.0)

    @classmethod
    def matching_signs(cls, design: DesignEnsemble) -> "SignFlipVector":
        """Signs of each row's first entry, the exact-equality control case.

        Flipping with these reproduces the original ensemble bitwise (zero
        first entries map to +1, which leaves the stored 0.0 untouched).
        """
        return cls(flips=np.where(design.rows[:, 0] >= 0, 1.0, -1.0))


@dataclass(frozen=True)
class Decomposition:
    """Split of a vector into signal-aligned and orthogonal parts.

    `parallel` is the coefficient along the unit signal direction, so for a
    unit-norm signal x = parallel * x* + orthogonal, and with x* = e1 the
    parallel part is simply the first coordinate.
    """

    parallel: float
    orthogonal: np.ndarray
    orthogonal_norm: float


def generate_design(n: int, m: int, kind: str, signal: Signal, seed: int,
                    stream_id: int = STREAM_DESIGN) -> DesignEnsemble:
    """Draw an (m, n) design from the (seed, stream_id) stream and measure the signal.

    Gaussian rows have i.i.d. standard normal entries; Rademacher rows have
    i.i.d. +-1 entries (unit variance already, no extra normalization).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if m < 1:
        raise ValueError("m must be at least 1")
    if signal.n != n:
        raise ValueError(f"signal length {signal.n} does not match n={n}")
    rng = stream(seed, stream_id)
    if kind == GAUSSIAN:
        rows = rng.standard_normal((m, n))
    elif kind == RADEMACHER:
        rows = 2.0 * rng.integers(0, 2, size=(m, n)) - 1.0
    else:
        raise ValueError(f"unknown design kind {kind!r}")
    return DesignEnsemble(rows=rows, kind=kind,
                          measurements=measure(rows, signal),
                          seed=seed, stream_id=stream_id)


def measure(design_rows: np.ndarray, signal: Signal) -> np.ndarray:
    """Quadratic measurements y_i = <a_i, x*>^2."""
    rows = np.asarray(design_rows, dtype=np.float64)
    if rows.shape[-1] != signal.n:
        raise ValueError("design row length does not match signal length")
    proj = rows @ signal.entries
    return proj * proj


def flip_first_entry(design: DesignEnsemble, flips: SignFlipVector) -> DesignEnsemble:
    """Replace row i's first entry by flips_i * |a_i1|, keeping the rest.

    The measurements are carried over unchanged: against a first-axis signal
    the flipped ensemble produces exactly the same y_i = |a_i1|^2, which is
    the point of the construction.
    """
    if flips.flips.shape != (design.m,):
        raise ValueError("flips length must equal m")
    rows = design.rows.copy()
    rows[:, 0] = flips.flips * np.abs(rows[:, 0])
    return DesignEnsemble(rows=rows, kind=design.kind,
                          measurements=design.measurements,
                          seed=design.seed, stream_id=design.stream_id)


def decompose(x: np.ndarray, signal: Signal) -> Decomposition:
    """Split x into its component along the signal direction and the remainder."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != signal.entries.shape:
        raise ValueError("x and signal must have the same length")
    if signal.norm == 0.0:
        raise ValueError("cannot decompose against a zero signal")
    unit = signal.entries / signal.norm
    parallel = float(x @ unit)
    orthogonal = x - parallel * unit
    return Decomposition(parallel=parallel, orthogonal=orthogonal,
                         orthogonal_norm=float(np.linalg.norm(orthogonal)))
