import numpy as np
import pytest

from conftest import fd_gradient, fd_jacobian, rel_err
from wflow import (DesignEnsemble, Signal, UnsupportedConventionError,
                   fluctuation, generate_design, gradient, hessian,
                   hessian_matvec, loss, measure, population_gradient,
                   population_loss)
from wflow.model import stream


def _single_row_design():
    sig = Signal.standard(2)
    rows = np.array([[1.0, 0.0]])
    return DesignEnsemble(rows=rows, kind="gaussian",
                          measurements=measure(rows, sig),
                          seed=0, stream_id=0), sig


def test_loss_zero_at_signal_and_its_negation(small_problem):
    design, sig = small_problem
    assert loss(design, sig.entries) == 0.0
    assert loss(design, -sig.entries) == 0.0


def test_loss_direct_value():
    design, _ = _single_row_design()
    assert loss(design, np.array([2.0, 0.0])) == pytest.approx(2.25, abs=1e-15)


def test_gradient_zero_at_signal(small_problem):
    design, sig = small_problem
    assert np.array_equal(gradient(design, sig.entries), np.zeros(sig.n))


def test_gradient_direct_value():
    design, _ = _single_row_design()
    assert np.allclose(gradient(design, np.array([2.0, 0.0])),
                       np.array([6.0, 0.0]), atol=1e-15)


def test_gradient_matches_finite_differences():
    rng = stream(31, 0)
    for k in range(10):
        n = int(rng.integers(3, 12))
        sig = Signal.random_unit(n, seed=100 + k)
        design = generate_design(n, int(rng.integers(5, 40)), "gaussian", sig,
                                 seed=200 + k)
        x = rng.standard_normal(n)
        approx = fd_gradient(lambda v: loss(design, v), x, h=1e-5)
        assert rel_err(gradient(design, x), approx) <= 1e-6


def test_hessian_symmetric_and_matches_gradient_differences():
    rng = stream(32, 0)
    for k in range(6):
        n = int(rng.integers(3, 10))
        sig = Signal.random_unit(n, seed=300 + k)
        design = generate_design(n, int(rng.integers(5, 30)), "gaussian", sig,
                                 seed=400 + k)
        x = rng.standard_normal(n)
        H = hessian(design, x)
        assert np.max(np.abs(H - H.T)) <= 1e-12
        approx = fd_jacobian(lambda v: gradient(design, v), x, h=1e-5)
        assert rel_err(H, approx) <= 1e-5


def test_hessian_direct_value():
    design, _ = _single_row_design()
    assert np.allclose(hessian(design, np.array([2.0, 0.0])),
                       np.array([[11.0, 0.0], [0.0, 0.0]]), atol=1e-15)


def test_hessian_concentrates_at_signal():
    n, m = 50, 50_000
    sig = Signal.standard(n)
    design = generate_design(n, m, "gaussian", sig, seed=6)
    H = hessian(design, sig.entries)
    target = 2.0 * np.eye(n) + 4.0 * np.outer(sig.entries, sig.entries)
    assert np.max(np.abs(np.linalg.eigvalsh(H - target))) <= 0.5


def test_hessian_matvec_matches_dense(small_problem):
    design, _ = small_problem
    x = stream(33, 0).standard_normal(design.n)
    H = hessian(design, x)
    mv = hessian_matvec(design, x)
    for _ in range(4):
        v = stream(33, 1).standard_normal(design.n)
        assert np.allclose(mv(v), H @ v, atol=1e-11 * np.linalg.norm(H))


def test_population_gradient_fixed_points():
    n = 6
    sig = Signal.standard(n)
    assert np.array_equal(population_gradient(sig.entries, sig), np.zeros(n))
    assert np.array_equal(population_gradient(np.zeros(n), sig), np.zeros(n))
    saddle = np.zeros(n)
    saddle[1] = 1.0 / np.sqrt(3.0)
    assert np.linalg.norm(population_gradient(saddle, sig)) <= 1e-15
    # the whole saddle circle: any direction orthogonal to the signal
    v = stream(34, 0).standard_normal(n)
    v[0] = 0.0
    v *= 1.0 / (np.sqrt(3.0) * np.linalg.norm(v))
    assert np.linalg.norm(population_gradient(v, sig)) <= 1e-14


def test_population_gradient_is_mean_field_gradient():
    sig = Signal.random_unit(7, seed=8)
    x = stream(35, 0).standard_normal(7)
    approx = fd_gradient(lambda v: population_loss(v, sig), x, h=1e-5)
    assert rel_err(population_gradient(x, sig), approx) <= 1e-6


def test_gradient_unbiased_toward_population():
    # averaging empirical gradients over K ensembles converges ~ K^(-1/2)
    n, m = 20, 200
    sig = Signal.standard(n)
    x = stream(36, 0).standard_normal(n) * 0.7
    target = population_gradient(x, sig)
    ks = [4, 16, 64, 256]
    repeats = 10
    errs = []
    sid = 0
    for K in ks:
        per_repeat = []
        for _ in range(repeats):
            acc = np.zeros(n)
            for _ in range(K):
                d = generate_design(n, m, "gaussian", sig, seed=37, stream_id=sid)
                sid += 1
                acc += gradient(d, x)
            per_repeat.append(np.linalg.norm(acc / K - target))
        errs.append(np.median(per_repeat))
    slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_sign_symmetry(small_problem):
    design, _ = small_problem
    x = stream(38, 0).standard_normal(design.n)
    assert loss(design, x) == loss(design, -x)
    assert np.array_equal(gradient(design, -x), -gradient(design, x))
    assert np.array_equal(hessian(design, -x), hessian(design, x))


def test_fluctuation_identity_and_step_consistency():
    rng = stream(39, 0)
    for k in range(8):
        n = int(rng.integers(3, 20))
        m = int(rng.integers(5, 60))
        sig = Signal.standard(n)
        design = generate_design(n, m, "gaussian", sig, seed=500 + k)
        x = rng.standard_normal(n) * 0.8
        fb = fluctuation(design, x, sig)
        assert fb.has_breakdown
        combo = fb.i1 + fb.i2 - fb.i3 - fb.i4
        assert abs(fb.r1 - combo) <= 1e-9 * max(1.0, abs(fb.r1))
        assert fb.fluctuation_norm == pytest.approx(
            np.linalg.norm(fb.fluctuation), rel=1e-12)
        # one gradient step on the signal coordinate
        eta = 0.1
        x_next = x - eta * gradient(design, x)
        predicted = (1 + 3 * eta * (1 - x @ x)) * x[0] - eta * fb.r1
        assert abs(x_next[0] - predicted) <= 1e-9 * max(1.0, abs(x_next[0]))


def test_fluctuation_scaling_with_samples():
    # |r1| at fixed x shrinks like sqrt(1/m): ratio of medians near 4 for 16x m
    n = 50
    sig = Signal.standard(n)
    x = stream(42, 0).standard_normal(n) / np.sqrt(n)
    x[0] = abs(x[0])
    meds = {}
    for m in (2000, 32_000):
        vals = []
        for k in range(50):
            d = generate_design(n, m, "gaussian", sig, seed=41, stream_id=1000 + k)
            vals.append(abs(fluctuation(d, x, sig).r1))
        meds[m] = np.median(vals)
    ratio = meds[2000] / meds[32_000]
    assert 2.8 <= ratio <= 5.7


def test_fluctuation_requires_first_axis_frame():
    sig = Signal.random_unit(10, seed=12)
    design = generate_design(10, 40, "gaussian", sig, seed=12)
    x = stream(42, 0).standard_normal(10)
    fb = fluctuation(design, x, sig)
    assert not fb.has_breakdown and fb.i1 is None
    assert np.isfinite(fb.r1)
    with pytest.raises(UnsupportedConventionError):
        fluctuation(design, x, sig, require_breakdown=True)


def test_dimension_mismatch_errors(small_problem):
    design, _ = small_problem
    with pytest.raises(ValueError):
        loss(design, np.zeros(design.n + 1))
    with pytest.raises(ValueError):
        gradient(design, np.zeros(design.n + 1))
    with pytest.raises(ValueError):
        hessian(design, np.zeros(design.n + 1))
