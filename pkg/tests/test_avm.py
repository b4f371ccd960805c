import numpy as np
import pytest
from scipy.stats import wasserstein_distance

from uqim.avm import AvmResult, EmpiricalCdf, avm
from uqim.errors import DomainError, InsufficientDataError


def test_ecdf_step_values():
    f = EmpiricalCdf(values=[1.0, 2.0])
    assert f(1.5) == 0.5
    assert f(0.999) == 0.0
    assert f(2.0) == 1.0
    assert f(5.0) == 1.0
    g = EmpiricalCdf(values=[1.0, 1.0, 2.0])
    assert g(1.0) == 2.0 / 3.0


def test_ecdf_vector_and_sorting():
    f = EmpiricalCdf(values=[3.0, 1.0, 2.0])
    assert np.array_equal(f.values, [1.0, 2.0, 3.0])
    t = np.array([0.0, 1.0, 2.5, 3.0])
    assert np.array_equal(f(t), [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])


def test_ecdf_errors():
    with pytest.raises(InsufficientDataError):
        EmpiricalCdf(values=[])
    with pytest.raises(DomainError):
        EmpiricalCdf(values=[np.inf])


def test_avm_identical_samples():
    v = np.array([0.3, 1.7, -2.0, 0.3])
    res = avm(v, v)
    assert res.exact == 0.0
    assert res.riemann == 0.0


def test_avm_point_masses():
    res = avm([0.0], [1.0])
    assert res.exact == 1.0
    assert abs(res.riemann - 1.0) <= 2.0 / res.grid_steps * (res.hi - res.lo)


def test_avm_half_shift():
    res = avm([0.0, 1.0], [0.0, 2.0])
    assert res.exact == 0.5


def test_avm_symmetry():
    rng = np.random.default_rng(0)
    a = rng.normal(size=13)
    b = rng.normal(size=7) + 0.5
    fwd = avm(a, b)
    rev = avm(b, a)
    assert fwd.exact == rev.exact
    assert fwd.riemann == rev.riemann


def test_avm_equals_wasserstein():
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = rng.normal(size=rng.integers(2, 40))
        b = rng.normal(size=rng.integers(2, 40)) + rng.normal()
        res = avm(a, b)
        assert res.exact == pytest.approx(wasserstein_distance(a, b), abs=1e-12)


def test_avm_equal_sizes_sorted_difference():
    rng = np.random.default_rng(2)
    a = rng.normal(size=25)
    b = rng.normal(size=25) + 1.0
    res = avm(a, b)
    want = float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    assert res.exact == pytest.approx(want, abs=1e-12)


def test_avm_riemann_converges():
    rng = np.random.default_rng(3)
    a = rng.normal(size=50)
    b = 1.3 * rng.normal(size=80) + 0.2
    res = avm(a, b, grid_steps=100_000)
    assert abs(res.riemann - res.exact) <= 1e-3


def test_avm_validation():
    with pytest.raises(DomainError):
        avm([1.0], [2.0], grid_steps=0)
    with pytest.raises(InsufficientDataError):
        avm([], [1.0])


def test_avm_result_fields():
    res = avm([0.0, 1.0], [0.5], grid_steps=10)
    assert isinstance(res, AvmResult)
    assert res.grid_steps == 10
    # 1% margin on each side of the pooled range
    assert res.lo == pytest.approx(-0.01) and res.hi == pytest.approx(1.01)
