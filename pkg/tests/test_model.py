import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaossim.errors import DomainError, EmptyStreamError, EnumerationLimitError, EvaluationOverflow, InputError, SpecError
from chaossim.model import (
    GaussianStream,
    ModelScale,
    Partition,
    cauchy_recover,
    coeffs_by_partitions,
    coeffs_by_recurrence,
    default_cauchy_points,
    enumerate_partitions,
    sample_stream,
    theorem_window,
)

SQRT2 = math.sqrt(2)


# -- sample_stream ---------------------------------------------------------------


def test_stream_second_moment_is_one():
    x = sample_stream(7, 10**5).values
    sq = np.abs(x) ** 2
    assert abs(sq.mean() - 1) <= 4 * sq.std(ddof=1) / math.sqrt(sq.size)


def test_stream_real_and_imaginary_parts_uncorrelated():
    x = sample_stream(7, 10**5).values
    prod = x.real * x.imag
    assert abs(prod.mean()) <= 4 * prod.std(ddof=1) / math.sqrt(prod.size)
    assert x.real.var() == pytest.approx(0.5, abs=0.01)
    assert x.imag.var() == pytest.approx(0.5, abs=0.01)


def test_stream_is_deterministic_and_prefix_stable():
    a = sample_stream(7, 100).values
    b = sample_stream(7, 100).values
    assert a.tobytes() == b.tobytes()
    assert sample_stream(7, 250).values[:100].tobytes() == a.tobytes()
    assert sample_stream(8, 100).values.tobytes() != a.tobytes()


def test_stream_rejects_empty():
    with pytest.raises(EmptyStreamError):
        sample_stream(7, 0)


def test_stream_values_are_read_only():
    s = sample_stream(1, 4)
    with pytest.raises(ValueError):
        s.values[0] = 0


# -- recurrence --------------------------------------------------------------------


def test_recurrence_of_zero_stream():
    c = coeffs_by_recurrence(GaussianStream.zeros(8), 8, 8).coeffs
    assert c[0] == 1
    assert np.all(c[1:] == 0)


def test_recurrence_two_term_injection():
    # partitions (2) and (1, 1): X(2)/sqrt(2) + X(1)^2 / 2
    c = coeffs_by_recurrence(GaussianStream.from_values([1, 1]), 2, 2)
    assert c[2] == pytest.approx((1 + SQRT2) / 2, abs=1e-15)
    assert c[2] == pytest.approx(1.20711, abs=1e-5)


def test_recurrence_single_mode_is_exponential():
    s = GaussianStream.from_values([1] + [0] * 19)
    c = coeffs_by_recurrence(s, 20, 20).coeffs
    expect = [1 / math.factorial(n) for n in range(21)]
    np.testing.assert_allclose(c.real, expect, rtol=1e-13, atol=0)


@pytest.mark.parametrize("seed", [1, 2, 3, 11])
def test_recurrence_matches_partition_oracle(seed):
    s = sample_stream(seed, 12)
    c = coeffs_by_recurrence(s, 12, 12)
    for n in range(13):
        part = coeffs_by_partitions(s, n, 12)
        assert abs(c[n] - part) <= 1e-9 * max(1.0, abs(part))


@pytest.mark.parametrize("cap", [1, 2, 3, 5])
def test_capped_recurrence_matches_capped_partitions(cap):
    s = sample_stream(5, 12)
    c = coeffs_by_recurrence(s, 12, cap)
    for n in range(13):
        part = coeffs_by_partitions(s, n, cap)
        assert abs(c[n] - part) <= 1e-9 * max(1.0, abs(part))


complex_values = st.builds(complex, st.floats(-3, 3), st.floats(-3, 3))


@settings(max_examples=40, deadline=None)
@given(st.lists(complex_values, min_size=9, max_size=9), st.integers(0, 9))
def test_oracle_equivalence_on_injected_streams(values, cap):
    s = GaussianStream.from_values(values)
    c = coeffs_by_recurrence(s, 9, cap)
    for n in range(10):
        part = coeffs_by_partitions(s, n, cap)
        assert abs(c[n] - part) <= 1e-9 * max(1.0, abs(part))


def test_smoothness_monotonicity():
    s = sample_stream(9, 80)
    a = coeffs_by_recurrence(s, 40, 40).coeffs
    b = coeffs_by_recurrence(s, 40, 80).coeffs
    c = coeffs_by_recurrence(s, 40).coeffs
    assert a.tobytes() == b.tobytes() == c.tobytes()


def test_recurrence_needs_enough_stream():
    with pytest.raises(InputError):
        coeffs_by_recurrence(sample_stream(1, 5), 10, 10)
    # only min(D, K) values are read
    coeffs_by_recurrence(sample_stream(1, 5), 10, 5)


def test_second_moment_normalisation_small_n():
    vals = np.array([abs(coeffs_by_recurrence(sample_stream(1000 + i, 10), 10, 10)[10]) ** 2 for i in range(4000)])
    assert abs(vals.mean() - 1) <= 4 * vals.std(ddof=1) / math.sqrt(vals.size)


# -- partitions --------------------------------------------------------------------


def test_partition_counts():
    assert len(enumerate_partitions(4, 4)) == 5
    assert {p.parts for p in enumerate_partitions(4, 2)} == {(2, 2), (2, 1, 1), (1, 1, 1, 1)}
    assert [p.parts for p in enumerate_partitions(0, 3)] == [()]


@pytest.mark.parametrize("n, count", [(1, 1), (5, 7), (10, 42), (20, 627), (30, 5604)])
def test_partition_numbers(n, count):
    parts = enumerate_partitions(n, n)
    assert len(parts) == count
    assert len({p.parts for p in parts}) == count
    assert all(p.n == n for p in parts)


def test_partition_multiplicities():
    p = Partition((3, 1, 1))
    assert p.multiplicities == {3: 1, 1: 2}
    assert sum(j * m for j, m in p.multiplicities.items()) == p.n == 5
    with pytest.raises(ValueError):
        Partition((1, 2))


def test_partition_oracle_small_cases():
    x = 0.3 - 1.7j
    assert coeffs_by_partitions(GaussianStream.from_values([x]), 0) == 1
    assert coeffs_by_partitions(GaussianStream.from_values([x]), 1) == x
    assert coeffs_by_partitions(GaussianStream.from_values([1, 1]), 2) == pytest.approx(0.5 + 1 / SQRT2)


def test_enumeration_limit():
    with pytest.raises(EnumerationLimitError, match="40"):
        enumerate_partitions(41, 41)
    with pytest.raises(EnumerationLimitError) as info:
        coeffs_by_partitions(sample_stream(1, 50), 50)
    assert info.value.limit == 40
    assert len(enumerate_partitions(45, 2, limit=50)) == 23


# -- Cauchy quadrature ---------------------------------------------------------------


def test_cauchy_zero_stream():
    assert cauchy_recover(GaussianStream.zeros(8), 0, 8, 0.5, 16) == pytest.approx(1)


def test_cauchy_exponential_coefficient():
    s = GaussianStream.from_values([1] + [0] * 9)
    assert cauchy_recover(s, 5, 10, 0.9, 256) == pytest.approx(1 / 120, abs=1e-14)


@pytest.mark.parametrize("seed", [1, 2])
def test_cauchy_matches_recurrence(seed):
    s = sample_stream(seed, 64)
    c = coeffs_by_recurrence(s, 32, 64)
    assert abs(cauchy_recover(s, 32, 64, 0.98, 4096) - c[32]) <= 1e-6


def test_cauchy_error_shrinks_geometrically_in_points():
    # polynomial with a long tail: F = exp(X(1) z) with X(1) = 3
    s = GaussianStream.from_values([3.0])
    exact = 3.0**4 / math.factorial(4)
    errs = [abs(cauchy_recover(s, 4, 1, 0.9, q) - exact) for q in (8, 12, 16)]
    assert errs[0] > errs[1] > errs[2]
    # leading alias term c(n + Q) r^Q
    alias = 3.0 ** 12 / math.factorial(12) * 0.9**8
    assert errs[0] == pytest.approx(alias, rel=0.05)


def test_cauchy_domain_and_overflow():
    s = sample_stream(1, 8)
    with pytest.raises(DomainError):
        cauchy_recover(s, 1, 8, 0.0)
    with pytest.raises(EvaluationOverflow) as info:
        cauchy_recover(GaussianStream.from_values([1000.0]), 1, 1, 1.0, 8)
    assert info.value.t == 0.0


def test_default_points_meet_target():
    q = default_cauchy_points(0.98, 32, 64)
    assert 0.98**q <= 1e-8 and q > 64 and q & (q - 1) == 0


# -- scales --------------------------------------------------------------------------


def test_model_scale_derived_quantities():
    sc = ModelScale(N=10**6, W=2, C=3, sigma=0.0)
    assert sc.log_N_sigma == 13
    assert sc.M == 8
    sc = ModelScale(N=10**6, W=2, C=3, sigma=math.exp(-5.5))
    assert sc.log_N_sigma == 5
    assert ModelScale(N=math.exp(4)).log_N_sigma == 4
    with pytest.raises(SpecError):
        ModelScale(N=100, W=1.5, C=1)


def test_theorem_window():
    w = theorem_window(7)
    assert list(w) == [8, 9]
    assert theorem_window(8192)[0] == 9363 and theorem_window(8192)[-1] == 10922
