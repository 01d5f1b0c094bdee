import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multittm.bounds import (LoadBalanceError, cubical_lb, first_ttm_lb, matmul_lb, multi_ttm_lb,
                             ttm_seq_lb, ttm_seq_steps)
from multittm.problem import InvalidShapeError, MultiTtmShape

from conftest import pow2_shape_and_P


def matmul_oracle(m, k, n, P, steps=1200):
    """Grid search in log space: minimise the sum of the three accessed
    pieces subject to the Loomis-Whitney product bound, each piece at least
    its owned share and at most the whole array."""
    sizes = sorted((m * k, k * n, m * n))
    target = 2 * math.log(m * k * n / P)
    lo = [math.log(c / P) for c in sizes]
    hi = [math.log(c) for c in sizes]
    a = np.linspace(lo[0], hi[0], steps)[:, None]
    b = np.linspace(lo[1], hi[1], steps)[None, :]
    c = np.maximum(target - a - b, lo[2])
    total = np.where(c <= hi[2] + 1e-12, np.exp(a) + np.exp(b) + np.exp(c), np.inf)
    return max(0.0, total.min() - sum(sizes) / P)


def test_small_mixed_shape():
    b = multi_ttm_lb(MultiTtmShape((4, 8, 64), (2, 2, 2)), 4)
    assert (b.A, b.B, b.owned, b.lb) == pytest.approx((56, 520, 552, 24))
    assert b.lb == pytest.approx(b.lb_matrix + b.lb_tensor)


def test_single_processor_has_zero_bound():
    assert multi_ttm_lb(MultiTtmShape((16, 16, 16), (4, 4, 4)), 1).lb == 0


def test_too_many_processors():
    with pytest.raises(LoadBalanceError):
        multi_ttm_lb(MultiTtmShape((2, 2), (2, 2)), 17)


def test_not_canonical():
    with pytest.raises(InvalidShapeError):
        multi_ttm_lb(MultiTtmShape((2, 2), (4, 4)), 2)


@pytest.mark.parametrize("a,b", [(4, 2), (6, 2), (12, 4), (20, 8)])
def test_cubical_closed_form_agrees(a, b):
    shape = MultiTtmShape((2**a,) * 3, (2**b,) * 3)
    for L in range(0, 3 * (a + b) // 2):
        P = 2**L
        assert cubical_lb(shape.n_total, shape.r_total, P) == pytest.approx(
            multi_ttm_lb(shape, P).lb, rel=1e-9, abs=1e-6)


def test_cubical_rejects_non_cubes():
    with pytest.raises(InvalidShapeError):
        cubical_lb(10, 8, 2)


@pytest.mark.parametrize("dims,P", [
    ((64, 64, 64), 8), ((1000, 10, 10), 4), ((1000, 10, 10), 400),
    ((1000, 100, 10), 50), ((512, 8, 8), 2), ((4096, 16, 16), 1024), ((16, 4, 64), 64),
])
def test_matmul_against_oracle(dims, P):
    assert matmul_lb(*dims, P) == pytest.approx(matmul_oracle(*dims, P), rel=1e-4, abs=1e-6)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12), st.integers(0, 14))
def test_matmul_oracle_property(e1, e2, e3, L):
    m, k, n = 2**e1, 2**e2, 2**e3
    P = 2**min(L, e1 + e2 + e3)
    assert matmul_lb(m, k, n, P) == pytest.approx(matmul_oracle(m, k, n, P, 600), rel=2e-3, abs=1e-6)


def test_matmul_cube():
    m = 2**10
    P = 2**9
    expected = 3 * (m**3 / P) ** (2 / 3) - 3 * m * m / P
    assert matmul_lb(m, m, m, P) == pytest.approx(expected)


@given(st.integers(1, 10), st.integers(1, 10), st.integers(1, 10))
def test_matmul_symmetric_in_dims(a, b, c):
    m, k, n = 2**a, 2**b, 2**c
    vals = {round(matmul_lb(*perm, 8), 9) for perm in [(m, k, n), (n, m, k), (k, n, m), (n, k, m)]}
    assert len(vals) == 1


def test_seq_steps_follow_mode_order():
    shape = MultiTtmShape((4, 8, 64), (2, 2, 2))
    assert ttm_seq_steps(shape) == [(2, 4, 512), (2, 8, 128), (2, 64, 4)]
    assert ttm_seq_steps(shape, [2, 1, 0]) == [(2, 64, 32), (2, 8, 8), (2, 4, 4)]


def test_seq_lb_step_counts():
    shape = MultiTtmShape((2**6,) * 3, (2**3,) * 3)
    steps = ttm_seq_steps(shape)
    assert ttm_seq_lb(shape, 8) == pytest.approx(sum(matmul_lb(*s, 8) for s in steps))
    assert first_ttm_lb(shape, 8) == pytest.approx(matmul_lb(*steps[0], 8))
    with pytest.raises(ValueError):
        ttm_seq_lb(shape, 8, n_steps=4)


@given(pow2_shape_and_P(d_max=5))
def test_lb_non_negative_and_bounded_by_one_processor(args):
    shape, P = args
    b = multi_ttm_lb(shape, P)
    assert b.lb >= 0
    # a single rank owning everything would communicate the remaining (P-1)/P
    total = shape.n_total + shape.r_total + sum(shape.matrix_sizes)
    assert b.lb <= total


@given(pow2_shape_and_P(d_max=5))
def test_breakdown_pieces(args):
    shape, P = args
    b = multi_ttm_lb(shape, P)
    assert b.A >= sum(shape.matrix_sizes) / P * (1 - 1e-12)
    assert b.B >= (shape.n_total + shape.r_total) / P * (1 - 1e-12)
    assert b.lb == pytest.approx(max(0.0, b.A + b.B - b.owned), rel=1e-9, abs=1e-6)
