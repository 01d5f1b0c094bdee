import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from multittm.costs import (alg_comm_cost, alg_compute, alg_words_exact, comp_overhead,
                            seq_intermediate_sizes, ttm_seq_comm_cost, ttm_seq_compute)
from multittm.problem import InvalidGridError, MultiTtmShape, ProcGrid

from conftest import pow2_shape_and_P

SMALL = MultiTtmShape((4, 8, 64), (2, 2, 2))


def naive_words(shape, grid):
    """Accessed blocks minus the owned share of every array."""
    P = Fraction(grid.P)
    bn = [Fraction(a, p) for a, p in zip(shape.n, grid.p)]
    br = [Fraction(b, q) for b, q in zip(shape.r, grid.q)]
    accessed = math.prod(bn) + math.prod(br) + sum(x * y for x, y in zip(bn, br))
    return accessed - (shape.n_total + shape.r_total + sum(shape.matrix_sizes)) / P


@st.composite
def divisible_grids(draw):
    d = draw(st.integers(2, 4))
    pe = [draw(st.integers(0, 3)) for _ in range(d)]
    qe = [draw(st.integers(0, 3)) for _ in range(d)]
    n = tuple(2 ** (e + draw(st.integers(1, 2))) for e in pe)
    r = tuple(2 ** (e + draw(st.integers(1, 2))) for e in qe)
    return MultiTtmShape(n, r), ProcGrid(tuple(2**e for e in pe), tuple(2**e for e in qe))


def test_known_grid():
    c = alg_comm_cost(SMALL, ProcGrid((1, 1, 4), (1, 1, 1)))
    # output gather 8 * 3/4, factor gathers (8 + 16) * 3/4, third factor owned
    assert c.total_bandwidth == 24
    # local blocks 4x8x16 -> 2x8x16 -> 2x2x16 -> 2x2x2, then the reduction adds
    assert c.flops == 2 * 512 * 2 + 2 * 256 * 2 + 2 * 64 * 2 + 6
    assert c.latency == pytest.approx(3 * 2)
    assert not c.ceil_blocks


def test_one_processor_is_free():
    c = alg_comm_cost(SMALL, ProcGrid((1, 1, 1), (1, 1, 1)))
    assert c.total_bandwidth == 0 and c.latency == 0


@given(divisible_grids())
def test_exact_matches_naive(args):
    shape, grid = args
    assert alg_words_exact(shape, grid) == naive_words(shape, grid)


@given(divisible_grids())
def test_tensor_and_matrix_split(args):
    shape, grid = args
    c = alg_comm_cost(shape, grid)
    assert c.tensor_words + c.matrix_words == pytest.approx(c.total_bandwidth, abs=1e-9)
    assert c.tensor_words >= 0 and c.matrix_words >= 0


def test_exact_needs_integer_grid():
    with pytest.raises(InvalidGridError):
        alg_words_exact(SMALL, ProcGrid((1.5, 1, 1), (1, 1, 1), 1.5))


def test_non_dividing_grid_is_flagged():
    shape = MultiTtmShape((6, 6), (3, 3))
    c = alg_comm_cost(shape, ProcGrid((4, 1), (1, 1)))
    assert c.ceil_blocks
    # blocks of 2x6 input and 3x3 output
    assert c.tensor_in == 12 and c.tensor_out == 9


def test_compute_counts_each_step():
    shape = MultiTtmShape((4, 4), (2, 2))
    grid = ProcGrid((2, 1), (1, 1))
    bn, br = [2, 4], [2, 2]
    expected = 2 * bn[0] * bn[1] * br[0] + 2 * br[0] * bn[1] * br[1] + (1 - 1 / 2) * 4
    assert alg_compute(shape, grid) == expected


def test_compute_order_changes_flops():
    shape = MultiTtmShape((64, 4), (2, 2))
    g = ProcGrid((1, 1), (1, 1))
    assert alg_compute(shape, g, order=[0, 1]) < alg_compute(shape, g, order=[1, 0])


def test_intermediate_sizes():
    assert seq_intermediate_sizes(SMALL) == [2 * 8 * 64, 2 * 2 * 64, 8]


def test_ttm_seq_known_grid():
    s = ttm_seq_comm_cost(SMALL, (1, 1, 8))
    assert s.total == 28
    assert (s.tensor_part, s.matrix_part) == (7, 21)
    assert s.tensor_part + s.matrix_part == pytest.approx(s.total)


def test_ttm_seq_small_cube():
    s = ttm_seq_comm_cost(MultiTtmShape((4, 4, 4), (2, 2, 2)), (1, 1, 8))
    # accessed 4 + 8 + 2 + 8 + 8 + 1, owned 10
    assert s.intermediate_terms == (4, 2, 8) and s.matrix_terms == (8, 8, 1)
    assert s.owned == 10 and s.total == 21


def test_ttm_seq_single_processor():
    assert ttm_seq_comm_cost(SMALL, (1, 1, 1)).total == 0


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_ttm_seq_against_direct_count(a, b, c):
    tilde = (2**a, 2**b, 2**c)
    P = math.prod(tilde)
    s = ttm_seq_comm_cost(SMALL, tilde, exact=True)
    sizes = seq_intermediate_sizes(SMALL)
    expected = Fraction(0)
    for j in range(3):
        # output reduce-scatter over tilde_j, factor gather over P / tilde_j
        expected += Fraction(sizes[j] * tilde[j], P) * (1 - Fraction(1, tilde[j]))
        expected += Fraction(SMALL.n[j] * SMALL.r[j], tilde[j]) * (1 - Fraction(tilde[j], P))
    assert s.total == expected


def test_seq_compute():
    expected = (2 * 4 * 8 * 64 * 2 + 2 * 2 * 8 * 64 * 2 + 2 * 2 * 2 * 64 * 2) / 4
    assert ttm_seq_compute(SMALL, 4) == expected


@given(pow2_shape_and_P(d_max=4))
def test_overhead_zero_on_one_processor(args):
    shape, _ = args
    g = ProcGrid((1,) * shape.d, (1,) * shape.d)
    # one rank runs the same sequence with no reduction
    assert comp_overhead(shape, g) == 0
