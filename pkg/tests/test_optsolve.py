import itertools
import math

import numpy as np
import pytest
from hypothesis import given

from multittm.optsolve import (CappedMinSumProblem, CertificateInvalidError, InfeasibleDivisorError,
                               case_index, dual_point, solve, solve_matrix_term, solve_tensor_term,
                               thresholds_exact, verify_kkt)
from multittm.problem import MultiTtmShape

from conftest import capped_problems


def brute_force_min(caps, D, steps=400):
    """Grid search over the feasible box; the last coordinate is set to the
    smallest value meeting the product constraint."""
    target = math.prod(caps) / D
    axes = [np.linspace(c / steps, c, steps) for c in caps[:-1]]
    best = math.inf
    for pt in itertools.product(*axes):
        last = target / math.prod(pt)
        if last <= caps[-1] * (1 + 1e-12):
            best = min(best, sum(pt) + last)
    return best


def test_all_interior():
    sol = solve(CappedMinSumProblem((8, 8, 8), 8))
    assert sol.case_index == 3
    assert sol.x_star == pytest.approx((4, 4, 4))
    assert sol.objective == pytest.approx(12)
    assert brute_force_min((8, 8, 8), 8, 200) >= 12 - 1e-9


def test_two_caps_saturated():
    prob = CappedMinSumProblem((2, 4, 64), 4)
    assert [float(L) for L in thresholds_exact(prob.caps)] == [1, 16, 64]
    sol = solve(prob)
    assert sol.case_index == 1
    assert sol.x_star == pytest.approx((2, 4, 16))
    assert sol.objective == pytest.approx(22)
    assert brute_force_min((2, 4, 64), 4) >= 22 - 1e-9


def test_divisor_one_saturates_every_cap():
    sol = solve(CappedMinSumProblem((3, 5, 7, 11), 1))
    assert sol.x_star == pytest.approx((3, 5, 7, 11))


def test_infeasible_divisor():
    with pytest.raises(InfeasibleDivisorError):
        CappedMinSumProblem((2, 3), 0.5)
    with pytest.raises(ValueError):
        CappedMinSumProblem((3, 2), 2)


def test_threshold_tie_goes_to_higher_case():
    # L_2 = 16 exactly
    assert case_index((2, 4, 64), 16) == 2
    assert case_index((2, 4, 64), 15.999) == 1


def test_dual_point_all_interior():
    # mu_0 = 1 / prod_{l != j} x_l = 1/16 makes 1 - mu_0 * 16 = 0
    mu = dual_point(CappedMinSumProblem((8, 8, 8), 8))
    assert mu == pytest.approx((1 / 16, 0, 0, 0))


def test_dual_point_with_caps():
    prob = CappedMinSumProblem((2, 4, 64), 4)
    mu = dual_point(prob)
    assert mu[1:] == pytest.approx((7, 3, 0))
    assert mu[0] == pytest.approx(1 / 8)
    cert = verify_kkt(prob, (2, 4, 16))
    assert cert.valid


def test_kkt_rejects_perturbed_point():
    with pytest.raises(CertificateInvalidError) as exc:
        verify_kkt(CappedMinSumProblem((2, 4, 64), 4), (2, 4, 17))
    assert "stationarity" in exc.value.conditions or "complementary slackness" in exc.value.conditions


def test_kkt_rejects_infeasible_point():
    with pytest.raises(CertificateInvalidError) as exc:
        verify_kkt(CappedMinSumProblem((8, 8, 8), 8), (3, 3, 3))
    assert "primal feasibility" in exc.value.conditions


def test_matrix_term_cases():
    cube = MultiTtmShape((2**4,) * 3, (2**2,) * 3)
    sol = solve_matrix_term(cube, 2**5)
    assert sol.case_index == 3
    assert sol.x_star == pytest.approx([(2**18 / 2**5) ** (1 / 3)] * 3)
    shape = MultiTtmShape((4, 8, 64), (2, 2, 2))
    assert solve_matrix_term(shape, 4).x_star == pytest.approx((8, 16, 32))
    mid = solve_matrix_term(shape, 16)
    assert mid.case_index == 2
    assert mid.x_star == pytest.approx((8, 128**0.5, 128**0.5))
    assert mid.objective <= brute_force_min((8, 16, 128), 16) + 1e-9


def test_tensor_term_cases():
    shape = MultiTtmShape((4, 8, 64), (2, 2, 2))
    assert solve_tensor_term(shape, 4).x_star == pytest.approx((8, 512))
    assert solve_tensor_term(shape, 256).x_star == pytest.approx((8, 8))
    sym = MultiTtmShape((4, 4), (4, 4))
    assert solve_tensor_term(sym, 8).x_star == pytest.approx([(256 / 8) ** 0.5] * 2)


@given(capped_problems())
def test_kkt_holds_at_solution(args):
    caps, D = args
    prob = CappedMinSumProblem(caps, D)
    assert verify_kkt(prob, solve(prob).x_star).valid


@given(capped_problems(d_max=5))
def test_beats_random_feasible_points(args):
    caps, D = args
    prob = CappedMinSumProblem(caps, D)
    obj = solve(prob).objective
    rng = np.random.default_rng(0)
    target = prob.target
    for _ in range(200):
        x = rng.uniform(0, 1, len(caps)) * np.array(caps)
        # scale up toward the caps until feasible
        x = np.minimum(np.array(caps), x * (target / max(np.prod(x), 1e-300)) ** (1 / len(caps)))
        if np.prod(x) >= target * (1 - 1e-12):
            assert obj <= x.sum() * (1 + 1e-9)


@given(capped_problems())
def test_continuous_across_thresholds(args):
    caps, _ = args
    for L in thresholds_exact(caps)[1:]:
        L = float(L)
        lo = solve(CappedMinSumProblem(caps, max(1.0, L * (1 - 1e-6)))).objective
        hi = solve(CappedMinSumProblem(caps, L * (1 + 1e-6))).objective
        assert abs(lo - hi) / max(lo, hi) <= 1e-5


@given(capped_problems())
def test_objective_non_increasing_in_divisor(args):
    caps, D = args
    a = solve(CappedMinSumProblem(caps, D)).objective
    b = solve(CappedMinSumProblem(caps, D * 1.5)).objective
    assert b <= a * (1 + 1e-12)
