"""Closed-form solution of the capped min-sum problem and its KKT check.

The problem is::

    minimize    x_1 + ... + x_d
    subject to  x_1 * ... * x_d >= (k_1 * ... * k_d) / D
                0 <= x_j <= k_j

with caps ``k_1 <= ... <= k_d`` and divisor ``D >= 1``.  The optimum saturates
the ``d - I`` smallest caps and spreads the remaining product evenly over the
``I`` largest variables, where ``I`` is located by the thresholds
``L_j = K_j / k_{d-j+1}^j`` (``K_j`` the product of the ``j`` largest caps).

Thresholds are compared in exact rational arithmetic, so power-of-two
instances sitting exactly on a boundary are classified deterministically; a
tie ``D == L_j`` goes to the higher case ``I = j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .problem import MultiTtmShape


class InfeasibleDivisorError(ValueError):
    pass


class CertificateInvalidError(ValueError):
    def __init__(self, conditions, certificate):
        self.conditions = tuple(conditions)
        self.certificate = certificate
        super().__init__("KKT conditions violated: " + ", ".join(self.conditions))


@dataclass(frozen=True)
class CappedMinSumProblem:
    caps: tuple
    divisor: float | int

    def __post_init__(self):
        caps = tuple(self.caps)
        if not caps:
            raise ValueError("need at least one cap")
        if any(c <= 0 for c in caps):
            raise ValueError(f"caps must be positive: {caps}")
        if any(a > b for a, b in zip(caps, caps[1:])):
            raise ValueError(f"caps must be sorted ascending: {caps}")
        if not self.divisor >= 1:
            raise InfeasibleDivisorError(f"divisor must be >= 1, got {self.divisor}")
        object.__setattr__(self, "caps", caps)

    @property
    def d(self) -> int:
        return len(self.caps)

    @property
    def target(self) -> float:
        """Right-hand side of the product constraint."""
        return float(Fraction(math.prod(Fraction(c) for c in self.caps)) / Fraction(self.divisor))


@dataclass(frozen=True)
class OptSolution:
    x_star: tuple[float, ...]
    case_index: int
    objective: float
    thresholds: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "x_star": list(self.x_star),
            "case_index": self.case_index,
            "objective": self.objective,
            "thresholds": [t if math.isfinite(t) else "inf" for t in self.thresholds],
        }


@dataclass(frozen=True)
class KktCertificate:
    mu: tuple[float, ...]
    primal: tuple[float, ...]
    stationarity: tuple[float, ...]
    dual: tuple[float, ...]
    slackness: tuple[float, ...]
    failed: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.failed


def thresholds_exact(caps: Sequence) -> list[Fraction]:
    """``L_1..L_d`` as exact fractions (``L_1`` is always 1)."""
    k = [Fraction(c) for c in caps]
    d = len(k)
    out = []
    K = Fraction(1)
    for j in range(1, d + 1):
        K *= k[d - j]
        out.append(K / k[d - j] ** j)
    return out


def case_index(caps: Sequence, divisor) -> int:
    D = Fraction(divisor)
    I = 1
    for j, L in enumerate(thresholds_exact(caps), start=1):
        if D >= L:
            I = j
    return I


def solve(problem: CappedMinSumProblem) -> OptSolution:
    caps, d, D = problem.caps, problem.d, problem.divisor
    Ls = thresholds_exact(caps)
    I = case_index(caps, D)
    K_I = math.prod(Fraction(c) for c in caps[d - I:])
    level = float(K_I / Fraction(D)) ** (1.0 / I)
    x = tuple(float(c) for c in caps[: d - I]) + (level,) * I
    objective = I * level + float(sum(Fraction(c) for c in caps[: d - I]))
    return OptSolution(x, I, objective, tuple(float(L) for L in Ls) + (math.inf,))


def dual_point(problem: CappedMinSumProblem) -> tuple[float, ...]:
    """Dual multipliers ``mu_0..mu_d`` matching the closed-form primal point.

    ``mu_0`` multiplies the product constraint; it is ``1 / prod_{l != j} x_l``
    for any uncapped ``j``, i.e. ``level / target``.
    """
    caps, d = problem.caps, problem.d
    sol = solve(problem)
    I, level = sol.case_index, sol.x_star[-1]
    mu0 = level / problem.target
    mus = [level / caps[i] - 1.0 if i < d - I else 0.0 for i in range(d)]
    return (mu0, *mus)


def verify_kkt(problem: CappedMinSumProblem, x: Sequence[float], tol: float = 1e-8) -> KktCertificate:
    """Check the KKT conditions at ``x`` with the closed-form multipliers.

    Residuals are relative to the magnitude of the terms they compare.  Raises
    :class:`CertificateInvalidError` naming every failed condition group.
    """
    caps, d = problem.caps, problem.d
    x = [float(v) for v in x]
    if len(x) != d:
        raise ValueError(f"point has {len(x)} coordinates, problem has {d}")
    mu = dual_point(problem)
    target = problem.target
    prod_x = math.prod(x)

    g = [(target - prod_x) / target] + [(x[i] - caps[i]) / caps[i] for i in range(d)]
    primal = tuple(g)

    stat = []
    for j in range(d):
        others = prod_x / x[j] if x[j] != 0 else math.prod(x[:j] + x[j + 1:])
        terms = (1.0, mu[0] * others, mu[j + 1])
        resid = 1.0 - mu[0] * others + mu[j + 1]
        stat.append(resid / max(abs(t) for t in terms))
    stationarity = tuple(stat)

    dual = tuple(mu)
    slack = tuple(mu[i] * g[i] for i in range(d + 1))

    failed = []
    if any(v > tol for v in primal):
        failed.append("primal feasibility")
    if any(abs(v) > tol for v in stationarity):
        failed.append("stationarity")
    if any(v < -tol for v in dual):
        failed.append("dual feasibility")
    if any(abs(v) > tol * max(1.0, abs(m)) for v, m in zip(slack, mu)):
        failed.append("complementary slackness")
    cert = KktCertificate(mu, primal, stationarity, dual, slack, tuple(failed))
    if failed:
        raise CertificateInvalidError(failed, cert)
    return cert


def solve_matrix_term(shape: MultiTtmShape, P) -> OptSolution:
    """Optimal matrix-access split: caps ``n_k r_k``, divisor ``P``."""
    return solve(CappedMinSumProblem(shape.matrix_sizes, P))


def solve_tensor_term(shape: MultiTtmShape, P) -> OptSolution:
    """Optimal tensor-access split ``(u, v)``: caps ``(r, n)``, divisor ``P``."""
    return solve(CappedMinSumProblem((shape.r_total, shape.n_total), P))
