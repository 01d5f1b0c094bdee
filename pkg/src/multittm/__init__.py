"""Communication bounds, processor grids and cost models for parallel Multi-TTM."""

__version__ = "0.1.0"

from .problem import (CanonicalMap, InvalidGridError, InvalidShapeError, MultiTtmShape, ProcGrid,
                      canonicalize, p_max, parse_grid, parse_shape)
from .optsolve import (CappedMinSumProblem, CertificateInvalidError, InfeasibleDivisorError,
                       KktCertificate, OptSolution, solve, verify_kkt)
from .bounds import (LbBreakdown, LoadBalanceError, cubical_lb, first_ttm_lb, matmul_lb,
                     multi_ttm_lb, ttm_seq_lb)
from .costs import (CostBreakdown, SeqCostBreakdown, alg_comm_cost, alg_compute, comp_overhead,
                    ttm_seq_comm_cost, ttm_seq_compute)
from .gridsel import (GridChoice, exhaustive_best_grid, exhaustive_best_ttm_seq_grid, fast_grid,
                      round_grid_pow2, select_grid_real)

__all__ = [
    "CanonicalMap", "InvalidGridError", "InvalidShapeError", "MultiTtmShape", "ProcGrid",
    "canonicalize", "p_max", "parse_grid", "parse_shape",
    "CappedMinSumProblem", "CertificateInvalidError", "InfeasibleDivisorError", "KktCertificate",
    "OptSolution", "solve", "verify_kkt",
    "LbBreakdown", "LoadBalanceError", "cubical_lb", "first_ttm_lb", "matmul_lb", "multi_ttm_lb",
    "ttm_seq_lb",
    "CostBreakdown", "SeqCostBreakdown", "alg_comm_cost", "alg_compute", "comp_overhead",
    "ttm_seq_comm_cost", "ttm_seq_compute",
    "GridChoice", "exhaustive_best_grid", "exhaustive_best_ttm_seq_grid", "fast_grid",
    "round_grid_pow2", "select_grid_real",
]
