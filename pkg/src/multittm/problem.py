"""Multi-TTM problem instances, canonical ordering, and processor grids.

A Multi-TTM instance contracts an ``n_1 x ... x n_d`` input tensor with one
``n_k x r_k`` matrix per mode, producing an ``r_1 x ... x r_d`` output.  Most of
the analysis assumes a canonical form: the input is at least as large as the
output, and modes are sorted by ``n_k * r_k``.  :func:`canonicalize` produces
that form together with a :class:`CanonicalMap` that undoes it.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence


class InvalidShapeError(ValueError):
    pass


class InvalidGridError(ValueError):
    pass


def _as_int_tuple(values) -> tuple[int, ...]:
    out = []
    for v in values:
        if isinstance(v, bool) or int(v) != v:
            raise InvalidShapeError(f"dimension {v!r} is not an integer")
        out.append(int(v))
    return tuple(out)


@dataclass(frozen=True)
class MultiTtmShape:
    n: tuple[int, ...]
    r: tuple[int, ...]

    def __post_init__(self):
        n = _as_int_tuple(self.n)
        r = _as_int_tuple(self.r)
        if len(n) != len(r):
            raise InvalidShapeError(f"n has {len(n)} modes but r has {len(r)}")
        if len(n) < 2:
            raise InvalidShapeError("tensor order must be at least 2")
        if min(n) < 2 or min(r) < 2:
            raise InvalidShapeError(f"all dimensions must be >= 2, got n={n} r={r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "r", r)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def n_total(self) -> int:
        return math.prod(self.n)

    @property
    def r_total(self) -> int:
        return math.prod(self.r)

    @property
    def matrix_sizes(self) -> tuple[int, ...]:
        """``n_k * r_k`` for every mode."""
        return tuple(a * b for a, b in zip(self.n, self.r))

    @property
    def owned_total(self) -> int:
        """Words across all five (or ``d + 2``) arrays; divide by P for the per-rank share."""
        return self.n_total + self.r_total + sum(self.matrix_sizes)

    def is_canonical(self) -> bool:
        kr = self.matrix_sizes
        return self.n_total >= self.r_total and all(a <= b for a, b in zip(kr, kr[1:]))

    def is_power_of_two(self) -> bool:
        return all(is_pow2(v) for v in self.n + self.r)

    def to_dict(self) -> dict:
        return {"d": self.d, "n": list(self.n), "r": list(self.r)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MultiTtmShape":
        shape = cls(tuple(data["n"]), tuple(data["r"]))
        if "d" in data and data["d"] != shape.d:
            raise InvalidShapeError(f"d={data['d']} disagrees with {shape.d} listed modes")
        return shape

    def __str__(self) -> str:
        return f"n={','.join(map(str, self.n))} r={','.join(map(str, self.r))}"


@dataclass(frozen=True)
class SuffixProducts:
    N: tuple[int, ...]
    R: tuple[int, ...]


@dataclass(frozen=True)
class CanonicalMap:
    """How a raw shape was reordered.

    ``perm[k]`` is the raw mode sitting at canonical position ``k``.  When
    ``swapped`` is set the raw input/output roles were exchanged (the raw
    output tensor was larger).
    """

    perm: tuple[int, ...]
    swapped: bool
    original: MultiTtmShape

    def to_canonical_grid(self, grid: "ProcGrid") -> "ProcGrid":
        p = tuple(grid.p[k] for k in self.perm)
        q = tuple(grid.q[k] for k in self.perm)
        if self.swapped:
            p, q = q, p
        return ProcGrid(p, q)

    def to_original_grid(self, grid: "ProcGrid") -> "ProcGrid":
        p, q = grid.p, grid.q
        if self.swapped:
            p, q = q, p
        d = len(self.perm)
        op = [None] * d
        oq = [None] * d
        for k, raw in enumerate(self.perm):
            op[raw] = p[k]
            oq[raw] = q[k]
        return ProcGrid(tuple(op), tuple(oq))

    def to_original_shape(self, shape: MultiTtmShape) -> MultiTtmShape:
        n, r = shape.n, shape.r
        if self.swapped:
            n, r = r, n
        d = len(self.perm)
        on = [0] * d
        orr = [0] * d
        for k, raw in enumerate(self.perm):
            on[raw] = n[k]
            orr[raw] = r[k]
        return MultiTtmShape(tuple(on), tuple(orr))


def canonicalize(raw: MultiTtmShape) -> tuple[MultiTtmShape, CanonicalMap]:
    n, r = raw.n, raw.r
    swapped = raw.n_total < raw.r_total
    if swapped:
        n, r = r, n
    # sorted() is stable, so equal n_k*r_k keep their raw order
    perm = tuple(sorted(range(raw.d), key=lambda k: n[k] * r[k]))
    shape = MultiTtmShape(tuple(n[k] for k in perm), tuple(r[k] for k in perm))
    return shape, CanonicalMap(perm, swapped, raw)


def suffix_products(shape: MultiTtmShape) -> SuffixProducts:
    N, R = [], []
    pn = pr = 1
    for a, b in zip(reversed(shape.n), reversed(shape.r)):
        pn *= a
        pr *= b
        N.append(pn)
        R.append(pr)
    return SuffixProducts(tuple(N), tuple(R))


def p_max(shape: MultiTtmShape) -> int:
    return min(min(shape.matrix_sizes), shape.n_total, shape.r_total)


def require_canonical(shape: MultiTtmShape) -> None:
    if not shape.is_canonical():
        raise InvalidShapeError(f"shape {shape} is not canonical; call canonicalize() first")


def is_pow2(v) -> bool:
    return isinstance(v, int) and v >= 1 and (v & (v - 1)) == 0


def log2_exact(v: int) -> int:
    if not is_pow2(v):
        raise ValueError(f"{v} is not a power of two")
    return v.bit_length() - 1


@dataclass(frozen=True)
class ProcGrid:
    """A ``p_1 x ... x p_d x q_1 x ... x q_d`` logical grid.

    Entries are ints for executable grids and floats for the real-valued grids
    used in the optimality analysis.
    """

    p: tuple
    q: tuple
    P: int | float = field(default=None)

    def __post_init__(self):
        p, q = tuple(self.p), tuple(self.q)
        if len(p) != len(q):
            raise InvalidGridError("p and q must have the same length")
        if any(v <= 0 for v in p + q):
            raise InvalidGridError(f"grid entries must be positive: p={p} q={q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        total = math.prod(p) * math.prod(q)
        if self.P is None:
            object.__setattr__(self, "P", total)
        elif not math.isclose(total, self.P, rel_tol=1e-9):
            raise InvalidGridError(f"grid product {total} != P={self.P}")

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def p_total(self):
        return math.prod(self.p)

    @property
    def q_total(self):
        return math.prod(self.q)

    def is_integral(self) -> bool:
        return all(isinstance(v, int) for v in self.p + self.q)

    def divides(self, shape: MultiTtmShape) -> bool:
        return self.is_integral() and all(
            a % pi == 0 and b % qi == 0 for a, b, pi, qi in zip(shape.n, shape.r, self.p, self.q)
        )

    def check_executable(self, shape: MultiTtmShape) -> None:
        if self.d != shape.d:
            raise InvalidGridError(f"grid has {self.d} modes, shape has {shape.d}")
        if not self.is_integral():
            raise InvalidGridError(f"grid {self} is not integral")
        if not self.divides(shape):
            raise InvalidGridError(f"grid {self} does not divide shape {shape}")

    def as_ints(self) -> "ProcGrid":
        """Round a real grid whose entries are integral up to float noise."""
        def snap(v):
            iv = round(v)
            if not math.isclose(v, iv, rel_tol=1e-9):
                raise InvalidGridError(f"grid entry {v} is not integral")
            return int(iv)
        return ProcGrid(tuple(map(snap, self.p)), tuple(map(snap, self.q)))

    def to_dict(self) -> dict:
        return {"p": list(self.p), "q": list(self.q), "P": self.P}

    def __str__(self) -> str:
        def fmt(v):
            return str(v) if isinstance(v, int) else f"{v:.6g}"
        return f"p={','.join(map(fmt, self.p))} q={','.join(map(fmt, self.q))}"


# -- text forms ----------------------------------------------------------------

_INT_RE = re.compile(r"^\s*(\d+)\s*(?:\^\s*(\d+))?\s*$")


def parse_int(text: str) -> int:
    """Parse ``64`` or ``2^6``."""
    m = _INT_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse integer {text!r}")
    base = int(m.group(1))
    return base ** int(m.group(2)) if m.group(2) else base


def parse_int_list(text: str) -> tuple[int, ...]:
    parts = [t for t in text.split(",") if t.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(parse_int(t) for t in parts)


def parse_p_range(text: str) -> list[int]:
    """Parse ``2^1..2^12`` (powers of two between the bounds) or ``4,8,16``."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = parse_int(lo_s), parse_int(hi_s)
        if lo < 1 or hi < lo:
            raise ValueError(f"bad range {text!r}")
        if is_pow2(lo) and is_pow2(hi):
            return [2**e for e in range(log2_exact(lo), log2_exact(hi) + 1)]
        return list(range(lo, hi + 1))
    return list(parse_int_list(text))


def _kv_tokens(text: str) -> dict[str, str]:
    out = {}
    for tok in re.split(r"[\s;]+", text.strip()):
        if not tok:
            continue
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_shape(text: str) -> MultiTtmShape:
    """Parse ``n=4,8,64 r=2,2,2``."""
    kv = _kv_tokens(text)
    try:
        return MultiTtmShape(parse_int_list(kv["n"]), parse_int_list(kv["r"]))
    except KeyError as exc:
        raise InvalidShapeError(f"missing {exc.args[0]!r} in {text!r}") from None
    except ValueError as exc:
        raise InvalidShapeError(str(exc)) from None


def parse_grid(text: str) -> ProcGrid:
    """Parse ``p=2,2,2 q=1,1,1`` (``;`` also separates)."""
    kv = _kv_tokens(text)
    try:
        return ProcGrid(parse_int_list(kv["p"]), parse_int_list(kv["q"]))
    except KeyError as exc:
        raise InvalidGridError(f"missing {exc.args[0]!r} in {text!r}") from None
    except ValueError as exc:
        raise InvalidGridError(str(exc)) from None


def load_shape_config(path) -> tuple[MultiTtmShape, dict[str, str]]:
    """Read an INI file with a ``[shape]`` section holding ``n`` and ``r``.

    Any other keys in the section are returned untouched for the caller.
    """
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    if not cp.has_section("shape"):
        raise InvalidShapeError(f"{path}: missing [shape] section")
    sec = dict(cp["shape"])
    try:
        shape = MultiTtmShape(parse_int_list(sec.pop("n")), parse_int_list(sec.pop("r")))
    except KeyError as exc:
        raise InvalidShapeError(f"{path}: missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise InvalidShapeError(f"{path}: {exc}") from None
    return shape, sec


def exact(v) -> Fraction:
    """Exact rational view of an int or float."""
    return Fraction(v)


def seq_mode_order(d: int, order: Sequence[int] | None) -> tuple[int, ...]:
    """Validate a TTM mode order (0-based); ``None`` means increasing."""
    if order is None:
        return tuple(range(d))
    order = tuple(order)
    if sorted(order) != list(range(d)):
        raise ValueError(f"mode order {order} is not a permutation of 0..{d - 1}")
    return order
