import math

import hypothesis.strategies as st
from hypothesis import settings

from multittm.problem import MultiTtmShape, canonicalize, p_max

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@st.composite
def pow2_shapes(draw, d_min=2, d_max=6, e_max=12):
    d = draw(st.integers(d_min, d_max))
    n = tuple(2 ** draw(st.integers(1, e_max)) for _ in range(d))
    r = tuple(2 ** draw(st.integers(1, e_max)) for _ in range(d))
    return canonicalize(MultiTtmShape(n, r))[0]


@st.composite
def pow2_shape_and_P(draw, d_min=2, d_max=6, e_max=12):
    shape = draw(pow2_shapes(d_min, d_max, e_max))
    L = draw(st.integers(0, p_max(shape).bit_length() - 1))
    return shape, 2**L


@st.composite
def capped_problems(draw, d_max=6):
    """Sorted caps log-uniform in [1, 1e4] and D log-uniform in [1, prod caps]."""
    d = draw(st.integers(2, d_max))
    caps = sorted(10 ** draw(st.floats(0, 4)) for _ in range(d))
    logD = draw(st.floats(0, 1)) * math.log10(math.prod(caps))
    return tuple(caps), 10**logD
