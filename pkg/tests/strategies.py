import numpy as np
from hypothesis import strategies as st

from quicwf.trace import Trace


@st.composite
def traces(draw, min_len=1, max_len=60, min_size=40, max_size=2000):
    n = draw(st.integers(min_len, max_len))
    gaps = draw(st.lists(st.floats(0, 2.0, allow_nan=False), min_size=n, max_size=n))
    dirs = draw(st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n))
    sizes = draw(st.lists(st.integers(min_size, max_size), min_size=n, max_size=n))
    return Trace(np.cumsum(gaps), dirs, sizes)


def random_trace(rng, n=None, protocol="IQUIC", label=None):
    """Same distribution as the acceptance suite: lengths 1-300, sizes 40-2000."""
    n = int(rng.integers(1, 301)) if n is None else n
    times = np.cumsum(rng.exponential(0.01, n))
    dirs = rng.choice([1, -1], n)
    sizes = rng.integers(40, 2001, n)
    return Trace(times, dirs, sizes, protocol, label)


def packets_of(trace):
    return [(float(t), int(d), int(s)) for t, d, s in
            zip(trace.times.tolist(), trace.dirs.tolist(), trace.sizes.tolist())]
