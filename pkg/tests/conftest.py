import numpy as np
import pytest

from kmdr import CensoredSample, km_weights, order_sample


def make_weibull_sample(rng, n, k=1, censor_scale=None, slope=1.0):
    """Weibull-ish durations with optional exponential censoring."""
    u = 1.0 - rng.random(n)
    x = rng.random((n, k))
    t = np.sqrt(-np.log(u)) * np.exp(slope * x[:, 0])
    if censor_scale is None:
        return CensoredSample(y=t, delta=np.ones(n, dtype=np.int64), x=x)
    c = censor_scale * rng.standard_exponential(n)
    return CensoredSample(y=np.minimum(t, c), delta=(t <= c).astype(np.int64), x=x)


def make_tied_sample(rng, n, k=1):
    """Sample with heavy duration ties, for order/indicator edge cases."""
    y = rng.integers(1, 6, size=n).astype(float)
    delta = rng.integers(0, 2, size=n)
    if not delta.any():
        delta[rng.integers(n)] = 1
    x = rng.normal(size=(n, k))
    return CensoredSample(y=y, delta=delta, x=x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def censored_sample(rng):
    return make_weibull_sample(rng, 120, censor_scale=2.0)


@pytest.fixture
def censored_weights(censored_sample):
    return km_weights(order_sample(censored_sample))
