import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from censored2sls import Sample  # noqa: E402


def random_sample(rng, n=None, k=None, l=None, censor=None, ties=False):
    """A generic random Sample with endogenous-looking structure."""
    n = n if n is not None else int(rng.integers(8, 60))
    l = l if l is not None else int(rng.integers(1, 5))
    k = k if k is not None else int(rng.integers(1, l + 1))
    z = rng.normal(size=(n, l))
    # strong first stage: each regressor loads on its own instrument
    x = z[:, :k] + 0.5 * z @ rng.normal(size=(l, k)) + 0.5 * rng.normal(size=(n, k))
    y = x @ rng.normal(size=k) + rng.normal(size=n)
    if ties:
        y = np.round(y, 1)
    p = rng.uniform(0.0, 0.7) if censor is None else censor
    delta = (rng.uniform(size=n) >= p).astype(int)
    # enough uncensored rows for the weighted Gram matrices to be nonsingular
    delta[rng.choice(n, size=max(k, l) + 1, replace=False)] = 1
    return Sample(y=y, delta=delta, x=x, z=z)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
