import numpy as np
import pytest

from japmed.data import validate_dataset


def random_dataset(n, p, q_extra=0, seed=0, names=()):
    """Well-conditioned random dataset with optional extra covariates."""
    rng = np.random.default_rng(seed)
    t = rng.binomial(1, 0.5, n).astype(float)
    x = rng.standard_normal((n, q_extra)) if q_extra else None
    m = (np.outer(t, rng.uniform(-2, 2, p))
         + rng.standard_normal((n, p)))
    if q_extra:
        m += x @ rng.uniform(-1, 1, (q_extra, p))
    y = t + m @ rng.uniform(-2, 2, p) + rng.standard_normal(n)
    return validate_dataset(t, m, y, x, mediator_names=names)


@pytest.fixture
def small_ds():
    return random_dataset(n=80, p=4, q_extra=2, seed=11)
