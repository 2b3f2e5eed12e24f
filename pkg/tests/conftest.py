from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("bsflow", deadline=None, max_examples=40)
settings.load_profile("bsflow")


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def observed_order(errors):
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])
