"""The fast grid oracle must agree with plain enumeration."""

import numpy as np
import pytest

from oracles import simplex_grid_min, simplex_grid_min_brute


@pytest.mark.parametrize("d", [2, 3, 4])
def test_grid_oracle_matches_enumeration(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        A = rng.uniform(0, 1, size=(6, d))
        y = rng.uniform(-0.5, 1.5, size=6)
        _, fast = simplex_grid_min(A, y, resolution=0.05)
        _, slow = simplex_grid_min_brute(A, y, resolution=0.05)
        assert fast == pytest.approx(slow, abs=1e-12)
