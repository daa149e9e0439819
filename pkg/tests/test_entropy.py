import math

import numpy as np
import pytest

from decoyqkd.entropy import (ET_FLOOR, FEASIBILITY_BACKOFF, binary_entropy,
                              feasibility_margin, feasible_tangent, max_feasible_et,
                              tangent_at)
from oracles import bisect_root, entropy_line_dominance


def test_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.15) == pytest.approx(1 - (0.76553 - 2.5025 * 0.15), abs=1e-4)
    assert binary_entropy(0.15) == pytest.approx(0.60985, abs=1e-5)


def test_entropy_vectorized():
    out = binary_entropy(np.array([0.0, 0.11, 0.5, 1.0]))
    assert out.shape == (4,)
    assert out[2] == 1.0 and out[0] == 0.0 and out[3] == 0.0


@pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan")])
def test_entropy_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


def test_tangent_coefficients():
    line = tangent_at(0.15)
    assert line.a == pytest.approx(0.76553, abs=5e-6)
    assert line.b == pytest.approx(2.5025, abs=5e-5)
    assert not line.clipped


def test_tangent_at_half_is_zero_line():
    line = tangent_at(0.5)
    assert line.a == pytest.approx(0.0, abs=1e-15)
    assert line.b == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("et", [0.001, 0.01, 0.1, 0.25, 0.4, 0.499])
def test_tangent_dominance_and_touch(et):
    line = tangent_at(et)
    e = np.linspace(1e-4, 1 - 1e-4, 10_000)
    assert np.all(line(e) <= 1 - binary_entropy(e) + 1e-12)
    assert abs(float(line(et)) - (1 - binary_entropy(et))) <= 1e-12
    assert entropy_line_dominance(line) <= 1e-12


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2])
def test_tangent_rejects(bad):
    with pytest.raises(ValueError):
        tangent_at(bad)


def test_margin_examples():
    assert feasibility_margin(tangent_at(0.15), 0.6, 0.2) > 0
    # grows like (3/4) log2(1/e_t) as the tangent point approaches 0
    small = [feasibility_margin(tangent_at(10.0 ** -k), 0.6, 0.2) for k in (3, 30, 300)]
    assert small[0] < small[1] < small[2]
    assert small[2] > 700
    with pytest.raises(ValueError):
        feasibility_margin(tangent_at(0.1), 0.2, 0.6)


def test_margin_decreasing_until_boundary():
    # the margin falls monotonically from +inf through its root; just below
    # 1/2 it turns back up to 0, so monotonicity is checked up to the root
    for ratio_nu in (0.2, 0.3, 0.6):
        root = max_feasible_et(0.6, ratio_nu)
        grid = np.linspace(1e-4, root, 400)
        m = [feasibility_margin(tangent_at(e), 0.6, ratio_nu) for e in grid]
        assert all(a > b for a, b in zip(m, m[1:]))


def test_max_feasible_values():
    assert max_feasible_et(1.0, 1.0) == pytest.approx(0.20, abs=0.01)
    assert max_feasible_et(0.6, 0.3) > 0.3
    assert max_feasible_et(0.6, 0.2) > 0.15


def test_max_feasible_matches_bisection():
    for mu, nu in ((1.0, 1.0), (0.6, 0.3), (0.6, 0.2), (0.6, 0.05)):
        r = nu / (mu + nu)

        def margin(e):
            a = math.log2(1 - e) + 1
            b = math.log2(1 - e) - math.log2(e)
            return (a - b) * r + (b - 2 * a)

        ref = bisect_root(margin, 1e-9, 0.49)
        assert max_feasible_et(mu, nu) == pytest.approx(ref, abs=1e-9)


def test_max_feasible_grows_as_ratio_falls():
    ratios = np.linspace(1.0, 0.02, 60)
    vals = [max_feasible_et(1.0, r) for r in ratios]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_feasible_tangent_policy():
    assert feasible_tangent(0.0, 0.6, 0.2).e_t == ET_FLOOR
    assert feasible_tangent(0.0, 0.6, 0.2).clipped
    assert feasible_tangent(float("nan"), 0.6, 0.2).e_t == ET_FLOOR
    cap = max_feasible_et(0.6, 0.2)
    moved = feasible_tangent(0.45, 0.6, 0.2)
    assert moved.clipped and moved.e_t == pytest.approx(cap - FEASIBILITY_BACKOFF)
    assert feasibility_margin(moved, 0.6, 0.2) >= 0
    kept = feasible_tangent(0.05, 0.6, 0.2)
    assert kept.e_t == 0.05 and not kept.clipped
