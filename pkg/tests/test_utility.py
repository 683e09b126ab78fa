from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qoeshare import DEFAULT_CURVE, UtilityCurve, marginal_utility


def test_default_curve_anchor_values():
    assert DEFAULT_CURVE.utility(50.0) == 100.0
    assert DEFAULT_CURVE.utility(70.0) == 120.0
    assert DEFAULT_CURVE.utility(90.0) == 130.0


def test_interpolation_between_anchors():
    assert DEFAULT_CURVE.utility(60.0) == 110.0
    assert DEFAULT_CURVE.utility(89.5) == 129.75


def test_zero_below_admission_threshold():
    assert DEFAULT_CURVE.utility(49.999) == 0.0
    assert DEFAULT_CURVE.utility(0.0) == 0.0
    assert DEFAULT_CURVE.utility(10.0) == 0.0


def test_clamped_above_v_max():
    assert DEFAULT_CURVE.utility(95.0) == 130.0
    assert DEFAULT_CURVE.utility(100.0) == 130.0


def test_max_utility_property():
    assert DEFAULT_CURVE.max_utility == 130.0


def test_array_matches_scalar():
    v = np.array([0.0, 49.9, 50.0, 60.0, 70.0, 89.5, 90.0, 95.0])
    got = DEFAULT_CURVE.utility_array(v)
    want = np.array([DEFAULT_CURVE.utility(x) for x in v])
    assert np.array_equal(got, want)


def test_anchor_validation():
    with pytest.raises(ValueError):
        UtilityCurve(anchors=((50, 100),))
    with pytest.raises(ValueError):
        UtilityCurve(anchors=((50, 100), (50, 120), (90, 130)))
    with pytest.raises(ValueError):
        UtilityCurve(anchors=((50, 100), (70, 90), (90, 130)))
    with pytest.raises(ValueError):
        UtilityCurve(v_min=60, anchors=((50, 100), (70, 120), (90, 130)))


def test_marginal_utility_values():
    # one grid step 50 -> 70 costing 0.5 Mbit/s
    assert marginal_utility(DEFAULT_CURVE, 50, 70, 1e6, 1.5e6) == 4e-05
    # admission step at v=50 costing 1 Mbit/s
    assert marginal_utility(DEFAULT_CURVE, 0, 50, 0.0, 1e6) == 0.0001


def test_marginal_utility_edge_cases():
    # no utility gain above v_max
    assert marginal_utility(DEFAULT_CURVE, 90, 95, 3e6, 4e6) == 0.0
    # unreachable step
    assert marginal_utility(DEFAULT_CURVE, 50, 70, 1e6, math.inf) == 0.0
    # free step with positive gain
    assert marginal_utility(DEFAULT_CURVE, 50, 70, 1e6, 1e6) == math.inf
    with pytest.raises(ValueError):
        marginal_utility(DEFAULT_CURVE, 50, 70, 2e6, 1e6)


@given(st.floats(min_value=0.0, max_value=100.0))
def test_utility_bounded(v):
    u = DEFAULT_CURVE.utility(v)
    assert 0.0 <= u <= DEFAULT_CURVE.max_utility


@given(
    st.floats(min_value=0.0, max_value=100.0),
    st.floats(min_value=0.0, max_value=100.0),
)
def test_utility_monotone(a, b):
    lo, hi = sorted((a, b))
    assert DEFAULT_CURVE.utility(lo) <= DEFAULT_CURVE.utility(hi)


@given(st.floats(min_value=0.0, max_value=100.0))
def test_utility_zero_iff_below_v_min(v):
    u = DEFAULT_CURVE.utility(v)
    if v < DEFAULT_CURVE.v_min:
        assert u == 0.0
    else:
        assert u >= 100.0
