"""Trajectory metrics against an exhaustive alignment-enumeration oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avgrid.core import Path, StepConfig, Vec3
from avgrid.metrics import (MetricsReport, aggregate, dtw, evaluate_episode,
                            ndtw)

from oracles import enumerate_dtw

CFG = StepConfig()


def path_of(*pts) -> Path:
    return Path([Vec3(*p) for p in pts])


coord = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False,
                  allow_infinity=False)
point = st.tuples(coord, coord, coord)
short_path = st.lists(point, min_size=1, max_size=6)


# -- dtw --------------------------------------------------------------------------

def test_dtw_identical_paths_is_zero():
    p = path_of((0, 0, 0), (5, 0, 0), (10, 0, 0))
    assert dtw(p, p) == 0.0


def test_dtw_single_point_against_line():
    # Hand-computable 3-4-5 geometry: every reference point pairs with the
    # lone trajectory point, so the cost is 0 + 5 + 10.
    p = path_of((0, 0, 0))
    ref = path_of((0, 0, 0), (3, 4, 0), (6, 8, 0))
    assert dtw(p, ref) == 15.0
    assert dtw(ref, p) == 15.0


def test_dtw_offset_parallel_lines():
    # Two 2-point paths offset by 5: both pairings cost exactly 5.
    a = path_of((0, 0, 0), (5, 0, 0))
    b = path_of((0, 5, 0), (5, 5, 0))
    assert dtw(a, b) == 10.0


@given(short_path, short_path)
@settings(max_examples=300, deadline=None)
def test_dtw_matches_enumeration(pa, pb):
    got = dtw(Path([Vec3(*p) for p in pa]), Path([Vec3(*p) for p in pb]))
    assert got == enumerate_dtw(pa, pb)


@given(short_path)
@settings(max_examples=100, deadline=None)
def test_dtw_self_is_zero_and_symmetric(pa):
    p = Path([Vec3(*q) for q in pa])
    assert dtw(p, p) == 0.0


# -- ndtw --------------------------------------------------------------------------

def test_ndtw_identity_is_one():
    p = path_of((0, 0, 0), (5, 0, 0), (10, 0, 0))
    assert ndtw(p, p, 20.0) == 1.0


def test_ndtw_unit_cost_is_inverse_e():
    # Cost equals len(ref) * threshold exactly: one point 60 m from a
    # 3-point reference stacked at the origin.
    p = path_of((60, 0, 0))
    ref = path_of((0, 0, 0), (0, 0, 0), (0, 0, 0))
    assert dtw(p, ref) == 180.0
    assert ndtw(p, ref, 60.0) == math.exp(-1.0)


def test_ndtw_rejects_bad_threshold():
    p = path_of((0, 0, 0))
    with pytest.raises(ValueError):
        ndtw(p, p, 0.0)


@given(short_path, short_path)
@settings(max_examples=100, deadline=None)
def test_ndtw_matches_enumeration_formula(pa, pb):
    a = Path([Vec3(*p) for p in pa])
    b = Path([Vec3(*p) for p in pb])
    expected = math.exp(-enumerate_dtw(pa, pb) / (len(pb) * 20.0))
    got = ndtw(a, b, 20.0)
    assert got == expected
    assert 0.0 < got <= 1.0


def test_ndtw_strictly_decreasing_in_cost():
    ref = path_of((0, 0, 0), (5, 0, 0), (10, 0, 0))
    scores = [ndtw(path_of((0, off, 0), (5, off, 0), (10, off, 0)), ref, 20.0)
              for off in (0.0, 1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(scores, scores[1:]))


# -- evaluate_episode -----------------------------------------------------------------

def test_perfect_execution_scores_perfectly():
    gt = path_of((0, 0, 10), (5, 0, 10), (10, 0, 10))
    rep = evaluate_episode(gt, gt, CFG)
    assert rep.ne == 0.0
    assert rep.success and rep.oracle_success
    assert rep.ndtw == 1.0 and rep.sdtw == 1.0


def test_success_threshold_is_closed():
    gt = path_of((0, 0, 0), (100, 0, 0))
    at_radius = path_of((0, 0, 0), (80, 0, 0))
    assert evaluate_episode(at_radius, gt, CFG).success is True
    just_out = path_of((0, 0, 0), (79.999999, 0, 0))
    assert evaluate_episode(just_out, gt, CFG).success is False


def test_oracle_success_without_success():
    # Passes within 5 m of the goal mid-path, then stops 50 m away.
    gt = path_of((0, 0, 0), (100, 0, 0))
    executed = path_of((0, 0, 0), (100, 5, 0), (100, 50, 0))
    rep = evaluate_episode(executed, gt, CFG)
    assert rep.oracle_success is True
    assert rep.success is False
    assert rep.sdtw == 0.0
    assert rep.ndtw > 0.0


def test_sdtw_equals_ndtw_when_successful():
    gt = path_of((0, 0, 0), (5, 0, 0), (10, 0, 0))
    executed = path_of((0, 0, 0), (5, 1, 0), (10, 0, 0))
    rep = evaluate_episode(executed, gt, CFG)
    assert rep.success
    assert rep.sdtw == rep.ndtw


# -- aggregate ----------------------------------------------------------------------

def test_aggregate_means_and_percentages():
    reports = [
        MetricsReport(ne=10.0, success=True, oracle_success=True, ndtw=0.9,
                      sdtw=0.9),
        MetricsReport(ne=30.0, success=False, oracle_success=True, ndtw=0.5,
                      sdtw=0.0),
        MetricsReport(ne=50.0, success=False, oracle_success=False, ndtw=0.1,
                      sdtw=0.0),
    ]
    agg = aggregate(reports)
    assert agg["episodes"] == 3
    assert agg["ne_mean"] == np.mean([10.0, 30.0, 50.0])
    assert agg["sr_pct"] == 33.3  # one of three, to one decimal
    assert agg["osr_pct"] == 66.7
    assert agg["ndtw_mean"] == np.mean([0.9, 0.5, 0.1])
    assert agg["sdtw_mean"] == np.mean([0.9, 0.0, 0.0])


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([])
