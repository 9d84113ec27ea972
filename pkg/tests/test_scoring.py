"""Rule-engine behaviour: TAG scores, severity labels, alarm runs."""

import numpy as np
import pytest

from hypoxemia.errors import InvalidInputError, MissingInputError
from hypoxemia.scoring import alarm_runs, severity_label, tag_score, tag_vector
from hypoxemia.vitals import SANITIZE_RANGES, AgeBand, PopulationGroup, VitalKind

from oracles import rle

A = AgeBand
P = PopulationGroup
V = VitalKind


def test_tag_score_examples():
    assert tag_score(V.HEART_RATE, 75, A.ADULT_18PLUS) == 0
    assert tag_score(V.RESP_RATE, 27, A.ADULT_18PLUS) == 2
    assert tag_score(V.SBP, 92, A.ADOLESCENT_12_17Y) == 2
    assert tag_score(V.SPO2, 100, A.ADULT_18PLUS) == 0


def test_severity_label_examples():
    assert severity_label(97, P.ADULT_NO_COPD) == 0
    assert severity_label(86, P.ADULT_COPD) == 1
    assert severity_label(84, P.PEDIATRIC_NO_COPD) == 3
    # half-open normalization: everything below 92 is severe for adults
    assert severity_label(91.5, P.ADULT_NO_COPD) == 3
    for half_step in range(0, 201):
        value = half_step * 0.5
        expected = 3 if value < 92 else 2 if value < 94 else 1 if value < 96 else 0
        assert severity_label(value, P.ADULT_NO_COPD) == expected


def test_adult_copd_above_normal_band_is_normal():
    for spo2 in (92, 92.5, 93, 97, 100):
        assert severity_label(spo2, P.ADULT_COPD) == 0


def test_severity_monotone_in_spo2():
    for group in P:
        labels = [severity_label(v / 10.0, group) for v in range(0, 1001)]
        assert all(a >= b for a, b in zip(labels, labels[1:]))


def test_extremes_agree():
    for group in P:
        assert severity_label(100, group) == 0
    for band in A:
        assert tag_score(V.SPO2, 100, band) == 0


def test_totality_at_tenth_granularity():
    # every value in the sanitized domain scores without error
    for band in A:
        for kind in V:
            lo, hi = SANITIZE_RANGES[kind]
            values = np.round(np.arange(lo, hi + 0.05, 0.1), 1)
            for v in values:
                assert tag_score(kind, float(v), band) in (0, 1, 2, 3)


def test_determinism():
    results = {tag_score(V.TEMPERATURE, 37.45, A.CHILD_5_11Y) for _ in range(50)}
    assert len(results) == 1


def test_out_of_domain_and_nonfinite_rejected():
    with pytest.raises(InvalidInputError):
        tag_score(V.SPO2, 101, A.ADULT_18PLUS)
    with pytest.raises(InvalidInputError):
        tag_score(V.TEMPERATURE, -0.1, A.ADULT_18PLUS)
    with pytest.raises(InvalidInputError):
        severity_label(float("nan"), P.ADULT_NO_COPD)
    with pytest.raises(InvalidInputError):
        severity_label(100.5, P.PEDIATRIC_NO_COPD)


def test_sub_grid_values_follow_lower_edge_ownership():
    # reals between contiguous printed bands belong to the lower-edge bin
    assert tag_score(V.HEART_RATE, 90.5, A.ADULT_18PLUS) == 0
    assert tag_score(V.HEART_RATE, 91.0, A.ADULT_18PLUS) == 1
    assert tag_score(V.RESP_RATE, 20.7, A.ADULT_18PLUS) == 0
    assert tag_score(V.TEMPERATURE, 35.05, A.ADULT_18PLUS) == 3


def test_overlap_resolution_is_conservative():
    # published ranges that overlap award the contested values to the more
    # severe band
    assert tag_score(V.RESP_RATE, 17, A.CHILD_2_4Y) == 2
    assert tag_score(V.RESP_RATE, 18, A.CHILD_2_4Y) == 2
    assert tag_score(V.RESP_RATE, 19, A.CHILD_2_4Y) == 1
    assert tag_score(V.DBP, 19, A.INFANT_0_11M) == 3
    assert tag_score(V.DBP, 20, A.TODDLER_12_23M) == 3
    assert tag_score(V.SPO2, 92, A.TODDLER_12_23M) == 2
    assert tag_score(V.SPO2, 93, A.TODDLER_12_23M) == 1
    assert tag_score(V.SPO2, 94, A.TODDLER_12_23M) == 0


def test_gap_resolution_is_conservative():
    for v in (53, 57.5, 62):
        assert tag_score(V.DBP, v, A.ADOLESCENT_12_17Y) == 1
    for v in (145, 147, 149.5):
        assert tag_score(V.SBP, v, A.CHILD_2_4Y) == 3
    for v in (35.0, 35.1, 35.2):
        assert tag_score(V.TEMPERATURE, v, A.CHILD_5_11Y) == 3


def test_shared_boundary_goes_to_upper_band():
    # "27-37" / "37-56": the printed tables mix closed and touching styles;
    # a shared endpoint belongs to the band that starts there
    assert tag_score(V.DBP, 36.5, A.INFANT_0_11M) == 1
    assert tag_score(V.DBP, 37, A.INFANT_0_11M) == 0


def test_tag_vector_order_and_examples():
    normal = {V.RESP_RATE: 15, V.SPO2: 98, V.HEART_RATE: 75, V.SBP: 117,
              V.DBP: 70, V.TEMPERATURE: 37.0}
    assert tag_vector(normal, A.ADULT_18PLUS) == (0, 0, 0, 0, 0, 0)

    high_dbp = {**normal, V.DBP: 95}
    assert tag_vector(high_dbp, A.ADULT_18PLUS) == (0, 0, 0, 0, 3, 0)

    feverish = {**normal, V.TEMPERATURE: 39.0}
    assert tag_vector(feverish, A.ADULT_18PLUS) == (0, 0, 0, 0, 0, 2)


def test_tag_vector_accepts_column_names_and_rejects_missing():
    by_name = {"resp_rate": 15, "spo2": 98, "heart_rate": 75, "sbp": 117,
               "dbp": 70, "temperature": 37.0}
    assert tag_vector(by_name, A.ADULT_18PLUS) == (0, 0, 0, 0, 0, 0)
    incomplete = dict(by_name)
    del incomplete["dbp"]
    with pytest.raises(MissingInputError):
        tag_vector(incomplete, A.ADULT_18PLUS)


def test_alarm_runs_examples():
    assert alarm_runs([0, 0, 0, 0], V.SPO2) == []
    runs = alarm_runs([0, 2, 2, 0, 3], V.SPO2)
    assert [(r.start_minute, r.duration_minutes, r.score) for r in runs] == \
        [(1, 2, 2), (4, 1, 3)]
    runs = alarm_runs([1, 1, 1], V.HEART_RATE)
    assert [(r.start_minute, r.duration_minutes, r.score) for r in runs] == [(0, 3, 1)]


def test_alarm_runs_score_change_starts_new_run():
    runs = alarm_runs([2, 3, 3, 2], V.SPO2)
    assert [(r.start_minute, r.duration_minutes, r.score) for r in runs] == \
        [(0, 1, 2), (1, 2, 3), (3, 1, 2)]


def test_alarm_runs_partition_nonzero_minutes(rng):
    for _ in range(100):
        series = rng.integers(0, 4, size=rng.integers(0, 40))
        runs = alarm_runs(series, V.RESP_RATE)
        assert sum(r.duration_minutes for r in runs) == int((series != 0).sum())
        # runs agree with a naive run-length encoding of the series
        expected = [(v, s, n) for v, s, n in rle(series) if v != 0]
        assert [(r.score, r.start_minute, r.duration_minutes) for r in runs] == expected
        # non-overlapping and maximal
        for a, b in zip(runs, runs[1:]):
            end = a.start_minute + a.duration_minutes
            assert end <= b.start_minute
            if end == b.start_minute:
                assert a.score != b.score


def test_alarm_runs_start_offset():
    runs = alarm_runs([0, 1], V.SPO2, start_minute=100)
    assert runs[0].start_minute == 101
