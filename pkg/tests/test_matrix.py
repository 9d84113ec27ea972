"""Normalization of the published scoring bands into runtime intervals."""

import json

import pytest

from hypoxemia.errors import SchemaError
from hypoxemia.scoring import ScoringMatrix, default_matrix
from hypoxemia.vitals import SANITIZE_RANGES, AgeBand, PopulationGroup, VitalKind

# the internally inconsistent published ranges, and nothing else
EXPECTED_ANOMALIES = {
    ("child_2_4y", "resp_rate", "overlap"),
    ("toddler_12_23m", "spo2", "overlap"),
    ("infant_0_11m", "dbp", "overlap"),
    ("toddler_12_23m", "dbp", "overlap"),
    ("adolescent_12_17y", "dbp", "gap"),
}


def test_anomaly_report_matches_expected_set():
    report = default_matrix().report
    found = {(a.table, a.vital, a.kind) for a in report.anomalies}
    assert found == EXPECTED_ANOMALIES
    # the toddler SpO2 normal band collides with both singleton bands
    spo2_events = [a for a in report.anomalies
                   if (a.table, a.vital) == ("toddler_12_23m", "spo2")]
    assert len(spo2_events) == 2
    assert len(report.anomalies) == 6


def test_gap_anomaly_detail():
    report = default_matrix().report
    gap = [a for a in report.anomalies if a.kind == "gap"]
    assert len(gap) == 1
    assert (gap[0].lo, gap[0].hi) == (53.0, 62.0)
    assert gap[0].winner_level == 1      # mild-low absorbs, conservative


def test_tail_notes_cover_unbounded_band_adjustments():
    report = default_matrix().report
    tails = {(n.table, n.vital, n.kind) for n in report.notes}
    assert ("child_2_4y", "sbp", "tail_gap_absorption") in tails
    assert ("adult_copd", "spo2", "tail_extension") in tails
    for band in ("infant_0_11m", "toddler_12_23m", "child_2_4y",
                 "child_5_11y", "adolescent_12_17y"):
        assert (band, "temperature", "tail_gap_absorption") in tails


def test_tables_complete_and_bounded():
    m = default_matrix()
    assert set(m.tag_tables) == {(b, v) for b in AgeBand for v in VitalKind}
    assert set(m.severity_tables) == set(PopulationGroup)
    for table in list(m.tag_tables.values()) + list(m.severity_tables.values()):
        assert 1 <= len(table.bins) <= 7
        domain = SANITIZE_RANGES[VitalKind(table.vital)]
        assert table.bins[0].lo == domain[0]
        assert table.bins[-1].hi == domain[1] and table.bins[-1].hi_inclusive
        for prev, cur in zip(table.bins, table.bins[1:]):
            assert prev.hi == cur.lo        # intervals tile the domain


def test_spo2_tables_have_no_high_bins():
    m = default_matrix()
    for band in AgeBand:
        table = m.tag_tables[(band, VitalKind.SPO2)]
        assert all(b.side in ("low", "normal") for b in table.bins)


def test_dump_round_trips_as_json():
    dump = json.loads(default_matrix().dump_json())
    assert dump["schema_version"] == 1
    assert set(dump["tag"]) == {b.value for b in AgeBand}
    assert set(dump["severity"]) == {g.value for g in PopulationGroup}
    anomalies = dump["normalization"]["anomalies"]
    assert {(a["table"], a["vital"], a["kind"]) for a in anomalies} == EXPECTED_ANOMALIES


def test_adult_copd_normal_band_extends_to_domain_max():
    table = default_matrix().severity_tables[PopulationGroup.ADULT_COPD]
    top = table.bins[-1]
    assert (top.level, top.lo, top.hi) == (0, 88.0, 100.0)


def test_load_custom_matrix_file(tmp_path):
    path = tmp_path / "bands.csv"
    path.write_text(
        "age_band,vital,bin_side,bin_level,lo,hi\n"
        "adult,heart_rate,low,3,,40\n")
    with pytest.raises(SchemaError):   # incomplete matrix
        ScoringMatrix.load(path)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bands.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaError):
        ScoringMatrix.load(path)


def test_load_rejects_bad_rows(tmp_path):
    path = tmp_path / "bands.csv"
    path.write_text(
        "age_band,vital,bin_side,bin_level,lo,hi\n"
        "adult,heart_rate,sideways,9,0,40\n")
    with pytest.raises(SchemaError):
        ScoringMatrix.load(path)
