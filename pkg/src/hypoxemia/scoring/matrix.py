"""Loading and normalization of the scoring matrix data file.

The matrix ships as a CSV mirroring the published threshold tables verbatim
(columns ``age_band,vital,bin_side,bin_level,lo,hi``; empty ``lo``/``hi``
mark unbounded tails).  Per-vital TAG tables are keyed by age band; the
SpO2 severity-label tables are keyed by population group and stored in the
same file under the group's name.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

from ..errors import SchemaError
from ..vitals import SANITIZE_RANGES, TABLE_STEP, AgeBand, PopulationGroup, VitalKind
from .bands import NormalizationReport, NormalizedTable, RawBand, normalize_table

_EXPECTED_HEADER = ["age_band", "vital", "bin_side", "bin_level", "lo", "hi"]


def _read_rows(path: str | Path | None) -> list[dict]:
    if path is None:
        ref = resources.files("hypoxemia.scoring").joinpath("data/news2plus_bands.csv")
        text = ref.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames != _EXPECTED_HEADER:
        raise SchemaError(
            f"matrix file header must be {','.join(_EXPECTED_HEADER)}, "
            f"got {reader.fieldnames}")
    return list(reader)


def _parse_edge(raw: str) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise SchemaError(f"bad matrix edge value {raw!r}") from exc


class ScoringMatrix:
    """Normalized TAG and severity lookup tables plus the normalization report."""

    def __init__(self, tag_tables: dict[tuple[AgeBand, VitalKind], NormalizedTable],
                 severity_tables: dict[PopulationGroup, NormalizedTable],
                 report: NormalizationReport):
        self.tag_tables = tag_tables
        self.severity_tables = severity_tables
        self.report = report

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ScoringMatrix":
        rows = _read_rows(path)
        grouped: dict[tuple[str, str], list[RawBand]] = {}
        for row in rows:
            key = (row["age_band"].strip(), row["vital"].strip())
            try:
                band = RawBand(row["bin_side"].strip(), int(row["bin_level"]),
                               _parse_edge(row["lo"]), _parse_edge(row["hi"]))
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"bad matrix row {row!r}") from exc
            if band.side not in ("low", "normal", "high") or not 0 <= band.level <= 3:
                raise SchemaError(f"bad matrix row {row!r}")
            grouped.setdefault(key, []).append(band)

        report = NormalizationReport()
        tag_tables: dict[tuple[AgeBand, VitalKind], NormalizedTable] = {}
        severity_tables: dict[PopulationGroup, NormalizedTable] = {}
        group_names = {g.value for g in PopulationGroup}
        band_names = {b.value for b in AgeBand}

        for (table_name, vital_name), bands in grouped.items():
            try:
                vital = VitalKind(vital_name)
            except ValueError as exc:
                raise SchemaError(f"unknown vital {vital_name!r}") from exc
            normalized = normalize_table(
                table_name, vital_name, bands,
                SANITIZE_RANGES[vital], TABLE_STEP[vital], report)
            if table_name in group_names:
                if vital is not VitalKind.SPO2:
                    raise SchemaError(
                        f"severity table {table_name} must be keyed on spo2")
                severity_tables[PopulationGroup(table_name)] = normalized
            elif table_name in band_names:
                tag_tables[(AgeBand(table_name), vital)] = normalized
            else:
                raise SchemaError(f"unknown table name {table_name!r}")

        missing = [(b.value, v.value) for b in AgeBand for v in VitalKind
                   if (b, v) not in tag_tables]
        if missing:
            raise SchemaError(f"matrix file missing TAG tables: {missing}")
        absent_groups = [g.value for g in PopulationGroup if g not in severity_tables]
        if absent_groups:
            raise SchemaError(f"matrix file missing severity tables: {absent_groups}")
        return cls(tag_tables, severity_tables, report)

    def dump(self) -> dict:
        """Normalized intervals plus the resolution report, JSON-ready."""
        tag = {}
        for (band, vital), table in sorted(
                self.tag_tables.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
            tag.setdefault(band.value, {})[vital.value] = table.as_dict()
        severity = {group.value: table.as_dict()
                    for group, table in sorted(self.severity_tables.items(),
                                               key=lambda kv: kv[0].value)}
        return {
            "schema_version": 1,
            "tag": tag,
            "severity": severity,
            "normalization": self.report.as_dict(),
        }

    def dump_json(self, indent: int = 2) -> str:
        return json.dumps(self.dump(), indent=indent, sort_keys=False)


_DEFAULT: ScoringMatrix | None = None


def default_matrix() -> ScoringMatrix:
    """The embedded matrix, loaded once and shared (immutable thereafter)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = ScoringMatrix.load()
    return _DEFAULT
