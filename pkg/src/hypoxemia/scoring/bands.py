"""Threshold-band normalization for the scoring matrices.

The published scoring tables list closed ranges at integer (or 0.1 degree)
precision, e.g. ``60-90`` / ``91-110``, with unbounded tails written as
``<=X`` / ``>=X``.  Runtime lookups however receive real values (interpolated
and rounded measurements), so every table is normalized once into half-open
intervals that partition the sanitized domain: each bin owns
``[its lower edge, next bin's lower edge)`` and the topmost bin is closed at
the domain maximum.

A few published tables are internally inconsistent.  Normalization resolves
them with one conservative rule, and records what it did:

* ranges that properly overlap (one band crossing into the interior of
  another, or two bands sharing a lower edge) are awarded to the MORE severe
  band; reported as an ``overlap`` anomaly;
* coverage gaps between two bounded bands are awarded to the more severe
  flank; reported as a ``gap`` anomaly;
* a gap flanked by an unbounded (``<=``/``>=``) tail band is absorbed by
  that tail, which in every published table is the more severe flank; logged
  as a tail note, not an anomaly;
* two bands that merely touch at one printed value (``27-37`` / ``37-56``)
  follow the half-open convention: the shared value belongs to the band whose
  lower edge it is.  This is treated as a printing convention, not a defect.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from ..errors import SchemaError


@dataclass(frozen=True)
class RawBand:
    """One published range, before normalization.

    ``lo``/``hi`` are the printed closed-range edges; ``None`` marks an
    unbounded ``<=``/``>=`` tail.
    """

    side: str       # "low" | "normal" | "high"
    level: int      # 0..3
    lo: float | None
    hi: float | None

    @property
    def open_ended(self) -> bool:
        return self.lo is None or self.hi is None

    def text(self) -> str:
        if self.lo is None:
            return f"<={self.hi:g}"
        if self.hi is None:
            return f">={self.lo:g}"
        if self.lo == self.hi:
            return f"{self.lo:g}"
        return f"{self.lo:g}-{self.hi:g}"


@dataclass(frozen=True)
class SeverityBin:
    """Normalized half-open interval [lo, hi); the topmost bin includes hi."""

    side: str
    level: int
    lo: float
    hi: float
    hi_inclusive: bool = False

    def as_dict(self) -> dict:
        return {
            "side": self.side,
            "level": self.level,
            "lo": self.lo,
            "hi": self.hi,
            "hi_inclusive": self.hi_inclusive,
        }


@dataclass(frozen=True)
class MatrixAnomaly:
    """An overlap or gap in the published table that normalization resolved."""

    table: str      # age band or population group name
    vital: str
    kind: str       # "overlap" | "gap"
    lo: float       # contested / uncovered closed range, in table units
    hi: float
    winner_level: int
    loser_level: int
    detail: str

    def as_dict(self) -> dict:
        return {
            "table": self.table,
            "vital": self.vital,
            "kind": self.kind,
            "lo": self.lo,
            "hi": self.hi,
            "winner_level": self.winner_level,
            "loser_level": self.loser_level,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class TailNote:
    """A silent edge adjustment (tail extension or tail-absorbed gap)."""

    table: str
    vital: str
    kind: str       # "tail_extension" | "tail_gap_absorption"
    lo: float
    hi: float
    detail: str

    def as_dict(self) -> dict:
        return {
            "table": self.table,
            "vital": self.vital,
            "kind": self.kind,
            "lo": self.lo,
            "hi": self.hi,
            "detail": self.detail,
        }


@dataclass
class NormalizationReport:
    """Everything the normalizer changed relative to the printed tables."""

    anomalies: list[MatrixAnomaly] = field(default_factory=list)
    notes: list[TailNote] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "anomalies": [a.as_dict() for a in self.anomalies],
            "notes": [n.as_dict() for n in self.notes],
        }


class NormalizedTable:
    """Lookup table over one (age band, vital): value -> severity bin."""

    def __init__(self, table: str, vital: str, bins: list[SeverityBin],
                 domain: tuple[float, float]):
        self.table = table
        self.vital = vital
        self.bins = bins
        self.domain = domain
        self._los = [b.lo for b in bins]

    def lookup(self, value: float) -> SeverityBin:
        # caller guarantees domain_min <= value <= domain_max
        idx = bisect_right(self._los, value) - 1
        return self.bins[idx]

    def lookup_levels(self, values) -> "np.ndarray":
        """Vectorized level lookup for a sanitized value array."""
        import numpy as np

        arr = np.asarray(values, dtype=float)
        if arr.size and (np.isnan(arr).any() or arr.min() < self.domain[0]
                         or arr.max() > self.domain[1]):
            raise ValueError(
                f"{self.table}/{self.vital}: values outside domain {self.domain}")
        idx = np.searchsorted(self._los, arr, side="right") - 1
        levels = np.asarray([b.level for b in self.bins])
        return levels[idx]

    def as_dict(self) -> dict:
        return {"domain": list(self.domain), "bins": [b.as_dict() for b in self.bins]}


class _Work:
    """Mutable closed grid range for one band during normalization."""

    __slots__ = ("band", "lo", "hi")

    def __init__(self, band: RawBand, lo: int, hi: int):
        self.band = band
        self.lo = lo    # closed, in grid units
        self.hi = hi


def _to_grid(value: float, scale: int) -> int:
    return round(value * scale)


def normalize_table(table: str, vital: str, bands: list[RawBand],
                    domain: tuple[float, float], step: float,
                    report: NormalizationReport) -> NormalizedTable:
    """Normalize one table of published bands into a total lookup table.

    ``step`` is the decimal resolution of the printed values (1 or 0.1); all
    edge arithmetic happens on an integer grid scaled by 1/step to avoid
    float drift.
    """
    if not bands:
        raise SchemaError(f"{table}/{vital}: empty band table")
    if len(bands) > 7:
        raise SchemaError(f"{table}/{vital}: more than 7 bins")

    scale = round(1.0 / step)
    dmin = _to_grid(domain[0], scale)
    dmax = _to_grid(domain[1], scale)

    work: list[_Work] = []
    for b in bands:
        lo = dmin if b.lo is None else _to_grid(b.lo, scale)
        hi = dmax if b.hi is None else _to_grid(b.hi, scale)
        # printed edges beyond the sanitized domain (e.g. "30-400" breaths/min
        # against a domain max of 300) are clamped silently
        lo, hi = max(lo, dmin), min(hi, dmax)
        if lo > hi:
            raise SchemaError(f"{table}/{vital}: inverted range {b.text()}")
        work.append(_Work(b, lo, hi))

    work.sort(key=lambda w: (w.lo, w.hi))

    def fmt(g: int) -> float:
        return g / scale

    # -- resolve proper overlaps (interior crossings and shared lower edges):
    #    the more severe band keeps the contested values
    changed = True
    while changed:
        changed = False
        work.sort(key=lambda w: (w.lo, w.hi))
        for i in range(len(work) - 1):
            a, b = work[i], work[i + 1]
            if b.lo > a.hi:
                continue                      # disjoint
            if b.lo == a.hi and a.lo < b.lo:
                continue                      # single-point touch: handled below
            contested_lo, contested_hi = b.lo, min(a.hi, b.hi)
            winner, loser = (a, b) if a.band.level > b.band.level else (b, a)
            report.anomalies.append(MatrixAnomaly(
                table, vital, "overlap", fmt(contested_lo), fmt(contested_hi),
                winner.band.level, loser.band.level,
                f"{a.band.text()} vs {b.band.text()}: "
                f"level {winner.band.level} keeps "
                f"[{fmt(contested_lo):g}, {fmt(contested_hi):g}]",
            ))
            if loser is b:
                loser.lo = contested_hi + 1
            else:
                loser.hi = contested_lo - 1
            if loser.lo > loser.hi:
                raise SchemaError(
                    f"{table}/{vital}: band {loser.band.text()} vanished during "
                    "overlap resolution")
            changed = True
            break

    # -- single-point touches: the shared value goes to the upper band
    #    (half-open convention), trim the lower band silently
    work.sort(key=lambda w: (w.lo, w.hi))
    for i in range(len(work) - 1):
        if work[i].hi == work[i + 1].lo:
            work[i].hi -= 1

    # -- close coverage gaps: more severe flank absorbs the gap; only a gap
    #    between two bounded bands counts as a table anomaly
    for i in range(len(work) - 1):
        a, b = work[i], work[i + 1]
        if b.lo - a.hi <= 1:
            continue
        gap_lo, gap_hi = a.hi + 1, b.lo - 1
        winner = a if a.band.level > b.band.level else b
        loser = b if winner is a else a
        detail = (f"values [{fmt(gap_lo):g}, {fmt(gap_hi):g}] between "
                  f"{a.band.text()} and {b.band.text()} assigned to level "
                  f"{winner.band.level}")
        if a.band.open_ended or b.band.open_ended:
            report.notes.append(TailNote(
                table, vital, "tail_gap_absorption", fmt(gap_lo), fmt(gap_hi), detail))
        else:
            report.anomalies.append(MatrixAnomaly(
                table, vital, "gap", fmt(gap_lo), fmt(gap_hi),
                winner.band.level, loser.band.level, detail))
        if winner is a:
            a.hi = gap_hi
        else:
            b.lo = gap_lo

    # -- extend the outermost bands to the domain edges
    if work[0].lo > dmin:
        report.notes.append(TailNote(
            table, vital, "tail_extension", fmt(dmin), fmt(work[0].lo - 1),
            f"bottom band {work[0].band.text()} extended down to {fmt(dmin):g}"))
        work[0].lo = dmin
    if work[-1].hi < dmax:
        report.notes.append(TailNote(
            table, vital, "tail_extension", fmt(work[-1].hi + 1), fmt(dmax),
            f"top band {work[-1].band.text()} extended up to {fmt(dmax):g}"))
        work[-1].hi = dmax

    for i in range(len(work) - 1):
        if work[i].hi + 1 != work[i + 1].lo:
            raise SchemaError(
                f"{table}/{vital}: normalization left a discontinuity at "
                f"{fmt(work[i].hi):g} -> {fmt(work[i + 1].lo):g}")

    bins = []
    for i, w in enumerate(work):
        last = i == len(work) - 1
        hi = fmt(dmax) if last else fmt(work[i + 1].lo)
        bins.append(SeverityBin(w.band.side, w.band.level, fmt(w.lo), hi,
                                hi_inclusive=last))
    return NormalizedTable(table, vital, bins, domain)
