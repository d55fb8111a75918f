"""
Cohort records, mortality-window labels and descriptive cohort summaries.

Death and lung transplant are the same endpoint.  A window of ``w`` years is
``365.25 * w`` days.  At each window a scan is

* ``positive`` if the event happened within the window,
* ``negative`` if the patient was observed event-free for the whole window
  (follow-up or a later event reaching past it),
* ``censored`` otherwise.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

WINDOWS = (1, 3, 5)
DAYS_PER_YEAR = 365.25

POSITIVE = "positive"
NEGATIVE = "negative"
CENSORED = "censored"

EVENT_TYPES = ("death", "transplant", "none")


class DataIntegrityError(ValueError):
    pass


@dataclass(frozen=True)
class ScanRecord:
    scan_id: str
    patient_id: str
    scan_date: dt.date
    ild_positive: Optional[bool] = None
    volume_path: str = ""


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    event_type: str
    event_date: Optional[dt.date]
    last_followup_date: dt.date

    def __post_init__(self):
        if self.event_type not in EVENT_TYPES:
            raise DataIntegrityError(f"patient {self.patient_id}: unknown event type {self.event_type!r}")
        if (self.event_type == "none") != (self.event_date is None):
            raise DataIntegrityError(
                f"patient {self.patient_id}: event_date must be given exactly when an event is recorded"
            )

    @property
    def has_event(self) -> bool:
        return self.event_type != "none"


@dataclass(frozen=True)
class LabeledScan:
    scan_id: str
    patient_id: str
    labels: tuple  # one label per entry of WINDOWS

    def label(self, window: int) -> str:
        return self.labels[WINDOWS.index(window)]

    @property
    def label_1y(self):
        return self.labels[0]

    @property
    def label_3y(self):
        return self.labels[1]

    @property
    def label_5y(self):
        return self.labels[2]


def _window_label(scan: ScanRecord, patient: PatientRecord, years: float) -> str:
    limit = DAYS_PER_YEAR * years
    if patient.has_event:
        days = (patient.event_date - scan.scan_date).days
        return POSITIVE if days <= limit else NEGATIVE
    days = (patient.last_followup_date - scan.scan_date).days
    return NEGATIVE if days >= limit else CENSORED


def assign_labels(scans: Iterable[ScanRecord], patients: Iterable[PatientRecord]) -> list:
    """Label each scan at each mortality window.

    Raises DataIntegrityError for unknown patients, duplicate scan ids, scans
    dated after the patient's event, or scans after last follow-up.
    """
    by_id = {}
    for p in patients:
        if p.patient_id in by_id:
            raise DataIntegrityError(f"duplicate patient_id {p.patient_id}")
        by_id[p.patient_id] = p
    seen = set()
    out = []
    for s in scans:
        if s.scan_id in seen:
            raise DataIntegrityError(f"duplicate scan_id {s.scan_id}")
        seen.add(s.scan_id)
        p = by_id.get(s.patient_id)
        if p is None:
            raise DataIntegrityError(f"scan {s.scan_id}: unknown patient {s.patient_id}")
        if p.has_event and s.scan_date > p.event_date:
            raise DataIntegrityError(f"scan {s.scan_id} is dated after the patient's {p.event_type}")
        if not p.has_event and s.scan_date > p.last_followup_date:
            raise DataIntegrityError(f"scan {s.scan_id} is dated after last follow-up")
        out.append(LabeledScan(s.scan_id, s.patient_id,
                               tuple(_window_label(s, p, w) for w in WINDOWS)))
    return out


def binary_labels(labeled: Sequence[LabeledScan], window: int,
                  censored_as_negative: bool = False) -> dict:
    """Map scan_id -> 0/1 for scans usable at ``window``.

    Censored scans are dropped unless ``censored_as_negative`` is set.
    """
    out = {}
    for s in labeled:
        lab = s.label(window)
        if lab == POSITIVE:
            out[s.scan_id] = 1
        elif lab == NEGATIVE or censored_as_negative:
            out[s.scan_id] = 0
    return out


def class_counts(labeled: Sequence[LabeledScan], window: int) -> tuple:
    """``(n_total, n_positive)`` over non-censored scans."""
    n_total = n_pos = 0
    for s in labeled:
        lab = s.label(window)
        if lab == CENSORED:
            continue
        n_total += 1
        n_pos += lab == POSITIVE
    return n_total, n_pos


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclass
class CohortSummary:
    scans_per_year: dict
    first_ild_ct_to_event_years: list
    last_ct_to_event_years: list

    @staticmethod
    def histogram(durations: Sequence[float], bin_years: float = 1.0) -> list:
        """Rows ``(bin_start, bin_end, count)`` over ``[0, max]``; empty input gives no rows."""
        if not durations:
            return []
        n_bins = int(math.floor(max(durations) / bin_years)) + 1
        counts = Counter(int(math.floor(d / bin_years)) for d in durations)
        return [(k * bin_years, (k + 1) * bin_years, counts.get(k, 0)) for k in range(n_bins)]


def _years(a: dt.date, b: dt.date) -> float:
    return (b - a).days / DAYS_PER_YEAR


def cohort_summary(scans: Sequence[ScanRecord], patients: Sequence[PatientRecord]) -> CohortSummary:
    """Scans per calendar year, and per-patient event timing relative to CT.

    ``first_ild_ct_to_event_years`` only covers patients with an ILD-positive
    scan; scans without the flag are ignored there.
    """
    by_patient = {}
    for s in scans:
        by_patient.setdefault(s.patient_id, []).append(s)
    per_year = Counter(s.scan_date.year for s in scans)

    first_ild, last_ct = [], []
    for p in sorted(patients, key=lambda p: p.patient_id):
        own = by_patient.get(p.patient_id, [])
        if not p.has_event or not own:
            continue
        last_ct.append(_years(max(s.scan_date for s in own), p.event_date))
        ild = [s.scan_date for s in own if s.ild_positive]
        if ild:
            first_ild.append(_years(min(ild), p.event_date))
    return CohortSummary(dict(sorted(per_year.items())), first_ild, last_ct)


def write_summary_tables(summary: CohortSummary, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    path = outdir / "summary_scans_per_year.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "n_scans"])
        w.writerows(summary.scans_per_year.items())
    written.append(path)
    for name, durations in (("first_ild_ct_to_event", summary.first_ild_ct_to_event_years),
                            ("last_ct_to_event", summary.last_ct_to_event_years)):
        path = outdir / f"summary_{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_start_years", "bin_end_years", "n_patients"])
            for lo, hi, c in summary.histogram(durations):
                w.writerow([format(lo, "g"), format(hi, "g"), c])
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _date(text: str, what: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataIntegrityError(f"invalid date for {what}: {text!r}") from exc


def read_scans(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            flag = row.get("ild_positive", "NA").strip()
            if flag not in ("0", "1", "NA", ""):
                raise DataIntegrityError(f"scan {row['scan_id']}: ild_positive must be 0, 1 or NA")
            out.append(ScanRecord(
                scan_id=row["scan_id"],
                patient_id=row["patient_id"],
                scan_date=_date(row["scan_date"], f"scan {row['scan_id']}"),
                ild_positive=None if flag in ("NA", "") else flag == "1",
                volume_path=row.get("volume_path", ""),
            ))
    return out


def read_patients(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pid = row["patient_id"]
            ev = row.get("event_date", "").strip()
            out.append(PatientRecord(
                patient_id=pid,
                event_type=row["event_type"].strip(),
                event_date=_date(ev, f"patient {pid}") if ev else None,
                last_followup_date=_date(row["last_followup_date"], f"patient {pid}"),
            ))
    return out


def write_scans(path, scans: Sequence[ScanRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scan_id", "patient_id", "scan_date", "ild_positive", "volume_path"])
        for s in scans:
            flag = "NA" if s.ild_positive is None else str(int(s.ild_positive))
            w.writerow([s.scan_id, s.patient_id, s.scan_date.isoformat(), flag, s.volume_path])


def write_patients(path, patients: Sequence[PatientRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "event_type", "event_date", "last_followup_date"])
        for p in patients:
            w.writerow([p.patient_id, p.event_type,
                        p.event_date.isoformat() if p.event_date else "",
                        p.last_followup_date.isoformat()])


def write_labels(path, labeled: Sequence[LabeledScan]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scan_id", "patient_id", *[f"label_{k}y" for k in WINDOWS]])
        for s in labeled:
            w.writerow([s.scan_id, s.patient_id, *s.labels])


def read_labels(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        windows = tuple(int(h[len("label_"):-1]) for h in header[2:])
        if windows != WINDOWS:
            raise DataIntegrityError(f"{path}: expected label columns for windows {WINDOWS}")
        return [LabeledScan(row[0], row[1], tuple(row[2:])) for row in r]
