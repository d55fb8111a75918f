"""
Patient-grouped data partitioning.

All assignment happens at the patient level: every scan follows its
patient, so no patient can appear in two partitions of a plan.  Patient order
is a stable sort on ``sha256(seed:patient_id)``, which makes plans
independent of the order of the input records.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .cohort import LabeledScan, binary_labels


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    fold_id: int
    train: tuple
    validation: tuple
    test: tuple
    strategy: str
    seed: int

    def partitions(self) -> dict:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def to_dict(self) -> dict:
        return {"fold_id": self.fold_id, "strategy": self.strategy, "seed": self.seed,
                "train": list(self.train), "validation": list(self.validation),
                "test": list(self.test)}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(int(d["fold_id"]), tuple(d["train"]), tuple(d["validation"]),
                   tuple(d["test"]), d["strategy"], int(d["seed"]))


def _hash_key(seed: int, patient_id: str) -> str:
    return hashlib.sha256(f"{seed}:{patient_id}".encode()).hexdigest()


def _eligible(labeled: Sequence[LabeledScan], window: Optional[int], censored_as_negative: bool):
    """scan_id -> patient_id for usable scans, and patient_id -> 0/1 patient label."""
    if window is None:
        scans = {s.scan_id: s.patient_id for s in labeled}
        patient_label = {s.patient_id: 0 for s in labeled}
        return scans, patient_label
    y = binary_labels(labeled, window, censored_as_negative)
    scans = {s.scan_id: s.patient_id for s in labeled if s.scan_id in y}
    patient_label = {}
    for s in labeled:
        if s.scan_id in y:
            patient_label[s.patient_id] = max(patient_label.get(s.patient_id, 0), y[s.scan_id])
    return scans, patient_label


def _ordered_patients(patient_label: Mapping[str, int], seed: int) -> list:
    """Positives first, then negatives, each in hashed order."""
    return sorted(patient_label, key=lambda p: (-patient_label[p], _hash_key(seed, p), p))


def _interleave(patients: Sequence[str], frac: float):
    """Deterministic stratified 2-way split: pick ``frac`` of the sequence evenly spread."""
    first, second = [], []
    for k, p in enumerate(patients):
        if np.floor((k + 1) * frac + 1e-9) > np.floor(k * frac + 1e-9):
            first.append(p)
        else:
            second.append(p)
    return first, second


def _scans_of(scan_to_patient: Mapping[str, str], patients) -> tuple:
    members = set(patients)
    return tuple(sorted(s for s, p in scan_to_patient.items() if p in members))


def grouped_kfold(labeled: Sequence[LabeledScan], k: int = 5, val_frac_of_holdout: float = 0.5,
                  seed: int = 0, window: Optional[int] = None,
                  censored_as_negative: bool = False) -> list:
    """k patient-disjoint folds, each holdout split into validation and test patients.

    With ``window`` set, censored scans are excluded and patients are dealt
    round-robin by patient-level label so every fold sees a similar
    prevalence. Every patient lands in exactly one holdout.
    """
    if k < 2:
        raise SplitError(f"k must be at least 2, got {k}")
    if not 0 <= val_frac_of_holdout <= 1:
        raise SplitError("val_frac_of_holdout must lie in [0, 1]")
    scans, patient_label = _eligible(labeled, window, censored_as_negative)
    if len(patient_label) < k:
        raise SplitError(f"need at least {k} distinct patients, got {len(patient_label)}")
    ordered = _ordered_patients(patient_label, seed)
    groups = [ordered[f::k] for f in range(k)]
    plans = []
    for f in range(k):
        holdout = groups[f]
        val, test = _interleave(holdout, val_frac_of_holdout)
        train = [p for g, grp in enumerate(groups) if g != f for p in grp]
        plans.append(SplitPlan(f, _scans_of(scans, train), _scans_of(scans, val),
                               _scans_of(scans, test), "grouped-kfold", seed))
    return plans


def _largest_remainder(n: int, fracs: Sequence[float]) -> list:
    raw = [n * f for f in fracs]
    base = [int(np.floor(r + 1e-9)) for r in raw]
    order = sorted(range(len(fracs)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def stratified_holdout(labeled: Sequence[LabeledScan], fracs=(0.64, 0.16, 0.20), window: int = 5,
                       seed: int = 0, censored_as_negative: bool = False) -> SplitPlan:
    """Single train/validation/test split, stratified on the patient-level label.

    A patient is positive if any of their usable scans is positive at
    ``window``. Fractions are met on patient counts per class by largest
    remainder rounding.
    """
    fracs = tuple(float(f) for f in fracs)
    if len(fracs) != 3 or any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
        raise SplitError(f"fractions must be three non-negative numbers summing to 1, got {fracs}")
    scans, patient_label = _eligible(labeled, window, censored_as_negative)
    pos = [p for p in _ordered_patients(patient_label, seed) if patient_label[p] == 1]
    neg = [p for p in _ordered_patients(patient_label, seed) if patient_label[p] == 0]
    if not pos or not neg:
        raise SplitError("stratified holdout needs at least one positive and one negative patient")
    parts = ([], [], [])
    for group in (pos, neg):
        sizes = _largest_remainder(len(group), fracs)
        start = 0
        for part, size in zip(parts, sizes):
            part.extend(group[start:start + size])
            start += size
    return SplitPlan(0, *(_scans_of(scans, part) for part in parts), "stratified-holdout", seed)


def check_plan(plan: SplitPlan, labeled: Sequence[LabeledScan]) -> None:
    """Raise SplitError if any patient or scan occurs in two partitions."""
    owner = {s.scan_id: s.patient_id for s in labeled}
    seen = {}
    scan_seen = set()
    for name, ids in plan.partitions().items():
        for s in ids:
            if s in scan_seen:
                raise SplitError(f"scan {s} occurs twice in fold {plan.fold_id}")
            scan_seen.add(s)
            p = owner[s]
            if seen.setdefault(p, name) != name:
                raise SplitError(f"patient {p} leaks between {seen[p]} and {name}")


def write_splits(path, plans_by_window: Mapping[str, Sequence[SplitPlan]]) -> Path:
    path = Path(path)
    payload = {key: [p.to_dict() for p in plans] for key, plans in plans_by_window.items()}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path


def read_splits(path) -> dict:
    payload = json.loads(Path(path).read_text())
    return {key: [SplitPlan.from_dict(d) for d in plans] for key, plans in payload.items()}
