"""
Synthetic phantom cohorts with known ground truth.

Each scan is a body ellipsoid (+40 HU) in air (-1000 HU) holding two lung
ellipsoids (-800 HU).  Patients flagged high-risk get smoothed Gaussian
noise of standard deviation ``texture_contrast`` added inside the lungs.
Under ``risk_model="texture-linked"`` high-risk patients reach the endpoint
shortly after their last scan; low-risk patients either have a late event
or none at all.  Under ``risk_model="none"`` event timing is drawn
independently of the texture flag.

Every patient draws from its own generator seeded by ``(seed, index)``.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .cohort import DAYS_PER_YEAR, PatientRecord, ScanRecord, write_patients, write_scans
from .volgrid import MaskGrid, VolumeGrid, save_mask, save_volume

AIR_HU = -1000
BODY_HU = 40
LUNG_HU = -800
STUDY_END = dt.date(2024, 12, 31)


@dataclass(frozen=True)
class PhantomSpec:
    n_patients: int = 60
    scans_per_patient: tuple = (1, 4)
    risk_model: str = "texture-linked"
    texture_contrast: float = 200.0
    noise_sd: float = 10.0
    seed: int = 0
    high_risk_fraction: float = 0.35
    dims: tuple = (64, 64, 40)
    spacing_mm: tuple = (1.0, 1.0, 1.6)
    texture_sigma_vox: float = 0.8
    exterior_hu: float = AIR_HU

    def validate(self):
        if self.n_patients < 1:
            raise ValueError("n_patients must be at least 1")
        lo, hi = self.scans_per_patient
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid scans_per_patient range {self.scans_per_patient}")
        if self.risk_model not in ("none", "texture-linked"):
            raise ValueError(f"unknown risk model {self.risk_model!r}")
        if self.texture_contrast < 0 or self.noise_sd < 0:
            raise ValueError("texture_contrast and noise_sd must be non-negative")
        if not 0 <= self.high_risk_fraction <= 1:
            raise ValueError("high_risk_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("scans_per_patient", "dims", "spacing_mm"):
            d[k] = list(d[k])
        return d


@dataclass
class Cohort:
    spec: PhantomSpec
    volumes: dict
    masks: dict
    scans: list
    patients: list
    ground_truth: dict = field(default_factory=dict)


def _ellipsoid(coords, centre, semi):
    return sum(((c - c0) / a) ** 2 for c, c0, a in zip(coords, centre, semi)) <= 1.0


def _phantom(spec: PhantomSpec, rng, texture_amplitude: float):
    nx, ny, nz = spec.dims
    sx, sy, sz = spec.spacing_mm
    coords = np.meshgrid((np.arange(nx) + 0.5) * sx, (np.arange(ny) + 0.5) * sy,
                         (np.arange(nz) + 0.5) * sz, indexing="ij")
    ext = np.array([nx * sx, ny * sy, nz * sz])
    mid = ext / 2
    body_semi = ext * np.array([0.45, 0.39, 0.44])
    jitter = rng.uniform(-1.0, 1.0, size=(2, 3))
    lung_semi = ext * np.array([0.14, 0.22, 0.31])
    offset = ext[0] * 0.19

    vol = np.full(spec.dims, float(spec.exterior_hu))
    vol[_ellipsoid(coords, mid, body_semi)] = BODY_HU
    lungs = np.zeros(spec.dims, dtype=bool)
    geometry = []
    for side, sign in enumerate((-1, 1)):
        centre = mid + np.array([sign * offset, 0.0, 0.0]) + jitter[side]
        semi = lung_semi * (1 + 0.03 * jitter[side])
        lungs |= _ellipsoid(coords, centre, semi)
        geometry.append({"centre_mm": centre.tolist(), "semi_axes_mm": semi.tolist()})
    vol[lungs] = LUNG_HU

    if texture_amplitude > 0:
        tex = ndimage.gaussian_filter(rng.standard_normal(spec.dims), spec.texture_sigma_vox)
        tex /= tex.std()
        vol[lungs] += texture_amplitude * tex[lungs]
    if spec.noise_sd > 0:
        vol += rng.normal(0.0, spec.noise_sd, size=spec.dims)
    vol = np.clip(np.round(vol), -32768, 32767).astype(np.int16)
    return vol, lungs.astype(np.uint8), geometry


def _add_years(d: dt.date, years: float) -> dt.date:
    return d + dt.timedelta(days=int(round(years * DAYS_PER_YEAR)))


def _event_timing(rng, high_risk: bool, last_scan: dt.date):
    """(event_type, event_date or None, last_followup)"""
    if high_risk:
        ev = _add_years(last_scan, rng.uniform(0.1, 1.9))
        kind = "death" if rng.uniform() < 0.8 else "transplant"
    elif rng.uniform() < 0.25:
        ev = _add_years(last_scan, rng.uniform(5.5, 12.0))
        kind = "death" if rng.uniform() < 0.8 else "transplant"
    else:
        follow = _add_years(last_scan, rng.uniform(0.5, 10.0))
        return "none", None, min(follow, STUDY_END)
    if ev > STUDY_END:
        return "none", None, STUDY_END
    return kind, ev, ev


def generate_cohort(spec: PhantomSpec | None = None) -> Cohort:
    spec = spec or PhantomSpec()
    spec.validate()
    volumes, masks, scans, patients = {}, {}, [], []
    truth = {"spec": spec.to_dict(), "patients": {}, "scans": {}}
    lo, hi = spec.scans_per_patient
    for k in range(spec.n_patients):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, k]))
        pid = f"P{k:04d}"
        high_risk = bool(rng.uniform() < spec.high_risk_fraction)
        start = dt.date(2001, 1, 1) + dt.timedelta(days=int(rng.integers(0, 18 * 365)))
        n_scans = int(rng.integers(lo, hi + 1))
        dates = [start]
        for _ in range(n_scans - 1):
            dates.append(_add_years(dates[-1], rng.uniform(0.5, 1.0)))

        # the "none" model decouples event timing from the texture flag
        timing_flag = high_risk if spec.risk_model == "texture-linked" else bool(
            rng.uniform() < spec.high_risk_fraction)
        event_type, event_date, follow = _event_timing(rng, timing_flag, dates[-1])
        patients.append(PatientRecord(pid, event_type, event_date, follow))
        truth["patients"][pid] = {
            "high_risk": high_risk, "timing_high_risk": timing_flag, "event_type": event_type,
            "event_date": event_date.isoformat() if event_date else None,
            "last_followup_date": follow.isoformat(), "n_scans": n_scans,
        }

        amplitude = spec.texture_contrast if high_risk else 0.0
        for j, date in enumerate(dates):
            sid = f"{pid}_S{j}"
            vol, lung, geometry = _phantom(spec, rng, amplitude)
            ild = high_risk or rng.uniform() < 0.3
            flag = None if rng.uniform() < 0.1 else bool(ild)
            volumes[sid] = VolumeGrid(vol, spec.spacing_mm, "HU")
            masks[sid] = MaskGrid(lung, spec.spacing_mm)
            scans.append(ScanRecord(sid, pid, date, flag, f"volumes/{sid}.vgrid"))
            truth["scans"][sid] = {"patient_id": pid, "texture_amplitude": amplitude,
                                   "lungs": geometry}
    return Cohort(spec, volumes, masks, scans, patients, truth)


def write_cohort(cohort: Cohort, outdir) -> Path:
    """Write ``volumes/``, ``masks/``, ``scans.csv``, ``patients.csv`` and ``ground_truth.json``."""
    outdir = Path(outdir)
    (outdir / "volumes").mkdir(parents=True, exist_ok=True)
    (outdir / "masks").mkdir(parents=True, exist_ok=True)
    for sid, v in cohort.volumes.items():
        save_volume(v, outdir / "volumes" / f"{sid}.vgrid", dtype="i16")
        save_mask(cohort.masks[sid], outdir / "masks" / f"{sid}.vgrid")
    write_scans(outdir / "scans.csv", cohort.scans)
    write_patients(outdir / "patients.csv", cohort.patients)
    (outdir / "ground_truth.json").write_text(
        json.dumps(cohort.ground_truth, indent=1, sort_keys=True) + "\n")
    return outdir
