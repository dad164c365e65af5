"""Bundled synthetic demo dataset for the end-to-end pipeline.

Writes NIfTI ellipsoid masks whose size/shape drift with age, sex,
weight, and diabetes status, plus the demographics, events, and code-set
files the pipeline consumes. Fully seeded and deterministic.
"""

from __future__ import annotations

import datetime as dt
import os

import numpy as np

from . import phantoms
from .tables import write_csv, write_json
from .volume_io import write_mask

CODESETS = {
    "t2d": ["E11.9", "EM_202.2"],
    "t1d": ["E10.9", "EM_202.1"],
    "cancer": ["C25.9"],
    "sepsis": ["A41.9"],
    "trauma": ["S36.209A"],
}

BASE_DATE = dt.date(2020, 1, 1)


def write_demo(outdir, n_patients: int = 240, seed: int = 7, spacing: float = 3.0):
    """Create the demo tree: masks/, manifest.csv, demographics.csv,
    events.csv, codesets.json. Returns the manifest path."""
    rng = np.random.default_rng(seed)
    os.makedirs(os.path.join(outdir, "masks"), exist_ok=True)

    manifest = []
    demographics = []
    events = []
    for i in range(n_patients):
        pid = f"p{i:04d}"
        sid = f"s{i:04d}"
        age = float(np.round(rng.uniform(21.0, 89.0), 1))
        sex = "M" if rng.uniform() < 0.5 else "F"
        weight = float(np.round(rng.normal(82.0 if sex == "M" else 70.0, 11.0), 1))
        weight = float(np.clip(weight, 42.0, 150.0))
        diabetic = rng.uniform() < 0.45
        scan_date = BASE_DATE + dt.timedelta(days=int(rng.integers(0, 365)))

        # Ellipsoid semi-axes (mm): shrink with age, smaller in t2d.
        base = 46.0 + 0.12 * (weight - 75.0) + (2.5 if sex == "M" else 0.0)
        a = base - 0.10 * (age - 50.0) - (3.0 if diabetic else 0.0)
        b = 0.55 * a * float(np.exp(rng.normal(0.0, 0.05)))
        c = 0.33 * a * float(np.exp(rng.normal(0.0, 0.06)))
        a *= float(np.exp(rng.normal(0.0, 0.04)))
        a = max(a, 24.0)
        b = float(np.clip(b, 12.0, a - 1.0))
        c = float(np.clip(c, 9.0, b - 0.5))

        spec = phantoms.PhantomSpec("ellipsoid", (a, b, c), spacing=spacing, padding=2)
        path = os.path.join("masks", f"{sid}.nii.gz")
        write_mask(phantoms.generate(spec), os.path.join(outdir, path))

        manifest.append((sid, pid, path))
        demographics.append(
            {
                "patient_id": pid,
                "age_years": age,
                "sex": sex,
                "weight_kg": weight,
                "modality": "ct_contrast",
                "scan_date": scan_date.isoformat(),
                "a1c": round(float(rng.normal(7.2 if diabetic else 5.3, 0.3)), 1),
            }
        )
        if diabetic:
            events.append(
                {
                    "patient_id": pid,
                    "date": (scan_date + dt.timedelta(days=int(rng.integers(-400, 300)))).isoformat(),
                    "vocabulary": "ICD",
                    "code": CODESETS["t2d"][0],
                    "description": "Type 2 diabetes mellitus without complications",
                }
            )
        # A few exclusions to exercise the label rules.
        if i % 37 == 0:
            events.append(
                {
                    "patient_id": pid,
                    "date": scan_date.isoformat(),
                    "vocabulary": "ICD",
                    "code": "K86.1",
                    "description": "Chronic pancreatitis",
                }
            )

    write_csv(
        os.path.join(outdir, "manifest.csv"),
        ["scan_id", "patient_id", "path"],
        manifest,
    )
    write_csv(
        os.path.join(outdir, "demographics.csv"),
        ["patient_id", "age_years", "sex", "weight_kg", "modality", "scan_date", "a1c"],
        demographics,
    )
    write_csv(
        os.path.join(outdir, "events.csv"),
        ["patient_id", "date", "vocabulary", "code", "description"],
        events,
    )
    write_json(os.path.join(outdir, "codesets.json"), CODESETS)
    return os.path.join(outdir, "manifest.csv")
