"""Diabetes label assignment from coded event streams, exclusions, and
age/sex-matched case-control construction."""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass, field

from .errors import DegenerateInputError

VOCABULARIES = {"ICD", "PHECODE", "CPT", "PROWAS"}
GROUPS = {"control", "t2d", "excluded"}
MODALITIES = {"ct_contrast", "ct_noncontrast", "mri"}

LOOKAHEAD_DAYS = 365
A1C_CONTROL_LIMIT = 6.5  # percent; control with A1C at/above this is excluded
TRAUMA_WINDOW_DAYS = 30  # scan within +-window of a trauma event

PANCREAS_SEGMENT = "panc"


def _parse_date(value):
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value))


@dataclass
class EventRecord:
    patient_id: str
    date: dt.date
    vocabulary: str
    code: str
    description: str = ""

    def __post_init__(self):
        self.date = _parse_date(self.date)
        self.vocabulary = self.vocabulary.upper()
        if self.vocabulary not in VOCABULARIES:
            raise DegenerateInputError(f"unknown vocabulary {self.vocabulary!r}")


@dataclass
class CohortRow:
    patient_id: str
    age_years: float
    sex: str
    weight_kg: float
    group: str
    modality: str
    scan_date: dt.date | None = None
    exclusion_reason: str | None = None
    a1c: float | None = None
    features: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.age_years <= 120.0:
            raise DegenerateInputError(f"age {self.age_years} outside [0, 120]")
        if self.sex not in ("M", "F"):
            raise DegenerateInputError(f"sex must be M or F, got {self.sex!r}")
        if not 1.0 < self.weight_kg < 400.0:
            raise DegenerateInputError(f"weight {self.weight_kg} outside (1, 400)")
        if self.group not in GROUPS:
            raise DegenerateInputError(f"unknown group {self.group!r}")
        if self.modality not in MODALITIES:
            raise DegenerateInputError(f"unknown modality {self.modality!r}")
        if (self.group == "excluded") != (self.exclusion_reason is not None):
            raise DegenerateInputError(
                "group 'excluded' iff exclusion_reason is present"
            )
        if self.scan_date is not None:
            self.scan_date = _parse_date(self.scan_date)


@dataclass
class CodeSets:
    """Named code lists; pancreas pathology is matched on the
    case-insensitive description segment 'panc' instead of codes."""

    t2d: frozenset
    t1d: frozenset
    cancer: frozenset = frozenset()
    sepsis: frozenset = frozenset()
    trauma: frozenset = frozenset()

    def __post_init__(self):
        self.t2d = frozenset(self.t2d)
        self.t1d = frozenset(self.t1d)
        self.cancer = frozenset(self.cancer)
        self.sepsis = frozenset(self.sepsis)
        self.trauma = frozenset(self.trauma)
        if self.t2d & self.t1d:
            raise DegenerateInputError("t2d and t1d code sets overlap")

    @classmethod
    def from_dict(cls, d):
        return cls(
            t2d=d.get("t2d", ()),
            t1d=d.get("t1d", ()),
            cancer=d.get("cancer", ()),
            sepsis=d.get("sepsis", ()),
            trauma=d.get("trauma", ()),
        )


def assign_label(events, scan_date, codesets: CodeSets, a1c=None,
                 trauma_window_days: int = TRAUMA_WINDOW_DAYS):
    """Label one patient from events dated up to scan_date + 365 days.

    Returns (group, exclusion_reason_or_None). Exclusions take priority:
    cancer/sepsis codes, any 'panc' description, or a trauma code within
    +-trauma_window_days of the scan. Then t2d requires >= 1 t2d event
    and no t1d events; control requires no diabetes events at all, and
    an A1C >= 6.5 contradicts a control label.
    """
    scan_date = _parse_date(scan_date)
    horizon = scan_date + dt.timedelta(days=LOOKAHEAD_DAYS)
    window = dt.timedelta(days=trauma_window_days)

    n_t2d = n_t1d = 0
    for ev in events:
        if ev.date > horizon:
            continue
        if ev.code in codesets.cancer:
            return "excluded", "cancer"
        if ev.code in codesets.sepsis:
            return "excluded", "sepsis"
        if PANCREAS_SEGMENT in ev.description.lower():
            return "excluded", "pancreas_pathology"
        if ev.code in codesets.trauma and abs(ev.date - scan_date) <= window:
            return "excluded", "trauma"
        if ev.code in codesets.t2d:
            n_t2d += 1
        elif ev.code in codesets.t1d:
            n_t1d += 1

    if n_t2d >= 1 and n_t1d == 0:
        return "t2d", None
    if n_t2d == 0 and n_t1d == 0:
        if a1c is not None and a1c >= A1C_CONTROL_LIMIT:
            return "excluded", "a1c_contradicts_control"
        return "control", None
    return "excluded", "t1d_or_ambiguous"


def match_cohort(rows, bin_years: int = 5):
    """1:1 age/sex matching of t2d to control rows.

    Exact match on sex and ``bin_years`` age bin; within each cell, t2d
    patients (ascending patient_id) greedily take the closest-age unused
    control (ties: smallest control patient_id). Returns the matched
    rows sorted by patient_id, with equal counts per group.
    """
    if bin_years < 1:
        raise DegenerateInputError("bin_years must be >= 1")
    cases = sorted(
        (r for r in rows if r.group == "t2d"), key=lambda r: r.patient_id
    )
    controls = [r for r in rows if r.group == "control"]
    if not cases or not controls:
        warnings.warn("empty cohort: need both t2d and control rows")
        return []

    cells = {}
    for r in controls:
        key = (r.sex, int(r.age_years // bin_years))
        cells.setdefault(key, []).append(r)
    for pool in cells.values():
        pool.sort(key=lambda r: r.patient_id)

    matched = []
    for case in cases:
        pool = cells.get((case.sex, int(case.age_years // bin_years)))
        if not pool:
            continue
        best = min(pool, key=lambda r: (abs(r.age_years - case.age_years), r.patient_id))
        pool.remove(best)
        matched.append(case)
        matched.append(best)
    if not matched:
        warnings.warn("empty cohort: no overlapping (sex, age-bin) cells")
    return sorted(matched, key=lambda r: r.patient_id)


def volume_index(volume_mm3: float, weight_kg: float) -> float:
    """Organ volume divided by body weight (mm^3/kg)."""
    if weight_kg <= 0:
        raise DegenerateInputError("weight must be positive")
    return float(volume_mm3) / float(weight_kg)


def volume_index_cm3(volume_mm3: float, weight_kg: float) -> float:
    """Volume index in cm^3/kg."""
    return volume_index(volume_mm3, weight_kg) / 1000.0
