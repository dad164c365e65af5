"""Quality control: structural flags, robust bounding-box-ratio outlier
detection, and lifespan-polynomial scan selection within sessions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError
from .volume_io import VoxelMask

ORGANS = ("pancreas", "liver", "spleen", "kidney_left", "kidney_right")

ROBUST_Z_SCALE = 1.4826  # MAD -> sigma for normal data


@dataclass
class ScanQcRecord:
    session_id: str
    scan_id: str
    age_years: float
    volumes: dict  # organ name -> mm^3
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.age_years <= 120.0:
            raise DegenerateInputError(f"age {self.age_years} outside [0, 120]")
        for organ, v in self.volumes.items():
            if v < 0:
                raise DegenerateInputError(f"negative volume for {organ}")


@dataclass
class LifespanPolynomial:
    """OLS polynomial of volume vs age, fit on a centered/scaled basis."""

    organ: str
    degree: int
    coefficients: np.ndarray  # ascending powers of age (natural units)
    residual_sd: float
    age_min: float
    age_max: float
    # Internal basis bookkeeping for confidence bands.
    age_center: float = 0.0
    age_scale: float = 1.0
    scaled_coefficients: np.ndarray | None = None
    scaled_cov_unit: np.ndarray | None = None  # (X'X)^-1 on the scaled basis
    n: int = 0

    def __call__(self, age):
        age = np.asarray(age, dtype=float)
        return np.polynomial.polynomial.polyval(age, self.coefficients)

    def predict_se(self, age):
        """Standard error of the fitted mean at ``age``."""
        if self.scaled_cov_unit is None:
            raise DegenerateInputError("polynomial has no covariance information")
        t = (np.asarray(age, dtype=float) - self.age_center) / self.age_scale
        V = np.vander(np.atleast_1d(t), self.degree + 1, increasing=True)
        return self.residual_sd * np.sqrt(
            np.einsum("ij,jk,ik->i", V, self.scaled_cov_unit, V)
        )


def edge_touch_flag(mask: VoxelMask) -> bool:
    """True iff any foreground voxel lies on a boundary face of the grid."""
    d = mask.data
    return bool(
        d[0, :, :].any()
        or d[-1, :, :].any()
        or d[:, 0, :].any()
        or d[:, -1, :].any()
        or d[:, :, 0].any()
        or d[:, :, -1].any()
    )


def bbox_outlier_flags(ratios, z_threshold: float = 3.5):
    """Flag records whose log bounding-box face ratios are robust-z
    outliers (|x - median| / (1.4826 * MAD) > threshold, per component).

    Components with zero MAD are skipped with a warning.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.ndim != 2 or ratios.shape[1] != 3:
        raise DegenerateInputError("ratios must be an (n, 3) array")
    if len(ratios) < 10:
        raise DegenerateInputError("need at least 10 records for outlier detection")
    if np.any(ratios <= 0):
        raise DegenerateInputError("face ratios must be positive")

    logr = np.log(ratios)
    flags = np.zeros(len(ratios), dtype=bool)
    for j in range(3):
        med = np.median(logr[:, j])
        mad = np.median(np.abs(logr[:, j] - med))
        if mad == 0:
            warnings.warn(f"ratio component {j} has zero MAD; skipped")
            continue
        z = np.abs(logr[:, j] - med) / (ROBUST_Z_SCALE * mad)
        flags |= z > z_threshold
    return flags.tolist()


def fit_lifespan_polynomial(points, degree: int = 3, organ: str = "") -> LifespanPolynomial:
    """OLS polynomial on a centered/scaled age basis.

    ``points`` is a sequence of (age, volume). residual_sd uses
    n - degree - 1 degrees of freedom.
    """
    if not 1 <= degree <= 6:
        raise DegenerateInputError("degree must be in 1..6")
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInputError("points must be (age, volume) pairs")
    n = len(pts)
    if n < degree + 2:
        raise DegenerateInputError(f"need >= {degree + 2} points for degree {degree}")
    age, y = pts[:, 0], pts[:, 1]
    center = float(age.mean())
    scale = float(age.std())
    if scale == 0:
        raise DegenerateInputError("singular fit: all ages equal")
    t = (age - center) / scale

    V = np.vander(t, degree + 1, increasing=True)
    coef_t, _, rank, _ = np.linalg.lstsq(V, y, rcond=None)
    if rank < degree + 1:
        raise DegenerateInputError("singular design in polynomial fit")
    resid = y - V @ coef_t
    residual_sd = float(np.sqrt(resid @ resid / (n - degree - 1)))

    # Convert to ascending powers of raw age.
    P = np.polynomial.Polynomial
    poly_age = P(coef_t)(P([-center / scale, 1.0 / scale]))
    coefficients = np.zeros(degree + 1)
    coefficients[: len(poly_age.coef)] = poly_age.coef

    cov_unit = np.linalg.inv(V.T @ V)
    return LifespanPolynomial(
        organ=organ,
        degree=degree,
        coefficients=coefficients,
        residual_sd=residual_sd,
        age_min=float(age.min()),
        age_max=float(age.max()),
        age_center=center,
        age_scale=scale,
        scaled_coefficients=coef_t,
        scaled_cov_unit=cov_unit,
        n=n,
    )


def _min_ranks(values):
    """Ascending ranks (1-based); ties share the minimum rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=int)
    rank = 1
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        rank += j - i + 1
        i = j + 1
    return ranks


def select_scan_per_session(records, polys) -> dict:
    """Pick one scan per session: rank scans per organ by absolute
    residual from the organ's lifespan polynomial, sum the five ranks
    with even weighting, and take the minimum (ties: smallest scan_id).
    """
    by_organ = {p.organ: p for p in polys}
    missing = [o for o in ORGANS if o not in by_organ]
    if missing:
        raise DegenerateInputError(f"missing polynomials for {missing}")

    sessions = {}
    for rec in records:
        sessions.setdefault(rec.session_id, []).append(rec)

    selected = {}
    for session_id in sorted(sessions):
        recs = sorted(sessions[session_id], key=lambda r: r.scan_id)
        if not recs:
            warnings.warn(f"session {session_id} has no scans; skipped")
            continue
        for rec in recs:
            if set(ORGANS) - set(rec.volumes):
                raise DegenerateInputError(
                    f"scan {rec.scan_id} is missing organ volumes"
                )
        total = np.zeros(len(recs), dtype=int)
        for organ in ORGANS:
            poly = by_organ[organ]
            resid = [abs(r.volumes[organ] - float(poly(r.age_years))) for r in recs]
            total += _min_ranks(resid)
        best = int(np.argmin(total))  # recs sorted by scan_id: ties break low
        selected[session_id] = recs[best].scan_id
    return selected
