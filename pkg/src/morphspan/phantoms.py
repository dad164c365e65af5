"""Synthetic masks with closed-form morphology, used as ground truth.

A voxel is foreground iff its center lies inside the analytic solid
(no partial-volume weighting), on an LAS isotropic grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError
from .volume_io import VoxelMask

KINDS = ("sphere", "ellipsoid", "box", "two-blobs", "edge-touching-sphere")

# Thomsen's approximation exponent for ellipsoid surface area.
_THOMSEN_P = 1.6075


@dataclass
class PhantomSpec:
    kind: str
    # sphere / edge-touching-sphere: (r,); ellipsoid: (a, b, c) semi-axes;
    # box: (lx, ly, lz) edge lengths; two-blobs: (r1, r2, gap).
    parameters: tuple = field(default_factory=tuple)
    spacing: float = 3.0
    padding: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DegenerateInputError(f"unknown phantom kind {self.kind!r}")
        self.parameters = tuple(float(p) for p in self.parameters)
        if any(p <= 0 for p in self.parameters):
            raise DegenerateInputError("phantom lengths must be positive")
        if self.spacing <= 0:
            raise DegenerateInputError("spacing must be positive")
        if self.padding < 0:
            raise DegenerateInputError("padding must be >= 0")


def _las_affine(spacing, shape, center_mm=(0.0, 0.0, 0.0)):
    """LAS affine whose grid is centered on ``center_mm``."""
    aff = np.eye(4)
    aff[0, 0] = -spacing
    aff[1, 1] = spacing
    aff[2, 2] = spacing
    # Voxel index (n-1)/2 maps to center_mm.
    mid = (np.array(shape) - 1) / 2.0
    aff[:3, 3] = np.asarray(center_mm) - aff[:3, :3] @ mid
    return aff


def _grid_coords(shape, aff):
    ii, jj, kk = np.meshgrid(*(np.arange(n) for n in shape), indexing="ij")
    idx = np.stack([ii, jj, kk], axis=-1)
    return idx @ aff[:3, :3].T + aff[:3, 3]


def generate(spec: PhantomSpec) -> VoxelMask:
    """Rasterize the analytic solid onto an LAS grid."""
    s = spec.spacing
    pad = spec.padding

    if spec.kind in ("sphere", "ellipsoid", "edge-touching-sphere"):
        if spec.kind == "ellipsoid":
            a, b, c = spec.parameters
        else:
            (r,) = spec.parameters
            a = b = c = r
        if min(a, b, c) < s / 2:
            raise DegenerateInputError("solid smaller than one voxel")
        half = np.array([a, b, c])
        shape = tuple(int(np.ceil(2 * h / s)) + 1 + 2 * pad for h in half)
        if spec.kind == "edge-touching-sphere":
            # No margin on the inferior face: the solid reaches slice 0.
            shape = (shape[0], shape[1], int(np.ceil(2 * c / s)) + 1)
        aff = _las_affine(s, shape)
        xyz = _grid_coords(shape, aff)
        if spec.kind == "edge-touching-sphere":
            # Shift the sphere down so it pokes through the first slice.
            z0 = xyz[0, 0, 0, 2]
            xyz = xyz - np.array([0.0, 0.0, z0 + c - s])
        q = (xyz / half) ** 2
        data = q.sum(axis=-1) <= 1.0
    elif spec.kind == "box":
        lx, ly, lz = spec.parameters
        if min(lx, ly, lz) < s / 2:
            raise DegenerateInputError("solid smaller than one voxel")
        half = np.array([lx, ly, lz]) / 2.0
        # Grid parity chosen so an edge of k*spacing covers exactly k voxels.
        shape = tuple(int(np.ceil(l / s - 1e-9)) + 2 * pad for l in (lx, ly, lz))
        aff = _las_affine(s, shape)
        xyz = _grid_coords(shape, aff)
        data = np.all(np.abs(xyz) <= half, axis=-1)
    elif spec.kind == "two-blobs":
        r1, r2, gap = spec.parameters
        if min(r1, r2) < s / 2:
            raise DegenerateInputError("solid smaller than one voxel")
        if gap <= 2 * s:
            raise DegenerateInputError("blob gap must exceed 2 voxels")
        # Spheres separated along the superior axis.
        zc = (r1 + r2 + gap) / 2.0
        extent_z = 2 * zc + 2 * max(r1, r2)
        rmax = max(r1, r2)
        shape = (
            int(np.ceil(2 * rmax / s)) + 1 + 2 * pad,
            int(np.ceil(2 * rmax / s)) + 1 + 2 * pad,
            int(np.ceil(extent_z / s)) + 1 + 2 * pad,
        )
        aff = _las_affine(s, shape)
        xyz = _grid_coords(shape, aff)
        d1 = xyz - np.array([0.0, 0.0, -zc])
        d2 = xyz - np.array([0.0, 0.0, zc])
        data = (np.linalg.norm(d1, axis=-1) <= r1) | (
            np.linalg.norm(d2, axis=-1) <= r2
        )
    else:  # pragma: no cover
        raise DegenerateInputError(spec.kind)

    mask = VoxelMask(data, aff)
    if mask.foreground_count() == 0:
        raise DegenerateInputError("degenerate phantom: no foreground voxels")
    return mask


def ellipsoid_surface_area(a, b, c):
    """Thomsen's approximation (exact for a sphere)."""
    p = _THOMSEN_P
    term = (a**p * b**p + a**p * c**p + b**p * c**p) / 3.0
    return 4.0 * np.pi * term ** (1.0 / p)


def analytic_features(spec: PhantomSpec) -> dict:
    """Closed-form feature values for sphere / ellipsoid / box phantoms.

    Axis lengths use the uniform-solid second moments (a^2/5 for an
    ellipsoid semi-axis, L^2/12 for a box edge), matching the
    eigenvalue-based definitions used in extraction.
    """
    if spec.kind in ("sphere", "edge-touching-sphere"):
        (r,) = spec.parameters
        a = b = c = r
    elif spec.kind == "ellipsoid":
        a, b, c = sorted(spec.parameters, reverse=True)
    elif spec.kind == "box":
        lx, ly, lz = spec.parameters
        volume = lx * ly * lz
        surface = 2.0 * (lx * ly + ly * lz + lx * lz)
        ex, ey, ez = sorted((lx, ly, lz), reverse=True)
        axes = [4.0 * e / np.sqrt(12.0) for e in (ex, ey, ez)]
        diam = {
            "max_3d_diameter_mm": float(np.sqrt(lx**2 + ly**2 + lz**2)),
            "max_2d_diameter_slice_mm": float(np.sqrt(lx**2 + ly**2)),
            "max_2d_diameter_col_mm": float(np.sqrt(lx**2 + lz**2)),
            "max_2d_diameter_row_mm": float(np.sqrt(ly**2 + lz**2)),
        }
        return {
            "volume_mm3": volume,
            "surface_area_mm2": surface,
            "sa_to_v_per_mm": surface / volume,
            "elongation": ey / ex,
            "flatness": ez / ex,
            "sphericity": (36.0 * np.pi * volume**2) ** (1.0 / 3.0) / surface,
            "major_axis_mm": axes[0],
            "minor_axis_mm": axes[1],
            "least_axis_mm": axes[2],
            **diam,
        }
    else:
        raise DegenerateInputError(
            f"no closed-form features for kind {spec.kind!r}"
        )

    volume = 4.0 / 3.0 * np.pi * a * b * c
    surface = ellipsoid_surface_area(a, b, c)
    return {
        "volume_mm3": float(volume),
        "surface_area_mm2": float(surface),
        "sa_to_v_per_mm": float(surface / volume),
        "elongation": b / a,
        "flatness": c / a,
        "sphericity": float((36.0 * np.pi * volume**2) ** (1.0 / 3.0) / surface),
        "major_axis_mm": 4.0 * a / np.sqrt(5.0),
        "minor_axis_mm": 4.0 * b / np.sqrt(5.0),
        "least_axis_mm": 4.0 * c / np.sqrt(5.0),
        # Semi-axes lie along (L, A, S): slice plane keeps (a, b),
        # coronal keeps (a, c), sagittal keeps (b, c).
        "max_3d_diameter_mm": 2.0 * a,
        "max_2d_diameter_slice_mm": 2.0 * a,
        "max_2d_diameter_col_mm": 2.0 * a,
        "max_2d_diameter_row_mm": 2.0 * b,
    }
