"""Binary organ-mask I/O and geometry: NIfTI-1 read/write, LAS
canonicalization, isotropic resampling, and vertebral-extent cropping.

Only the subset of NIfTI-1 needed for mask pipelines is supported:
single-file .nii / .nii.gz, 3D, uint8 / int16 / float32 voxels, and an
orthogonal affine given by sform or qform (sform preferred).
"""

from __future__ import annotations

import gzip
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    FormatError,
    MissingLandmarkError,
    UnsupportedGeometryError,
)

_HDR_SIZE = 348
_MAGIC_SINGLE = b"n+1\x00"
_MAGIC_PAIR = b"ni1\x00"

# NIfTI datatype codes we accept for mask voxels.
_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}
_DTYPE_CODES = {np.dtype(np.uint8): (2, 8)}

# World axes follow the RAS+ convention; a data axis pointing toward -x
# is coded 'L', toward +y 'A', etc.
_POS_CODES = "RAS"
_NEG_CODES = "LPI"

ORTHO_TOL = 1e-3


def _axis_codes(affine):
    """Orientation code (e.g. 'LAS') for each data axis of an affine."""
    M = np.asarray(affine, dtype=float)[:3, :3]
    codes = []
    for j in range(3):
        col = M[:, j]
        i = int(np.argmax(np.abs(col)))
        codes.append(_POS_CODES[i] if col[i] > 0 else _NEG_CODES[i])
    return "".join(codes)


def _check_orthogonal(affine):
    M = np.asarray(affine, dtype=float)[:3, :3]
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms <= 0):
        raise UnsupportedGeometryError("affine has a zero-length column")
    U = M / norms
    off = np.abs(U.T @ U - np.eye(3)).max()
    if off > ORTHO_TOL:
        raise UnsupportedGeometryError(
            f"non-orthogonal affine (max off-diagonal {off:.2e} > {ORTHO_TOL})"
        )


def _check_axis_aligned(affine):
    _check_orthogonal(affine)
    M = np.asarray(affine, dtype=float)[:3, :3]
    norms = np.linalg.norm(M, axis=0)
    U = np.abs(M / norms)
    # Each column must be parallel to exactly one world axis.
    if np.any(np.sort(U, axis=0)[:2, :] > ORTHO_TOL):
        raise UnsupportedGeometryError("oblique affine; reslicing is not supported")


@dataclass
class VoxelMask:
    """Binary 3D occupancy grid with physical geometry.

    ``data`` is a boolean array indexed (i, j, k); ``affine`` maps voxel
    indices to world coordinates in mm (RAS+ world convention).
    """

    data: np.ndarray
    affine: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise DegenerateInputError(f"mask must be 3D, got {self.data.ndim}D")
        if min(self.data.shape) < 1:
            raise DegenerateInputError("mask has an empty dimension")
        if self.data.dtype != bool:
            self.data = self.data > 0.5
        self.affine = np.asarray(self.affine, dtype=float)
        if self.affine.shape != (4, 4):
            raise DegenerateInputError("affine must be 4x4")
        if np.any(np.linalg.norm(self.affine[:3, :3], axis=0) <= 0):
            raise UnsupportedGeometryError("nonpositive voxel spacing")

    @property
    def dims(self):
        return tuple(int(n) for n in self.data.shape)

    @property
    def spacing(self):
        return tuple(float(s) for s in np.linalg.norm(self.affine[:3, :3], axis=0))

    @property
    def orientation(self):
        return _axis_codes(self.affine)

    @property
    def origin(self):
        return tuple(float(v) for v in self.affine[:3, 3])

    def foreground_count(self):
        return int(self.data.sum())

    def voxel_volume_mm3(self):
        return float(abs(np.linalg.det(self.affine[:3, :3])))

    def foreground_coords_mm(self):
        """World coordinates (n, 3) of foreground voxel centers."""
        idx = np.argwhere(self.data)
        return idx @ self.affine[:3, :3].T + self.affine[:3, 3]

    def copy(self):
        return VoxelMask(self.data.copy(), self.affine.copy())


@dataclass
class LabelVolume:
    """Small-integer label grid sharing VoxelMask geometry."""

    data: np.ndarray
    affine: np.ndarray
    label_map: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise DegenerateInputError("label volume must be 3D")
        self.affine = np.asarray(self.affine, dtype=float)
        present = set(np.unique(self.data).tolist()) - {0}
        missing = present - set(self.label_map)
        if missing:
            raise DegenerateInputError(f"labels without names: {sorted(missing)}")

    def id_for(self, name):
        for label, label_name in self.label_map.items():
            if label_name == name:
                return label
        raise MissingLandmarkError(f"label {name!r} not in label map")


def _open_maybe_gzip(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        if "w" in mode:
            # mtime pinned so identical masks compress to identical bytes.
            return gzip.GzipFile(path, mode, mtime=0)
        return gzip.open(path, mode)
    return open(path, mode)


def _quaternion_affine(b, c, d, qx, qy, qz, pixdim, qfac):
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(max(a2, 0.0))
    R = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    qfac = -1.0 if qfac < 0 else 1.0
    aff = np.eye(4)
    aff[:3, :3] = R @ np.diag([pixdim[0], pixdim[1], pixdim[2] * qfac])
    aff[:3, 3] = (qx, qy, qz)
    return aff


def read_mask(path) -> VoxelMask:
    """Read a NIfTI-1 binary mask; voxels > 0.5 are foreground."""
    with _open_maybe_gzip(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HDR_SIZE:
        raise FormatError(f"{path}: file shorter than a NIfTI-1 header")
    magic = raw[344:348]
    if magic not in (_MAGIC_SINGLE, _MAGIC_PAIR):
        raise FormatError(f"{path}: bad NIfTI magic {magic!r}")
    if magic == _MAGIC_PAIR:
        raise FormatError(f"{path}: two-file (.hdr/.img) NIfTI is not supported")

    endian = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != _HDR_SIZE:
        endian = ">"
        (sizeof_hdr,) = struct.unpack_from(">i", raw, 0)
        if sizeof_hdr != _HDR_SIZE:
            raise FormatError(f"{path}: bad sizeof_hdr {sizeof_hdr}")

    dim = struct.unpack_from(endian + "8h", raw, 40)
    (datatype,) = struct.unpack_from(endian + "h", raw, 70)
    pixdim = struct.unpack_from(endian + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(endian + "f", raw, 108)
    (qform_code,) = struct.unpack_from(endian + "h", raw, 252)
    (sform_code,) = struct.unpack_from(endian + "h", raw, 254)
    quat = struct.unpack_from(endian + "6f", raw, 256)
    srow = struct.unpack_from(endian + "12f", raw, 280)

    ndim = dim[0]
    if ndim != 3:
        # Accept trailing singleton dims written by some tools.
        if not (3 < ndim <= 7 and all(d <= 1 for d in dim[4 : ndim + 1])):
            raise FormatError(f"{path}: only 3D volumes supported (dim[0]={ndim})")
    shape = tuple(int(d) for d in dim[1:4])
    if min(shape) < 1:
        raise FormatError(f"{path}: bad dimensions {shape}")
    if datatype not in _DTYPES:
        raise FormatError(f"{path}: unsupported datatype code {datatype}")

    if sform_code > 0:
        aff = np.eye(4)
        aff[0, :] = srow[0:4]
        aff[1, :] = srow[4:8]
        aff[2, :] = srow[8:12]
    elif qform_code > 0:
        aff = _quaternion_affine(*quat, pixdim[1:4], pixdim[0])
    else:
        raise FormatError(f"{path}: neither sform nor qform present")
    _check_orthogonal(aff)

    dtype = np.dtype(_DTYPES[datatype]).newbyteorder(endian)
    offset = int(vox_offset) if vox_offset else _HDR_SIZE + 4
    count = int(np.prod(shape))
    body = raw[offset : offset + count * dtype.itemsize]
    if len(body) < count * dtype.itemsize:
        raise FormatError(f"{path}: truncated voxel data")
    data = np.frombuffer(body, dtype=dtype).reshape(shape, order="F")
    return VoxelMask(data.astype(np.float32) > 0.5, aff)


def write_mask(mask: VoxelMask, path) -> None:
    """Write a mask as single-file NIfTI-1 (uint8, sform affine)."""
    if not isinstance(mask, VoxelMask):
        raise DegenerateInputError("write_mask expects a VoxelMask")
    hdr = bytearray(_HDR_SIZE)
    struct.pack_into("<i", hdr, 0, _HDR_SIZE)
    shape = mask.dims
    struct.pack_into("<8h", hdr, 40, 3, shape[0], shape[1], shape[2], 1, 1, 1, 1)
    code, bitpix = _DTYPE_CODES[np.dtype(np.uint8)]
    struct.pack_into("<h", hdr, 70, code)
    struct.pack_into("<h", hdr, 72, bitpix)
    sp = mask.spacing
    struct.pack_into("<8f", hdr, 76, 1.0, sp[0], sp[1], sp[2], 0, 0, 0, 0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<b", hdr, 123, 2)  # xyzt_units: mm
    struct.pack_into("<h", hdr, 252, 0)  # qform_code
    struct.pack_into("<h", hdr, 254, 1)  # sform_code: scanner
    aff = mask.affine
    struct.pack_into("<4f", hdr, 280, *aff[0, :])
    struct.pack_into("<4f", hdr, 296, *aff[1, :])
    struct.pack_into("<4f", hdr, 312, *aff[2, :])
    hdr[344:348] = _MAGIC_SINGLE

    body = np.asfortranarray(mask.data.astype(np.uint8)).tobytes(order="F")
    with _open_maybe_gzip(path, "wb") as fh:
        fh.write(bytes(hdr))
        fh.write(b"\x00\x00\x00\x00")  # extender: no extensions
        fh.write(body)


def _index_transform(affine, perm=None, flips=(), shape=None):
    """Right-multiply ``affine`` by an index permutation/flip transform."""
    T = np.zeros((4, 4))
    T[3, 3] = 1.0
    perm = perm if perm is not None else (0, 1, 2)
    for new_axis, old_axis in enumerate(perm):
        T[old_axis, new_axis] = 1.0
    for axis in flips:
        T[:3, 3] += T[:3, axis] * (shape[axis] - 1)
        T[:3, axis] *= -1.0
    return affine @ T


def canonicalize_las(mask: VoxelMask) -> VoxelMask:
    """Reorder/flip data axes so the orientation code is LAS.

    Physical coordinates of every voxel are preserved exactly; only the
    array layout and affine change. Oblique affines are rejected.
    """
    _check_axis_aligned(mask.affine)
    M = mask.affine[:3, :3]
    world_of = [int(np.argmax(np.abs(M[:, j]))) for j in range(3)]
    if sorted(world_of) != [0, 1, 2]:
        raise UnsupportedGeometryError("affine does not permute world axes")
    perm = tuple(world_of.index(w) for w in range(3))

    data = np.transpose(mask.data, axes=perm)
    aff = _index_transform(mask.affine, perm=perm)
    # LAS target signs on the world diagonal: (-x, +y, +z).
    want = (-1.0, 1.0, 1.0)
    flips = [k for k in range(3) if np.sign(aff[k, k]) != want[k]]
    if flips:
        aff = _index_transform(aff, flips=flips, shape=data.shape)
        data = np.flip(data, axis=tuple(flips))
    return VoxelMask(np.ascontiguousarray(data), aff)


def resample_isotropic(mask: VoxelMask, target_mm: float) -> VoxelMask:
    """Nearest-neighbor resample onto an isotropic grid spanning the
    input's physical bounding box."""
    if not target_mm > 0:
        raise DegenerateInputError("target spacing must be positive")
    _check_axis_aligned(mask.affine)
    sp = np.array(mask.spacing)
    shape = np.array(mask.dims)
    new_shape = np.ceil(shape * sp / target_mm).astype(int)
    if np.any(new_shape < 2):
        raise DegenerateInputError(
            f"target {target_mm} mm collapses grid to {tuple(new_shape)}"
        )

    index_lists = []
    start = np.empty(3)
    for a in range(3):
        # Output voxel centers in input index units along axis a.
        centers = -0.5 + (np.arange(new_shape[a]) + 0.5) * (target_mm / sp[a])
        start[a] = centers[0]
        idx = np.floor(centers + 0.5).astype(int)
        index_lists.append(np.clip(idx, 0, shape[a] - 1))
    data = mask.data[np.ix_(*index_lists)]

    M = mask.affine[:3, :3]
    units = M / sp
    aff = np.eye(4)
    aff[:3, :3] = units * target_mm
    aff[:3, 3] = mask.affine[:3, 3] + M @ start
    return VoxelMask(data, aff)


def crop_between_vertebrae(
    mask: VoxelMask, labels: LabelVolume, lower="L5", upper="T7"
) -> VoxelMask:
    """Keep inferior-superior slices from the bottom of ``lower`` to the
    top of ``upper`` (inclusive); other axes untouched."""
    mask = canonicalize_las(mask)
    lab_vol = _canonicalize_labels(labels)
    if lab_vol.data.shape != mask.data.shape or not np.allclose(
        lab_vol.affine, mask.affine, atol=1e-5
    ):
        raise DegenerateInputError("mask and label volume do not share geometry")

    lower_id = lab_vol.id_for(lower)
    upper_id = lab_vol.id_for(upper)
    lower_k = np.flatnonzero(np.any(lab_vol.data == lower_id, axis=(0, 1)))
    upper_k = np.flatnonzero(np.any(lab_vol.data == upper_id, axis=(0, 1)))
    if lower_k.size == 0:
        raise MissingLandmarkError(f"no voxels labeled {lower!r}")
    if upper_k.size == 0:
        raise MissingLandmarkError(f"no voxels labeled {upper!r}")
    lo = int(lower_k.min())
    hi = int(upper_k.max())
    if hi < lo:
        warnings.warn("vertebral span is empty; returning empty crop")
        lo, hi = hi, lo

    data = mask.data[:, :, lo : hi + 1].copy()
    aff = mask.affine.copy()
    aff[:3, 3] = aff[:3, 3] + aff[:3, 2] * lo
    out = VoxelMask(data, aff)
    if out.foreground_count() == 0:
        warnings.warn("crop_between_vertebrae: empty result")
    return out


def _las_perm_flips(affine):
    M = np.asarray(affine, dtype=float)[:3, :3]
    world_of = [int(np.argmax(np.abs(M[:, j]))) for j in range(3)]
    return tuple(world_of.index(w) for w in range(3))


def _canonicalize_labels(labels: LabelVolume) -> LabelVolume:
    """LAS canonicalization for label grids (values preserved)."""
    _check_axis_aligned(labels.affine)
    perm = _las_perm_flips(labels.affine)
    data = np.transpose(labels.data, axes=perm)
    aff = _index_transform(labels.affine, perm=perm)
    want = (-1.0, 1.0, 1.0)
    flips = [k for k in range(3) if np.sign(aff[k, k]) != want[k]]
    if flips:
        aff = _index_transform(aff, flips=flips, shape=data.shape)
        data = np.flip(data, axis=tuple(flips))
    return LabelVolume(np.ascontiguousarray(data), aff, dict(labels.label_map))
