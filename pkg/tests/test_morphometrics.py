from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morphspan import phantoms
from morphspan.errors import DegenerateInputError
from morphspan.morphometrics import (
    FEATURE_NAMES,
    SurfaceMesh,
    _max_pairwise_distance,
    bounding_box_face_ratios,
    build_mesh,
    connected_components,
    extract_features,
)
from morphspan.volume_io import VoxelMask


def las_mask(data, spacing=1.0):
    aff = np.diag([-spacing, spacing, spacing, 1.0])
    return VoxelMask(np.asarray(data, dtype=bool), aff)


def flood_fill_components(data, connectivity):
    """Independent BFS component labeling oracle."""
    offsets = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for dk in (-1, 0, 1):
                manh = abs(di) + abs(dj) + abs(dk)
                if manh == 0:
                    continue
                if connectivity == 6 and manh > 1:
                    continue
                if connectivity == 18 and manh > 2:
                    continue
                offsets.append((di, dj, dk))
    seen = np.zeros(data.shape, dtype=bool)
    count = 0
    for start in zip(*np.nonzero(data)):
        if seen[start]:
            continue
        count += 1
        q = deque([start])
        seen[start] = True
        while q:
            i, j, k = q.popleft()
            for di, dj, dk in offsets:
                ni, nj, nk = i + di, j + dj, k + dk
                if (
                    0 <= ni < data.shape[0]
                    and 0 <= nj < data.shape[1]
                    and 0 <= nk < data.shape[2]
                    and data[ni, nj, nk]
                    and not seen[ni, nj, nk]
                ):
                    seen[ni, nj, nk] = True
                    q.append((ni, nj, nk))
    return count


class TestConnectedComponents:
    def test_two_blobs_has_two_components(self):
        mask = phantoms.generate(
            phantoms.PhantomSpec("two-blobs", (9, 9, 12), spacing=3.0)
        )
        for conn in (6, 18, 26):
            count, labels = connected_components(mask, conn)
            assert count == 2
            assert set(np.unique(labels.data)) == {0, 1, 2}
            assert labels.id_for("component_2") == 2

    def test_diagonal_contact_depends_on_connectivity(self):
        data = np.zeros((2, 2, 2), dtype=bool)
        data[0, 0, 0] = data[1, 1, 1] = True  # corner contact
        mask = las_mask(data)
        assert connected_components(mask, 6)[0] == 2
        assert connected_components(mask, 18)[0] == 2
        assert connected_components(mask, 26)[0] == 1
        data2 = np.zeros((2, 2, 1), dtype=bool)
        data2[0, 0, 0] = data2[1, 1, 0] = True  # edge contact
        mask2 = las_mask(data2)
        assert connected_components(mask2, 6)[0] == 2
        assert connected_components(mask2, 18)[0] == 1

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([6, 18, 26]))
    def test_matches_flood_fill_oracle(self, seed, conn):
        rng = np.random.default_rng(seed)
        data = rng.uniform(size=(7, 7, 7)) > 0.7
        count, _ = connected_components(las_mask(data), conn)
        assert count == flood_fill_components(data, conn)


class TestMesh:
    def test_single_voxel_octahedron(self):
        # One 1 mm voxel is too small for pre-smoothing, so it meshes
        # raw: an octahedron with vertices 0.5 mm from the center.
        mesh = build_mesh(las_mask(np.ones((1, 1, 1))))
        assert mesh.enclosed_volume() == pytest.approx(1.0 / 6.0, rel=1e-12)
        assert mesh.surface_area() == pytest.approx(np.sqrt(3.0), rel=1e-12)

    def test_mesh_closed_for_edge_touching_mask(self):
        # The solid is clipped by the grid boundary, so the reference is
        # the voxel-count volume, not the full sphere.
        mask = phantoms.generate(
            phantoms.PhantomSpec("edge-touching-sphere", (12,), spacing=2.0)
        )
        mesh = build_mesh(mask)
        vox = mask.foreground_count() * mask.voxel_volume_mm3()
        assert abs(mesh.enclosed_volume() - vox) / vox < 0.05

    def test_empty_mask_rejected(self):
        with pytest.raises(DegenerateInputError):
            build_mesh(las_mask(np.zeros((3, 3, 3))))

    def test_known_tetrahedron_quantities(self):
        verts = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float
        )
        tris = np.array(
            [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], dtype=np.int64
        )
        mesh = SurfaceMesh(verts, tris)
        assert mesh.enclosed_volume() == pytest.approx(1.0 / 6.0)
        assert mesh.surface_area() == pytest.approx(1.5 + np.sqrt(3) / 2)


class TestDiameters:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
    def test_hull_prefilter_equals_brute_force(self, seed, dim):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(rng.integers(2, 60), dim))
        brute = max(
            float(np.linalg.norm(p - q)) for p in pts for q in pts
        )
        assert _max_pairwise_distance(pts) == pytest.approx(brute, rel=1e-12)

    def test_degenerate_point_counts(self):
        assert _max_pairwise_distance(np.zeros((1, 3))) == 0.0
        assert _max_pairwise_distance(np.zeros((0, 3))) == 0.0
        # Collinear points defeat Qhull; fallback still exact.
        pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [5, 0, 0], [3, 0, 0]])
        assert _max_pairwise_distance(pts.astype(float)) == 5.0


class TestExtractFeatures:
    def test_box_features_against_closed_forms(self):
        spec = phantoms.PhantomSpec("box", (60, 60, 60), spacing=1.5)
        fv = extract_features(phantoms.generate(spec))
        ana = phantoms.analytic_features(spec)
        assert fv.volume_mm3 == pytest.approx(ana["volume_mm3"], rel=0.01)
        # Corner rounding from pre-smoothing costs a few percent of area
        # and clips the corner-to-corner diagonal slightly.
        assert fv.surface_area_mm2 == pytest.approx(
            ana["surface_area_mm2"], rel=0.04
        )
        assert abs(fv.sphericity - ana["sphericity"]) < 0.03
        assert fv.max_3d_diameter_mm == pytest.approx(
            ana["max_3d_diameter_mm"], abs=3.5
        )
        assert fv.major_axis_mm == pytest.approx(ana["major_axis_mm"], rel=0.01)
        assert fv.elongation == pytest.approx(1.0, abs=0.01)
        assert fv.flatness == pytest.approx(1.0, abs=0.01)

    def test_orientation_invariance(self):
        spec = phantoms.PhantomSpec("ellipsoid", (24, 15, 9), spacing=3.0)
        mask = phantoms.generate(spec)
        fv = extract_features(mask)
        # Same grid presented in RAS: canonicalization must undo it.
        ras = VoxelMask(mask.data[::-1, :, :].copy(), np.abs(mask.affine))
        fv_ras = extract_features(ras)
        for name in FEATURE_NAMES:
            assert getattr(fv, name) == pytest.approx(
                getattr(fv_ras, name), rel=1e-9
            )

    def test_multi_component_warns(self):
        mask = phantoms.generate(
            phantoms.PhantomSpec("two-blobs", (9, 9, 12), spacing=3.0)
        )
        with pytest.warns(UserWarning, match="components"):
            extract_features(mask)

    def test_feature_vector_dict_order(self):
        spec = phantoms.PhantomSpec("sphere", (12,), spacing=3.0)
        fv = extract_features(phantoms.generate(spec))
        assert tuple(fv.as_dict()) == FEATURE_NAMES
        assert fv.sa_to_v_per_mm == pytest.approx(
            fv.surface_area_mm2 / fv.volume_mm3
        )


class TestBoundingBoxRatios:
    def test_box_ratios_exact(self):
        spec = phantoms.PhantomSpec("box", (30, 12, 6), spacing=3.0)
        rx, ry, rz = bounding_box_face_ratios(phantoms.generate(spec))
        assert rx == pytest.approx(30 / 6)
        assert ry == pytest.approx(12 / 30)
        assert rz == pytest.approx(12 / 6)

    def test_empty_mask_rejected(self):
        with pytest.raises(DegenerateInputError):
            bounding_box_face_ratios(las_mask(np.zeros((3, 3, 3))))
