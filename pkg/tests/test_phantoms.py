import numpy as np
import pytest

from morphspan import phantoms
from morphspan.errors import DegenerateInputError
from morphspan.qc import edge_touch_flag


class TestGenerate:
    def test_box_rasterizes_to_exact_voxel_count(self):
        # 30 mm edge at 3 mm spacing covers exactly 10 voxels per axis.
        spec = phantoms.PhantomSpec("box", (30, 30, 30), spacing=3.0)
        mask = phantoms.generate(spec)
        assert mask.foreground_count() == 1000
        assert mask.orientation == "LAS"

    def test_box_anisotropic_edges(self):
        spec = phantoms.PhantomSpec("box", (30, 12, 6), spacing=3.0)
        mask = phantoms.generate(spec)
        assert mask.foreground_count() == 10 * 4 * 2

    def test_sphere_voxel_volume_near_analytic(self):
        spec = phantoms.PhantomSpec("sphere", (30,), spacing=1.0)
        mask = phantoms.generate(spec)
        vox_vol = mask.foreground_count() * mask.voxel_volume_mm3()
        analytic = 4.0 / 3.0 * np.pi * 30**3
        assert abs(vox_vol - analytic) / analytic < 0.01

    def test_sphere_is_centered_and_padded(self):
        spec = phantoms.PhantomSpec("sphere", (15,), spacing=3.0, padding=2)
        mask = phantoms.generate(spec)
        assert not edge_touch_flag(mask)
        coords = mask.foreground_coords_mm()
        assert np.allclose(coords.mean(axis=0), 0.0, atol=1e-9)

    def test_edge_touching_sphere_touches_inferior_face(self):
        spec = phantoms.PhantomSpec("edge-touching-sphere", (15,), spacing=3.0)
        mask = phantoms.generate(spec)
        assert mask.data[:, :, 0].any()

    def test_two_blobs_are_separated(self):
        spec = phantoms.PhantomSpec("two-blobs", (12, 9, 15), spacing=3.0)
        mask = phantoms.generate(spec)
        vox_vol = mask.foreground_count() * mask.voxel_volume_mm3()
        analytic = 4.0 / 3.0 * np.pi * (12**3 + 9**3)
        assert abs(vox_vol - analytic) / analytic < 0.1

    def test_validation(self):
        with pytest.raises(DegenerateInputError):
            phantoms.PhantomSpec("cone", (10,))
        with pytest.raises(DegenerateInputError):
            phantoms.PhantomSpec("sphere", (-1.0,))
        with pytest.raises(DegenerateInputError):
            phantoms.PhantomSpec("sphere", (10,), spacing=0.0)
        with pytest.raises(DegenerateInputError):
            phantoms.generate(phantoms.PhantomSpec("sphere", (0.5,), spacing=3.0))


class TestAnalyticFeatures:
    def test_sphere_closed_forms(self):
        feats = phantoms.analytic_features(phantoms.PhantomSpec("sphere", (30,)))
        assert feats["volume_mm3"] == pytest.approx(113097.335529, rel=1e-9)
        assert feats["surface_area_mm2"] == pytest.approx(11309.733553, rel=1e-9)
        assert feats["sphericity"] == pytest.approx(1.0, abs=1e-12)
        assert feats["elongation"] == 1.0
        assert feats["max_3d_diameter_mm"] == 60.0
        # Uniform ball second moment r^2/5: axis length 4r/sqrt(5).
        assert feats["major_axis_mm"] == pytest.approx(4 * 30 / np.sqrt(5))

    def test_ellipsoid_surface_thomsen_vs_quadrature(self):
        # Oracle: surface integral of the ellipsoid in spherical coords.
        a, b, c = 40.0, 20.0, 10.0
        from scipy import integrate

        def integrand(theta, phi):
            st, ct = np.sin(theta), np.cos(theta)
            sp, cp = np.sin(phi), np.cos(phi)
            E = np.sqrt(
                (b * c * st * cp) ** 2
                + (a * c * st * sp) ** 2
                + (a * b * ct) ** 2
            )
            return E * st

        oracle, _ = integrate.dblquad(integrand, 0, 2 * np.pi, 0, np.pi)
        approx = phantoms.ellipsoid_surface_area(a, b, c)
        assert abs(approx - oracle) / oracle < 0.012  # Thomsen ~1% worst case

    def test_ellipsoid_features(self):
        feats = phantoms.analytic_features(
            phantoms.PhantomSpec("ellipsoid", (40, 20, 10))
        )
        assert feats["elongation"] == pytest.approx(0.5)
        assert feats["flatness"] == pytest.approx(0.25)
        assert feats["major_axis_mm"] == pytest.approx(160 / np.sqrt(5))
        assert feats["max_2d_diameter_row_mm"] == 40.0

    def test_box_features(self):
        feats = phantoms.analytic_features(
            phantoms.PhantomSpec("box", (60, 30, 20))
        )
        assert feats["volume_mm3"] == 36000
        assert feats["surface_area_mm2"] == 2 * (1800 + 600 + 1200)
        assert feats["max_3d_diameter_mm"] == pytest.approx(np.sqrt(4900))
        assert feats["max_2d_diameter_slice_mm"] == pytest.approx(
            np.sqrt(60**2 + 30**2)
        )
        assert feats["major_axis_mm"] == pytest.approx(240 / np.sqrt(12))

    def test_no_closed_form_for_two_blobs(self):
        with pytest.raises(DegenerateInputError):
            phantoms.analytic_features(
                phantoms.PhantomSpec("two-blobs", (12, 9, 15))
            )
