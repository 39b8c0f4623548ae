import numpy as np
import pytest

from conceptcloud import kernels
from conceptcloud.model import RunConfig
from conceptcloud.render import BACKGROUND_COLOR, CameraPose, project_points, rasterize, render_view
from conceptcloud.views import plan_view, synthesize_global_view, synthesize_object_view, SynthesisError

from conftest import make_cloud, two_object_cloud

BG = np.array(BACKGROUND_COLOR, np.uint8)


def axis_camera(w=64, h=64):
    """Looks down +z from the origin."""
    return CameraPose(position=[0, 0, 0], look_at=[0, 0, 1], up=[0, 1, 0],
                      fov_deg=60.0, resolution=(w, h))


class TestCameraPose:
    def test_rejects_coincident_position(self):
        with pytest.raises(ValueError):
            CameraPose([0, 0, 0], [0, 0, 0], [0, 0, 1], 60.0, (8, 8))

    def test_rejects_parallel_up(self):
        with pytest.raises(ValueError):
            CameraPose([0, 0, 0], [0, 0, 1], [0, 0, 1], 60.0, (8, 8))


class TestProjection:
    def test_axis_point_hits_image_center(self):
        cam = axis_camera()
        px, py, z = project_points([[0, 0, 5]], cam)
        assert px[0] == pytest.approx(32.0, abs=1e-12)
        assert py[0] == pytest.approx(32.0, abs=1e-12)
        assert z[0] == pytest.approx(5.0)

    def test_behind_camera_flagged(self):
        px, py, z = project_points([[0, 0, -1]], axis_camera())
        assert z[0] < 0 and np.isnan(px[0])


class TestRasterize:
    def test_single_point_splat_centered(self):
        img = render_view([[0, 0, 5]], [[1, 0, 0]], axis_camera(), splat_radius_px=1)
        px = img.pixels
        assert (px[31:34, 31:34] == [255, 0, 0]).all()
        assert (px[30, 30] == BG).all()
        assert (px[0, 0] == BG).all()

    def test_zbuffer_nearest_wins(self):
        # far blue listed first; near red must still win the pixel
        img = render_view([[0, 0, 9], [0, 0, 5]], [[0, 0, 1], [1, 0, 0]],
                          axis_camera(), splat_radius_px=0)
        assert (img.pixels[32, 32] == [255, 0, 0]).all()

    def test_depth_tie_resolved_by_lower_index(self):
        img = render_view([[0, 0, 5], [0, 0, 5]], [[0, 1, 0], [1, 0, 0]],
                          axis_camera(), splat_radius_px=0)
        assert (img.pixels[32, 32] == [0, 255, 0]).all()

    def test_point_behind_camera_culled(self):
        img = render_view([[0, 0, -5]], [[1, 0, 0]], axis_camera(), splat_radius_px=2)
        assert (img.pixels == BG).all()

    def test_rendering_is_deterministic(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(0, 1, (500, 3)) + [0, 0, 6]
        colors = rng.random((500, 3))
        a = render_view(pts, colors, axis_camera(), 1)
        b = render_view(pts, colors, axis_camera(), 1)
        assert np.array_equal(a.pixels, b.pixels)

    def test_mask_ids_follow_colors(self):
        colors = np.array([[255, 0, 0]], np.uint8)
        img, mask = rasterize([[0, 0, 5]], colors, np.array([7]), axis_camera(), 0)
        assert mask[32, 32] == 7
        assert (mask[0, 0]) == -1

    def test_splat_clipped_at_border(self):
        cam = axis_camera(16, 16)
        # projects just inside the corner; splat must clip, not crash
        px, py, z = project_points([[-1.4, 1.4, 5]], cam)
        img = render_view([[-1.4, 1.4, 5]], [[1, 0, 0]], cam, splat_radius_px=3)
        assert (img.pixels == [255, 0, 0]).all(axis=2).any()


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled kernels not built")
class TestBackendEquivalence:
    def test_splat_backends_agree_bitwise(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(0, 1.5, (2000, 3)) + [0, 0, 8]
        colors = (rng.random((2000, 3)) * 255).astype(np.uint8)
        ids = rng.integers(0, 20, 2000)
        cam = axis_camera(96, 80)
        img_c, mask_c = rasterize(pts, colors, ids, cam, 1, backend="compiled")
        img_n, mask_n = rasterize(pts, colors, ids, cam, 1, backend="numpy")
        assert np.array_equal(img_c.pixels, img_n.pixels)
        assert np.array_equal(mask_c, mask_n)

    def test_splat_backends_agree_with_ties(self):
        # duplicated points exercise the (depth, index) tie rule
        pts = np.tile(np.array([[0.3, -0.2, 5.0]]), (6, 1))
        colors = (np.arange(18).reshape(6, 3) * 13 % 256).astype(np.uint8)
        ids = np.arange(6)
        cam = axis_camera(32, 32)
        img_c, mask_c = rasterize(pts, colors, ids, cam, 2, backend="compiled")
        img_n, mask_n = rasterize(pts, colors, ids, cam, 2, backend="numpy")
        assert np.array_equal(img_c.pixels, img_n.pixels)
        assert np.array_equal(mask_c, mask_n)


class TestSynthesizedViews:
    def test_single_color_object_renders_only_its_color(self, config):
        cloud = two_object_cloud()
        img = synthesize_object_view(cloud, 1, config)
        px = img.pixels.reshape(-1, 3)
        non_bg = px[~(px == BG).all(axis=1)]
        assert len(non_bg) > 0
        assert (non_bg == [255, 0, 0]).all()

    def test_object_isolation(self, config):
        cloud = two_object_cloud()
        img = synthesize_object_view(cloud, 1, config)
        assert not (img.pixels == [0, 0, 255]).all(axis=2).any()  # object 2 is blue

    def test_global_view_of_single_object_equals_object_view(self, config):
        cloud = two_object_cloud()
        only1 = make_cloud(cloud.positions[cloud.object_ids == 1],
                           cloud.colors[cloud.object_ids == 1],
                           np.full(60, 1))
        a = synthesize_object_view(only1, 1, config)
        b = synthesize_global_view(only1, config)
        assert np.array_equal(a.pixels, b.pixels)

    def test_global_view_shows_both_objects(self, config):
        img = synthesize_global_view(two_object_cloud(), config)
        assert (img.pixels == [255, 0, 0]).all(axis=2).any()
        assert (img.pixels == [0, 0, 255]).all(axis=2).any()

    def test_projection_containment_with_default_margin(self, config):
        cloud = two_object_cloud()
        points = cloud.positions[cloud.object_ids == 1]
        camera, keep = plan_view(points, config)
        px, py, z = project_points(points[keep], camera)
        w, h = camera.resolution
        assert (z > 0).all()
        assert (px >= 0).all() and (px < w).all()
        assert (py >= 0).all() and (py < h).all()

    def test_absent_object_rejected(self, config):
        with pytest.raises(ValueError, match="99"):
            synthesize_object_view(two_object_cloud(), 99, config)

    def test_empty_cloud_rejected(self, config):
        from conceptcloud.model import SegmentedPointCloud
        with pytest.raises(ValueError):
            synthesize_global_view(SegmentedPointCloud.empty(), config)

    def test_all_outliers_error_names_object(self):
        # a negative band multiplier pushes the threshold below every statistic
        cfg = RunConfig(outlier_std_mult=-1000.0)
        with pytest.raises(SynthesisError, match="object 1"):
            synthesize_object_view(two_object_cloud(), 1, cfg)
