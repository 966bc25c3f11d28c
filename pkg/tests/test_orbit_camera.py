import numpy as np
import pytest

from orbit_splat.errors import AssetFormatError, InvalidArgumentError
from orbit_splat.orbit_camera import (
    NEAR_PLANE,
    look_at,
    make_camera,
    make_static_orbit,
    project,
    read_orbit_file,
    unproject,
    write_orbit_file,
)


class TestStaticOrbit:
    def test_21_frames_evenly_spaced(self):
        poses = make_static_orbit(21, elevation=0.0, radius=2.7, fov=33.8, width=64, height=64)
        assert len(poses) == 21
        np.testing.assert_allclose([p.azimuth for p in poses], np.arange(21) * 360.0 / 21)

    def test_cameras_sit_on_the_orbit_circle(self):
        for pose in make_static_orbit(8, elevation=15.0, radius=2.5):
            np.testing.assert_allclose(np.linalg.norm(pose.position), 2.5, atol=1e-12)
            np.testing.assert_allclose(pose.position[1], 2.5 * np.sin(np.radians(15.0)), atol=1e-12)

    def test_front_camera_on_positive_z(self):
        pose = make_static_orbit(4, radius=3.0)[0]
        np.testing.assert_allclose(pose.position, [0.0, 0.0, 3.0], atol=1e-12)

    def test_origin_projects_to_image_center(self):
        for pose in make_static_orbit(6, elevation=-20.0, width=80, height=60):
            pixels, depth = project(pose, np.zeros(3))
            np.testing.assert_allclose(pixels[0], [40.0, 30.0], atol=1e-9)
            assert depth[0] == pytest.approx(2.7)

    def test_rotation_is_orthonormal(self):
        for pose in make_static_orbit(5, elevation=30.0):
            np.testing.assert_allclose(pose.rotation @ pose.rotation.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(pose.rotation) == pytest.approx(1.0)

    def test_rejects_single_frame(self):
        with pytest.raises(InvalidArgumentError):
            make_static_orbit(1)

    @pytest.mark.parametrize("kwargs", [
        {"radius": 0.0}, {"fov": 0.0}, {"fov": 180.0}, {"elevation": 90.0},
    ])
    def test_rejects_bad_parameters(self, kwargs):
        args = {"azimuth": 0.0, "elevation": 0.0, "radius": 2.7, "fov": 33.8, "width": 32, "height": 32}
        args.update(kwargs)
        with pytest.raises(InvalidArgumentError):
            make_camera(**args)


class TestProjection:
    def test_unproject_inverts_project(self, rng):
        pose = make_camera(37.0, 12.0, 2.7, 33.8, 128, 96)
        points = rng.uniform(-0.8, 0.8, size=(50, 3))
        pixels, depth = project(pose, points)
        np.testing.assert_allclose(unproject(pose, pixels, depth), points, atol=1e-9)

    def test_points_behind_camera_are_nan(self):
        pose = make_camera(0.0, 0.0, 2.0, 40.0, 32, 32)
        pixels, depth = project(pose, [[0.0, 0.0, 5.0], [0.0, 0.0, 2.0 - NEAR_PLANE / 2]])
        assert np.isnan(pixels).all()
        assert depth[0] < 0

    def test_image_y_grows_downwards(self):
        pose = make_camera(0.0, 0.0, 3.0, 40.0, 64, 64)
        pixels, _ = project(pose, [[0.0, 0.5, 0.0], [0.0, -0.5, 0.0]])
        assert pixels[0, 1] < 32.0 < pixels[1, 1]

    def test_look_at_rejects_vertical_view(self):
        with pytest.raises(InvalidArgumentError):
            look_at(np.array([0.0, 3.0, 0.0]))


class TestOrbitFile:
    def test_write_then_read(self, tmp_path):
        poses = make_static_orbit(5, elevation=10.0, radius=2.7, fov=33.8, width=48, height=32)
        path = tmp_path / "orbit.txt"
        write_orbit_file(path, poses)
        loaded = read_orbit_file(path)
        assert len(loaded) == 5
        for a, b in zip(poses, loaded):
            assert (a.azimuth, a.width, a.height) == (b.azimuth, b.width, b.height)
            np.testing.assert_array_equal(a.extrinsic, b.extrinsic)
            np.testing.assert_array_equal(a.intrinsic, b.intrinsic)

    def test_short_row_names_the_line(self, tmp_path):
        path = tmp_path / "orbit.txt"
        path.write_text("# header\n0 0.0 0.0 2.7\n")
        with pytest.raises(AssetFormatError, match="orbit.txt:2"):
            read_orbit_file(path)
