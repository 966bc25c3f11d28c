import numpy as np
import pytest
from scipy import ndimage

from orbit_splat.augment import (
    BicubicSuperResolver,
    ExternalInterpolator,
    ExternalSuperResolver,
    FlowInterpolator,
    FrameInterpolator,
    ResizeOnly,
    VideoSequence,
    augment_video,
    augmented_count,
    build_interpolator,
    build_super_resolver,
    estimate_flow,
    frame_name,
    interpolate_frame,
    read_augment_manifest,
    read_frame_files,
    upsample_resize,
    warp,
    write_augment_manifest,
    write_frame_files,
)
from orbit_splat.augment.backends import INTERPOLATORS, SUPER_RESOLVERS
from orbit_splat.errors import AssetFormatError, InvalidArgumentError
from orbit_splat.losses_metrics import psnr


class CrossFade(FrameInterpolator):
    name = "crossfade"

    def between(self, f0, f1, times):
        return [(1.0 - t) * f0 + t * f1 for t in times]


def blob(size: int, cx: float, cy: float, sigma: float = 4.0) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    plane = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma ** 2))
    return np.repeat(plane[..., None], 3, axis=-1)


def grid_frames(rng, count: int, size: int = 8):
    return [rng.integers(0, 256, size=(size, size, 3)) / 255.0 for _ in range(count)]


def texture(rng, height: int, width: int, sigma: float = 3.0) -> np.ndarray:
    """Smooth random grey texture in [0.1, 0.9]"""
    plane = ndimage.gaussian_filter(rng.normal(size=(height, width)), sigma, mode="wrap")
    plane = (plane - plane.min()) / (plane.max() - plane.min())
    return np.repeat((0.1 + 0.8 * plane)[..., None], 3, axis=-1)


def panned(canvas: np.ndarray, offset: int, size: int) -> np.ndarray:
    """size x size window of canvas starting offset columns in"""
    return canvas[:size, offset:offset + size]


INTERIOR = (slice(8, -8), slice(8, -8))


class TestResample:
    def test_output_size(self, rng):
        out = upsample_resize(rng.uniform(size=(24, 24, 3)), factor=4, target=40)
        assert out.shape == (40, 40, 3)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_constant_frame_stays_constant(self):
        out = upsample_resize(np.full((12, 12, 3), 0.375), factor=4, target=30)
        np.testing.assert_allclose(out, 0.375, atol=1e-6)

    def test_non_square(self):
        with pytest.raises(InvalidArgumentError, match="square"):
            upsample_resize(np.zeros((10, 12, 3)))

    def test_backends(self):
        assert isinstance(build_super_resolver(True, target=64), BicubicSuperResolver)
        assert isinstance(build_super_resolver(False, target=64), ResizeOnly)
        assert isinstance(build_interpolator("flow"), FlowInterpolator)
        with pytest.raises(InvalidArgumentError):
            build_super_resolver(True, backend="esrgan")
        with pytest.raises(InvalidArgumentError):
            build_interpolator("rife")

    def test_every_registered_backend_builds(self):
        for name in SUPER_RESOLVERS:
            assert build_super_resolver(True, backend=name, target=64, command="true").name == name
        for name in INTERPOLATORS:
            assert build_interpolator(name, command="true").name == name

    def test_orbit_frame_to_training_size(self, rng):
        frame = texture(rng, 576, 576)
        out = build_super_resolver(True).enhance(frame)
        assert out.shape == (1080, 1080, 3)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestFlow:
    def test_identical_frames_interpolate_exactly(self, rng):
        frame = rng.uniform(size=(20, 20, 3))
        for t in (0.25, 0.5, 0.75):
            np.testing.assert_array_equal(interpolate_frame(frame, frame, t), frame)

    def test_zero_flow_for_identical_frames(self, rng):
        frame = rng.uniform(size=(20, 20, 3))
        forward, backward = estimate_flow(frame, frame)
        assert np.abs(forward.u).max() == 0.0
        assert np.abs(backward.v).max() == 0.0
        np.testing.assert_array_equal(forward.confidence, 1.0)

    def test_warp_by_whole_pixels(self, rng):
        frame = rng.uniform(size=(6, 7, 3))
        shifted, inside = warp(frame, np.ones((6, 7)), np.zeros((6, 7)))
        np.testing.assert_allclose(shifted[:, :-1], frame[:, 1:], atol=1e-12)
        assert not inside[:, -1].any() and inside[:, :-1].all()

    def test_moving_blob_beats_cross_fade(self):
        f0, f1, truth = blob(48, 22.0, 24.0), blob(48, 26.0, 24.0), blob(48, 24.0, 24.0)
        interpolated = interpolate_frame(f0, f1, 0.5)
        cross_fade = 0.5 * (f0 + f1)
        assert np.abs(interpolated - truth).mean() < np.abs(cross_fade - truth).mean()

    def test_recovers_horizontal_pan(self, rng):
        canvas = texture(rng, 48, 51)
        # f1 at x + 3 shows what f0 shows at x
        forward, backward = estimate_flow(panned(canvas, 3, 48), panned(canvas, 0, 48))
        assert float(np.median(forward.u[INTERIOR])) == pytest.approx(3.0, abs=0.5)
        assert abs(float(np.median(forward.v[INTERIOR]))) < 0.5
        assert float(np.median(backward.u[INTERIOR])) == pytest.approx(-3.0, abs=0.5)

    def test_forward_and_backward_agree(self, rng):
        canvas = texture(rng, 48, 51)
        forward, backward = estimate_flow(panned(canvas, 3, 48), panned(canvas, 0, 48))
        # round trip x -> x + F01 -> back lands near x
        assert float(np.median(forward.confidence[INTERIOR])) > 0.95
        assert float(np.median(backward.confidence[INTERIOR])) > 0.95

    def test_midpoint_of_pan(self, rng):
        canvas = texture(rng, 48, 52)
        f0, f1, truth = panned(canvas, 4, 48), panned(canvas, 0, 48), panned(canvas, 2, 48)
        interpolated = interpolate_frame(f0, f1, 0.5)
        assert psnr(interpolated[INTERIOR], truth[INTERIOR]) > 30.0

    def test_early_time_stays_near_first_frame(self, rng):
        canvas = texture(rng, 48, 51)
        f0, f1 = panned(canvas, 3, 48), panned(canvas, 0, 48)
        assert np.abs(interpolate_frame(f0, f1, 0.01) - f0).mean() < 0.01

    def test_rejects_bad_time(self, rng):
        frame = rng.uniform(size=(8, 8, 3))
        with pytest.raises(InvalidArgumentError):
            interpolate_frame(frame, frame, 1.0)


class TestAugmentVideo:
    def test_count_law(self):
        assert augmented_count(21) == 81
        assert augmented_count(2) == 5

    def test_schedule(self, rng):
        frames = grid_frames(rng, 3)
        video = augment_video(frames, ResizeOnly(target=8), CrossFade())
        assert len(video) == 9
        assert video.positions == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
        for k, original in enumerate(frames):
            np.testing.assert_array_equal(video.frames[4 * k], original)
        np.testing.assert_allclose(video.frames[2], 0.5 * (frames[0] + frames[1]))

    def test_orbit_clip_with_flow(self, rng):
        canvas = texture(rng, 16, 36, sigma=2.0)
        frames = [panned(canvas, k, 16) for k in range(21)]
        video = augment_video(frames, ResizeOnly(target=16), FlowInterpolator())
        assert len(video) == 81
        for k, original in enumerate(frames):
            np.testing.assert_array_equal(video.frames[4 * k], original)
            assert video.positions[4 * k] == float(k)
        assert all(f.min() >= 0.0 and f.max() <= 1.0 for f in video.frames)

    def test_without_interpolation(self, rng):
        video = augment_video(grid_frames(rng, 3), ResizeOnly(target=16), None)
        assert len(video) == 3
        assert video.resolution == (16, 16)

    def test_rejects_bad_times(self, rng):
        with pytest.raises(InvalidArgumentError):
            augment_video(grid_frames(rng, 2), ResizeOnly(target=8), CrossFade(), times=(0.5, 0.25))

    def test_video_needs_two_matching_frames(self, rng):
        with pytest.raises(InvalidArgumentError):
            VideoSequence(grid_frames(rng, 1))
        with pytest.raises(InvalidArgumentError):
            VideoSequence([np.zeros((8, 8, 3)), np.zeros((9, 9, 3))])


class TestExternalBackends:
    def test_super_resolver_round_trip(self, rng):
        frames = grid_frames(rng, 2)
        resolver = ExternalSuperResolver("sh -c 'cp {input}/*.png {output}/'", target=8)
        for got, want in zip(resolver.enhance_all(frames), frames):
            np.testing.assert_array_equal(got, want)

    def test_interpolator_reads_output_frames(self, rng):
        f0, f1 = grid_frames(rng, 2)
        command = "sh -c 'cp {input}/frame_0001.png {output}/frame_0001.png'"
        mids = ExternalInterpolator(command).between(f0, f1, [0.5])
        np.testing.assert_array_equal(mids[0], f0)

    def test_failing_command(self, rng):
        with pytest.raises(OSError, match="external command failed"):
            ExternalSuperResolver("false", target=8).enhance_all(grid_frames(rng, 2))

    def test_needs_command(self):
        with pytest.raises(InvalidArgumentError):
            ExternalInterpolator("")


class TestFrameFiles:
    def test_round_trip(self, tmp_path, rng):
        frames = grid_frames(rng, 3)
        paths = write_frame_files(tmp_path, frames)
        assert [p.name for p in paths] == [frame_name(1), frame_name(2), frame_name(3)]
        for got, want in zip(read_frame_files(tmp_path, expected=3), frames):
            np.testing.assert_array_equal(got, want)

    def test_problems_reported_together(self, tmp_path, rng):
        write_frame_files(tmp_path, grid_frames(rng, 3))
        (tmp_path / frame_name(2)).unlink()
        with pytest.raises(AssetFormatError) as info:
            read_frame_files(tmp_path, expected=4)
        message = str(info.value)
        assert "frame_0002.png: missing" in message
        assert "expected 4 frames, found 3" in message

    def test_mismatched_sizes(self, tmp_path, rng):
        write_frame_files(tmp_path, grid_frames(rng, 2) + grid_frames(rng, 1, size=10))
        with pytest.raises(AssetFormatError, match="differs"):
            read_frame_files(tmp_path)

    def test_empty_and_missing_directories(self, tmp_path):
        with pytest.raises(AssetFormatError, match="no frame_NNNN.png"):
            read_frame_files(tmp_path)
        with pytest.raises(FileNotFoundError):
            read_frame_files(tmp_path / "absent")


class TestManifest:
    def test_round_trip(self, tmp_path, rng):
        video = augment_video(grid_frames(rng, 3), ResizeOnly(target=8), CrossFade())
        path = tmp_path / "augment_manifest.txt"
        write_augment_manifest(path, video)
        lines = path.read_text().splitlines()
        assert lines[1] == "1 1 0.0"
        assert lines[2] == "2 1 0.25"
        assert lines[5] == "5 2 0.0"
        assert read_augment_manifest(path) == video.positions

    def test_out_of_order(self, tmp_path):
        path = tmp_path / "augment_manifest.txt"
        path.write_text("1 1 0.0\n3 1 0.5\n")
        with pytest.raises(AssetFormatError, match="out of order"):
            read_augment_manifest(path)

    def test_bad_fraction(self, tmp_path):
        path = tmp_path / "augment_manifest.txt"
        path.write_text("1 1 1.5\n")
        with pytest.raises(AssetFormatError, match=":1:"):
            read_augment_manifest(path)
