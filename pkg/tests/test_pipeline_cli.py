import argparse
import json
from pathlib import Path

import numpy as np
import pytest
import torch

from orbit_splat.augment import frame_name, read_frame_files, write_frame_files
from orbit_splat.body_model import BodyState
from orbit_splat.errors import AssetFormatError, ConfigValidationError, InvalidArgumentError
from orbit_splat.gaussian_cloud import read_checkpoint, write_checkpoint
from orbit_splat.losses_metrics import LossWeights, read_metric_report
from orbit_splat.pipeline_cli import (
    LOCK_NAME,
    OutputLock,
    PipelineConfig,
    apply_overrides,
    build_parser,
    cmd_augment,
    cmd_eval,
    cmd_export,
    cmd_fit,
    cmd_render,
    config_from_dict,
    frame_positions,
    load_config,
    load_gaussians,
    main,
    read_ply,
    timeline_cameras,
    timeline_states,
    validate_config,
    write_ply,
)
from orbit_splat.pipeline_cli.cli import parse_view
from orbit_splat.splat_renderer import read_float_image, save_png
from orbit_splat.trainer import TrainConfig, build_subject, init_train_state, read_loss_csv, state_to_checkpoint

from conftest import random_gaussians

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def run(tmp_path, unit_bar_template):
    """Output directory holding an untrained two-frame checkpoint of the bar"""
    config = PipelineConfig()
    config.paths.output = str(tmp_path / "run")
    config.render.resolution = 32
    config.render.precision = "fp64"
    config.eval.views = {"front": 0.0, "right": 90.0}

    subject = build_subject(unit_bar_template, np.zeros(1), 48, seed=0, uv_resolution=16)
    state = init_train_state(subject, 2, TrainConfig(feature_channels=4, hidden_widths=(8,)), torch.float64)
    bent = BodyState(theta=[[0.0, 0.0, 0.0], [0.0, 0.0, 0.8], [0.0, 0.0, 0.0]], beta=np.zeros(1),
                     translation=[0.0, 0.1, 0.0])
    bodies = [BodyState.rest(3, 1), bent]
    cameras = timeline_cameras(config.orbit, [0.0, 1.0], 32, 32)
    Path(config.paths.output).mkdir(parents=True)
    write_checkpoint(config.paths.checkpoint_file(),
                     state_to_checkpoint(state, subject, config.to_dict(), bodies, cameras))
    return config


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.orbit.frames == 21
        assert config.train.epochs == 1000
        assert config.render.background == (1.0, 1.0, 1.0)

    def test_desk_config(self):
        config = load_config(CONFIGS / "desk.json")
        assert config.orbit.radius == 3.6
        assert config.body.gaussian_count == 4096
        assert config.train.learning_rate == 0.003

    def test_full_scale_config(self):
        config = load_config(CONFIGS / "full_scale.json")
        assert config.body.gaussian_count == 202738
        assert config.augment.target == 1080

    def test_merge_coerces_numbers(self):
        config = config_from_dict({"orbit": {"radius": 3}, "train": {"weights": {"rgb": 1}}})
        assert config.orbit.radius == 3.0 and isinstance(config.orbit.radius, float)
        assert config.train.weights.rgb == 1.0

    def test_problems_collected(self):
        with pytest.raises(ConfigValidationError) as info:
            config_from_dict({"orbit": {"bogus": 1, "frames": "many"}, "extra": {}})
        assert len(info.value.problems) == 3
        assert "orbit.bogus: unknown key" in info.value.problems

    def test_overrides_and_flags(self):
        config = apply_overrides(PipelineConfig(),
                                 ["train.epochs=5", "render.background=[0, 0, 0]", "paths.output=runs/x"],
                                 output="runs/y", seed=7)
        assert config.train.epochs == 5
        assert config.render.background == (0.0, 0.0, 0.0)
        assert config.paths.output == "runs/y"
        assert config.body.seed == 7 and config.train.seed == 7

    def test_bad_override(self):
        with pytest.raises(ConfigValidationError):
            apply_overrides(PipelineConfig(), ["train.epochs"])
        with pytest.raises(ConfigValidationError):
            apply_overrides(PipelineConfig(), ["orbit.frames=abc"])

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"orbit\": \n")
        with pytest.raises(ConfigValidationError, match="invalid JSON"):
            load_config(path)
        with pytest.raises(ConfigValidationError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_validation_reports_everything(self, tmp_path):
        config = PipelineConfig()
        config.paths.output = str(tmp_path)
        config.body.gaussian_count = 100
        config.body.uv_resolution = 8
        config.train.epochs = 0
        with pytest.raises(ConfigValidationError) as info:
            validate_config(config, "fit")
        text = "\n".join(info.value.problems)
        assert "augmented frames directory not found" in text
        assert "exceeds the 8x8 UV grid" in text
        assert "train.epochs must be positive" in text

    def test_config_round_trips_through_json(self):
        config = PipelineConfig()
        again = config_from_dict(json.loads(json.dumps(config.to_dict())))
        assert again == config


class TestPly:
    def test_round_trip(self, tmp_path, rng):
        gaussians = random_gaussians(rng, 9)
        write_ply(tmp_path / "g.ply", gaussians)
        loaded = read_ply(tmp_path / "g.ply", dtype=torch.float64)
        for name in ("centers", "colors", "opacities", "scales", "rotations"):
            expected = getattr(gaussians, name).to(torch.float32).to(torch.float64)
            assert torch.equal(getattr(loaded, name), expected), name

    def test_header(self, tmp_path, rng):
        write_ply(tmp_path / "g.ply", random_gaussians(rng, 2))
        header = (tmp_path / "g.ply").read_bytes().split(b"end_header\n")[0].decode()
        assert "format binary_little_endian 1.0" in header
        assert "element vertex 2" in header
        assert "property float rot_3" in header

    @pytest.mark.parametrize("old, new, message", [
        (b"binary_little_endian", b"ascii", "unsupported format"),
        (b"property float opacity", b"property float alphaaa", "expected properties"),
        (b"ply\n", b"plx\n", "not a PLY file"),
    ])
    def test_header_errors(self, tmp_path, rng, old, new, message):
        path = tmp_path / "g.ply"
        write_ply(path, random_gaussians(rng, 2))
        path.write_bytes(path.read_bytes().replace(old, new, 1))
        with pytest.raises(AssetFormatError, match=message):
            read_ply(path)

    def test_truncated(self, tmp_path, rng):
        path = tmp_path / "g.ply"
        write_ply(path, random_gaussians(rng, 2))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(AssetFormatError, match="bytes of vertex data"):
            read_ply(path)


class TestLock:
    def test_exclusive(self, tmp_path):
        with OutputLock(tmp_path):
            assert (tmp_path / LOCK_NAME).exists()
            with pytest.raises(OSError, match="in use"):
                OutputLock(tmp_path).acquire()
        assert not (tmp_path / LOCK_NAME).exists()

    def test_creates_directory(self, tmp_path):
        with OutputLock(tmp_path / "new" / "out"):
            pass
        assert (tmp_path / "new" / "out").is_dir()


class TestTimeline:
    def test_cameras_follow_source_azimuths(self):
        config = PipelineConfig()
        config.orbit.frames = 4
        cameras = timeline_cameras(config.orbit, [0.0, 0.5, 1.0, 3.0], 16, 16)
        assert [c.azimuth for c in cameras] == [0.0, 45.0, 90.0, 270.0]

    def test_rest_pose_without_rows(self):
        states = timeline_states([], [0.0, 0.5, 1.0], 3, np.zeros(1))
        assert len(states) == 3
        assert all(not s.theta.any() for s in states)

    def test_single_row_is_shared(self):
        row = (np.full((3, 3), 0.1), np.array([0.0, 1.0, 0.0]))
        states = timeline_states([row], [0.0, 0.25, 0.5], 3, np.zeros(1))
        assert all(np.array_equal(s.theta, row[0]) for s in states)

    def test_source_rows_are_interpolated(self):
        rows = [(np.full((3, 3), float(k)), np.array([float(k), 0.0, 0.0])) for k in range(3)]
        positions = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
        states = timeline_states(rows, positions, 3, np.zeros(1))
        np.testing.assert_allclose([s.translation[0] for s in states], positions)
        np.testing.assert_allclose(states[2].theta, 0.5)

    def test_rows_per_training_frame(self):
        rows = [(np.full((3, 3), float(k)), np.zeros(3)) for k in range(4)]
        states = timeline_states(rows, [0.0, 0.5, 1.0, 1.5], 3, np.zeros(1))
        assert [float(s.theta[0, 0]) for s in states] == [0.0, 1.0, 2.0, 3.0]

    def test_row_count_mismatch(self):
        rows = [(np.zeros((3, 3)), np.zeros(3))] * 2
        with pytest.raises(InvalidArgumentError, match="expected 1, 3"):
            timeline_states(rows, [0.0, 0.5, 1.0, 1.5, 2.0], 3, np.zeros(1))

    def test_positions_without_manifest(self, tmp_path):
        assert frame_positions(tmp_path, 5, 3) == [0.0, 0.5, 1.0, 1.5, 2.0]

    def test_manifest_count_checked(self, tmp_path):
        (tmp_path / "augment_manifest.txt").write_text("1 1 0.0\n2 1 0.5\n")
        assert frame_positions(tmp_path, 2, 3) == [0.0, 0.5]
        with pytest.raises(InvalidArgumentError):
            frame_positions(tmp_path, 3, 3)


class TestCommands:
    def test_augment(self, tmp_path, rng):
        source = tmp_path / "source"
        write_frame_files(source, [rng.integers(0, 256, size=(8, 8, 3)) / 255.0 for _ in range(3)])
        config = PipelineConfig()
        config.paths.frames = str(source)
        config.paths.output = str(tmp_path / "run")
        config.augment.factor = 2
        config.augment.target = 16
        stale = tmp_path / "run" / "augmented"
        stale.mkdir(parents=True)
        save_png(stale / frame_name(20), np.zeros((4, 4, 3)))

        output = cmd_augment(config, progress=False)
        frames = read_frame_files(output, expected=9)
        assert frames[0].shape == (16, 16, 3)
        assert frame_positions(output, 9, 3) == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
        assert not (Path(config.paths.output) / LOCK_NAME).exists()

    def test_fit(self, tmp_path, rng):
        frames_dir = tmp_path / "frames"
        write_frame_files(frames_dir, [rng.uniform(size=(16, 16, 3)) for _ in range(3)])
        config = PipelineConfig()
        config.paths.augmented = str(frames_dir)
        config.paths.output = str(tmp_path / "run")
        config.orbit.frames = 3
        config.render.resolution = 16
        config.render.precision = "fp64"
        config.body.gaussian_count = 64
        config.body.uv_resolution = 32
        config.train = TrainConfig(epochs=1, batch_size=2, feature_channels=4, hidden_widths=(8,),
                                   extractor="none", log_interval=0, weights=LossWeights(lpips=0.0))

        checkpoint_path = cmd_fit(config, progress=False)
        out = Path(config.paths.output)
        checkpoint = read_checkpoint(checkpoint_path)
        assert checkpoint.meta["gaussians"] == 64
        assert checkpoint.meta["frames"] == 3
        assert [r["step"] for r in read_loss_csv(out / "loss_history.csv")] == [1, 2]
        manifest = (out / "run_manifest.txt").read_text().splitlines()
        assert "asset.body=builtin:capsule_person" in manifest
        assert "config.train.epochs=1" in manifest
        assert "toggle.frame_interpolation=True" in manifest
        assert any(line.startswith("asset.frames=sha256:") for line in manifest)
        assert len((out / "refined_poses.txt").read_text().splitlines()) == 3

    def test_render_and_eval_self_comparison(self, run):
        written = cmd_render(run)
        assert sorted(p.name for p in written) == ["front.png", "right.png"]
        run.paths.ground_truth = str(Path(run.paths.output) / "renders")
        entries = read_metric_report(cmd_eval(run))
        assert entries["views"] == "front,right,mean"
        assert float(entries["front.psnr"]) == 100.0
        assert float(entries["mean.ssim"]) == pytest.approx(1.0, abs=1e-9)
        assert float(entries["right.lpips"]) == 0.0
        assert entries["frame"] == "0"
        assert entries["clip_similarity"] == "out_of_scope"

    def test_render_orbit_and_views(self, run):
        names = [p.name for p in cmd_render(run, orbit=3)]
        assert names == ["orbit_000.png", "orbit_001.png", "orbit_002.png"]
        written = cmd_render(run, views=[(45.0, 10.0)], frame=None, float_dump=True)
        assert written[0].name == "view_az45_el10.png"
        assert read_float_image(written[0].with_suffix(".f32")).shape == (32, 32, 3)

    def test_eval_names_missing_views(self, run, tmp_path):
        truth = tmp_path / "truth"
        truth.mkdir()
        save_png(truth / "front.png", np.ones((32, 32, 3)))
        run.paths.ground_truth = str(truth)
        with pytest.raises(InvalidArgumentError, match="right"):
            cmd_eval(run)

    def test_export(self, run, tmp_path):
        canonical = read_ply(cmd_export(run))
        assert len(canonical) == 48
        rest = read_ply(cmd_export(run, frame=0, path=str(tmp_path / "frame0.ply")))
        for name in ("centers", "rotations", "colors"):
            torch.testing.assert_close(getattr(rest, name), getattr(canonical, name), atol=1e-6, rtol=0)
        bent = read_ply(cmd_export(run, frame=1, path=str(tmp_path / "frame1.ply")))
        assert not torch.allclose(bent.centers, canonical.centers, atol=1e-3)

    def test_frame_out_of_range(self, run):
        with pytest.raises(InvalidArgumentError, match="out of range"):
            load_gaussians(run, read_checkpoint(run.paths.checkpoint_file()), frame=5)

    def test_locked_output(self, run):
        (Path(run.paths.output) / LOCK_NAME).write_text("12345")
        with pytest.raises(OSError, match="pid 12345"):
            cmd_export(run)


class TestCli:
    def test_parse_view(self):
        assert parse_view("45") == (45.0, 0.0)
        assert parse_view("45:-10") == (45.0, -10.0)
        with pytest.raises(argparse.ArgumentTypeError):
            parse_view("front")

    def test_parser(self):
        args = build_parser().parse_args(["render", "--view", "30:5", "--view", "60", "--frame", "1",
                                          "-s", "render.resolution=64"])
        assert args.view == [(30.0, 5.0), (60.0, 0.0)]
        assert args.frame == 1 and not args.canonical
        assert args.overrides == ["render.resolution=64"]

    def test_exit_codes(self, run, tmp_path):
        out = run.paths.output
        assert main(["export", "-o", out, "--canonical"]) == 0
        assert (Path(out) / "gaussians.ply").exists()
        assert main(["export", "-o", str(tmp_path / "empty")]) == 2
        assert main(["fit", "-o", out, "-s", "orbit.frames=abc"]) == 2
        (Path(out) / LOCK_NAME).write_text("1")
        assert main(["export", "-o", out]) == 4
