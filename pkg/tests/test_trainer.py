import math

import numpy as np
import pytest
import torch
from torch import nn

from orbit_splat.body_model import BodyState
from orbit_splat.errors import AssetFormatError, InvalidArgumentError, NumericalError
from orbit_splat.gaussian_cloud import (
    GaussianSet,
    build_decoder,
    init_feature_tensor,
    read_checkpoint,
    repose_with,
    write_checkpoint,
)
from orbit_splat.losses_metrics import IdentityExtractor, LossWeights, NullExtractor, total_loss
from orbit_splat.orbit_camera import make_camera
from orbit_splat.splat_renderer import rasterize
from orbit_splat.trainer import (
    CSV_COLUMNS,
    LossCsvWriter,
    TrainConfig,
    bodies_from_checkpoint,
    build_optimizer,
    build_subject,
    cameras_from_checkpoint,
    epoch_orders,
    file_digest,
    fit,
    init_train_state,
    make_batch,
    read_loss_csv,
    refine_motion,
    state_from_checkpoint,
    state_to_checkpoint,
    steps_per_epoch,
    train_step,
    truncate_loss_csv,
    write_run_manifest,
)


def small_config(**overrides) -> TrainConfig:
    options = dict(epochs=2, batch_size=1, feature_channels=4, hidden_widths=(8,), extractor="none",
                   log_interval=0, checkpoint_interval=0, weights=LossWeights(lpips=0.0))
    options.update(overrides)
    return TrainConfig(**options)


@pytest.fixture
def bar_subject(unit_bar_template):
    return build_subject(unit_bar_template, np.zeros(1), 48, seed=0, uv_resolution=16)


@pytest.fixture
def frames_and_views(rng):
    cameras = [make_camera(0.0, 0.0, 3.0, 40.0, 24, 24), make_camera(90.0, 0.0, 3.0, 40.0, 24, 24)]
    images = [rng.uniform(size=(24, 24, 3)) for _ in cameras]
    states = [BodyState.rest(3, 1) for _ in cameras]
    return images, cameras, states


def as_batch(indices, frames_and_views, dtype=torch.float64):
    images, cameras, states = frames_and_views
    return make_batch(indices, [torch.as_tensor(i, dtype=dtype) for i in images], cameras, states)


class TestConfig:
    def test_defaults_are_valid(self):
        assert TrainConfig().problems() == []

    def test_problems_collected(self):
        problems = TrainConfig(epochs=0, learning_rate=-1.0, extractor="file").problems()
        assert len(problems) == 3
        assert any("train.extractor_weights" in p for p in problems)

    def test_schedule_helpers(self):
        assert steps_per_epoch(81, 2) == 41
        orders = list(epoch_orders(5, 3, seed=4))
        assert len(orders) == 3
        assert all(sorted(o.tolist()) == [0, 1, 2, 3, 4] for o in orders)
        assert [o.tolist() for o in epoch_orders(5, 3, seed=4)] == [o.tolist() for o in orders]


class TestRefineMotion:
    def test_zero_corrections(self):
        body = BodyState(theta=np.full((3, 3), 0.2), beta=np.zeros(1), translation=[1.0, 2.0, 3.0])
        theta, translation = refine_motion(body)
        np.testing.assert_array_equal(theta, body.theta)
        np.testing.assert_array_equal(translation, body.translation)

    def test_translation_correction_is_added(self):
        body = BodyState(theta=np.zeros((3, 3)), beta=np.zeros(1), translation=[1.0, 2.0, 3.0])
        delta = torch.tensor([0.1, 0.0, 0.0], dtype=torch.float64)
        _, translation = refine_motion(body, None, delta)
        np.testing.assert_array_equal(translation.numpy(), np.array([1.0, 2.0, 3.0]) + [0.1, 0.0, 0.0])

    def test_translation_gradient_matches_finite_differences(self, rng):
        camera = make_camera(0.0, 0.0, 3.0, 40.0, 24, 24)
        gaussian = GaussianSet(
            centers=torch.tensor([[0.05, -0.02, 0.0]], dtype=torch.float64),
            colors=torch.tensor([[0.9, 0.2, 0.1]], dtype=torch.float64),
            opacities=torch.tensor([[0.8]], dtype=torch.float64),
            scales=torch.tensor([[0.2, 0.15, 0.1]], dtype=torch.float64),
            rotations=torch.tensor([[1.0, 0.0, 0.0, 0.0]], dtype=torch.float64),
        )
        body = BodyState.rest(1)
        weights = torch.as_tensor(rng.normal(size=(24, 24, 3)))

        def loss(delta):
            theta, translation = refine_motion(body, None, delta)
            posed = repose_with(gaussian, np.ones((1, 1)), np.zeros((1, 3)), [-1], theta, translation)
            return (rasterize(posed, camera, (1.0, 1.0, 1.0)).image * weights).sum()

        delta = torch.tensor([0.03, -0.01, 0.02], dtype=torch.float64, requires_grad=True)
        (analytic,) = torch.autograd.grad(loss(delta), delta)
        eps = 1e-6
        for axis in range(3):
            step = torch.zeros(3, dtype=torch.float64)
            step[axis] = eps
            with torch.no_grad():
                numeric = (loss(delta + step) - loss(delta - step)) / (2 * eps)
            assert float(analytic[axis]) == pytest.approx(float(numeric), rel=1e-3, abs=1e-7)


class TestOptimizer:
    def test_matches_scalar_adam(self):
        config = TrainConfig(learning_rate=0.05, motion_learning_rate=0.01)
        features = init_feature_tensor(1, 1, seed=0, dtype=torch.float64)
        decoder = build_decoder(1, (2,), dtype=torch.float64)
        delta_t = nn.Parameter(torch.tensor([0.4, 0.0, 0.0], dtype=torch.float64))
        optimizer = build_optimizer(features, decoder, [], [delta_t], config)

        beta1, beta2 = config.adam_betas
        expected = {"f": float(features.values.detach()[0, 0, 0]), "t": 0.4}
        moments = {"f": [0.0, 0.0], "t": [0.0, 0.0]}
        rates = {"f": config.learning_rate, "t": config.motion_learning_rate}
        for k in range(1, 11):
            optimizer.zero_grad(set_to_none=True)
            loss = (features.values[0, 0, 0] - 0.3) ** 2 + delta_t[0] ** 3
            loss.backward()
            optimizer.step()
            grads = {"f": 2.0 * (expected["f"] - 0.3), "t": 3.0 * expected["t"] ** 2}
            for name, g in grads.items():
                m, v = moments[name]
                m = beta1 * m + (1 - beta1) * g
                v = beta2 * v + (1 - beta2) * g * g
                moments[name] = [m, v]
                denom = math.sqrt(v) / math.sqrt(1 - beta2 ** k) + config.adam_eps
                expected[name] -= rates[name] / (1 - beta1 ** k) * m / denom
            assert float(features.values[0, 0, 0]) == pytest.approx(expected["f"], abs=1e-10)
            assert float(delta_t[0]) == pytest.approx(expected["t"], abs=1e-10)

    def test_parameter_groups(self, bar_subject):
        state = init_train_state(bar_subject, 3, small_config(), torch.float64)
        groups = state.optimizer.param_groups
        assert [g["lr"] for g in groups] == [3e-3, 1e-4]
        assert len(groups[1]["params"]) == 6
        assert state.num_frames == 3
        assert state.features.values.shape == (16, 16, 4)


class TestTrainStep:
    def test_updates_parameters(self, bar_subject, frames_and_views):
        state = init_train_state(bar_subject, 2, small_config(), torch.float64)
        before = state.features.values.detach().clone()
        breakdown = train_step(state, bar_subject, as_batch([0], frames_and_views), small_config(), NullExtractor())
        weights = small_config().weights
        expected = sum(getattr(weights, n) * getattr(breakdown, n) for n in CSV_COLUMNS[1:-1])
        assert breakdown.total == pytest.approx(expected, abs=1e-12)
        assert math.isfinite(breakdown.total) and breakdown.lpips == 0.0
        assert state.step == 1 and len(state.history) == 1
        assert not torch.equal(before, state.features.values.detach())

    def test_only_batch_frames_move(self, bar_subject, frames_and_views):
        config = small_config()
        state = init_train_state(bar_subject, 2, config, torch.float64)
        train_step(state, bar_subject, as_batch([0], frames_and_views), config, NullExtractor())
        assert float(state.delta_translation[0].detach().abs().max()) > 0.0
        assert float(state.delta_translation[1].detach().abs().max()) == 0.0

    def test_motion_delay(self, bar_subject, frames_and_views):
        config = small_config(motion_refinement_delay=5)
        state = init_train_state(bar_subject, 2, config, torch.float64)
        train_step(state, bar_subject, as_batch([0, 1], frames_and_views), config, NullExtractor())
        assert float(state.delta_theta[0].detach().abs().max()) == 0.0
        assert float(state.delta_translation[0].detach().abs().max()) == 0.0

    def test_non_finite_loss(self, bar_subject, frames_and_views):
        images, cameras, states = frames_and_views
        images = [np.full_like(images[0], np.nan), images[1]]
        config = small_config()
        state = init_train_state(bar_subject, 2, config, torch.float64)
        before = state.features.values.detach().clone()
        with pytest.raises(NumericalError) as info:
            train_step(state, bar_subject, as_batch([0], (images, cameras, states)), config, NullExtractor())
        assert math.isnan(info.value.breakdown.rgb)
        assert state.step == 0
        assert torch.equal(before, state.features.values.detach())

    def test_non_finite_gradient(self, bar_subject, frames_and_views):
        config = small_config()
        state = init_train_state(bar_subject, 2, config, torch.float64)
        state.features.values.register_hook(lambda g: torch.full_like(g, float("nan")))
        before = {name: p.detach().clone() for name, p in state.named_parameters()}
        with pytest.raises(NumericalError, match="features") as info:
            train_step(state, bar_subject, as_batch([0], frames_and_views), config, NullExtractor())
        assert info.value.breakdown is not None
        assert state.step == 0 and not state.history
        for name, p in state.named_parameters():
            assert torch.equal(before[name], p.detach()), name
            assert p.grad is None, name

    def test_black_background_gradients_stay_finite(self, bar_subject, frames_and_views):
        config = small_config(weights=LossWeights())
        state = init_train_state(bar_subject, 2, config, torch.float64)
        breakdown = train_step(state, bar_subject, as_batch([0, 1], frames_and_views), config,
                               IdentityExtractor(), background=(0.0, 0.0, 0.0))
        assert breakdown.lpips > 0.0 and state.step == 1
        for name, p in state.named_parameters():
            assert bool(torch.isfinite(p.grad).all()), name
            assert bool(torch.isfinite(p).all()), name

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_every_parameter_receives_gradient(self, unit_bar_template, frames_and_views, seed):
        subject = build_subject(unit_bar_template, np.zeros(1), 48, seed=seed, uv_resolution=16)
        config = small_config(seed=seed, motion_refinement_delay=1, weights=LossWeights())
        state = init_train_state(subject, 2, config, torch.float64)
        batch = as_batch([0, 1], frames_and_views)

        train_step(state, subject, batch, config, IdentityExtractor())
        assert all(p.grad is None for p in state.delta_theta + state.delta_translation)

        train_step(state, subject, batch, config, IdentityExtractor())
        for name, p in state.named_parameters():
            assert p.grad is not None, name
            assert float(p.grad.abs().max()) > 0.0, name

    def test_batch_shape_checked(self, frames_and_views):
        images, cameras, states = frames_and_views
        with pytest.raises(InvalidArgumentError):
            make_batch([0], [torch.zeros(8, 8, 3)], cameras, states)


class TestFit:
    def test_fit_records_and_resume(self, tmp_path, bar_subject, frames_and_views):
        images, cameras, states = frames_and_views
        ckpt, csv_path = tmp_path / "checkpoint.osplat", tmp_path / "loss_history.csv"
        config = small_config()
        state = fit(images, cameras, states, config, bar_subject, dtype=torch.float64,
                    checkpoint_path=ckpt, loss_csv=csv_path)
        assert state.step == 4
        rows = read_loss_csv(csv_path)
        assert [r["step"] for r in rows] == [1, 2, 3, 4]
        assert rows[-1]["total"] == state.history[-1].total

        checkpoint = read_checkpoint(ckpt)
        restored = state_from_checkpoint(checkpoint, config)
        assert restored.step == 4
        assert torch.equal(restored.features.values, state.features.values.detach())
        fit(images, cameras, states, small_config(epochs=3), bar_subject, dtype=torch.float64,
            state=restored, loss_csv=csv_path)
        assert restored.step == 6
        assert [r["step"] for r in read_loss_csv(csv_path)] == [1, 2, 3, 4, 5, 6]

    def test_resume_drops_rows_past_checkpoint(self, tmp_path, bar_subject, frames_and_views):
        images, cameras, states = frames_and_views
        ckpt, csv_path = tmp_path / "checkpoint.osplat", tmp_path / "loss_history.csv"
        config = small_config(epochs=3, checkpoint_interval=1)
        fit(images, cameras, states, config, bar_subject, dtype=torch.float64,
            checkpoint_path=ckpt, loss_csv=csv_path)
        assert [r["step"] for r in read_loss_csv(csv_path)] == [1, 2, 3, 4, 5, 6]

        # last checkpoint is after epoch 2; steps 5 and 6 are logged again on resume
        restored = state_from_checkpoint(read_checkpoint(ckpt), config)
        assert restored.step == 4
        fit(images, cameras, states, config, bar_subject, dtype=torch.float64,
            state=restored, loss_csv=csv_path)
        assert [r["step"] for r in read_loss_csv(csv_path)] == [1, 2, 3, 4, 5, 6]

    def test_same_seed_same_result(self, bar_subject, frames_and_views):
        images, cameras, states = frames_and_views
        a = fit(images, cameras, states, small_config(), bar_subject, dtype=torch.float64)
        b = fit(images, cameras, states, small_config(), bar_subject, dtype=torch.float64)
        assert torch.equal(a.features.values, b.features.values)
        assert [h.total for h in a.history] == [h.total for h in b.history]

    def test_mismatched_inputs(self, bar_subject, frames_and_views):
        images, cameras, states = frames_and_views
        with pytest.raises(InvalidArgumentError):
            fit(images[:1], cameras, states, small_config(), bar_subject)


class TestCheckpointState:
    def test_round_trip(self, tmp_path, bar_subject, frames_and_views):
        images, cameras, states = frames_and_views
        config = small_config()
        state = init_train_state(bar_subject, 2, config, torch.float64)
        train_step(state, bar_subject, as_batch([1], frames_and_views), config, NullExtractor())
        write_checkpoint(tmp_path / "c.osplat", state_to_checkpoint(state, bar_subject, {"a": 1}, states, cameras))
        checkpoint = read_checkpoint(tmp_path / "c.osplat")

        restored = state_from_checkpoint(checkpoint, config)
        for (name, p), (_, q) in zip(state.named_parameters(), restored.named_parameters()):
            assert torch.equal(p.detach(), q.detach()), name
        moments = state.optimizer.state[state.features.values]
        restored_moments = restored.optimizer.state[restored.features.values]
        assert torch.equal(moments["exp_avg_sq"], restored_moments["exp_avg_sq"])
        assert checkpoint.meta["config"] == {"a": 1}

        views = cameras_from_checkpoint(checkpoint)
        assert [v.azimuth for v in views] == [0.0, 90.0]
        np.testing.assert_array_equal(views[1].extrinsic, cameras[1].extrinsic)
        bodies = bodies_from_checkpoint(checkpoint, restored)
        assert len(bodies) == 2
        np.testing.assert_array_equal(bodies[1].delta_translation, state.corrections(1)[1])


class TestRecords:
    def test_loss_csv_header(self, tmp_path):
        with LossCsvWriter(tmp_path / "loss.csv"):
            pass
        assert (tmp_path / "loss.csv").read_text().strip() == ",".join(CSV_COLUMNS)

    def test_truncate_loss_csv(self, tmp_path):
        path = tmp_path / "loss.csv"
        breakdown = total_loss({"rgb": 0.1, "ssim": 0.2})
        with LossCsvWriter(path) as writer:
            for step in (1, 2, 3, 4):
                writer.write(step, breakdown)
        assert truncate_loss_csv(path, 2) == 2
        assert [r["step"] for r in read_loss_csv(path)] == [1, 2]
        assert truncate_loss_csv(path, 5) == 0
        assert truncate_loss_csv(tmp_path / "absent.csv", 1) == 0
        path.write_text("a,b\n1,2\n")
        with pytest.raises(AssetFormatError, match="not a loss history"):
            truncate_loss_csv(path, 1)

    def test_file_digest(self, tmp_path):
        (tmp_path / "a").write_bytes(b"ab")
        (tmp_path / "b").write_bytes(b"c")
        assert file_digest([tmp_path / "a", tmp_path / "b"]) == \
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_run_manifest_echoes_config(self, tmp_path):
        path = tmp_path / "run_manifest.txt"
        write_run_manifest(path, {"train": TrainConfig().to_dict()}, {"sampling": 0, "train": 0},
                           {"body": "builtin:capsule_person"}, {"toggle.super_resolution": True})
        lines = path.read_text().splitlines()
        for expected in ("config.train.epochs=1000", "config.train.batch_size=2",
                         "config.train.learning_rate=0.003", "seed.sampling=0",
                         "asset.body=builtin:capsule_person", "toggle.super_resolution=True"):
            assert expected in lines
