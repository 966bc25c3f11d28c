import math

import numpy as np
import pytest
import torch

from orbit_splat.errors import AssetFormatError, InvalidArgumentError
from orbit_splat.gaussian_cloud import init_feature_tensor
from orbit_splat.losses_metrics import (
    PSNR_CAP,
    SSIM_C1,
    SSIM_C2,
    ConvPyramidExtractor,
    IdentityExtractor,
    LossWeights,
    MetricRow,
    NullExtractor,
    build_extractor,
    gaussian_window,
    l1_rgb,
    load_extractor,
    lpips,
    lpips_torch,
    mean_row,
    psnr,
    read_metric_report,
    reg_feature,
    reg_offset,
    reg_scale,
    rows_from_report,
    save_extractor,
    ssim,
    ssim_loss,
    ssim_loss_torch,
    total_loss,
    write_metric_report,
)


def naive_l1(x, y):
    total = 0.0
    h, w, c = x.shape
    for i in range(h):
        for j in range(w):
            for k in range(c):
                total += abs(x[i, j, k] - y[i, j, k])
    return total / (h * w * c)


def naive_ssim(x, y):
    window = gaussian_window().numpy()
    size = window.shape[0]
    h, w, c = x.shape
    per_channel = []
    for k in range(c):
        values = []
        for i in range(h - size + 1):
            for j in range(w - size + 1):
                a = x[i:i + size, j:j + size, k]
                b = y[i:i + size, j:j + size, k]
                mu_a = (window * a).sum()
                mu_b = (window * b).sum()
                var_a = (window * (a - mu_a) ** 2).sum()
                var_b = (window * (b - mu_b) ** 2).sum()
                cov = (window * (a - mu_a) * (b - mu_b)).sum()
                values.append(((2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2))
                              / ((mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)))
        per_channel.append(np.mean(values))
    return float(np.mean(per_channel))


@pytest.fixture
def image_pair(rng):
    return rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))


class TestL1:
    def test_identical(self, image_pair):
        x, _ = image_pair
        assert l1_rgb(x, x) == 0.0

    def test_constant_shift(self):
        x = np.full((4, 4, 3), 0.25)
        assert l1_rgb(x, x + 0.5) == pytest.approx(0.5)

    def test_matches_loop(self, rng):
        x, y = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        assert l1_rgb(x, y) == pytest.approx(naive_l1(x, y), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            l1_rgb(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestSSIM:
    def test_identical(self, image_pair):
        x, _ = image_pair
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
        assert ssim_loss(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_black_against_white(self):
        value = ssim(np.zeros((16, 16, 3)), np.ones((16, 16, 3)))
        assert value == pytest.approx(SSIM_C1 / (1.0 + SSIM_C1), abs=1e-9)

    def test_matches_window_loop(self, image_pair):
        x, y = image_pair
        assert ssim(x, y) == pytest.approx(naive_ssim(x, y), abs=1e-9)

    def test_symmetric_and_bounded(self, image_pair):
        x, y = image_pair
        assert ssim(x, y) == pytest.approx(ssim(y, x), abs=1e-12)
        assert -1.0 <= ssim(x, y) <= 1.0

    def test_too_small(self):
        with pytest.raises(InvalidArgumentError):
            ssim(np.zeros((10, 16, 3)), np.zeros((10, 16, 3)))

    def test_loss_gradient(self, rng):
        x = torch.as_tensor(rng.uniform(size=(12, 12, 3)), dtype=torch.float64).requires_grad_(True)
        y = torch.as_tensor(rng.uniform(size=(12, 12, 3)), dtype=torch.float64)
        assert torch.autograd.gradcheck(lambda t: ssim_loss_torch(t, y), (x,), eps=1e-6, atol=1e-6)


class TestPerceptual:
    def test_identity_features_by_hand(self):
        x = np.zeros((2, 2, 3))
        x[..., 0] = 1.0
        y = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                      [[0.0, 0.0, 0.5], [1.0, 1.0, 0.0]]])
        expected = (0.0 + 2.0 + 2.0 + (2.0 - math.sqrt(2.0))) / 4.0
        assert lpips(x, y, IdentityExtractor()) == pytest.approx(expected, abs=1e-12)

    def test_black_pixels_have_finite_gradient(self, rng):
        x = torch.zeros((6, 6, 3), dtype=torch.float64, requires_grad=True)
        y = torch.as_tensor(rng.uniform(0.1, 1.0, size=(6, 6, 3)))
        value = lpips_torch(x, y, IdentityExtractor())
        assert float(value) == pytest.approx(1.0, abs=1e-12)
        (grad,) = torch.autograd.grad(value, x)
        assert bool(torch.isfinite(grad).all())

    def test_zero_channel_weights(self, image_pair):
        x, y = image_pair
        assert lpips(x, y, IdentityExtractor([0.0, 0.0, 0.0])) == 0.0

    def test_pyramid_identical_and_symmetric(self, image_pair):
        x, y = image_pair
        extractor = ConvPyramidExtractor.seeded(0)
        assert lpips(x, x, extractor) == 0.0
        assert lpips(x, y, extractor) > 0.0
        assert lpips(x, y, extractor) == pytest.approx(lpips(y, x, extractor), abs=1e-12)

    def test_pyramid_is_seeded(self, image_pair):
        x, y = image_pair
        a = lpips(x, y, ConvPyramidExtractor.seeded(3))
        assert a == lpips(x, y, ConvPyramidExtractor.seeded(3))
        assert a != lpips(x, y, ConvPyramidExtractor.seeded(4))

    def test_null_extractor_is_zero(self, image_pair):
        x, y = image_pair
        assert lpips(x, y, NullExtractor()) == 0.0

    def test_pyramid_needs_room(self):
        with pytest.raises(InvalidArgumentError):
            lpips(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)), ConvPyramidExtractor.seeded(0))

    def test_weight_file_round_trip(self, tmp_path, image_pair):
        x, y = image_pair
        extractor = ConvPyramidExtractor.seeded(7)
        save_extractor(tmp_path / "pyramid.fext", extractor)
        loaded = build_extractor("file", weights_path=tmp_path / "pyramid.fext")
        assert loaded.strides == extractor.strides
        for a, b in zip(loaded.kernels, extractor.kernels):
            assert torch.equal(a, b)
        assert lpips(x, y, loaded) == lpips(x, y, extractor)

    def test_weight_file_errors(self, tmp_path):
        path = tmp_path / "bad.fext"
        path.write_bytes(b"WRONGMAG" + bytes(8))
        with pytest.raises(AssetFormatError, match="bad magic"):
            load_extractor(path)
        save_extractor(path, ConvPyramidExtractor.seeded(0))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(AssetFormatError, match="truncated"):
            load_extractor(path)

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            build_extractor("alexnet")


class TestPSNR:
    def test_identical_is_capped(self, image_pair):
        x, _ = image_pair
        assert psnr(x, x) == PSNR_CAP

    def test_uniform_difference(self):
        assert psnr(np.zeros((4, 4, 3)), np.full((4, 4, 3), 0.1)) == pytest.approx(20.0)

    def test_decreasing_in_error(self):
        x = np.zeros((4, 4, 3))
        values = [psnr(x, np.full((4, 4, 3), d)) for d in (0.01, 0.05, 0.2)]
        assert values == sorted(values, reverse=True)


class TestRegularizers:
    def test_offsets(self):
        assert float(reg_offset(np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))) == pytest.approx(2.5)

    def test_features(self):
        assert float(reg_feature(np.array([1.0, -1.0, 2.0, 0.0]))) == pytest.approx(1.5)

    def test_zeros(self):
        assert float(reg_offset(np.zeros((3, 3)))) == 0.0
        assert float(reg_scale(np.zeros((3, 1)))) == 0.0

    def test_feature_tensor(self):
        features = init_feature_tensor(4, 2, seed=0, dtype=torch.float64)
        value = reg_feature(features)
        assert float(value) == pytest.approx(float((features.values ** 2).mean()))
        value.backward()
        torch.testing.assert_close(features.values.grad, 2.0 * features.values.detach() / features.numel())

    @pytest.mark.parametrize("fn, empty", [
        (reg_offset, np.zeros((0, 3))),
        (reg_scale, np.zeros(0)),
        (reg_feature, np.zeros(0)),
    ])
    def test_empty(self, fn, empty):
        with pytest.raises(InvalidArgumentError):
            fn(empty)


class TestObjective:
    TERMS = {"rgb": 0.1, "ssim": 0.2, "lpips": 0.3, "offset": 0.01, "scale": 0.02, "feature": 0.03}

    def test_default_weights(self):
        assert total_loss(self.TERMS).total == pytest.approx(0.33)

    def test_zero_cases(self):
        assert total_loss({}).total == 0.0
        zero = LossWeights(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        assert total_loss(self.TERMS, zero).total == 0.0

    def test_tensor_terms_stay_differentiable(self):
        x = torch.tensor(0.5, dtype=torch.float64, requires_grad=True)
        breakdown = total_loss({"rgb": x, "offset": x * x})
        breakdown.tensor.backward()
        assert float(x.grad) == pytest.approx(0.8 + 10.0 * 2 * 0.5)

    def test_row_and_description(self):
        breakdown = total_loss(self.TERMS)
        row = breakdown.as_row()
        assert list(row) == ["rgb", "ssim", "lpips", "offset", "scale", "feature", "total"]
        assert "total=0.33" in breakdown.describe()

    @pytest.mark.parametrize("terms", [
        {"rgb": float("nan")},
        {"ssim": -0.1},
        {"clip": 0.1},
    ])
    def test_rejected_terms(self, terms):
        with pytest.raises(InvalidArgumentError):
            total_loss(terms)

    def test_negative_weight(self):
        with pytest.raises(InvalidArgumentError):
            total_loss(self.TERMS, LossWeights(rgb=-1.0))


class TestReport:
    def test_round_trip(self, tmp_path):
        rows = [MetricRow("front", {"psnr": 31.25, "ssim": 0.97}),
                MetricRow("back", {"psnr": 28.75, "ssim": 0.93})]
        path = tmp_path / "eval_report.txt"
        write_metric_report(path, rows + [mean_row(rows)], extra={"frame": "0"})
        entries = read_metric_report(path)
        assert entries["clip_similarity"] == "out_of_scope"
        assert entries["frame"] == "0"
        parsed = rows_from_report(entries)
        assert [r.view for r in parsed] == ["front", "back", "mean"]
        assert parsed[2].scores["psnr"] == pytest.approx(30.0)
        assert parsed[0].scores == rows[0].scores

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "eval_report.txt"
        path.write_text("# header\nviews=front\nnonsense\n")
        with pytest.raises(AssetFormatError, match=":3:"):
            read_metric_report(path)
