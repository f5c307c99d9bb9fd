import math

import numpy as np
import pytest
import torch

from cpmask.exceptions import CheckpointError, ShapeMismatchError
from cpmask.maskops import Box
from cpmask.net import CPMaskNet, RoIForward, compute_affinity, dumps_container, loads_container, nonlocal_attention, normalize_affinity, zscore
from cpmask.net.affinity import AffinityModule


def small_net(**kwargs):
    params = dict(channels=8, roi_size=4, mask_size=8)
    params.update(kwargs)
    return CPMaskNet(**params).double()


class TestBackbone:
    @pytest.mark.parametrize("size", [(16, 16), (33, 50), (64, 47)])
    def test_output_shape(self, size):
        net = CPMaskNet(channels=8, roi_size=4, mask_size=8)
        feats = net.backbone_forward(torch.rand(3, *size))
        assert feats.shape == (8, math.ceil(size[0] / 4), math.ceil(size[1] / 4))

    def test_too_small(self):
        net = CPMaskNet(channels=8, roi_size=4, mask_size=8)
        with pytest.raises(ShapeMismatchError):
            net.backbone_forward(torch.rand(3, 15, 32))

    def test_zero_image_finite(self):
        net = CPMaskNet(channels=8, roi_size=4, mask_size=8)
        with torch.no_grad():
            for p in net.backbone.blocks[-1].parameters():
                p.zero_()
            feats = net.backbone_forward(torch.zeros(3, 32, 32))
        assert torch.isfinite(feats).all()
        assert (feats == 0).all()

    def test_translation(self):
        net = small_net()
        image = torch.rand(3, 64, 64, dtype=torch.float64)
        shifted = torch.roll(image, shifts=4, dims=2)
        with torch.no_grad():
            a = net.backbone_forward(image)
            b = net.backbone_forward(shifted)
        # interior cells are out of reach of the wrapped columns and the zero padding
        torch.testing.assert_close(b[:, 4:-4, 5:-4], a[:, 4:-4, 4:-5])


class TestBoundaryAndFusion:
    def test_shapes_and_range(self):
        net = small_net()
        X = torch.rand(3, 8, 4, 4, dtype=torch.float64)
        logits, prob = net.boundary_forward(X)
        assert logits.shape == (3, 1, 8, 8)
        assert prob.shape == (3, 1, 4, 4)
        assert ((prob > 0) & (prob < 1)).all()

    def test_constant_logits(self):
        net = small_net()
        with torch.no_grad():
            net.boundary.out.weight.zero_()
            net.boundary.out.bias.fill_(0.7)
            _, prob = net.boundary_forward(torch.rand(2, 8, 4, 4, dtype=torch.float64))
        torch.testing.assert_close(prob, torch.full_like(prob, 1 / (1 + math.exp(-0.7))))

    def test_fusion(self):
        net = small_net()
        X = torch.rand(2, 8, 4, 4, dtype=torch.float64)
        with torch.no_grad():
            base = net.head(X)
            torch.testing.assert_close(net.fuse_and_head(X, torch.zeros(2, 1, 4, 4, dtype=torch.float64)), base)
            net.alpha.zero_()
            torch.testing.assert_close(net.fuse_and_head(X, torch.rand(2, 1, 4, 4, dtype=torch.float64)), base)
            net.alpha.fill_(1.0)
            half = torch.full((2, 1, 4, 4), 0.5, dtype=torch.float64)
            torch.testing.assert_close(net.fuse_and_head(X, half), net.head(X + 0.5))

    def test_fusion_disabled(self):
        net = small_net(use_fusion=False)
        X = torch.rand(2, 8, 4, 4, dtype=torch.float64)
        with torch.no_grad():
            torch.testing.assert_close(net.fuse_and_head(X, torch.rand(2, 1, 4, 4, dtype=torch.float64)), net.head(X))


class TestAffinity:
    def test_single_pixel(self):
        net = small_net()
        A = net.compute_affinity(torch.rand(1, 8, 1, 1, dtype=torch.float64))
        torch.testing.assert_close(A, torch.ones(1, 1, 1, dtype=torch.float64))

    def test_equal_logits_uniform(self):
        A = normalize_affinity(torch.zeros(1, 6, 6, dtype=torch.float64))
        torch.testing.assert_close(A, torch.full((1, 6, 6), 1 / 6, dtype=torch.float64))

    def test_two_pixel_hand_example(self):
        emb = torch.tensor([[[1.0, -1.0], [-1.0, 1.0]]], dtype=torch.float64)  # k=2, P=2
        u = zscore(emb, 0.0)
        raw = u.transpose(1, 2) @ u
        torch.testing.assert_close(raw[0], torch.tensor([[2.0, -2.0], [-2.0, 2.0]], dtype=torch.float64))
        A = normalize_affinity(raw)
        e = math.exp(4)
        torch.testing.assert_close(A[0], torch.tensor([[e / (e + 1), 1 / (e + 1)], [1 / (e + 1), e / (e + 1)]], dtype=torch.float64))

    @pytest.mark.parametrize("mode", ["row", "global"])
    def test_softmax_sums(self, mode):
        net = small_net(normalize_mode=mode)
        A = net.compute_affinity(torch.randn(3, 8, 5, 5, dtype=torch.float64))
        assert A.shape == (3, 25, 25)
        assert (A >= 0).all()
        if mode == "row":
            torch.testing.assert_close(A.sum(-1), torch.ones(3, 25, dtype=torch.float64), atol=1e-6, rtol=0)
        else:
            torch.testing.assert_close(A.sum((-1, -2)), torch.ones(3, dtype=torch.float64), atol=1e-6, rtol=0)

    def test_zscore_statistics(self):
        emb = torch.randn(4, 16, 30, dtype=torch.float64) * 3 + 2
        u = zscore(emb)
        assert u.mean(1).abs().max() <= 1e-6
        std = u.var(1, unbiased=False).sqrt()
        assert (std - 1).abs().max() <= 1e-4

    def test_zscore_constant_guard(self):
        u = zscore(torch.ones(1, 4, 3, dtype=torch.float64))
        assert torch.isfinite(u).all() and (u == 0).all()

    def test_permutation_equivariance(self):
        module = AffinityModule(8).double()
        gen = torch.Generator().manual_seed(5)
        C = torch.randn(1, 8, 3, 3, dtype=torch.float64, generator=gen)
        perm = torch.randperm(9, generator=gen)
        Cp = C.flatten(2)[:, :, perm].reshape(1, 8, 3, 3)
        with torch.no_grad():
            A, Ct = module(C)
            Ap, Ctp = module(Cp)
        torch.testing.assert_close(Ap[0], A[0][perm][:, perm], atol=1e-12, rtol=0)
        torch.testing.assert_close(Ctp.flatten(2)[0], Ct.flatten(2)[0][:, perm], atol=1e-12, rtol=0)

    def test_attention_identity_and_uniform(self):
        module = AffinityModule(8).double()
        C = torch.randn(2, 8, 3, 3, dtype=torch.float64)
        with torch.no_grad():
            gC = module.g(C)
            eye = torch.eye(9, dtype=torch.float64).expand(2, 9, 9)
            torch.testing.assert_close(nonlocal_attention(eye, C, module.g), gC)
            uniform = torch.full((2, 9, 9), 1 / 9, dtype=torch.float64)
            out = nonlocal_attention(uniform, C, module.g)
            torch.testing.assert_close(out, gC.mean((2, 3), keepdim=True).expand_as(out))

    def test_functional_matches_module(self):
        module = AffinityModule(8, "global").double()
        C = torch.randn(1, 8, 4, 4, dtype=torch.float64)
        with torch.no_grad():
            torch.testing.assert_close(compute_affinity(C, module.theta, module.phi, "global"), module.affinity(C))


class TestMaskHead:
    def test_cancellation(self):
        net = small_net()
        C = torch.rand(2, 8, 4, 4, dtype=torch.float64)
        with torch.no_grad():
            logits = net.mask_forward(-C, C)
        assert logits.shape == (2, 1, 8, 8)
        torch.testing.assert_close(logits, torch.full_like(logits, -2.0))

    def test_zero_weights_bias(self):
        net = small_net()
        with torch.no_grad():
            net.predictor.weight.zero_()
            net.predictor.bias.fill_(0.3)
            logits = net.mask_forward(torch.rand(1, 8, 4, 4, dtype=torch.float64), torch.rand(1, 8, 4, 4, dtype=torch.float64))
        torch.testing.assert_close(torch.sigmoid(logits), torch.full_like(logits, 1 / (1 + math.exp(-0.3))))

    def test_baseline_head_input(self):
        net = small_net(use_boundary=False, use_affinity=False)
        with torch.no_grad():
            out = net.forward_rois(torch.rand(2, 8, 4, 4, dtype=torch.float64))
            assert out["A"] is None and out["C_tilde"] is None and out["boundary_logits"] is None
            torch.testing.assert_close(out["mask_logits"], net.mask_forward(None, net.head(out["X"])))


class TestFullForward:
    def test_one_box(self):
        net = CPMaskNet(channels=8)
        outs = net.full_forward(torch.rand(3, 64, 64), [Box(10, 12, 30, 20)])
        assert len(outs) == 1
        roi = outs[0]
        assert isinstance(roi, RoIForward)
        assert roi.X.shape == (8, 14, 14)
        assert roi.boundary_logits.shape == (1, 28, 28)
        assert roi.C.shape == (8, 14, 14) and roi.C_tilde.shape == (8, 14, 14)
        assert roi.A.shape == (196, 196)
        assert roi.mask_logits.shape == (1, 28, 28)
        assert torch.isfinite(roi.mask_logits).all() and torch.isfinite(roi.boundary_logits).all()

    def test_duplicate_boxes(self):
        net = CPMaskNet(channels=8)
        with torch.no_grad():
            outs = net.full_forward(torch.rand(3, 48, 48), [Box(4, 4, 20, 20), Box(4, 4, 20, 20)])
        torch.testing.assert_close(outs[0].mask_logits, outs[1].mask_logits, atol=0, rtol=0)

    def test_repeatable(self):
        image = torch.rand(3, 48, 48)
        results = []
        for _ in range(2):
            torch.manual_seed(9)
            net = CPMaskNet(channels=8)
            with torch.no_grad():
                results.append(net.full_forward(image, [Box(3, 5, 30, 25)])[0].mask_logits)
        assert torch.equal(results[0], results[1])

    def test_no_boxes(self):
        with pytest.raises(ValueError):
            CPMaskNet(channels=8).full_forward(torch.rand(3, 32, 32), [])

    def test_param_table(self):
        net = CPMaskNet(channels=8, roi_size=7, mask_size=14)
        table = net.param_table()
        assert table["affinity.theta.weight"] == [4, 8, 1, 1]
        assert table["affinity.g.weight"] == [8, 8, 1, 1]
        assert table["predictor.weight"] == [1, 8, 1, 1]
        assert table["alpha"] == []
        assert net.all_finite()
        assert float(net.predictor.bias) == -2.0 and float(net.boundary.out.bias) == -2.0


class TestContainer:
    def _blob(self):
        params = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array(1.5, dtype=np.float32)}
        return dumps_container({"iteration": 3}, {"params": params})

    def test_roundtrip(self):
        header, tables = loads_container(self._blob())
        assert header["iteration"] == 3
        np.testing.assert_array_equal(tables["params"]["a"], np.arange(6).reshape(2, 3))
        assert tables["params"]["b"].shape == ()
        assert header["params"][0] == {"name": "a", "shape": [2, 3], "offset": 0, "count": 6}

    def test_little_endian_layout(self):
        blob = self._blob()
        assert blob[:4] == b"CPMK"
        size = int.from_bytes(blob[4:8], "little")
        body = blob[8 + size:]
        assert np.frombuffer(body[:24], dtype="<f4").tolist() == [0, 1, 2, 3, 4, 5]

    def test_truncated(self):
        with pytest.raises(CheckpointError, match="truncated"):
            loads_container(self._blob()[:-2])

    def test_version_mismatch(self):
        blob = self._blob()
        size = int.from_bytes(blob[4:8], "little")
        head = blob[8:8 + size].replace(b'"format_version": 1', b'"format_version": 9')
        with pytest.raises(CheckpointError, match="version"):
            loads_container(blob[:8] + head + blob[8 + size:])

    def test_bad_magic(self):
        with pytest.raises(CheckpointError):
            loads_container(b"XXXX" + self._blob()[4:])
