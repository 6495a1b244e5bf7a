import numpy as np
import pytest

from rfadvdef import ndgrad as ng
from rfadvdef.ndgrad import Tensor

from conftest import central_difference, rel_err


def t64(rng, *shape, grad=True):
    return Tensor(rng.normal(size=shape), requires_grad=grad)   # float64 for FD


class TestConv1d:
    def test_identity_kernel(self):
        x = Tensor(np.array([[1.0, 2.0, 3.0]], dtype=np.float32))
        w = Tensor(np.ones((1, 1, 1), dtype=np.float32))
        b = Tensor(np.zeros(1, dtype=np.float32))
        assert np.allclose(ng.conv1d(x, w, b).data, [[1, 2, 3]])

    def test_edge_detector_example(self):
        # zero-padded sliding-window sum oracle: [1,2,3] * [1,0,-1] -> [-2,-2,2]
        x = Tensor(np.array([[1.0, 2.0, 3.0]], dtype=np.float32))
        w = Tensor(np.array([[[1.0, 0.0, -1.0]]], dtype=np.float32))
        assert np.allclose(ng.conv1d(x, w).data, [[-2, -2, 2]])

    def test_matches_sliding_window_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            ci, co, k, length = rng.integers(1, 5), rng.integers(1, 5), 2 * rng.integers(0, 3) + 1, rng.integers(4, 12)
            x = rng.normal(size=(ci, length))
            w = rng.normal(size=(co, ci, k))
            got = ng.conv1d(Tensor(x), Tensor(w)).data
            pad = k // 2
            xp = np.pad(x, ((0, 0), (pad, pad)))
            want = np.zeros((co, length))
            for o in range(co):
                for l in range(length):
                    want[o, l] = (w[o] * xp[:, l : l + k]).sum()
            assert rel_err(got, want) < 1e-10

    def test_same_length_random_shapes(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            length = int(rng.integers(3, 40))
            x = Tensor(rng.normal(size=(3, length)).astype(np.float32))
            w = Tensor(rng.normal(size=(2, 3, 5)).astype(np.float32))
            assert ng.conv1d(x, w).data.shape == (2, length)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            ng.conv1d(Tensor(np.zeros((1, 4), dtype=np.float32)),
                      Tensor(np.zeros((1, 1, 2), dtype=np.float32)))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ng.conv1d(Tensor(np.zeros((2, 4), dtype=np.float32)),
                      Tensor(np.zeros((1, 3, 3), dtype=np.float32)))


class TestDeconvAdjoint:
    def test_adjoint_identity(self):
        # <conv(x), y> == <x, deconv(y)> with a shared kernel tensor
        rng = np.random.default_rng(2)
        for _ in range(10):
            ci, co, k, length = 3, 5, 7, 16
            x, w, y = rng.normal(size=(ci, length)), rng.normal(size=(co, ci, k)), rng.normal(size=(co, length))
            lhs = float((ng.conv1d(Tensor(x), Tensor(w)).data * y).sum())
            rhs = float((x * ng.deconv1d(Tensor(y), Tensor(w)).data).sum())
            assert abs(lhs - rhs) / max(abs(lhs), 1e-12) < 1e-4

    def test_identity_kernel(self):
        x = Tensor(np.array([[1.0, -2.0, 3.0]], dtype=np.float32))
        w = Tensor(np.ones((1, 1, 1), dtype=np.float32))
        assert np.allclose(ng.deconv1d(x, w).data, x.data)

    def test_output_channels(self):
        x = Tensor(np.zeros((5, 8), dtype=np.float32))
        w = Tensor(np.zeros((5, 3, 7), dtype=np.float32))
        b = Tensor(np.zeros(3, dtype=np.float32))
        assert ng.deconv1d(x, w, b).data.shape == (3, 8)


class TestPoolUpsample:
    def test_maxpool_example(self):
        out = ng.maxpool1d(Tensor(np.array([[1.0, 3.0, 2.0, 0.0]], dtype=np.float32)))
        assert np.allclose(out.data, [[3, 2]])

    def test_maxpool_tie_routes_first(self):
        x = Tensor(np.array([[5.0, 5.0, 5.0, 5.0]], dtype=np.float32), requires_grad=True)
        out = ng.maxpool1d(x)
        assert np.allclose(out.data, [[5, 5]])
        out.sum().backward()
        assert np.array_equal(x.grad, [[1, 0, 1, 0]])

    def test_maxpool_dominates_window(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 20)).astype(np.float32)
        out = ng.maxpool1d(Tensor(x)).data
        windows = x.reshape(4, 10, 2)
        assert (out[:, :, None] >= windows).all()

    def test_maxpool_odd_length_rejected(self):
        with pytest.raises(ValueError):
            ng.maxpool1d(Tensor(np.zeros((1, 5), dtype=np.float32)))

    def test_upsample_example(self):
        out = ng.upsample1d(Tensor(np.array([[1.0, 2.0]], dtype=np.float32)))
        assert np.allclose(out.data, [[1, 1, 2, 2]])

    def test_upsample_backward_sums(self):
        x = Tensor(np.array([[1.0, 2.0]], dtype=np.float32), requires_grad=True)
        ng.upsample1d(x).sum().backward()
        assert np.array_equal(x.grad, [[2, 2]])


class TestDenseRelu:
    def test_dense_identity(self):
        x = Tensor(np.array([1.0, 2.0, 3.0], dtype=np.float32))
        out = ng.dense(x, Tensor(np.eye(3, dtype=np.float32)),
                       Tensor(np.zeros(3, dtype=np.float32)))
        assert np.allclose(out.data, x.data)

    def test_relu_example(self):
        out = ng.relu(Tensor(np.array([-1.0, 2.0], dtype=np.float32)))
        assert np.allclose(out.data, [0, 2])

    def test_relu_gradient_gate(self):
        x = Tensor(np.array([-1.0, 2.0, 0.0], dtype=np.float32), requires_grad=True)
        ng.relu(x).sum().backward()
        assert np.array_equal(x.grad, [0, 1, 0])

    def test_dense_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ng.dense(Tensor(np.zeros(3, dtype=np.float32)),
                     Tensor(np.zeros((2, 4), dtype=np.float32)))


class TestSoftmaxLosses:
    def test_uniform(self):
        out = ng.softmax(Tensor(np.zeros(3, dtype=np.float32)))
        assert np.allclose(out.data, 1 / 3)

    def test_frozen_values(self):
        # exp/sum-exp oracle: softmax([1,2,3]) = [0.09003057, 0.24472847, 0.66524096]
        out = ng.softmax(Tensor(np.array([1.0, 2.0, 3.0], dtype=np.float32)))
        assert np.allclose(out.data, [0.09003, 0.24473, 0.66524], atol=1e-5)

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            z = rng.normal(size=6).astype(np.float32)
            p = ng.softmax(Tensor(z)).data
            p_shift = ng.softmax(Tensor(z + np.float32(4.0))).data   # exactly representable shift
            assert abs(p.sum() - 1.0) < 1e-6
            assert (p > 0).all()
            assert np.abs(p - p_shift).max() < 1e-6
        z64 = rng.normal(size=8) * 10
        d = np.abs(ng.softmax(Tensor(z64)).data - ng.softmax(Tensor(z64 + 123.0)).data)
        assert d.max() < 1e-9

    def test_extreme_logits_stable(self):
        p = ng.softmax(Tensor(np.array([1000.0, 0.0], dtype=np.float32))).data
        assert np.isfinite(p).all() and abs(p.sum() - 1.0) < 1e-6

    def test_cross_entropy_value(self):
        probs = Tensor(np.array([0.25, 0.75], dtype=np.float32))
        loss = ng.cross_entropy(probs, 1)
        assert abs(float(loss.data) - (-np.log(0.75))) < 1e-6

    def test_mse_self_is_zero(self):
        x = Tensor(np.arange(6, dtype=np.float32))
        assert float(ng.mse(x, Tensor(x.data.copy())).data) == 0.0

    def test_mse_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ng.mse(Tensor(np.zeros(3, dtype=np.float32)), Tensor(np.zeros(4, dtype=np.float32)))


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = Tensor(np.arange(12, dtype=np.float32).reshape(3, 4), requires_grad=True)
        x.sum().backward()
        assert np.array_equal(x.grad, np.ones((3, 4), dtype=np.float32))

    def test_backward_on_nonscalar_rejected(self):
        x = Tensor(np.zeros(3, dtype=np.float32), requires_grad=True)
        with pytest.raises(ValueError):
            ng.relu(x).backward()

    def test_two_passes_identical(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(2, 8)).astype(np.float32), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3)).astype(np.float32), requires_grad=True)

        def run():
            x.zero_grad()
            w.zero_grad()
            loss = ng.mse(ng.relu(ng.conv1d(x, w)), Tensor(np.zeros((3, 8), dtype=np.float32)))
            loss.backward()
            return x.grad.copy(), w.grad.copy()

        gx1, gw1 = run()
        gx2, gw2 = run()
        assert np.array_equal(gx1, gx2) and np.array_equal(gw1, gw2)

    def test_softmax_ce_closed_form_input_gradient(self):
        # gradient of CE(softmax(dense(x))) wrt x is W^T (p - onehot(y))
        rng = np.random.default_rng(6)
        x = Tensor(rng.normal(size=5), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        probs = ng.softmax(ng.dense(x, w, b))
        loss = ng.cross_entropy(probs, 2)
        loss.backward()
        onehot = np.zeros(3)
        onehot[2] = 1.0
        want = w.data.T @ (probs.data - onehot)
        assert rel_err(x.grad, want) < 1e-10
        assert rel_err(w.grad, np.outer(probs.data - onehot, x.data)) < 1e-10


def _gradcheck(build_loss, params, h=1e-6, tol=1e-4):
    """build_loss() -> scalar Tensor; checks every Tensor in params by FD."""
    loss = build_loss()
    for p in params:
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    for p in params:
        fd = central_difference(lambda: float(build_loss().data), p.data, h=h)
        assert p.grad is not None
        assert rel_err(p.grad, fd) < tol, f"gradcheck failed for shape {p.data.shape}"


class TestFiniteDifferences:
    """Central-difference oracles in float64 over randomized small shapes."""

    N_INSTANCES = 20

    def test_conv1d_grads(self):
        rng = np.random.default_rng(7)
        for _ in range(self.N_INSTANCES):
            ci, co = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            k = int(2 * rng.integers(0, 3) + 1)
            length = int(rng.integers(4, 10))
            x, w, b = t64(rng, ci, length), t64(rng, co, ci, k), t64(rng, co)
            tgt = Tensor(rng.normal(size=(co, length)))
            _gradcheck(lambda: ng.mse(ng.conv1d(x, w, b), tgt), [x, w, b])

    def test_deconv1d_grads(self):
        rng = np.random.default_rng(8)
        for _ in range(self.N_INSTANCES):
            ca, cb = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            k = int(2 * rng.integers(0, 3) + 1)
            length = int(rng.integers(4, 10))
            x, w, b = t64(rng, ca, length), t64(rng, ca, cb, k), t64(rng, cb)
            tgt = Tensor(rng.normal(size=(cb, length)))
            _gradcheck(lambda: ng.mse(ng.deconv1d(x, w, b), tgt), [x, w, b])

    def test_dense_grads(self):
        rng = np.random.default_rng(9)
        for _ in range(self.N_INSTANCES):
            n, m, batch = int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 4))
            x, w, b = t64(rng, batch, n), t64(rng, m, n), t64(rng, m)
            tgt = Tensor(rng.normal(size=(batch, m)))
            _gradcheck(lambda: ng.mse(ng.dense(x, w, b), tgt), [x, w, b])

    def test_relu_grads(self):
        rng = np.random.default_rng(10)
        for _ in range(self.N_INSTANCES):
            x = Tensor(rng.normal(size=(3, 7)), requires_grad=True)
            x.data[np.abs(x.data) < 0.05] += 0.1          # keep FD away from the kink
            tgt = Tensor(rng.normal(size=(3, 7)))
            _gradcheck(lambda: ng.mse(ng.relu(x), tgt), [x])

    def test_maxpool_grads(self):
        rng = np.random.default_rng(11)
        for _ in range(self.N_INSTANCES):
            x = Tensor(rng.normal(size=(2, 8)), requires_grad=True)
            pairs = x.data.reshape(2, 4, 2)
            close = np.abs(pairs[:, :, 0] - pairs[:, :, 1]) < 0.05
            pairs[:, :, 0] += 0.2 * close                  # keep a unique window max
            tgt = Tensor(rng.normal(size=(2, 4)))
            _gradcheck(lambda: ng.mse(ng.maxpool1d(x), tgt), [x])

    def test_upsample_grads(self):
        rng = np.random.default_rng(12)
        for _ in range(self.N_INSTANCES):
            x = t64(rng, 2, 6)
            tgt = Tensor(rng.normal(size=(2, 12)))
            _gradcheck(lambda: ng.mse(ng.upsample1d(x), tgt), [x])

    def test_softmax_ce_grads(self):
        rng = np.random.default_rng(13)
        for _ in range(self.N_INSTANCES):
            c = int(rng.integers(2, 6))
            z = t64(rng, c)
            label = int(rng.integers(0, c))
            _gradcheck(lambda: ng.cross_entropy(ng.softmax(z), label), [z])

    def test_stacked_block_grads(self):
        # conv -> relu -> pool -> dense, the classifier's block pattern
        rng = np.random.default_rng(14)
        for _ in range(5):
            x = t64(rng, 2, 8)
            w = t64(rng, 3, 2, 3)
            b = t64(rng, 3)
            wd = t64(rng, 2, 12)
            bd = t64(rng, 2)

            def loss_fn():
                h = ng.maxpool1d(ng.relu(ng.conv1d(x, w, b)))
                return ng.cross_entropy(ng.softmax(ng.dense(ng.flatten(h), wd, bd)), 1)

            _gradcheck(loss_fn, [x, w, b, wd, bd])


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(15)
        tensors = {
            "conv.w": rng.normal(size=(4, 2, 7)).astype(np.float32),
            "conv.b": rng.normal(size=4).astype(np.float32),
            "scalarish": rng.normal(size=(1,)).astype(np.float32),
        }
        path = tmp_path / "m.rfwt"
        ng.save_checkpoint(path, tensors)
        back = ng.load_checkpoint(path)
        assert set(back) == set(tensors)
        for name in tensors:
            assert np.array_equal(back[name], tensors[name])

    def test_header(self, tmp_path):
        path = tmp_path / "m.rfwt"
        ng.save_checkpoint(path, {"a": np.zeros((2, 3), dtype=np.float32)})
        raw = path.read_bytes()
        assert raw[:4] == b"RFWT"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 1

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "x.rfwt"
        path.write_bytes(b"JUNK" + b"\x00" * 8)
        with pytest.raises(ValueError):
            ng.load_checkpoint(path)
