import numpy as np
import pytest

from rfadvdef import attacks as atk
from rfadvdef import models as md
from rfadvdef.attacks import AttackConfig
from rfadvdef.models import LayerSpec, ModelGraph
from rfadvdef.ndgrad import Tensor


def hand_model(w, b):
    """Two-class softmax(dense(x)) classifier with hand-set weights."""
    n = w.shape[1]
    layers = [
        LayerSpec("flatten"),
        LayerSpec("dense", {"in_features": n, "out_features": w.shape[0]}),
        LayerSpec("softmax"),
    ]
    params = {
        "01.w": Tensor(np.asarray(w, dtype=np.float32), requires_grad=True),
        "01.b": Tensor(np.asarray(b, dtype=np.float32), requires_grad=True),
    }
    m = ModelGraph(layers=layers, params=params, kind="classifier",
                   num_classes=w.shape[0], trained=True, input_len=n)
    return m


@pytest.fixture(scope="module")
def toy():
    w = np.array([[1.0, -2.0, 0.5, 0.0], [-1.0, 1.0, 0.0, 2.0]])
    return hand_model(w, np.array([0.1, -0.1]))


class TestConfig:
    def test_validation(self):
        AttackConfig(epsilon=0.1)
        with pytest.raises(ValueError):
            AttackConfig(epsilon=-0.1)
        with pytest.raises(ValueError):
            AttackConfig(epsilon=0.1, steps=0)
        with pytest.raises(ValueError):
            AttackConfig(epsilon=0.1, steps=5)          # missing step_size
        with pytest.raises(ValueError):
            AttackConfig(epsilon=0.1, norm="l2")
        with pytest.raises(ValueError):
            AttackConfig(epsilon=0.1, targeting="targeted")   # missing class


class TestFGSM:
    def test_zero_epsilon_identity(self, toy):
        x = np.array([0.3, -0.2, 0.7, 0.1], dtype=np.float32)
        adv = atk.fgsm(toy, x, 0, AttackConfig(epsilon=0.0))
        assert np.array_equal(adv, x)

    def test_ball_containment_and_saturation(self, toy):
        rng = np.random.default_rng(0)
        eps = np.float32(0.1)
        for _ in range(20):
            x = rng.normal(size=4).astype(np.float32)
            adv = atk.fgsm(toy, x, 1, AttackConfig(epsilon=0.1))
            diff = np.abs(adv - x)
            assert (diff <= eps).all()
            loss_labels = np.array([1])
            g = atk.input_gradient(toy, x[None], loss_labels)[0]
            nz = g != 0
            assert (diff[nz] >= eps * (1 - 1e-5)).all()   # saturates up to 1 ulp

    def test_matches_closed_form_gradient(self, toy):
        # dense+softmax: grad_x CE = W^T (p - onehot(y)); FGSM adds eps*sign of that
        x = np.array([0.5, 0.25, -0.3, 0.8], dtype=np.float32)
        label = 0
        probs = toy.forward(x[:, None].T[:, :, None]).data[0]
        w = toy.params["01.w"].data
        onehot = np.eye(2, dtype=np.float32)[label]
        g = w.T @ (probs - onehot)
        want = x + np.float32(0.05) * np.sign(g)
        got = atk.fgsm(toy, x, label, AttackConfig(epsilon=0.05))
        assert np.allclose(got, want, atol=2e-7)

    def test_untrained_model_rejected(self):
        m = md.build_classifier(4, seed=0)
        with pytest.raises(ValueError):
            atk.fgsm_batch(m, np.zeros((1, 2048), dtype=np.float32), [0],
                           AttackConfig(epsilon=0.1))

    def test_multi_step_config_rejected(self, toy):
        with pytest.raises(ValueError):
            atk.fgsm(toy, np.zeros(4, dtype=np.float32), 0,
                     AttackConfig(epsilon=0.1, steps=3, step_size=0.05))

    def test_targeted_descends_target_loss(self, toy):
        rng = np.random.default_rng(1)
        x = rng.normal(size=4).astype(np.float32)
        cfg = AttackConfig(epsilon=0.2, targeting="targeted", target_class=1)
        adv = atk.fgsm(toy, x, 0, cfg)
        p0 = toy.forward(x[None, :, None]).data[0][1]
        p1 = toy.forward(adv[None, :, None]).data[0][1]
        assert p1 > p0                                 # moved toward the target class


class TestBIM:
    def test_single_step_equals_fgsm(self, toy):
        x = np.array([0.4, -0.6, 0.2, 0.9], dtype=np.float32)
        a = atk.fgsm(toy, x, 1, AttackConfig(epsilon=0.1))
        b = atk.bim(toy, x, 1, AttackConfig(epsilon=0.1, steps=1, step_size=0.1))
        assert np.array_equal(a, b)

    def test_ball_containment_after_steps(self, toy):
        rng = np.random.default_rng(2)
        eps = np.float32(0.1)
        for _ in range(10):
            x = rng.normal(size=4).astype(np.float32)
            adv = atk.bim(toy, x, 0, AttackConfig(epsilon=0.1, steps=10, step_size=0.03))
            assert (np.abs(adv - x) <= eps).all()


class TestGreybox:
    def test_victim_independence(self, toy):
        surrogate = toy
        w2 = np.array([[0.3, 0.3, -0.7, 0.1], [0.0, -0.5, 0.2, 0.6]])
        victim_a = hand_model(w2, np.zeros(2))
        victim_b = hand_model(w2 * 2.5 + 0.1, np.ones(2))
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 4)).astype(np.float32)
        labels = np.array([0, 1, 0, 1, 0, 1])
        cfg = AttackConfig(epsilon=0.1)
        a = atk.craft_greybox(surrogate, victim_a, x, labels, cfg)
        b = atk.craft_greybox(surrogate, victim_b, x, labels, cfg)
        assert np.array_equal(a.perturbed, b.perturbed)
        assert a.crafted_on == "surrogate"

    def test_whitebox_degenerate(self, toy):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(4, 4)).astype(np.float32)
        labels = np.array([0, 1, 1, 0])
        cfg = AttackConfig(epsilon=0.1)
        batch = atk.craft_greybox(toy, toy, x, labels, cfg)
        direct = atk.fgsm_batch(toy, x, labels, cfg)
        assert np.array_equal(batch.perturbed, direct)

    def test_dimension_mismatch_rejected(self, toy):
        other = hand_model(np.zeros((2, 6)), np.zeros(2))
        with pytest.raises(ValueError):
            atk.craft_greybox(toy, other, np.zeros((2, 4), dtype=np.float32),
                              [0, 1], AttackConfig(epsilon=0.1))


class TestProjection:
    def test_exact_containment_with_awkward_floats(self):
        # x + eps rounds upward in float32; the projection must pull it back
        rng = np.random.default_rng(5)
        for _ in range(200):
            x = np.float32(rng.normal() * 10.0 ** rng.integers(-3, 3)) * np.ones(
                8, dtype=np.float32
            )
            eps = np.float32(10.0 ** float(rng.integers(-5, 0)))
            adv = x + eps * rng.choice([-1.0, 0.0, 1.0], size=8).astype(np.float32)
            out = atk.project_linf(adv, x, eps)
            assert (np.abs(out - x) <= eps).all()

    def test_persistence_roundtrip(self, toy, tmp_path):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(5, 4)).astype(np.float32)
        labels = np.array([0, 1, 0, 1, 1])
        cfg = AttackConfig(epsilon=0.1)
        batch = atk.craft_greybox(toy, toy, x, labels, cfg)
        atk.save_adversarial_batch(tmp_path, "wb", batch, cfg, crafted_on_hash="abc123")
        back = atk.load_adversarial_batch(tmp_path, "wb")
        assert np.array_equal(back.originals, batch.originals)
        assert np.array_equal(back.perturbed, batch.perturbed)
        assert np.array_equal(back.true_labels, batch.true_labels)
        assert back.crafted_on == "surrogate"
        import json

        prov = json.loads((tmp_path / "wb.json").read_text())
        assert prov["epsilon"] == 0.1 and prov["crafted_on_checkpoint_sha256"] == "abc123"
