"""Training regimes for the modulation classifier.

Three regimes: classical supervised training, autoencoder pretraining followed
by frozen-encoder head training, and adversarial training (each batch
augmented 1:1 with gradient-sign examples crafted on the current weights).
Every epoch records train loss, clean test accuracy, and adversarial accuracy
against attacks on the *current* weights over a fixed held-out subset, so the
trace mirrors accuracy-over-epochs plots. All regimes are deterministic in
(dataset, config, seed).
"""

from dataclasses import dataclass

import numpy as np

from . import attacks, models
from .attacks import AttackConfig
from .models import ENCODER_DEPTH, ModelGraph
from .ndgrad import Tensor, cross_entropy, mse


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite."""


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    seed: int = 0
    adv_eval_epsilon: float = 0.1
    adv_eval_samples: int = 400   # fixed held-out subset for per-epoch attack eval
    encoder_lr_scale: float = 0.1  # transferred-encoder rate relative to the head; 0 = frozen

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    clean_acc: float
    adv_acc: float


class Adam:
    """Adam with optional L2 decay on tagged parameters and optional
    per-parameter learning-rate scales; frozen parameters
    (requires_grad=False) are never touched. A scale of 0 leaves the
    parameter bit-identical."""

    def __init__(self, params: dict, cfg: TrainConfig, decay=frozenset(), lr_scales=None):
        self.params = {n: p for n, p in params.items() if p.requires_grad}
        self.cfg = cfg
        self.decay = set(decay)
        self.lr_scales = dict(lr_scales or {})
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.t = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        c = self.cfg
        self.t += 1
        b1t = 1.0 - c.beta1**self.t
        b2t = 1.0 - c.beta2**self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            lr = c.learning_rate * self.lr_scales.get(name, 1.0)
            if lr == 0.0:
                continue
            g = p.grad
            if c.weight_decay and name in self.decay:
                g = g + c.weight_decay * p.data
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p.data -= lr * (m / b1t) / (np.sqrt(v / b2t) + c.adam_eps)


def _rngs(seed):
    def sub(tag):
        return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))

    return sub(1), sub(2), sub(3)   # shuffle, dropout, eval-subset


def _batches(n, batch_size, perm):
    for lo in range(0, n, batch_size):
        yield perm[lo : lo + batch_size]


def _adv_eval_subset(test, n_samples, rng):
    k = min(n_samples, len(test))
    idx = rng.choice(len(test), size=k, replace=False)
    return test.frames[idx], test.labels[idx].astype(np.int64)


def _epoch_metrics(model, data, epoch, mean_loss, adv_frames, adv_labels, eps):
    clean = models.accuracy(model, data.test.frames, data.test.labels)
    cfg = AttackConfig(epsilon=eps)
    perturbed = attacks.fgsm_batch(model, adv_frames, adv_labels, cfg)
    adv = models.accuracy(model, perturbed, adv_labels)
    return EpochRecord(epoch=epoch, train_loss=mean_loss, clean_acc=clean, adv_acc=adv)


def train_classical(model: ModelGraph, data, cfg: TrainConfig):
    """Minimize cross-entropy with Adam; returns (model, per-epoch trace)."""
    if len(data.train) == 0:
        raise ValueError("training dataset is empty")
    shuffle_rng, dropout_rng, eval_rng = _rngs(cfg.seed)
    adv_frames, adv_labels = _adv_eval_subset(data.test, cfg.adv_eval_samples, eval_rng)
    x = data.train.frames
    y = data.train.labels.astype(np.int64)
    opt = Adam(model.params, cfg, decay=model.decay)
    model.trained = True
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(len(x))
        losses = []
        for idx in _batches(len(x), cfg.batch_size, perm):
            xb = x[idx]
            probs = model.forward(Tensor(xb[:, :, None]), train=True, rng=dropout_rng)
            loss = cross_entropy(probs, y[idx])
            val = float(loss.data)
            if not np.isfinite(val):
                raise TrainingDiverged(
                    f"classical training diverged: loss={val} at epoch {epoch}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(val)
        trace.append(_epoch_metrics(model, data, epoch, float(np.mean(losses)),
                                    adv_frames, adv_labels, cfg.adv_eval_epsilon))
    return model, trace


def pretrain_autoencoder(ae: ModelGraph, data, cfg: TrainConfig):
    """Unsupervised reconstruction training; labels are never read.

    Returns (ae, [(epoch, mean training MSE)]).
    """
    if len(data.train) == 0:
        raise ValueError("training dataset is empty")
    shuffle_rng, _, _ = _rngs(cfg.seed)
    x = data.train.frames
    opt = Adam(ae.params, cfg, decay=ae.decay)
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(len(x))
        losses = []
        for idx in _batches(len(x), cfg.batch_size, perm):
            xb = x[idx][:, :, None]
            recon = ae.forward(Tensor(xb), train=True)
            loss = mse(recon, Tensor(xb))
            val = float(loss.data)
            if not np.isfinite(val):
                raise TrainingDiverged(
                    f"autoencoder pretraining diverged: loss={val} at epoch {epoch}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(val)
        trace.append((epoch, float(np.mean(losses))))
    ae.trained = True
    return ae, trace


def _encoder_features(clf, frames, batch_size=256):
    """Bottleneck activations; valid only while the encoder stays fixed."""
    out = []
    for lo in range(0, len(frames), batch_size):
        chunk = frames[lo : lo + batch_size]
        out.append(clf.forward(chunk[:, :, None], stop=ENCODER_DEPTH).data)
    return np.concatenate(out, axis=0)


def train_ae_classifier(ae: ModelGraph, data, cfg: TrainConfig, num_classes=None):
    """Build a classifier from the pretrained encoder and train it with the
    encoder held at (or near) its reconstruction solution.

    cfg.encoder_lr_scale = 0 keeps the transferred encoder bit-frozen and
    trains only the fresh dense head (bottleneck features are cached once, so
    head epochs are cheap); a small positive scale lets the encoder move at
    that fraction of the head rate. Per-epoch adversarial accuracy always
    attacks through the full graph on the current weights.
    """
    if not ae.trained:
        raise ValueError("autoencoder must be pretrained before weight transfer")
    if num_classes is None:
        num_classes = int(np.max(data.train.labels)) + 1
    clf = models.build_classifier(num_classes=num_classes, seed=cfg.seed)
    clf = models.transfer_weights(ae, clf, head_seed=cfg.seed)
    encoder_names = set(clf.frozen)
    frozen = cfg.encoder_lr_scale == 0
    if not frozen:
        clf.set_frozen(set())        # encoder participates at the reduced rate
    lr_scales = {n: cfg.encoder_lr_scale for n in encoder_names}

    shuffle_rng, dropout_rng, eval_rng = _rngs(cfg.seed)
    adv_frames, adv_labels = _adv_eval_subset(data.test, cfg.adv_eval_samples, eval_rng)
    x = data.train.frames
    y = data.train.labels.astype(np.int64)
    feats = _encoder_features(clf, x) if frozen else None
    feats_test = _encoder_features(clf, data.test.frames) if frozen else None
    opt = Adam(clf.params, cfg, decay=clf.decay, lr_scales=lr_scales)
    clf.trained = True
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(len(x))
        losses = []
        for idx in _batches(len(x), cfg.batch_size, perm):
            if frozen:
                probs = clf.forward(Tensor(feats[idx]), train=True, rng=dropout_rng,
                                    start=ENCODER_DEPTH)
            else:
                probs = clf.forward(Tensor(x[idx][:, :, None]), train=True,
                                    rng=dropout_rng)
            loss = cross_entropy(probs, y[idx])
            val = float(loss.data)
            if not np.isfinite(val):
                raise TrainingDiverged(
                    f"transfer training diverged: loss={val} at epoch {epoch}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(val)
        if frozen:
            head = clf.forward(feats_test, start=ENCODER_DEPTH, train=False)
            clean = float((head.data.argmax(axis=1) == data.test.labels).mean())
            perturbed = attacks.fgsm_batch(clf, adv_frames, adv_labels,
                                           AttackConfig(epsilon=cfg.adv_eval_epsilon))
            adv = models.accuracy(clf, perturbed, adv_labels)
            trace.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)),
                                     clean_acc=clean, adv_acc=adv))
        else:
            trace.append(_epoch_metrics(clf, data, epoch, float(np.mean(losses)),
                                        adv_frames, adv_labels, cfg.adv_eval_epsilon))
    return clf, trace


def adversarial_train(model: ModelGraph, data, attack_cfg: AttackConfig, cfg: TrainConfig):
    """Classical training with each batch augmented 1:1 by gradient-sign
    examples crafted on the current weights, labeled with the true labels."""
    if len(data.train) == 0:
        raise ValueError("training dataset is empty")
    shuffle_rng, dropout_rng, eval_rng = _rngs(cfg.seed)
    adv_frames, adv_labels = _adv_eval_subset(data.test, cfg.adv_eval_samples, eval_rng)
    x = data.train.frames
    y = data.train.labels.astype(np.int64)
    opt = Adam(model.params, cfg, decay=model.decay)
    model.trained = True
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(len(x))
        losses = []
        for idx in _batches(len(x), cfg.batch_size, perm):
            xb = x[idx]
            adv_xb = attacks.fgsm_batch(model, xb, y[idx], attack_cfg)
            both = np.concatenate([xb, adv_xb])[:, :, None]
            yb = np.concatenate([y[idx], y[idx]])
            probs = model.forward(Tensor(both), train=True, rng=dropout_rng)
            loss = cross_entropy(probs, yb)
            val = float(loss.data)
            if not np.isfinite(val):
                raise TrainingDiverged(
                    f"adversarial training diverged: loss={val} at epoch {epoch}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(val)
        trace.append(_epoch_metrics(model, data, epoch, float(np.mean(losses)),
                                    adv_frames, adv_labels, cfg.adv_eval_epsilon))
    return model, trace


def write_trace_csv(path, trace, config_hash="", seed=0):
    """epoch,train_loss,clean_acc,adv_acc rows with a provenance comment."""
    with open(path, "w") as f:
        f.write(f"# config_hash={config_hash} seed={seed}\n")
        f.write("epoch,train_loss,clean_acc,adv_acc\n")
        for r in trace:
            f.write(f"{r.epoch},{r.train_loss:.6f},{r.clean_acc:.6f},{r.adv_acc:.6f}\n")


def write_mse_trace_csv(path, trace, config_hash="", seed=0):
    """epoch,mse rows for autoencoder pretraining."""
    with open(path, "w") as f:
        f.write(f"# config_hash={config_hash} seed={seed}\n")
        f.write("epoch,mse\n")
        for epoch, val in trace:
            f.write(f"{epoch},{val:.6f}\n")
