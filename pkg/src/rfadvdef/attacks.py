"""Gradient-sign adversarial example crafting.

Single-step FGSM, the basic iterative variant, and grey-box transfer crafting
on a surrogate model. Untargeted mode ascends the true-label loss
(x + eps * sign(grad)); targeted mode descends the target-label loss
(x - eps * sign(grad)); both conventions are exposed because ascending a
targeted label pushes away from it. All emitted vectors satisfy the l-inf
budget exactly in float32: after the additive step, coordinates that float
rounding pushed outside the ball are nudged back by one ulp.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import models, rfsynth
from .ndgrad import Tensor, cross_entropy


@dataclass
class AttackConfig:
    epsilon: float
    norm: str = "linf"
    steps: int = 1
    step_size: float = None
    targeting: str = "untargeted"   # untargeted | targeted | random_target
    target_class: int = None
    seed: int = 0                   # draws random targets

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.norm != "linf":
            raise ValueError(f"only the l-inf norm is supported, got {self.norm!r}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.steps > 1 and (self.step_size is None or self.step_size <= 0):
            raise ValueError("step_size must be > 0 when steps > 1")
        if self.targeting not in ("untargeted", "targeted", "random_target"):
            raise ValueError(f"unknown targeting mode {self.targeting!r}")
        if self.targeting == "targeted" and self.target_class is None:
            raise ValueError("targeted mode needs target_class")


@dataclass
class AdversarialBatch:
    originals: np.ndarray       # float32 [N, 2048]
    perturbed: np.ndarray       # float32 [N, 2048]
    true_labels: np.ndarray     # [N]
    crafted_on: str             # model identity tag
    victim_accuracy: float = None


def project_linf(x_adv, x, eps) -> np.ndarray:
    """Clip into the l-inf ball of radius eps around x, exactly in float32.

    np.clip against x +/- eps can still land one ulp outside the ball because
    x + eps rounds; nudge offending coordinates back toward x.
    """
    eps = np.float32(eps)
    x = np.asarray(x, dtype=np.float32)
    out = np.clip(np.asarray(x_adv, dtype=np.float32), x - eps, x + eps)
    for _ in range(4):
        over = np.abs(out - x) > eps
        if not over.any():
            return out
        out[over] = np.nextafter(out[over], x[over])
    if (np.abs(out - x) > eps).any():
        raise AssertionError("l-inf projection failed to converge")
    return out


def _check_model(model):
    if not isinstance(model, models.ModelGraph) or model.kind != "classifier":
        raise ValueError("attack target must be a classifier ModelGraph")
    if not model.trained:
        raise ValueError("attack target is untrained; train or load a checkpoint first")


def _resolve_targets(cfg: AttackConfig, labels, num_classes):
    """Returns (loss labels, step sign). Untargeted ascends the true-label
    loss; targeted modes descend the target-label loss."""
    labels = np.asarray(labels, dtype=np.int64)
    if cfg.targeting == "untargeted":
        return labels, +1.0
    if cfg.targeting == "targeted":
        return np.full_like(labels, cfg.target_class), -1.0
    rng = np.random.default_rng(cfg.seed)
    offsets = rng.integers(1, num_classes, size=labels.shape)
    return (labels + offsets) % num_classes, -1.0


def input_gradient(model, frames, loss_labels) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the input batch."""
    x = Tensor(np.ascontiguousarray(frames, dtype=np.float32)[:, :, None], requires_grad=True)
    probs = model.forward(x, train=False)
    loss = cross_entropy(probs, loss_labels)
    loss.backward()
    return x.grad.reshape(len(frames), -1)


def fgsm_batch(model, frames, labels, cfg: AttackConfig) -> np.ndarray:
    """One gradient-sign step for a [N, 2048] batch."""
    _check_model(model)
    if cfg.steps != 1:
        raise ValueError(f"fgsm is single-step; got steps={cfg.steps} (use bim)")
    frames = np.asarray(frames, dtype=np.float32)
    loss_labels, direction = _resolve_targets(cfg, labels, model.num_classes)
    g = input_gradient(model, frames, loss_labels)
    step = np.float32(direction) * np.float32(cfg.epsilon) * np.sign(g, dtype=np.float32)
    return project_linf(frames + step, frames, cfg.epsilon)


def fgsm(model, x, label, cfg: AttackConfig) -> np.ndarray:
    """Single-vector FGSM: x + eps*sign(grad J) (untargeted) within the eps-ball."""
    return fgsm_batch(model, np.asarray(x, dtype=np.float32)[None], [label], cfg)[0]


def bim_batch(model, frames, labels, cfg: AttackConfig) -> np.ndarray:
    """Iterated FGSM with per-step projection back into the eps-ball."""
    _check_model(model)
    frames = np.asarray(frames, dtype=np.float32)
    loss_labels, direction = _resolve_targets(cfg, labels, model.num_classes)
    alpha = np.float32(cfg.step_size if cfg.step_size is not None else cfg.epsilon)
    x_t = frames
    for _ in range(cfg.steps):
        g = input_gradient(model, x_t, loss_labels)
        step = np.float32(direction) * alpha * np.sign(g, dtype=np.float32)
        x_t = project_linf(x_t + step, frames, cfg.epsilon)
    return x_t


def bim(model, x, label, cfg: AttackConfig) -> np.ndarray:
    return bim_batch(model, np.asarray(x, dtype=np.float32)[None], [label], cfg)[0]


def craft_greybox(surrogate, victim, frames, labels, cfg: AttackConfig,
                  crafted_on="surrogate") -> AdversarialBatch:
    """Craft on the surrogate's gradients only; evaluate on the victim.

    The victim's weights never enter the perturbation, so changing them leaves
    the crafted batch bit-identical.
    """
    _check_model(surrogate)
    _check_model(victim)
    frames = np.asarray(frames, dtype=np.float32)
    if surrogate.input_len != victim.input_len or frames.shape[1] != surrogate.input_len:
        raise ValueError(
            f"input dimension mismatch: surrogate {surrogate.input_len}, "
            f"victim {victim.input_len}, batch {frames.shape[1]}"
        )
    craft = fgsm_batch if cfg.steps == 1 else bim_batch
    perturbed = craft(surrogate, frames, labels, cfg)
    acc = models.accuracy(victim, perturbed, labels)
    return AdversarialBatch(
        originals=frames,
        perturbed=perturbed,
        true_labels=np.asarray(labels),
        crafted_on=crafted_on,
        victim_accuracy=acc,
    )


def save_adversarial_batch(out_dir, name, batch: AdversarialBatch, cfg: AttackConfig,
                           crafted_on_hash=""):
    """Persist originals/perturbed as an RFDS pair plus JSON provenance."""
    out_dir = Path(out_dir)
    meta = {"role": "adversarial", "crafted_on": batch.crafted_on}
    for tag, frames in (("orig", batch.originals), ("adv", batch.perturbed)):
        ds = rfsynth.Dataset(frames=frames,
                             labels=np.asarray(batch.true_labels, dtype=np.uint8),
                             metadata={**meta, "part": tag})
        rfsynth.save_rfds(out_dir / f"{name}_{tag}.rfds", ds)
    prov = {
        "epsilon": cfg.epsilon,
        "norm": cfg.norm,
        "steps": cfg.steps,
        "step_size": cfg.step_size,
        "targeting": cfg.targeting,
        "crafted_on": batch.crafted_on,
        "crafted_on_checkpoint_sha256": crafted_on_hash,
        "victim_accuracy": batch.victim_accuracy,
        "n": int(len(batch.originals)),
    }
    with open(out_dir / f"{name}.json", "w") as f:
        json.dump(prov, f, indent=2, sort_keys=True)
        f.write("\n")


def load_adversarial_batch(out_dir, name) -> AdversarialBatch:
    out_dir = Path(out_dir)
    orig = rfsynth.load_rfds(out_dir / f"{name}_orig.rfds")
    adv = rfsynth.load_rfds(out_dir / f"{name}_adv.rfds")
    with open(out_dir / f"{name}.json") as f:
        prov = json.load(f)
    return AdversarialBatch(originals=orig.frames, perturbed=adv.frames,
                            true_labels=orig.labels, crafted_on=prov["crafted_on"],
                            victim_accuracy=prov.get("victim_accuracy"))
