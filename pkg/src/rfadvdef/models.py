"""Model graphs: the 1D-CNN modulation classifier and its mirror autoencoder.

The classifier front end is three conv/relu/maxpool blocks whose spatial
widths narrow 2048 -> 1024 -> 512 -> 256; the [64, 256] bottleneck is
flattened into the two regularized dense layers (128 units, then the class
logits) with dropout between them. The autoencoder reuses the same front end
(the encoder) and mirrors it layer by layer: deconvolutions in place of
convolutions, 2x upsampling in place of each max-pool. transfer_weights
copies a trained encoder into a fresh classifier and freezes it; training can
then keep it frozen or move it at a reduced rate.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndgrad
from .ndgrad import Tensor

ENCODER_DEPTH = 9        # three conv/relu/maxpool blocks
INPUT_LEN = 2048
BOTTLENECK_WIDTH = 256   # spatial width at the encoder output
BOTTLENECK_CHANNELS = 64
FLAT_FEATURES = BOTTLENECK_WIDTH * BOTTLENECK_CHANNELS


@dataclass
class LayerSpec:
    kind: str          # conv1d | deconv1d | relu | maxpool | upsample | flatten | dense | dropout | softmax
    hyper: dict = field(default_factory=dict)


@dataclass
class ModelGraph:
    """Ordered layer specification plus named parameter store."""

    layers: list
    params: dict                    # name -> Tensor
    kind: str                       # "classifier" | "autoencoder"
    num_classes: int = None
    frozen: set = field(default_factory=set)
    decay: set = field(default_factory=set)   # params with L2 weight decay
    trained: bool = False
    input_len: int = INPUT_LEN

    def forward(self, x, train=False, rng=None, start=0, stop=None) -> Tensor:
        """Run layers [start:stop) on x ([C, L] single, [B, L, C] batch, or Tensor)."""
        t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
        if train and rng is None:
            rng = np.random.default_rng(0)
        for i, spec in enumerate(self.layers[start : stop if stop is not None else len(self.layers)],
                                 start=start):
            kind = spec.kind
            if kind == "conv1d":
                t = ndgrad.conv1d(t, self.params[f"{i:02d}.w"], self.params[f"{i:02d}.b"])
            elif kind == "deconv1d":
                t = ndgrad.deconv1d(t, self.params[f"{i:02d}.w"], self.params[f"{i:02d}.b"])
            elif kind == "relu":
                t = ndgrad.relu(t)
            elif kind == "maxpool":
                t = ndgrad.maxpool1d(t, spec.hyper["window"])
            elif kind == "upsample":
                t = ndgrad.upsample1d(t, spec.hyper["factor"])
            elif kind == "flatten":
                t = ndgrad.flatten(t)
            elif kind == "dense":
                t = ndgrad.dense(t, self.params[f"{i:02d}.w"], self.params[f"{i:02d}.b"])
            elif kind == "dropout":
                t = ndgrad.dropout(t, spec.hyper["p"], rng, train=train)
            elif kind == "softmax":
                t = ndgrad.softmax(t)
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
        return t

    def encoder_forward(self, x, **kw) -> Tensor:
        return self.forward(x, stop=ENCODER_DEPTH, **kw)

    def parameter_count(self):
        return sum(int(p.data.size) for p in self.params.values())

    def set_frozen(self, names):
        self.frozen = set(names)
        for name, p in self.params.items():
            p.requires_grad = name not in self.frozen

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "num_classes": self.num_classes,
            "input_len": self.input_len,
            "trained": self.trained,
            "frozen": sorted(self.frozen),
            "decay": sorted(self.decay),
            "layers": [{"kind": s.kind, **s.hyper} for s in self.layers],
        }


def trace_shapes(layers, input_shape=(1, INPUT_LEN)):
    """Walk the layer list symbolically, returning the (C, L) or (N,) shape
    after every layer. Raises ValueError on inconsistent specs."""
    shape = tuple(input_shape)
    out = [shape]
    for spec in layers:
        kind = spec.kind
        if kind in ("conv1d", "deconv1d"):
            c, l = shape
            cin, cout = spec.hyper["in_channels"], spec.hyper["out_channels"]
            if c != cin:
                raise ValueError(f"{kind} expects {cin} channels, got {c}")
            shape = (cout, l)
        elif kind == "maxpool":
            c, l = shape
            w = spec.hyper["window"]
            if l % w:
                raise ValueError(f"maxpool window {w} does not divide length {l}")
            shape = (c, l // w)
        elif kind == "upsample":
            c, l = shape
            shape = (c, l * spec.hyper["factor"])
        elif kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif kind == "dense":
            (n,) = shape
            if n != spec.hyper["in_features"]:
                raise ValueError(f"dense expects {spec.hyper['in_features']} inputs, got {n}")
            shape = (spec.hyper["out_features"],)
        elif kind in ("relu", "dropout", "softmax"):
            pass
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        out.append(shape)
    return out


def _init_params(layers, seed):
    """Uniform fan-in initialization for conv/deconv/dense weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for i, spec in enumerate(layers):
        if spec.kind == "conv1d":
            cin, cout, k = spec.hyper["in_channels"], spec.hyper["out_channels"], spec.hyper["kernel"]
            bound = 1.0 / np.sqrt(cin * k)
            params[f"{i:02d}.w"] = Tensor(
                rng.uniform(-bound, bound, (cout, cin, k)).astype(np.float32), requires_grad=True
            )
            params[f"{i:02d}.b"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
        elif spec.kind == "deconv1d":
            cin, cout, k = spec.hyper["in_channels"], spec.hyper["out_channels"], spec.hyper["kernel"]
            bound = 1.0 / np.sqrt(cin * k)
            params[f"{i:02d}.w"] = Tensor(
                rng.uniform(-bound, bound, (cin, cout, k)).astype(np.float32), requires_grad=True
            )
            params[f"{i:02d}.b"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
        elif spec.kind == "dense":
            nin, nout = spec.hyper["in_features"], spec.hyper["out_features"]
            bound = 1.0 / np.sqrt(nin)
            params[f"{i:02d}.w"] = Tensor(
                rng.uniform(-bound, bound, (nout, nin)).astype(np.float32), requires_grad=True
            )
            params[f"{i:02d}.b"] = Tensor(np.zeros(nout, dtype=np.float32), requires_grad=True)
    return params


def encoder_layers():
    """The shared front end: three conv/relu/maxpool blocks narrowing the
    spatial width 2048 -> 256 over channels 16/32/64."""
    specs = []
    channels = [1, 16, 32, 64]
    for cin, cout in zip(channels[:-1], channels[1:]):
        specs.append(LayerSpec("conv1d", {"in_channels": cin, "out_channels": cout, "kernel": 7}))
        specs.append(LayerSpec("relu"))
        specs.append(LayerSpec("maxpool", {"window": 2}))
    assert len(specs) == ENCODER_DEPTH
    return specs


def build_classifier(num_classes=4, seed=0) -> ModelGraph:
    """Classifier graph for [1, 2048] inputs; output is a probability vector."""
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    layers = encoder_layers()
    layers += [
        LayerSpec("flatten"),
        LayerSpec("dense", {"in_features": FLAT_FEATURES, "out_features": 128}),
        LayerSpec("relu"),
        LayerSpec("dropout", {"p": 0.5}),
        LayerSpec("dense", {"in_features": 128, "out_features": num_classes}),
        LayerSpec("softmax"),
    ]
    shapes = trace_shapes(layers)
    assert shapes[ENCODER_DEPTH] == (BOTTLENECK_CHANNELS, BOTTLENECK_WIDTH)
    assert shapes[-1] == (num_classes,)
    model = ModelGraph(layers=layers, params=_init_params(layers, seed),
                       kind="classifier", num_classes=num_classes)
    model.decay = {f"{i:02d}.w" for i, s in enumerate(layers) if s.kind == "dense"}
    return model


def build_autoencoder(encoder_from: ModelGraph, seed=0) -> ModelGraph:
    """Autoencoder whose encoder matches the classifier front end and whose
    decoder is its layer-by-layer mirror (deconv for conv, upsample for pool)."""
    enc = [LayerSpec(s.kind, dict(s.hyper)) for s in encoder_from.layers[:ENCODER_DEPTH]]
    dec = []
    for spec in reversed(enc):
        if spec.kind == "conv1d":
            dec.append(LayerSpec("deconv1d", {
                "in_channels": spec.hyper["out_channels"],
                "out_channels": spec.hyper["in_channels"],
                "kernel": spec.hyper["kernel"],
            }))
        elif spec.kind == "maxpool":
            dec.append(LayerSpec("upsample", {"factor": spec.hyper["window"]}))
        elif spec.kind == "relu":
            dec.append(LayerSpec("relu"))
        else:
            raise ValueError(f"cannot mirror layer kind {spec.kind!r}")
    layers = enc + dec
    shapes = trace_shapes(layers)
    if shapes[-1] != shapes[0]:
        raise ValueError(f"decoder does not restore input shape: {shapes[-1]} vs {shapes[0]}")
    return ModelGraph(layers=layers, params=_init_params(layers, seed), kind="autoencoder")


def transfer_weights(ae: ModelGraph, clf: ModelGraph, head_seed=0) -> ModelGraph:
    """New classifier whose front layers are deep copies of the trained AE
    encoder (frozen); dense-head parameters are freshly initialized."""
    if [s.kind for s in ae.layers[:ENCODER_DEPTH]] != [s.kind for s in clf.layers[:ENCODER_DEPTH]] or \
            [s.hyper for s in ae.layers[:ENCODER_DEPTH]] != [s.hyper for s in clf.layers[:ENCODER_DEPTH]]:
        raise ValueError("autoencoder encoder and classifier front layers do not match")
    layers = [LayerSpec(s.kind, dict(s.hyper)) for s in clf.layers]
    params = _init_params(layers, head_seed)      # fresh head (and placeholder encoder)
    encoder_names = [n for n in params if int(n.split(".")[0]) < ENCODER_DEPTH]
    for name in encoder_names:
        params[name] = Tensor(ae.params[name].data.copy(), requires_grad=False)
    model = ModelGraph(layers=layers, params=params, kind="classifier",
                       num_classes=clf.num_classes)
    model.decay = {f"{i:02d}.w" for i, s in enumerate(layers) if s.kind == "dense"}
    model.set_frozen(encoder_names)
    return model


def predict_probs(model: ModelGraph, frames, batch_size=512) -> np.ndarray:
    """Class probabilities for a [N, 2048] batch of interleaved vectors."""
    frames = np.ascontiguousarray(frames, dtype=np.float32)
    out = []
    for lo in range(0, len(frames), batch_size):
        chunk = frames[lo : lo + batch_size]
        probs = model.forward(chunk[:, :, None], train=False)   # [n, L, 1] view
        out.append(probs.data)
    return np.concatenate(out, axis=0)


def accuracy(model: ModelGraph, frames, labels, batch_size=512) -> float:
    preds = predict_probs(model, frames, batch_size).argmax(axis=1)
    return float((preds == np.asarray(labels)).mean())


def save_model(model: ModelGraph, path):
    """RFWT checkpoint plus JSON architecture manifest sharing the stem."""
    path = Path(path)
    ndgrad.save_checkpoint(path, {n: p.data for n, p in model.params.items()})
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(model.manifest(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path) -> ModelGraph:
    path = Path(path)
    with open(path.with_suffix(".json")) as f:
        man = json.load(f)
    layers = [LayerSpec(d["kind"], {k: v for k, v in d.items() if k != "kind"})
              for d in man["layers"]]
    params = {n: Tensor(a, requires_grad=True) for n, a in ndgrad.load_checkpoint(path).items()}
    model = ModelGraph(layers=layers, params=params, kind=man["kind"],
                       num_classes=man["num_classes"], trained=man["trained"],
                       input_len=man.get("input_len", INPUT_LEN))
    model.decay = set(man["decay"])
    model.set_frozen(man["frozen"])
    return model
