"""Minimal dense-tensor engine with reverse-mode differentiation.

Float32 numpy arrays are the storage substrate; convolutions are lowered to
im2col + GEMM so training stays fast on CPU. Every op records a backward
closure on a tape; Tensor.backward() replays the tape in reverse topological
order and accumulates gradients into .grad, including the gradient with
respect to input tensors (needed by gradient-sign attacks).

Shape conventions: conv/pool/upsample take a single sample [C, L] or a batch
in length-major layout [B, L, C]. Length-major makes the im2col patch matrix
a strided view whose rows are short contiguous runs (materializing it is a
plain block copy, no gather) and gives the conv GEMM its fast tall orientation;
with C = 1 at the model boundary the batch conversion is a zero-copy view.
dense takes [N] or [B, N]; softmax/cross_entropy take [C] or [B, C].
"""

import struct
from pathlib import Path

import numpy as np

RFWT_MAGIC = b"RFWT"
RFWT_VERSION = 1


class Tensor:
    """N-dimensional array node with optional gradient accumulation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, _op=""):
        if isinstance(data, Tensor):
            data = data.data
        if isinstance(data, np.ndarray) and data.dtype.kind == "f":
            self.data = data          # keep caller's float dtype (float64 for checks)
        else:
            self.data = np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            # take ownership when g is a fresh array; copy views/mismatched dtypes
            if isinstance(g, np.ndarray) and g.base is None and \
                    g.dtype == self.data.dtype and g.shape == self.data.shape:
                self.grad = g
            else:
                self.grad = np.array(g, dtype=self.data.dtype)
        else:
            self.grad += g

    def backward(self):
        """Backpropagate from a scalar node to all reachable tensors."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar node, got shape {self.shape}")
        topo, visited = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def sum(self):
        src = self

        def backward(g):
            src._accumulate(np.full_like(src.data, g))

        return _node(np.asarray(self.data.sum(), dtype=self.data.dtype),
                     (self,), backward, "sum")

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, op={self._op!r})"


def _node(data, parents, backward, op):
    req = any(p.requires_grad for p in parents)
    return Tensor(
        data,
        requires_grad=req,
        _parents=tuple(p for p in parents if p.requires_grad) if req else (),
        _backward=backward if req else None,
        _op=op,
    )


def _as3d(x):
    """Promote a single sample [C, L] to [1, L, C]; return (array, had_batch)."""
    if x.ndim == 2:
        return np.ascontiguousarray(x.T)[None], False
    if x.ndim == 3:
        return x, True
    raise ValueError(f"expected [C, L] or [B, L, C], got shape {x.shape}")


def _im2col(x3, k):
    """Patch matrix for same-padding correlation in length-major layout.

    x3: [B, L, Ci] -> cols [B*(L+2p)-k+1, k*Ci]. Row j = b*Lp + l holds the
    window x_pad[b, l:l+k, :] flattened; rows are contiguous runs of the
    padded buffer, so this is a block copy, not a gather. Rows with
    l >= L are junk but harmlessly small (pad width is k-1 per batch row).
    """
    b, l, ci = x3.shape
    if k == 1:
        return np.ascontiguousarray(x3).reshape(b * l, ci), l
    p = k // 2
    lp = l + 2 * p
    xp = np.zeros((b, lp, ci), dtype=x3.dtype)
    xp[:, p : p + l, :] = x3
    flat = xp.reshape(-1)
    n_rows = b * lp - k + 1
    step = ci * flat.itemsize
    view = np.lib.stride_tricks.as_strided(flat, shape=(n_rows, k * ci),
                                           strides=(step, flat.itemsize))
    return np.ascontiguousarray(view), lp


def _w2(w):
    """[Co, Ci, K] -> [K*Ci, Co] matching the im2col row layout."""
    return np.ascontiguousarray(w.transpose(2, 1, 0).reshape(-1, w.shape[0]))


def _corr_raw(x3, w, want_cols=False):
    """Cross-correlation with same-padding: [B,L,Ci] x [Co,Ci,K] -> [B,L,Co].

    One tall GEMM against the im2col matrix; the output rows for each batch
    element are recovered with a strided view (stride Lp between batch rows).
    Returns (out, cols) where cols is kept only when want_cols (for weight
    gradients).
    """
    b, l, ci = x3.shape
    co, ci_w, k = w.shape
    if ci_w != ci:
        raise ValueError(f"channel mismatch: input {ci}, kernels expect {ci_w}")
    cols, lp = _im2col(x3, k)
    full = cols @ _w2(w)                              # [n_rows, Co]
    sr, sc = full.strides
    view = np.lib.stride_tricks.as_strided(full, shape=(b, l, co),
                                           strides=(lp * sr, sr, sc))
    return np.ascontiguousarray(view), (cols if want_cols else None), lp


def _corr_weight_grad(gy3, cols, lp, wshape):
    """Kernel gradient: scatter gy back to im2col row space, one GEMM."""
    co, ci, k = wshape
    b, l, _ = gy3.shape
    n_rows = cols.shape[0]
    gfull = np.zeros((n_rows, co), dtype=gy3.dtype)
    sr, sc = gfull.strides
    view = np.lib.stride_tricks.as_strided(gfull, shape=(b, l, co),
                                           strides=(lp * sr, sr, sc))
    view[:] = gy3
    gw2 = cols.T @ gfull                              # [k*Ci, Co]
    return np.ascontiguousarray(gw2.reshape(k, ci, co).transpose(2, 1, 0))


def _flip_t(w):
    """[Co, Ci, K] -> [Ci, Co, K] with taps reversed; correlation with the
    result is the adjoint of correlation with w."""
    return np.ascontiguousarray(w.transpose(1, 0, 2)[:, :, ::-1])


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor = None) -> Tensor:
    """Same-padding 1-D cross-correlation. kernels: [C_out, C_in, K], K odd."""
    k = kernels.data.shape[-1]
    if k % 2 != 1:
        raise ValueError(f"kernel width must be odd for same-padding, got {k}")
    x3, batched = _as3d(x.data)
    w = kernels.data
    out, cols, lp = _corr_raw(x3, w, want_cols=kernels.requires_grad)
    if bias is not None:
        out += bias.data

    def backward(g):
        g3 = g if batched else np.ascontiguousarray(g.T)[None]
        if x.requires_grad:
            gx, _, _ = _corr_raw(np.ascontiguousarray(g3), _flip_t(w))
            x._accumulate(gx if batched else gx[0].T)
        if kernels.requires_grad:
            kernels._accumulate(_corr_weight_grad(g3, cols, lp, w.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g3.sum(axis=(0, 1)))

    parents = (x, kernels) + ((bias,) if bias is not None else ())
    return _node(out if batched else np.ascontiguousarray(out[0].T),
                 parents, backward, "conv1d")


def deconv1d(x: Tensor, kernels: Tensor, bias: Tensor = None) -> Tensor:
    """Transposed convolution (adjoint of conv1d) with same-length padding.

    kernels: [C_a, C_b, K] maps [C_a, L] -> [C_b, L]; sharing the kernel tensor
    with conv1d gives <conv(u), v> == <u, deconv(v)>.
    """
    k = kernels.data.shape[-1]
    if k % 2 != 1:
        raise ValueError(f"kernel width must be odd for same-padding, got {k}")
    x3, batched = _as3d(x.data)
    w = kernels.data                                 # [Ca, Cb, K]
    wt = _flip_t(w)                                  # [Cb, Ca, K]
    out, cols, lp = _corr_raw(x3, wt, want_cols=kernels.requires_grad)
    if bias is not None:
        out += bias.data

    def backward(g):
        g3 = g if batched else np.ascontiguousarray(g.T)[None]
        if x.requires_grad:
            gx, _, _ = _corr_raw(np.ascontiguousarray(g3), w)
            x._accumulate(gx if batched else gx[0].T)
        if kernels.requires_grad:
            gwt = _corr_weight_grad(g3, cols, lp, wt.shape)   # grad wrt flipped view
            kernels._accumulate(np.ascontiguousarray(gwt.transpose(1, 0, 2)[:, :, ::-1]))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g3.sum(axis=(0, 1)))

    parents = (x, kernels) + ((bias,) if bias is not None else ())
    return _node(out if batched else np.ascontiguousarray(out[0].T),
                 parents, backward, "deconv1d")


def maxpool1d(x: Tensor, window: int = 2) -> Tensor:
    """Non-overlapping max pooling; gradient goes to the first argmax of each
    window."""
    x3, batched = _as3d(x.data)
    b, l, c = x3.shape
    if l % window != 0:
        raise ValueError(f"length {l} not divisible by pool window {window}")
    xr = x3.reshape(b, l // window, window, c)
    if window == 2:
        hi = xr[:, :, 1, :] > xr[:, :, 0, :]         # strict: ties keep the first slot
        out = np.where(hi, xr[:, :, 1, :], xr[:, :, 0, :])

        def backward(g):
            g3 = g if batched else np.ascontiguousarray(g.T)[None]
            gx = np.zeros_like(xr)
            gx[:, :, 0, :] = np.where(hi, 0, g3)
            gx[:, :, 1, :] = np.where(hi, g3, 0)
            gx = gx.reshape(b, l, c)
            x._accumulate(gx if batched else gx[0].T)

    else:
        idx = xr.argmax(axis=2)                      # first max on ties
        out = np.take_along_axis(xr, idx[:, :, None, :], axis=2)[:, :, 0, :]

        def backward(g):
            g3 = g if batched else np.ascontiguousarray(g.T)[None]
            gx = np.zeros_like(xr)
            np.put_along_axis(gx, idx[:, :, None, :], g3[:, :, None, :], axis=2)
            gx = gx.reshape(b, l, c)
            x._accumulate(gx if batched else gx[0].T)

    return _node(out if batched else np.ascontiguousarray(out[0].T),
                 (x,), backward, "maxpool1d")


def upsample1d(x: Tensor, factor: int = 2) -> Tensor:
    """Repeat each position `factor` times along the length axis."""
    x3, batched = _as3d(x.data)
    b, l, c = x3.shape
    out = np.repeat(x3, factor, axis=1)

    def backward(g):
        g3 = g if batched else np.ascontiguousarray(g.T)[None]
        gx = g3.reshape(b, l, factor, c).sum(axis=2)
        x._accumulate(gx if batched else gx[0].T)

    return _node(out if batched else np.ascontiguousarray(out[0].T),
                 (x,), backward, "upsample1d")


def dense(x: Tensor, weight: Tensor, bias: Tensor = None) -> Tensor:
    """Affine map W x + b. weight: [M, N]; x: [N] or [B, N]."""
    xd = x.data
    batched = xd.ndim == 2
    x2 = xd if batched else xd[None]
    w = weight.data
    if x2.shape[1] != w.shape[1]:
        raise ValueError(f"dense shape mismatch: input {x2.shape[1]}, weight {w.shape}")
    out = x2 @ w.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        g2 = g if batched else g[None]
        if x.requires_grad:
            gx = g2 @ w
            x._accumulate(gx if batched else gx[0])
        if weight.requires_grad:
            weight._accumulate(g2.T @ x2)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g2.sum(axis=0))

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return _node(out if batched else out[0], parents, backward, "dense")


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def backward(g):
        x._accumulate(g * (x.data > 0))

    return _node(out, (x,), backward, "relu")


def dropout(x: Tensor, p: float, rng, train: bool = True) -> Tensor:
    """Inverted dropout; identity when train is False or p == 0."""
    if not train or p == 0.0:
        def backward_id(g):
            x._accumulate(g)

        return _node(x.data, (x,), backward_id, "dropout")
    mask = (rng.random(x.data.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    out = x.data * mask

    def backward(g):
        x._accumulate(g * mask)

    return _node(out, (x,), backward, "dropout")


def flatten(x: Tensor) -> Tensor:
    """[C, L] -> [C*L], or batched [B, L, C] -> [B, C*L] (row-major per sample)."""
    xd = x.data
    if xd.ndim == 3:
        b, l, c = xd.shape
        if c == 1:
            out = xd.reshape(b, l)

            def backward(g):
                x._accumulate(g.reshape(b, l, c))

        else:
            out = np.ascontiguousarray(xd.transpose(0, 2, 1)).reshape(b, c * l)

            def backward(g):
                x._accumulate(g.reshape(b, c, l).transpose(0, 2, 1))

    else:
        out = xd.reshape(-1)

        def backward(g):
            x._accumulate(g.reshape(xd.shape))

    return _node(out, (x,), backward, "flatten")


def softmax(logits: Tensor) -> Tensor:
    """Stable softmax along the last axis; output sums to 1."""
    z = logits.data
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        logits._accumulate(p * (g - dot))

    return _node(p, (logits,), backward, "softmax")


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean negative log-probability of the true class."""
    p = probs.data
    batched = p.ndim == 2
    p2 = p if batched else p[None]
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != p2.shape[0]:
        raise ValueError(f"labels length {y.shape[0]} != batch {p2.shape[0]}")
    n = p2.shape[0]
    rows = np.arange(n)
    pl = np.maximum(p2[rows, y], 1e-12)
    loss = np.asarray(-np.log(pl).mean(), dtype=p.dtype)

    def backward(g):
        gp = np.zeros_like(p2)
        gp[rows, y] = -g / (pl * n)
        probs._accumulate(gp if batched else gp[0])

    return _node(loss, (probs,), backward, "cross_entropy")


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared elementwise difference."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mse shape mismatch: {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    n = diff.size
    loss = np.asarray((diff * diff).mean(), dtype=diff.dtype)

    def backward(g):
        scaled = (2.0 * g / n) * diff
        if a.requires_grad:
            a._accumulate(scaled)
        if b.requires_grad:
            b._accumulate(-scaled)

    return _node(loss, (a, b), backward, "mse")


def save_checkpoint(path, tensors: dict):
    """Write named float32 arrays in the RFWT binary format."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(RFWT_MAGIC)
        f.write(struct.pack("<II", RFWT_VERSION, len(tensors)))
        for name, arr in tensors.items():
            nb = name.encode()
            if len(nb) > 255:
                raise ValueError(f"tensor name too long: {name}")
            arr = np.ascontiguousarray(arr, dtype="<f4")
            f.write(struct.pack("B", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path) -> dict:
    """Read an RFWT file back into {name: float32 array}."""
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(4) != RFWT_MAGIC:
            raise ValueError(f"{path}: not an RFWT checkpoint")
        version, count = struct.unpack("<II", f.read(8))
        if version != RFWT_VERSION:
            raise ValueError(f"{path}: unsupported RFWT version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("B", f.read(1))
            name = f.read(nlen).decode()
            (rank,) = struct.unpack("<I", f.read(4))
            dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
            size = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(f.read(4 * size), dtype="<f4").reshape(dims)
            out[name] = np.array(data, dtype=np.float32)
    return out
