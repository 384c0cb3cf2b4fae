"""Stacked-LSTM regressor with exact backpropagation through time.

Architecture: N LSTM layers (default two, 50 cells each); every layer but the
last feeds its full hidden sequence upward, the last feeds its final hidden
state into a dense head with tanh activation, so predictions live in (-1, 1)
and can be negative (regenerated energy). Inverted dropout is applied to each
LSTM layer's output in train mode.

Parameters live in one flat float64 vector; the layout per layer is
(W_x, W_h, b) with gate blocks ordered (input, forget, output, candidate),
followed by the dense head (w, b). Heavy tensor math runs in a caller-chosen
dtype (float32 for training speed, float64 for gradient verification).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

GATES = 4  # i, f, o, g


@dataclass(frozen=True)
class ModelConfig:
    """Shape and regularization of the regressor."""

    window: int = 30
    input_dim: int = 2
    hidden: tuple[int, ...] = (50, 50)
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden must be a non-empty list of positive widths")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


def layer_dims(config: ModelConfig) -> list[tuple[int, int]]:
    """(input width, hidden width) per LSTM layer."""
    dims = []
    prev = config.input_dim
    for h in config.hidden:
        dims.append((prev, h))
        prev = h
    return dims


def param_count(config: ModelConfig) -> int:
    """Flat parameter count: sum of 4h(in + h + 1) per layer plus h_last + 1."""
    total = sum(GATES * h * (i + h + 1) for i, h in layer_dims(config))
    return total + config.hidden[-1] + 1


@lru_cache(maxsize=None)
def _layout(input_dim: int, hidden: tuple[int, ...]):
    """Start offsets of (W_x, W_h, b) per layer and the dense head."""
    spans = []
    pos = 0
    prev = input_dim
    for h in hidden:
        wx = (pos, pos + GATES * h * prev)
        wh = (wx[1], wx[1] + GATES * h * h)
        b = (wh[1], wh[1] + GATES * h)
        spans.append((wx, wh, b))
        pos = b[1]
        prev = h
    dense_w = (pos, pos + hidden[-1])
    dense_b = (dense_w[1], dense_w[1] + 1)
    return spans, dense_w, dense_b


class ModelParameters:
    """Flat float64 parameter vector plus the config acting as shape descriptor."""

    __slots__ = ("config", "flat")

    def __init__(self, config: ModelConfig, flat: np.ndarray):
        flat = np.asarray(flat, dtype=np.float64)
        expected = param_count(config)
        if flat.shape != (expected,):
            raise ValueError(f"flat vector has shape {flat.shape}, expected ({expected},)")
        self.config = config
        self.flat = flat

    @classmethod
    def zeros(cls, config: ModelConfig) -> "ModelParameters":
        return cls(config, np.zeros(param_count(config)))

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, self.flat.copy())

    def layer(self, l: int):
        """Views (W_x (4h, in), W_h (4h, h), b (4h,)) of layer l."""
        spans, _, _ = _layout(self.config.input_dim, self.config.hidden)
        (wx0, wx1), (wh0, wh1), (b0, b1) = spans[l]
        i, h = layer_dims(self.config)[l]
        return (
            self.flat[wx0:wx1].reshape(GATES * h, i),
            self.flat[wh0:wh1].reshape(GATES * h, h),
            self.flat[b0:b1],
        )

    def dense(self):
        """Views (w (h_last,), b (1,)) of the dense head."""
        _, (w0, w1), (b0, b1) = _layout(self.config.input_dim, self.config.hidden)
        return self.flat[w0:w1], self.flat[b0:b1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelParameters):
            return NotImplemented
        return self.config == other.config and np.array_equal(self.flat, other.flat)


def init_params(config: ModelConfig) -> ModelParameters:
    """Glorot-uniform weights, zero biases except LSTM forget-gate biases at 1.

    Each weight matrix draws from U(-lim, lim) with lim = sqrt(6 / (fan_in +
    fan_out)); fan_out of a gate matrix counts all four gate blocks.
    Deterministic in config.seed.
    """
    rng = np.random.default_rng(config.seed)
    params = ModelParameters.zeros(config)
    for l, (in_l, h) in enumerate(layer_dims(config)):
        wx, wh, b = params.layer(l)
        lim = np.sqrt(6.0 / (in_l + GATES * h))
        wx[:] = rng.uniform(-lim, lim, wx.shape)
        lim = np.sqrt(6.0 / (h + GATES * h))
        wh[:] = rng.uniform(-lim, lim, wh.shape)
        b[h : 2 * h] = 1.0  # forget gate
    w, _ = params.dense()
    lim = np.sqrt(6.0 / (config.hidden[-1] + 1))
    w[:] = rng.uniform(-lim, lim, w.shape)
    return params


def _sigmoid_inplace(x: np.ndarray) -> np.ndarray:
    # sigmoid(x) = 0.5 * tanh(x / 2) + 0.5, stable for all x
    x *= 0.5
    np.tanh(x, out=x)
    x *= 0.5
    x += 0.5
    return x


# activations are stored time-major, (m, B, ...), so per-step slices are
# contiguous for the sequential recurrence
@dataclass
class _LayerCache:
    inputs: np.ndarray          # (m, B, in_l), post-mask output of the layer below
    gates: np.ndarray           # (m, B, 4h) activated gates, blocks (i, f, o, g)
    c: np.ndarray               # (m, B, h) cell states
    tc: np.ndarray              # (m, B, h) tanh(c)
    h: np.ndarray               # (m, B, h) hidden sequence (pre-mask)
    mask: np.ndarray | None     # inverted-dropout mask, (m, B, h) or (B, h) for the top layer
    wx: np.ndarray              # compute-dtype weight copies for backward
    wh: np.ndarray


@dataclass
class Cache:
    """Activations retained by a forward pass for exact BPTT."""

    config: ModelConfig
    mode: str
    dtype: np.dtype
    layers: list[_LayerCache]
    final_in: np.ndarray        # (B, h_last) post-mask input to the dense head
    w_dense: np.ndarray
    yhat: np.ndarray            # (B,)
    squeezed: bool


def forward(
    params: ModelParameters,
    window: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dtype=np.float64,
):
    """Run the network on one (m, p) window or a (B, m, p) batch.

    Returns (prediction, cache); the prediction is a float for a single window
    and a (B,) array for a batch, always inside (-1, 1). In train mode an
    inverted-dropout mask drawn from ``rng`` is applied to each LSTM layer's
    output; eval mode applies no mask and no rescaling and ignores ``rng``.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    config = params.config
    x = np.asarray(window, dtype=dtype)
    squeezed = x.ndim == 2
    if squeezed:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != config.window or x.shape[2] != config.input_dim:
        raise ValueError(
            f"window shape {np.asarray(window).shape} does not match "
            f"(window={config.window}, input_dim={config.input_dim})"
        )
    drop = config.dropout_rate if mode == "train" else 0.0
    if drop > 0.0 and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")
    keep = 1.0 - drop

    B, m, _ = x.shape
    n_layers = len(config.hidden)
    layers = []
    seq = np.ascontiguousarray(x.transpose(1, 0, 2))  # time-major (m, B, p)
    for l, (in_l, h) in enumerate(layer_dims(config)):
        layer_input = seq
        wx64, wh64, b64 = params.layer(l)
        wx = wx64.astype(dtype)
        wh_t = np.ascontiguousarray(wh64.T, dtype=dtype)
        b = b64.astype(dtype)

        gates = seq.reshape(m * B, in_l) @ wx.T
        gates += b
        gates = gates.reshape(m, B, GATES * h)
        c_seq = np.empty((m, B, h), dtype=dtype)
        tc_seq = np.empty((m, B, h), dtype=dtype)
        h_seq = np.empty((m, B, h), dtype=dtype)
        h_t = np.zeros((B, h), dtype=dtype)
        c_t = np.zeros((B, h), dtype=dtype)
        rec = np.empty((B, GATES * h), dtype=dtype)
        tmp = np.empty((B, h), dtype=dtype)
        for t in range(m):
            z = gates[t]
            np.matmul(h_t, wh_t, out=rec)
            z += rec
            _sigmoid_inplace(z[:, : 3 * h])
            np.tanh(z[:, 3 * h :], out=z[:, 3 * h :])
            i_t = z[:, :h]
            f_t = z[:, h : 2 * h]
            o_t = z[:, 2 * h : 3 * h]
            g_t = z[:, 3 * h :]
            c_next = c_seq[t]
            np.multiply(f_t, c_t, out=c_next)
            np.multiply(i_t, g_t, out=tmp)
            c_next += tmp
            c_t = c_next
            tc = tc_seq[t]
            np.tanh(c_t, out=tc)
            h_t = h_seq[t]
            np.multiply(o_t, tc, out=h_t)

        if l < n_layers - 1:
            if drop > 0.0:
                mask = (rng.random((m, B, h)) >= drop).astype(dtype) / keep
                seq = h_seq * mask
            else:
                mask = None
                seq = h_seq
        else:
            final = h_seq[-1]
            if drop > 0.0:
                mask = (rng.random((B, h)) >= drop).astype(dtype) / keep
                final = final * mask
            else:
                mask = None
        layers.append(_LayerCache(inputs=layer_input, gates=gates,
                                  c=c_seq, tc=tc_seq, h=h_seq, mask=mask, wx=wx, wh=wh_t))

    w64, bd64 = params.dense()
    w = w64.astype(dtype)
    zd = final @ w + dtype(bd64[0])
    yhat = np.tanh(zd)
    cache = Cache(
        config=config,
        mode=mode,
        dtype=np.dtype(dtype),
        layers=layers,
        final_in=final,
        w_dense=w,
        yhat=yhat,
        squeezed=squeezed,
    )
    return (float(yhat[0]) if squeezed else yhat), cache


def mae_loss(yhat, y):
    """Absolute error and its subgradient wrt the prediction (0 at equality)."""
    diff = np.asarray(yhat) - np.asarray(y)
    loss = np.abs(diff)
    grad = np.sign(diff)
    if np.ndim(diff) == 0:
        return float(loss), float(grad)
    return loss, grad


def backward(cache: Cache, dloss_dy) -> np.ndarray:
    """Exact BPTT gradient of sum_b dloss_dy[b] * yhat_b wrt the flat vector.

    For a batch-mean loss pass the per-sample upstream gradients divided by
    the batch size. Returns a float64 vector aligned with the parameter layout.
    """
    config = cache.config
    dtype = cache.dtype
    B = cache.yhat.shape[0]
    dl = np.asarray(dloss_dy, dtype=dtype)
    if dl.ndim == 0:
        dl = np.full(B, float(dl), dtype=dtype)
    if dl.shape != (B,):
        raise ValueError(f"dloss_dy shape {dl.shape} does not match batch size {B}")

    grad = np.zeros(param_count(config))
    spans, (dw0, dw1), (db0, db1) = _layout(config.input_dim, config.hidden)
    dims = layer_dims(config)
    m = config.window

    dzd = dl * (1.0 - cache.yhat * cache.yhat)
    grad[dw0:dw1] = cache.final_in.T @ dzd
    grad[db0:db1] = dzd.sum()

    dfinal = dzd[:, None] * cache.w_dense[None, :]
    top = len(dims) - 1
    if cache.layers[top].mask is not None:
        dfinal = dfinal * cache.layers[top].mask

    dh_in = None  # (m, B, h) incoming gradient on the layer's pre-mask output
    for l in range(top, -1, -1):
        lc = cache.layers[l]
        in_l, h = dims[l]
        if l < top and lc.mask is not None:
            dh_in *= lc.mask
        gates = lc.gates
        dz_seq = np.empty((m, B, GATES * h), dtype=dtype)
        dh = np.zeros((B, h), dtype=dtype)
        dc = np.zeros((B, h), dtype=dtype)
        dh_rec = np.empty((B, h), dtype=dtype)
        tmp = np.empty((B, h), dtype=dtype)
        for t in range(m - 1, -1, -1):
            if l == top:
                if t == m - 1:
                    dh += dfinal
            else:
                dh += dh_in[t]
            z = gates[t]
            i_t = z[:, :h]
            f_t = z[:, h : 2 * h]
            o_t = z[:, 2 * h : 3 * h]
            g_t = z[:, 3 * h :]
            tc = lc.tc[t]
            # dc_t = dc_rec + dh * o * (1 - tanh(c)^2)
            np.multiply(dh, o_t, out=tmp)
            tmp -= tmp * tc * tc
            dc += tmp
            dz = dz_seq[t]
            np.multiply(dc, g_t, out=dz[:, :h])
            dz[:, :h] *= i_t * (1.0 - i_t)
            if t > 0:
                np.multiply(dc, lc.c[t - 1], out=dz[:, h : 2 * h])
                dz[:, h : 2 * h] *= f_t * (1.0 - f_t)
            else:
                dz[:, h : 2 * h] = 0.0
            np.multiply(dh, tc, out=dz[:, 2 * h : 3 * h])
            dz[:, 2 * h : 3 * h] *= o_t * (1.0 - o_t)
            np.multiply(dc, i_t, out=dz[:, 3 * h :])
            dz[:, 3 * h :] *= 1.0 - g_t * g_t
            dc *= f_t                                  # carry to step t-1
            np.matmul(dz, lc.wh.T, out=dh_rec)         # lc.wh holds W_h^T
            dh, dh_rec = dh_rec, dh

        dz_flat = dz_seq.reshape(m * B, GATES * h)
        (wx0, wx1), (wh0, wh1), (b0, b1) = spans[l]
        grad[wx0:wx1] = (dz_flat.T @ lc.inputs.reshape(m * B, in_l)).ravel()
        h_prev = np.concatenate(
            (np.zeros((1, B, h), dtype=dtype), lc.h[: m - 1]), axis=0
        ).reshape(m * B, h)
        grad[wh0:wh1] = (dz_flat.T @ h_prev).ravel()
        grad[b0:b1] = dz_flat.sum(axis=0)
        if l > 0:
            dh_in = (dz_flat @ lc.wx).reshape(m, B, in_l)
    return grad
