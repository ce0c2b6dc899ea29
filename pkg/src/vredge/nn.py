"""Minimal differentiable building blocks on float64 numpy arrays.

Hand-rolled forward/backward passes for dense layers, LSTM layers, and
dropout, plus Adam, the batch-mean MSE loss, central-difference gradient
verification, and a small versioned binary checkpoint format. backward()
overwrites each layer's stored gradients; call it once per update.
"""

from __future__ import annotations

import struct

import numpy as np

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid", "softmax")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def init_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, shape)


class Dense:
    """Fully connected layer: activation(x @ w + b)."""

    def __init__(self, in_dim: int, out_dim: int, activation: str = "linear",
                 rng: np.random.Generator = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.w = init_uniform(rng, (in_dim, out_dim), in_dim)
        self.b = init_uniform(rng, (out_dim,), in_dim)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None
        self._out = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got {x.shape[-1]}")
        self._x = x
        z = x @ self.w + self.b
        if self.activation == "linear":
            out = z
        elif self.activation == "relu":
            out = np.maximum(z, 0.0)
        elif self.activation == "tanh":
            out = np.tanh(z)
        elif self.activation == "sigmoid":
            out = sigmoid(z)
        else:
            out = softmax(z)
        self._out = out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._out is None:
            raise RuntimeError("backward before forward")
        out = self._out
        if self.activation == "linear":
            dz = grad_out
        elif self.activation == "relu":
            dz = grad_out * (out > 0.0)
        elif self.activation == "tanh":
            dz = grad_out * (1.0 - out * out)
        elif self.activation == "sigmoid":
            dz = grad_out * out * (1.0 - out)
        else:  # softmax jacobian-vector product
            dz = out * (grad_out - (grad_out * out).sum(axis=-1, keepdims=True))
        self.dw = self._x.T @ dz
        self.db = dz.sum(axis=0)
        return dz @ self.w.T

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]


class LstmLayer:
    """Single LSTM layer over a (batch, time, features) sequence.

    Each forward pass starts from zero hidden/cell state (state is reset
    between sequences). Gate blocks are packed [input, forget, candidate,
    output] along the last axis of w/u/b.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator = None):
        rng = rng or np.random.default_rng(0)
        self.in_dim = in_dim
        self.hidden = hidden
        self.w = init_uniform(rng, (in_dim, 4 * hidden), in_dim)
        self.u = init_uniform(rng, (hidden, 4 * hidden), hidden)
        self.b = init_uniform(rng, (4 * hidden,), hidden)
        self.dw = np.zeros_like(self.w)
        self.du = np.zeros_like(self.u)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def _split(self, z):
        h = self.hidden
        return z[..., :h], z[..., h:2 * h], z[..., 2 * h:3 * h], z[..., 3 * h:]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[-1] != self.in_dim:
            raise ValueError(f"expected (batch, time, {self.in_dim}) input")
        batch, steps, _ = x.shape
        h_prev = np.zeros((batch, self.hidden))
        c_prev = np.zeros((batch, self.hidden))
        hs = np.empty((batch, steps, self.hidden))
        cache = []
        for t in range(steps):
            xt = x[:, t, :]
            z = xt @ self.w + h_prev @ self.u + self.b
            zi, zf, zg, zo = self._split(z)
            i = sigmoid(zi)
            f = sigmoid(zf)
            g = np.tanh(zg)
            o = sigmoid(zo)
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            cache.append((xt, h_prev, c_prev, i, f, g, o, tc))
            hs[:, t, :] = h
            h_prev, c_prev = h, c
        self._cache = (cache, x.shape)
        return hs

    def backward(self, grad_h: np.ndarray) -> np.ndarray:
        """BPTT given gradients for every hidden output (zeros where unused)."""
        if self._cache is None:
            raise RuntimeError("backward before forward")
        cache, x_shape = self._cache
        batch, steps, _ = x_shape
        self.dw = np.zeros_like(self.w)
        self.du = np.zeros_like(self.u)
        self.db = np.zeros_like(self.b)
        grad_x = np.empty(x_shape)
        dh_next = np.zeros((batch, self.hidden))
        dc_next = np.zeros((batch, self.hidden))
        for t in range(steps - 1, -1, -1):
            xt, h_prev, c_prev, i, f, g, o, tc = cache[t]
            dh = grad_h[:, t, :] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dzi = di * i * (1.0 - i)
            dzf = df * f * (1.0 - f)
            dzg = dg * (1.0 - g * g)
            dzo = do * o * (1.0 - o)
            dz = np.concatenate([dzi, dzf, dzg, dzo], axis=-1)
            self.dw += xt.T @ dz
            self.du += h_prev.T @ dz
            self.db += dz.sum(axis=0)
            grad_x[:, t, :] = dz @ self.w.T
            dh_next = dz @ self.u.T
            dc_next = dc * f
        return grad_x

    def params(self):
        return [self.w, self.u, self.b]

    def grads(self):
        return [self.dw, self.du, self.db]


def dropout_apply(x: np.ndarray, rate: float, training: bool,
                  rng: np.random.Generator):
    """Inverted dropout; returns (output, mask). Identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not training or rate == 0.0:
        return x, None
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate), keep


class Dropout:
    """Stateful dropout layer with its own seeded mask stream."""

    def __init__(self, rate: float, rng: np.random.Generator = None):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self.rng = rng or np.random.default_rng(0)
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        out, self._mask = dropout_apply(x, self.rate, training, self.rng)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad_out
        return grad_out * self._mask / (1.0 - self.rate)

    def params(self):
        return []

    def grads(self):
        return []


class Mlp:
    """Stack of dense layers; the workhorse for the actor and critic."""

    def __init__(self, widths: list, activations: list,
                 rng: np.random.Generator = None):
        if len(widths) < 2 or len(activations) != len(widths) - 1:
            raise ValueError("need one activation per layer")
        rng = rng or np.random.default_rng(0)
        self.layers = [Dense(widths[i], widths[i + 1], activations[i], rng)
                       for i in range(len(activations))]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def n_params(self) -> int:
        return sum(p.size for p in self.params())


class Adam:
    """Adam with bias correction; updates parameters in place."""

    def __init__(self, params: list, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ValueError("gradient shape does not match parameter shape")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite parameter after Adam update")


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Batch-mean squared-error: mean over rows of |pred - target|^2.

    Returns (loss, grad wrt pred).
    """
    if pred.shape != target.shape:
        raise ValueError("prediction/target shape mismatch")
    diff = pred - target
    batch = pred.shape[0]
    loss = float((diff * diff).sum() / batch)
    return loss, 2.0 * diff / batch


def finite_difference_check(params: list, grads: list, loss_fn, step: float = 1e-5,
                            rng: np.random.Generator = None,
                            max_checks_per_param: int = None,
                            floor: float = 1e-6) -> float:
    """Max relative error between analytic grads and central differences.

    loss_fn() must re-run the forward pass against the current parameter
    values. When max_checks_per_param is given, a random coordinate subset
    of each parameter array is probed instead of every entry. `floor` keeps
    the comparison absolute for gradients below it, where the central
    difference is dominated by cancellation roundoff.
    """
    worst = 0.0
    for p, g in zip(params, grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        idx = np.arange(flat_p.size)
        if max_checks_per_param is not None and flat_p.size > max_checks_per_param:
            idx = (rng or np.random.default_rng(0)).choice(
                flat_p.size, size=max_checks_per_param, replace=False)
        for i in idx:
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = loss_fn()
            flat_p[i] = orig - step
            down = loss_fn()
            flat_p[i] = orig
            fd = (up - down) / (2.0 * step)
            err = abs(fd - flat_g[i]) / max(abs(fd), abs(flat_g[i]), floor)
            worst = max(worst, err)
    return worst


# -- checkpoint format --------------------------------------------------------
# magic | u32 version | u32 count | entries: u16 name-len, name utf-8,
# u8 ndim, u32 dims..., float64 little-endian data.

CHECKPOINT_MAGIC = b"VRNET\x00"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, arrays: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype="<f8")
            if not arr.flags.c_contiguous:
                arr = np.ascontiguousarray(arr)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not a parameter checkpoint (bad magic bytes)")
        version, count = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            arrays[name] = data.astype(np.float64)
        return arrays
