"""Dense-tensor neural network core: layers, losses, manual backprop, Adam.

The layer set is closed (conv3x3 / maxpool2x2 / bilinear upsample / dense /
relu / sigmoid / flatten / reshape) and everything runs in float64. Layers
operate on batched arrays ([B,C,H,W] for images, [B,n] for vectors); the
module-level functional wrappers accept the single-instance shapes too.

Forward passes cache whatever the backward pass needs; calling backward
without a cached forward raises `StateError`. Backward passes fill
``layer.grads`` and return the gradient with respect to the layer input.
"""

import numpy as np

from . import kernels
from .errors import ShapeError, StateError


def _as_batched(x, rank):
    """Add a leading batch axis if `x` has `rank` dims; return (array, had_batch)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == rank:
        return x[None], False
    if x.ndim == rank + 1:
        return x, True
    raise ShapeError(f"expected rank {rank} or {rank + 1}, got shape {x.shape}")


# ---------------------------------------------------------------------------
# Layers

class Layer:
    kind = "layer"

    def __init__(self, name=None):
        self.name = name or self.kind
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x):
        raise NotImplementedError

    def backward(self, gy):
        raise NotImplementedError

    def _require_cache(self):
        if self._cache is None:
            raise StateError(f"backward before forward in layer '{self.name}'")
        return self._cache

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class Conv3x3(Layer):
    """3x3 convolution, stride 1, zero same-padding."""

    kind = "conv3x3"

    def __init__(self, c_in, c_out, name=None, init="he", rng=None):
        super().__init__(name)
        self.c_in = c_in
        self.c_out = c_out
        fan_in = c_in * 9
        fan_out = c_out * 9
        if init == "he":
            limit = np.sqrt(6.0 / fan_in)
        elif init == "xavier":
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        else:
            raise ValueError(f"unknown init {init!r}")
        rng = rng or np.random.default_rng(0)
        self.params["w"] = rng.uniform(-limit, limit, size=(c_out, c_in, 3, 3))
        self.params["b"] = np.zeros(c_out)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeError(
                f"expected [B,{self.c_in},H,W], got {x.shape}", layer=self.name)
        self._cache = x
        return kernels.conv3x3_forward(x, self.params["w"], self.params["b"])

    def backward(self, gy):
        x = self._require_cache()
        if gy.shape != (x.shape[0], self.c_out, x.shape[2], x.shape[3]):
            raise ShapeError(f"bad upstream gradient shape {gy.shape}", layer=self.name)
        gx, gw, gb = kernels.conv3x3_backward(x, self.params["w"], gy)
        self.grads["w"] = gw
        self.grads["b"] = gb
        return gx


class MaxPool2x2(Layer):
    kind = "maxpool2x2"

    def forward(self, x):
        if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
            raise ShapeError(f"maxpool2x2 needs even H,W, got {x.shape}", layer=self.name)
        y, idx = kernels.maxpool2x2_forward(x)
        self._cache = idx
        return y

    def backward(self, gy):
        idx = self._require_cache()
        return kernels.maxpool2x2_backward(gy, idx)


class Upsample2x(Layer):
    kind = "upsample2x_bilinear"

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"expected [B,C,H,W], got {x.shape}", layer=self.name)
        self._cache = x.shape
        return kernels.upsample2x_forward(x)

    def backward(self, gy):
        self._require_cache()
        return kernels.upsample2x_backward(gy)


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out, name=None, init="he", rng=None):
        super().__init__(name)
        self.n_in = n_in
        self.n_out = n_out
        if init == "he":
            limit = np.sqrt(6.0 / n_in)
        elif init == "xavier":
            limit = np.sqrt(6.0 / (n_in + n_out))
        else:
            raise ValueError(f"unknown init {init!r}")
        rng = rng or np.random.default_rng(0)
        self.params["w"] = rng.uniform(-limit, limit, size=(n_out, n_in))
        self.params["b"] = np.zeros(n_out)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"expected [B,{self.n_in}], got {x.shape}", layer=self.name)
        self._cache = x
        return x @ self.params["w"].T + self.params["b"]

    def backward(self, gy):
        x = self._require_cache()
        self.grads["w"] = gy.T @ x
        self.grads["b"] = gy.sum(axis=0)
        return gy @ self.params["w"]


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, 0.0)

    def backward(self, gy):
        mask = self._require_cache()
        return np.where(mask, gy, 0.0)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x):
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._cache = y
        return y

    def backward(self, gy):
        y = self._require_cache()
        return gy * y * (1.0 - y)


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        shape = self._require_cache()
        return gy.reshape(shape)


class Reshape(Layer):
    """[B, n] -> [B, *target]; product(target) must equal n."""

    kind = "reshape"

    def __init__(self, target, name=None):
        super().__init__(name)
        self.target = tuple(target)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != int(np.prod(self.target)):
            raise ShapeError(
                f"cannot reshape {x.shape} to [B,{self.target}]", layer=self.name)
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.target)

    def backward(self, gy):
        shape = self._require_cache()
        return gy.reshape(shape)


class Sequential:
    """Ordered layer chain with chained forward/backward."""

    def __init__(self, layers, name="net"):
        self.name = name
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, gy):
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
        return gy

    def trace(self, x):
        """Forward pass returning every intermediate output, for diagnostics."""
        outs = []
        for layer in self.layers:
            x = layer.forward(x)
            outs.append((layer.name, x))
        return outs

    def named_params(self):
        out = []
        for layer in self.layers:
            for pname, arr in layer.params.items():
                out.append((f"{layer.name}.{pname}", layer, pname, arr))
        return out

    def parameters(self):
        return {name: arr for name, _, _, arr in self.named_params()}

    def gradients(self):
        out = {}
        for layer in self.layers:
            for pname in layer.params:
                out[f"{layer.name}.{pname}"] = layer.grads.get(pname)
        return out

    def load_parameters(self, tensors: dict[str, np.ndarray]):
        for name, layer, pname, arr in self.named_params():
            if name not in tensors:
                raise ShapeError(f"checkpoint missing tensor '{name}'")
            src = tensors[name]
            if src.shape != arr.shape:
                raise ShapeError(
                    f"tensor '{name}' has shape {src.shape}, expected {arr.shape}")
            layer.params[pname] = src.copy()

    def first_nonfinite_layer(self, x):
        """Name of the first layer whose output contains NaN/Inf, or None."""
        for name, out in self.trace(x):
            if not np.isfinite(out).all():
                return name
        return None


# ---------------------------------------------------------------------------
# Losses

def mse_loss(x, xhat):
    """Mean squared error over every element; returns (loss, grad wrt xhat)."""
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ShapeError(f"mse_loss shape mismatch {x.shape} vs {xhat.shape}")
    diff = xhat - x
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad


# ---------------------------------------------------------------------------
# Adam

def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """In-place bias-corrected Adam update for one parameter tensor."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


class Adam:
    """Adam with bias correction; defaults beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def step(self, params_and_grads):
        """params_and_grads: iterable of (param array, grad array); updates in place."""
        self.t += 1
        for param, grad in params_and_grads:
            key = id(param)
            if key not in self._m:
                self._m[key] = np.zeros_like(param)
                self._v[key] = np.zeros_like(param)
            adam_update(param, grad, self._m[key], self._v[key], self.t,
                        self.lr, self.beta1, self.beta2, self.eps)


# ---------------------------------------------------------------------------
# Single-instance functional wrappers

def conv3x3_forward(x, w, b):
    """x [C,H,W], w [C_out,C,3,3], b [C_out] -> [C_out,H,W]."""
    xb, had_batch = _as_batched(x, 3)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 4 or w.shape[1] != xb.shape[1] or w.shape[2:] != (3, 3):
        raise ShapeError(f"weights {w.shape} incompatible with input {x.shape}",
                         layer="conv3x3")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias {b.shape} incompatible with weights {w.shape}",
                         layer="conv3x3")
    y = kernels.conv3x3_forward(xb, w, b)
    return y if had_batch else y[0]


def maxpool2x2_forward(x):
    """x [C,H,W] (even H,W) -> (pooled [C,H/2,W/2], argmax indices)."""
    xb, had_batch = _as_batched(x, 3)
    if xb.shape[2] % 2 or xb.shape[3] % 2:
        raise ShapeError(f"maxpool2x2 needs even extents, got {x.shape}",
                         layer="maxpool2x2")
    y, idx = kernels.maxpool2x2_forward(xb)
    return (y, idx) if had_batch else (y[0], idx[0])


def upsample2x_bilinear(x):
    """x [C,H,W] -> [C,2H,2W] (align-corners=false)."""
    xb, had_batch = _as_batched(x, 3)
    y = kernels.upsample2x_forward(xb)
    return y if had_batch else y[0]


def upsample2x_backward(gy):
    """Adjoint of upsample2x_bilinear."""
    gb, had_batch = _as_batched(gy, 3)
    gx = kernels.upsample2x_backward(gb)
    return gx if had_batch else gx[0]


def dense_forward(x, w, b):
    """x [n], w [m,n], b [m] -> [m]."""
    xb, had_batch = _as_batched(x, 1)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != xb.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"dense shapes: x {x.shape}, w {w.shape}, b {b.shape}",
                         layer="dense")
    y = xb @ w.T + b
    return y if had_batch else y[0]
