"""Trainable convolutional network: per-variable subnets, explicit backprop, Adam.

Each solution variable is emitted by its own subnet of three hidden 5x5
convolution layers plus a linear 5x5 output layer (stride 1, zero padding
2, so the lattice shape is preserved).  Parameters are disjoint across
subnets.  The forward pass retains layer inputs and activations so the
backward pass can produce exact gradients without a framework; gradients
flow on through the fixed stencil operators and boundary enforcement via
their adjoints (see stencil / bcpad).

Weights are initialized i.i.d. uniform on
(-sqrt(1/(25 c_in)), +sqrt(1/(25 c_in))) with the layer's own input
channel count, biases start at zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL = 5
PAD = KERNEL // 2


class ModelError(RuntimeError):
    pass


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "swish":
        return z * _sigmoid(z)
    if name == "identity":
        return z
    raise ModelError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative from the pre-activation z and the activation output a."""
    if name == "relu":
        return (a > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a * a
    if name == "swish":
        s = _sigmoid(z)
        return s + a * (1.0 - s)
    if name == "identity":
        return np.ones_like(a)
    raise ModelError(f"unknown activation {name!r}")


def _circular_ext(x: np.ndarray) -> np.ndarray:
    """Wrap the owner columns (period W - 1; last column is the seam copy)."""
    owners = x[..., :-1]
    ext = np.concatenate([owners[..., -PAD:], owners, owners[..., :PAD]], axis=-1)
    return np.pad(ext, ((0, 0), (0, 0), (PAD, PAD), (0, 0)))


def conv2d(x: np.ndarray, w: np.ndarray, pad_xi: str = "zeros") -> np.ndarray:
    """Same-shape 5x5 convolution: x (B, C, H, W), w (Co, C, 5, 5).

    ``pad_xi='circular'`` wraps columns around the periodic cut of a
    seam-duplicated lattice (rows stay zero-padded); the output's last
    column mirrors its first, like every shared-seam field.
    """
    if pad_xi == "zeros":
        xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
        win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
        out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, H, W, Co)
        return np.ascontiguousarray(np.moveaxis(out, 3, 1))
    if pad_xi != "circular":
        raise ModelError(f"unknown column padding mode {pad_xi!r}")
    win = sliding_window_view(_circular_ext(x), (KERNEL, KERNEL), axis=(2, 3))
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    out = np.ascontiguousarray(np.moveaxis(out, 3, 1))
    return np.concatenate([out, out[..., :1]], axis=-1)


def conv2d_backward(x: np.ndarray, w: np.ndarray, grad_out: np.ndarray,
                    pad_xi: str = "zeros"):
    """Gradients of ``conv2d`` w.r.t. x and w given upstream grad_out."""
    w_t = np.ascontiguousarray(np.flip(w, axis=(2, 3)).transpose(1, 0, 2, 3))
    if pad_xi == "zeros":
        xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
        win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))  # (B,C,H,W,5,5)
        grad_w = np.tensordot(grad_out, win, axes=([0, 2, 3], [0, 2, 3]))
        grad_x = conv2d(grad_out, w_t)
        return grad_x, grad_w
    g = grad_out.copy()
    g[..., 0] += g[..., -1]  # adjoint of the seam copy
    g_own = g[..., :-1]
    win = sliding_window_view(_circular_ext(x), (KERNEL, KERNEL), axis=(2, 3))
    grad_w = np.tensordot(g_own, win, axes=([0, 2, 3], [0, 2, 3]))
    ge = np.concatenate([g_own[..., -PAD:], g_own, g_own[..., :PAD]], axis=-1)
    gp = np.pad(ge, ((0, 0), (0, 0), (PAD, PAD), (0, 0)))
    win_g = sliding_window_view(gp, (KERNEL, KERNEL), axis=(2, 3))
    gx_own = np.tensordot(win_g, w_t, axes=([1, 4, 5], [1, 2, 3]))
    gx_own = np.ascontiguousarray(np.moveaxis(gx_own, 3, 1))
    grad_x = np.concatenate([gx_own, np.zeros_like(gx_own[..., :1])], axis=-1)
    return grad_x, grad_w


@dataclass
class ConvLayer:
    weights: np.ndarray  # (c_out, c_in, 5, 5)
    bias: np.ndarray  # (c_out,)
    activation: str = "identity"

    @classmethod
    def zeros(cls, c_in: int, c_out: int, activation: str = "identity") -> "ConvLayer":
        return cls(
            weights=np.zeros((c_out, c_in, KERNEL, KERNEL)),
            bias=np.zeros(c_out),
            activation=activation,
        )


class Subnet:
    """Three hidden conv layers plus a linear conv output for one variable."""

    def __init__(self, variable: str, c_in: int, hidden: tuple[int, ...] = (16, 16, 16),
                 activation: str = "relu", pad_xi: str = "zeros"):
        if len(hidden) != 3:
            raise ModelError("subnets carry exactly three hidden layers")
        self.variable = variable
        self.activation = activation
        self.pad_xi = pad_xi
        widths = (c_in, *hidden)
        self.layers = [
            ConvLayer.zeros(widths[k], widths[k + 1], activation) for k in range(3)
        ]
        self.layers.append(ConvLayer.zeros(hidden[-1], 1, "identity"))
        self._cache: list[tuple[np.ndarray, np.ndarray]] | None = None

    def forward(self, x: np.ndarray, retain: bool = True) -> np.ndarray:
        cache = []
        for layer in self.layers:
            z = conv2d(x, layer.weights, self.pad_xi) + layer.bias[None, :, None, None]
            a = _act(layer.activation, z)
            if retain:
                cache.append((x, z, a))
            x = a
        self._cache = cache if retain else None
        return x

    def backward(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        if self._cache is None:
            raise ModelError(
                f"subnet {self.variable!r}: no retained activations; run forward first"
            )
        grads: dict[str, np.ndarray] = {}
        g = grad_out
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            x, z, a = self._cache[k]
            gz = g * _act_grad(layer.activation, z, a)
            grads[f"layer{k}/bias"] = gz.sum(axis=(0, 2, 3))
            g, gw = conv2d_backward(x, layer.weights, gz, self.pad_xi)
            grads[f"layer{k}/weights"] = gw
        self._cache = None
        return grads


class ConvNet:
    """One subnet per solution variable, evaluated independently."""

    def __init__(self, variables: tuple[str, ...], c_in: int,
                 hidden: tuple[int, ...] = (16, 16, 16), activation: str = "relu",
                 pad_xi: str = "zeros"):
        self.variables = tuple(variables)
        self.c_in = c_in
        self.hidden = tuple(hidden)
        self.activation = activation
        self.pad_xi = pad_xi
        self.subnets = [Subnet(v, c_in, self.hidden, activation, pad_xi)
                        for v in self.variables]

    def forward(self, x: np.ndarray, retain: bool = True) -> np.ndarray:
        """x (B, c_in, H, W) -> raw outputs (B, n_vars, H, W)."""
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ModelError(f"expected input (B, {self.c_in}, H, W), got {x.shape}")
        outs = [net.forward(x, retain) for net in self.subnets]
        return np.concatenate(outs, axis=1)

    def backward(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        """Exact parameter gradients from the loss gradient at the raw outputs."""
        grads: dict[str, np.ndarray] = {}
        for k, net in enumerate(self.subnets):
            sub = net.backward(grad_out[:, k : k + 1])
            for name, g in sub.items():
                grads[f"{net.variable}/{name}"] = g
        return grads

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        params = []
        for net in self.subnets:
            for k, layer in enumerate(net.layers):
                params.append((f"{net.variable}/layer{k}/weights", layer.weights))
                params.append((f"{net.variable}/layer{k}/bias", layer.bias))
        return params


def init_weights(net: ConvNet, seed: int) -> ConvNet:
    """Uniform fan-in initialization, deterministic in the seed; biases zero."""
    rng = np.random.default_rng(seed)
    for sub in net.subnets:
        for layer in sub.layers:
            c_in = layer.weights.shape[1]
            bound = np.sqrt(1.0 / (KERNEL * KERNEL * c_in))
            layer.weights[...] = rng.uniform(-bound, bound, size=layer.weights.shape)
            layer.bias[...] = 0.0
    return net


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: list[tuple[str, np.ndarray]],
              grads: dict[str, np.ndarray]) -> None:
    """One in-place Adam update with bias-corrected moments."""
    state.step += 1
    t = state.step
    for name, p in params:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise ModelError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Checkpointing: versioned, byte-deterministic (no timestamps, fixed order).
# ---------------------------------------------------------------------------

_MAGIC = b"GEOPINN-CKPT-1\n"


def save_checkpoint(path, net: ConvNet, state: AdamState, iteration: int) -> None:
    arrays: list[tuple[str, np.ndarray]] = list(net.parameters())
    for name, _ in list(arrays):
        if name in state.m:
            arrays.append((f"adam_m/{name}", state.m[name]))
            arrays.append((f"adam_v/{name}", state.v[name]))
    header = {
        "variables": list(net.variables),
        "c_in": net.c_in,
        "hidden": list(net.hidden),
        "activation": net.activation,
        "pad_xi": net.pad_xi,
        "iteration": iteration,
        "adam": {
            "lr": state.lr,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "eps": state.eps,
            "step": state.step,
        },
        "arrays": [[name, list(a.shape)] for name, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=np.float64).tobytes())


def load_checkpoint(path) -> tuple[ConvNet, AdamState, int]:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ModelError(f"{path}: not a checkpoint file")
        n = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(n).decode())
        net = ConvNet(
            tuple(header["variables"]),
            header["c_in"],
            tuple(header["hidden"]),
            header["activation"],
            header.get("pad_xi", "zeros"),
        )
        adam = header["adam"]
        state = AdamState(
            lr=adam["lr"], beta1=adam["beta1"], beta2=adam["beta2"],
            eps=adam["eps"], step=adam["step"],
        )
        params = dict(net.parameters())
        for name, shape in header["arrays"]:
            a = np.frombuffer(fh.read(8 * int(np.prod(shape))), dtype=np.float64)
            a = a.reshape(shape).copy()
            if name.startswith("adam_m/"):
                state.m[name[len("adam_m/") :]] = a
            elif name.startswith("adam_v/"):
                state.v[name[len("adam_v/") :]] = a
            else:
                params[name][...] = a
    return net, state, int(header["iteration"])
