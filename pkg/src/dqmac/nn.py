"""Minimal differentiable network core, double precision, numpy only.

The Q-network is: dense(tanh) -> LSTM cell -> {value head, advantage head}
-> Q(a) = V + A(a).  Widths are a pure function of (num_channels K,
input_layer_width H_in, hidden_width H): the input has 2K+2 entries, both
heads use one tanh layer of width H//2, the value head emits a scalar and
the advantage head K+1 entries.

Everything operates on arrays whose last axis is the feature axis, so the
same code runs a single user (shape ``(features,)``) or a batch of user
sequences (shape ``(batch, features)``).  Gradients come from explicit
backpropagation through time over a whole episode; see
:func:`backward_bptt`.  Correctness is pinned by central finite differences
in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

CHECKPOINT_MAGIC = b"DQMACNET"
CHECKPOINT_VERSION = 1

# Serialization/optimizer order of the parameter arrays.
PARAM_NAMES = (
    "wd", "bd",      # input dense
    "wl", "bl",      # LSTM cell, gate order [input | forget | output | candidate]
    "wv1", "bv1", "wv2", "bv2",  # value head
    "wa1", "ba1", "wa2", "ba2",  # advantage head
)


@dataclass
class LstmState:
    """Recurrent state: hidden vector h and cell vector c, last axis H."""

    h: np.ndarray
    c: np.ndarray


@dataclass
class NetworkParams:
    """All weights of one Q-network."""

    num_channels: int
    input_layer_width: int
    hidden_width: int
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def input_size(self) -> int:
        return 2 * self.num_channels + 2

    @property
    def output_size(self) -> int:
        return self.num_channels + 1

    @property
    def head_width(self) -> int:
        return max(1, self.hidden_width // 2)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        i, hin, h, hh = self.input_size, self.input_layer_width, self.hidden_width, self.head_width
        k1 = self.output_size
        return {
            "wd": (i, hin), "bd": (hin,),
            "wl": (hin + h, 4 * h), "bl": (4 * h,),
            "wv1": (h, hh), "bv1": (hh,), "wv2": (hh, 1), "bv2": (1,),
            "wa1": (h, hh), "ba1": (hh,), "wa2": (hh, k1), "ba2": (k1,),
        }

    def num_parameters(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes().values())


def init_params(num_channels: int, input_layer_width: int, hidden_width: int,
                rng: np.random.Generator) -> NetworkParams:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases.

    The forget-gate bias is set to 1.0 so the cell initially remembers.
    """
    params = NetworkParams(num_channels, input_layer_width, hidden_width)
    arrays = {}
    for name, shape in params.shapes().items():
        if name.startswith("b"):
            arrays[name] = np.zeros(shape)
        else:
            limit = 1.0 / np.sqrt(shape[0])
            arrays[name] = rng.uniform(-limit, limit, size=shape)
    h = hidden_width
    arrays["bl"][h:2 * h] = 1.0
    params.arrays = arrays
    return params


def zero_like_params(params: NetworkParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.arrays.items()}


def clone_params(params: NetworkParams) -> NetworkParams:
    """Deep copy; mutating one side never affects the other."""
    return NetworkParams(
        params.num_channels, params.input_layer_width, params.hidden_width,
        {name: arr.copy() for name, arr in params.arrays.items()},
    )


def copy_into(dst: NetworkParams, src: NetworkParams) -> None:
    """Copy src's weights into dst's existing buffers."""
    if dst.shapes() != src.shapes():
        raise ShapeError("parameter layouts differ")
    for name in PARAM_NAMES:
        np.copyto(dst.arrays[name], src.arrays[name])


def params_equal(a: NetworkParams, b: NetworkParams) -> bool:
    return all(np.array_equal(a.arrays[n], b.arrays[n]) for n in PARAM_NAMES)


def initial_lstm_state(params: NetworkParams, batch: int | None = None) -> LstmState:
    h = params.hidden_width
    shape = (h,) if batch is None else (batch, h)
    return LstmState(h=np.zeros(shape), c=np.zeros(shape))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Exact identity, stable on both tails: logistic(x) = (1 + tanh(x/2)) / 2.
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _lstm_core(arrays: dict[str, np.ndarray], hidden: int, x: np.ndarray,
               h: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.concatenate([x, h], axis=-1)
    gates = u @ arrays["wl"] + arrays["bl"]
    i = _sigmoid(gates[..., :hidden])
    f = _sigmoid(gates[..., hidden:2 * hidden])
    o = _sigmoid(gates[..., 2 * hidden:3 * hidden])
    g = np.tanh(gates[..., 3 * hidden:])
    new_c = f * c + i * g
    return o * np.tanh(new_c), new_c


def lstm_step(params: NetworkParams, x: np.ndarray, state: LstmState) -> LstmState:
    """One cell update.  ``x`` is the dense layer's output (last axis H_in)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_layer_width:
        raise ShapeError(f"lstm input width {x.shape[-1]}, expected {params.input_layer_width}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite lstm input")
    h, c = _lstm_core(params.arrays, params.hidden_width, x, state.h, state.c)
    return LstmState(h=h, c=c)


def dueling_combine(value, advantage) -> np.ndarray:
    """Q(a) = V + A(a), elementwise with broadcast.  No mean subtraction:
    the combination is applied exactly as written, which leaves V and A
    determined only up to an additive constant (argmax is unaffected)."""
    return np.asarray(value, dtype=float) + np.asarray(advantage, dtype=float)


def forward(params: NetworkParams, x: np.ndarray, state: LstmState) -> tuple[np.ndarray, LstmState]:
    """Evaluate the network on one input; returns Q values and the new state.

    Pure function of (params, x, state): the input state is not mutated.
    """
    a = params.arrays
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_size:
        raise ShapeError(f"input width {x.shape[-1]}, expected {params.input_size}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite network input")
    z = np.tanh(x @ a["wd"] + a["bd"])
    h, c = _lstm_core(a, params.hidden_width, z, state.h, state.c)
    v1 = np.tanh(h @ a["wv1"] + a["bv1"])
    value = v1 @ a["wv2"] + a["bv2"]
    a1 = np.tanh(h @ a["wa1"] + a["ba1"])
    adv = a1 @ a["wa2"] + a["ba2"]
    return dueling_combine(value, adv), LstmState(h=h, c=c)


def forward_sequence(params: NetworkParams, xs: np.ndarray) -> np.ndarray:
    """Q values for a whole input sequence from a fresh recurrent state.

    ``xs`` has shape (T, input) or (T, batch, input); the output matches with
    the last axis replaced by K+1.
    """
    xs = np.asarray(xs, dtype=float)
    batch = xs.shape[1] if xs.ndim == 3 else None
    state = initial_lstm_state(params, batch)
    qs = np.empty(xs.shape[:-1] + (params.output_size,))
    for t in range(xs.shape[0]):
        qs[t], state = forward(params, xs[t], state)
    return qs


def _forward_with_cache(params: NetworkParams, xs: np.ndarray) -> tuple[np.ndarray, list[dict]]:
    a = params.arrays
    hgate = params.hidden_width
    batch = xs.shape[1]
    state = initial_lstm_state(params, batch)
    caches = []
    qs = np.empty((xs.shape[0], batch, params.output_size))
    for t in range(xs.shape[0]):
        x = xs[t]
        z = np.tanh(x @ a["wd"] + a["bd"])
        u = np.concatenate([z, state.h], axis=-1)
        gates = u @ a["wl"] + a["bl"]
        i = _sigmoid(gates[..., :hgate])
        f = _sigmoid(gates[..., hgate:2 * hgate])
        o = _sigmoid(gates[..., 2 * hgate:3 * hgate])
        g = np.tanh(gates[..., 3 * hgate:])
        c = f * state.c + i * g
        tc = np.tanh(c)
        h = o * tc
        v1 = np.tanh(h @ a["wv1"] + a["bv1"])
        value = v1 @ a["wv2"] + a["bv2"]
        a1 = np.tanh(h @ a["wa1"] + a["ba1"])
        adv = a1 @ a["wa2"] + a["ba2"]
        qs[t] = value + adv
        caches.append({
            "x": x, "z": z, "u": u, "i": i, "f": f, "o": o, "g": g,
            "c_prev": state.c, "c": c, "tc": tc, "h": h, "v1": v1, "a1": a1,
        })
        state = LstmState(h=h, c=c)
    return qs, caches


def backward_bptt(params: NetworkParams, xs: np.ndarray, targets: np.ndarray,
                  mask: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Gradients of the masked summed squared error over an episode.

    loss = sum over steps, batch entries and masked output entries of
    (Q - target)^2, backpropagated through both the layers and the recurrent
    state across the whole sequence.  Inputs are (T, input) or
    (T, batch, input); targets and mask match the Q output shape.

    Returns (loss, gradients keyed like ``params.arrays``).
    """
    xs = np.asarray(xs, dtype=float)
    squeeze = xs.ndim == 2
    if squeeze:
        xs = xs[:, None, :]
        targets = np.asarray(targets, dtype=float)[:, None, :]
        mask = np.asarray(mask)[:, None, :]
    else:
        targets = np.asarray(targets, dtype=float)
        mask = np.asarray(mask)
    if targets.shape != xs.shape[:-1] + (params.output_size,):
        raise ShapeError(f"targets shape {targets.shape} does not match inputs")
    if mask.shape != targets.shape:
        raise ShapeError("mask shape must match targets")
    if xs.shape[-1] != params.input_size:
        raise ShapeError(f"input width {xs.shape[-1]}, expected {params.input_size}")
    if not np.all(np.isfinite(xs)):
        raise NumericError("non-finite training inputs")

    a = params.arrays
    hin, hgate = params.input_layer_width, params.hidden_width
    qs, caches = _forward_with_cache(params, xs)

    err = np.where(mask, qs - targets, 0.0)
    loss = float(np.sum(err * err))
    if not np.isfinite(loss):
        bad = int(np.argwhere(~np.isfinite((err * err).sum(axis=(1, 2))))[0][0])
        raise NumericError(f"non-finite loss at step {bad}")

    grads = zero_like_params(params)
    dh_next = np.zeros_like(caches[-1]["h"])
    dc_next = np.zeros_like(caches[-1]["c"])
    for t in range(xs.shape[0] - 1, -1, -1):
        cc = caches[t]
        dq = 2.0 * err[t]
        # Heads: Q = V + A, so dV collects over all output entries.
        dvalue = dq.sum(axis=-1, keepdims=True)
        grads["wv2"] += cc["v1"].T @ dvalue
        grads["bv2"] += dvalue.sum(axis=0)
        dv1 = (dvalue @ a["wv2"].T) * (1.0 - cc["v1"] ** 2)
        grads["wv1"] += cc["h"].T @ dv1
        grads["bv1"] += dv1.sum(axis=0)
        grads["wa2"] += cc["a1"].T @ dq
        grads["ba2"] += dq.sum(axis=0)
        da1 = (dq @ a["wa2"].T) * (1.0 - cc["a1"] ** 2)
        grads["wa1"] += cc["h"].T @ da1
        grads["ba1"] += da1.sum(axis=0)
        dh = dv1 @ a["wv1"].T + da1 @ a["wa1"].T + dh_next
        # LSTM cell.
        do = dh * cc["tc"]
        dc = dc_next + dh * cc["o"] * (1.0 - cc["tc"] ** 2)
        di = dc * cc["g"]
        dg = dc * cc["i"]
        df = dc * cc["c_prev"]
        dc_next = dc * cc["f"]
        dgates = np.concatenate([
            di * cc["i"] * (1.0 - cc["i"]),
            df * cc["f"] * (1.0 - cc["f"]),
            do * cc["o"] * (1.0 - cc["o"]),
            dg * (1.0 - cc["g"] ** 2),
        ], axis=-1)
        grads["wl"] += cc["u"].T @ dgates
        grads["bl"] += dgates.sum(axis=0)
        du = dgates @ a["wl"].T
        dh_next = du[..., hin:]
        # Input dense.
        dz = du[..., :hin] * (1.0 - cc["z"] ** 2)
        grads["wd"] += cc["x"].T @ dz
        grads["bd"] += dz.sum(axis=0)
    return loss, grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class AdamState:
    """Adaptive-moment accumulators, one per parameter array."""

    learning_rate: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def for_params(params: NetworkParams, learning_rate: float = 3e-3,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return AdamState(
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
            m=zero_like_params(params), v=zero_like_params(params),
        )


def adam_step(params: NetworkParams, grads: dict[str, np.ndarray], opt: AdamState) -> NetworkParams:
    """One bias-corrected adaptive-moment update, in place."""
    opt.step += 1
    b1c = 1.0 - opt.beta1 ** opt.step
    b2c = 1.0 - opt.beta2 ** opt.step
    for name in PARAM_NAMES:
        g = grads[name]
        if g.shape != params.arrays[name].shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        opt.m[name] = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        opt.v[name] = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * g * g
        mhat = opt.m[name] / b1c
        vhat = opt.v[name] / b2c
        params.arrays[name] -= opt.learning_rate * mhat / (np.sqrt(vhat) + opt.eps)
    return params


def save_params(params: NetworkParams, path, config_hash: str = "") -> None:
    """Write a checkpoint.

    Layout (all integers little-endian):
      bytes 0..7    magic ``DQMACNET``
      bytes 8..11   uint32 format version (1)
      bytes 12..15  uint32 JSON header length L
      bytes 16..16+L  UTF-8 JSON: schema_version, num_channels,
                      input_layer_width, hidden_width, config_hash, and an
                      ordered ``arrays`` list of {name, shape}
      remainder     the arrays' raw little-endian float64 data, row-major,
                    concatenated in header order
    """
    header = {
        "schema_version": CHECKPOINT_VERSION,
        "num_channels": params.num_channels,
        "input_layer_width": params.input_layer_width,
        "hidden_width": params.hidden_width,
        "config_hash": config_hash,
        "arrays": [{"name": n, "shape": list(params.arrays[n].shape)} for n in PARAM_NAMES],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(np.uint32(CHECKPOINT_VERSION).tobytes())
        fh.write(np.uint32(len(blob)).tobytes())
        fh.write(blob)
        for name in PARAM_NAMES:
            fh.write(np.ascontiguousarray(params.arrays[name], dtype="<f8").tobytes())


def load_params(path) -> tuple[NetworkParams, str]:
    """Read a checkpoint written by :func:`save_params`; returns (params, config_hash)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise ConfigError(f"not a network checkpoint: bad magic {magic!r}")
        version = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        hlen = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        header = json.loads(fh.read(hlen).decode("utf-8"))
        params = NetworkParams(
            header["num_channels"], header["input_layer_width"], header["hidden_width"]
        )
        expected = params.shapes()
        for spec in header["arrays"]:
            name, shape = spec["name"], tuple(spec["shape"])
            if expected.get(name) != shape:
                raise ConfigError(f"checkpoint array {name} has shape {shape}, expected {expected.get(name)}")
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(count * 8), dtype="<f8")
            if data.size != count:
                raise ConfigError("checkpoint truncated")
            params.arrays[name] = data.reshape(shape).astype(float)
    return params, header.get("config_hash", "")
