"""Small fully-connected ReLU network with manual backprop, Adam, and a
plain-text checkpoint format."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_HEADER = "aoimec-mlp 1"


class CheckpointError(ValueError):
    pass


@dataclass
class NetworkParams:
    weights: list          # W[i] has shape (fan_in, fan_out)
    biases: list

    @property
    def sizes(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def copy_from(self, other: "NetworkParams") -> None:
        for dst, src in zip(self.arrays(), other.arrays()):
            dst[...] = src


def init(sizes, rng: np.random.Generator) -> NetworkParams:
    """He-normal weights (std sqrt(2/fan_in)), zero biases."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    weights = [rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
               for fan_in, fan_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
    return NetworkParams(weights, biases)


def forward(params: NetworkParams, x, cache: bool = False):
    """Affine -> ReLU for hidden layers, affine output.

    ``x`` is one input vector or a batch (rows).  With ``cache=True`` also
    returns the per-layer inputs needed by :func:`backward`.
    """
    h = np.asarray(x, dtype=float)
    if h.shape[-1] != params.weights[0].shape[0]:
        raise ValueError(f"input width {h.shape[-1]} != {params.weights[0].shape[0]}")
    inputs = []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return (h, inputs) if cache else h


def backward(params: NetworkParams, inputs: list, grad_out) -> NetworkParams:
    """Gradients of a scalar loss given dLoss/dOutput (same shape as the output)."""
    g = np.asarray(grad_out, dtype=float)
    batched = g.ndim == 2
    gw, gb = [None] * len(params.weights), [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        a = inputs[i]
        if batched:
            gw[i] = a.T @ g
            gb[i] = g.sum(axis=0)
        else:
            gw[i] = np.outer(a, g)
            gb[i] = g.copy()
        if i > 0:
            # inputs[i] is the ReLU output of layer i-1; zero where it was clipped
            g = (g @ params.weights[i].T) * (a > 0)
    return NetworkParams(gw, gb)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: NetworkParams, **hyper) -> "AdamState":
        arrays = params.arrays()
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays], **hyper)


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState):
    """Bias-corrected Adam update, applied in place."""
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# --------------------------------------------------------------------------
# checkpoints


def dumps(params: NetworkParams) -> str:
    lines = [FORMAT_HEADER, "sizes " + " ".join(str(s) for s in params.sizes)]
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        lines.append(f"weight {i} {w.shape[0]} {w.shape[1]}")
        lines += [" ".join(repr(float(x)) for x in row) for row in w]
        lines.append(f"bias {i} {b.shape[0]}")
        lines.append(" ".join(repr(float(x)) for x in b))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str, expected_sizes=None) -> NetworkParams:
    lines = text.splitlines()
    pos = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(lines):
            raise CheckpointError(f"line {pos + 1}: unexpected end of file, expected {what}")
        pos += 1
        return pos, lines[pos - 1]

    def floats(lineno: int, line: str, count: int) -> np.ndarray:
        try:
            vals = np.array([float(t) for t in line.split()], dtype=float)
        except ValueError:
            raise CheckpointError(f"line {lineno}: non-numeric value") from None
        if vals.size != count:
            raise CheckpointError(f"line {lineno}: expected {count} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise CheckpointError(f"line {lineno}: non-finite value")
        return vals

    lineno, line = take("header")
    if line.strip() != FORMAT_HEADER:
        raise CheckpointError(f"line {lineno}: bad header {line!r}")
    lineno, line = take("sizes")
    parts = line.split()
    try:
        if parts[0] != "sizes":
            raise ValueError
        sizes = tuple(int(t) for t in parts[1:])
    except (ValueError, IndexError):
        raise CheckpointError(f"line {lineno}: malformed sizes line") from None
    if expected_sizes is not None and tuple(expected_sizes) != sizes:
        raise CheckpointError(f"line {lineno}: sizes {sizes} != expected {tuple(expected_sizes)}")
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        lineno, line = take(f"weight {i}")
        if line.split() != ["weight", str(i), str(fan_in), str(fan_out)]:
            raise CheckpointError(f"line {lineno}: expected 'weight {i} {fan_in} {fan_out}'")
        w = np.empty((fan_in, fan_out))
        for r in range(fan_in):
            w[r] = floats(*take(f"weight row {r}"), fan_out)
        lineno, line = take(f"bias {i}")
        if line.split() != ["bias", str(i), str(fan_out)]:
            raise CheckpointError(f"line {lineno}: expected 'bias {i} {fan_out}'")
        b = floats(*take("bias values"), fan_out)
        weights.append(w)
        biases.append(b)
    lineno, line = take("end")
    if line.strip() != "end":
        raise CheckpointError(f"line {lineno}: expected 'end'")
    return NetworkParams(weights, biases)


def save(params: NetworkParams, path) -> None:
    Path(path).write_text(dumps(params))


def load(path, expected_sizes=None) -> NetworkParams:
    return loads(Path(path).read_text(), expected_sizes)
