"""Controllers map a batch of observations ``(batch, obs_dim)`` to controls ``(batch, control_dim)``."""
from __future__ import annotations

import dataclasses
import json
from typing import List, Sequence, Tuple

import numpy as np

ACTIVATIONS = ("tanh", "linear")


class DimensionMismatch(ValueError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class NNWeights:
    """Dense layers ``h = act(W h + b)``; ``W`` is ``(out, in)``, last layer linear."""

    layers: Tuple[Tuple[np.ndarray, np.ndarray, str], ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        fixed = []
        prev = None
        for i, (w, b, act) in enumerate(self.layers):
            w = np.atleast_2d(np.asarray(w, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if act not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {act!r}")
            if b.shape != (w.shape[0],):
                raise DimensionMismatch(f"layer {i}: bias {b.shape} does not match weights {w.shape}")
            if prev is not None and w.shape[1] != prev:
                raise DimensionMismatch(f"layer {i}: expects {w.shape[1]} inputs, previous layer gives {prev}")
            prev = w.shape[0]
            w.setflags(write=False)
            b.setflags(write=False)
            fixed.append((w, b, act))
        if fixed[-1][2] != "linear":
            raise ValueError("the final layer must be linear")
        object.__setattr__(self, "layers", tuple(fixed))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @classmethod
    def from_dict(cls, data: dict) -> "NNWeights":
        return cls(tuple((layer["w"], layer["b"], layer.get("act", "tanh")) for layer in data["layers"]))

    def to_dict(self) -> dict:
        return {"layers": [{"w": w.tolist(), "b": b.tolist(), "act": act} for w, b, act in self.layers]}

    @classmethod
    def load(cls, path) -> "NNWeights":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)


def nn_forward(w: NNWeights, inputs) -> np.ndarray:
    """Evaluate the network on one input vector or a batch ``(batch, input_dim)``.

    Uses ``einsum`` rather than BLAS so each row's result does not depend on
    the batch it is evaluated in.
    """
    h = np.asarray(inputs, dtype=float)
    single = h.ndim == 1
    h = np.atleast_2d(h)
    if h.shape[-1] != w.input_dim:
        raise DimensionMismatch(f"network expects {w.input_dim} inputs, got {h.shape[-1]}")
    for weight, bias, act in w.layers:
        h = np.einsum("oi,bi->bo", weight, h) + bias
        if act == "tanh":
            h = np.tanh(h)
    return h[0] if single else h


class NNController:
    """``u = output_scale * NN((y - input_offset) * input_scale)``, clipped to ``output_clip``."""

    def __init__(self, weights: NNWeights, input_offset=0.0, input_scale=1.0,
                 output_scale=1.0, output_clip=None):
        self.weights = weights
        self.input_offset = np.asarray(input_offset, dtype=float)
        self.input_scale = np.asarray(input_scale, dtype=float)
        self.output_scale = np.asarray(output_scale, dtype=float)
        self.output_clip = output_clip

    def __call__(self, y: np.ndarray) -> np.ndarray:
        u = nn_forward(self.weights, (y - self.input_offset) * self.input_scale) * self.output_scale
        if self.output_clip is not None:
            u = np.clip(u, -self.output_clip, self.output_clip)
        return u


class ConstantController:
    def __init__(self, u: Sequence[float]):
        self.u = np.atleast_1d(np.asarray(u, dtype=float))

    def __call__(self, y):
        return np.broadcast_to(self.u, (y.shape[0], self.u.size)).copy()


class LinearFeedback:
    """``u = K y``."""

    def __init__(self, gain):
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.gain, 2))

    def __call__(self, y):
        return np.einsum("ij,bj->bi", self.gain, y)


class TanhFeedback:
    """``u = scale * tanh(gain * y)`` componentwise; Lipschitz constant ``|scale * gain|``."""

    def __init__(self, gain: float, scale: float = 1.0):
        self.gain = float(gain)
        self.scale = float(scale)

    @property
    def lipschitz(self) -> float:
        return abs(self.gain * self.scale)

    def __call__(self, y):
        return self.scale * np.tanh(self.gain * y)


def random_tanh_network(sizes: List[int], rng: np.random.Generator, scale: float = 1.0) -> NNWeights:
    """Glorot-style random dense tanh network with a linear output layer."""
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = rng.normal(0.0, scale / np.sqrt(n_in), size=(n_out, n_in))
        act = "linear" if i == len(sizes) - 2 else "tanh"
        layers.append((w, np.zeros(n_out), act))
    return NNWeights(tuple(layers))
