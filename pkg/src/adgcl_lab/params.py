"""Named float arrays for the three learnable parameter sets, plus checkpoint I/O.

Checkpoint keys are dotted: ``encoder.input.w``, ``encoder.layer0.w1``,
``head.w2``, ``augmenter.gnn.layer3.b1``, ``augmenter.edge_mlp.w1`` ...  A
checkpoint is a plain ``.npz`` archive of those arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Tape, Tensor


class ParamError(ValueError):
    pass


@dataclass
class ParamSet:
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def watch(self, tape: Tape) -> dict[str, Tensor]:
        return {k: tape.watch(Tensor._wrap(v)) for k, v in self.arrays.items()}

    def constants(self) -> dict[str, Tensor]:
        return {k: Tensor._wrap(v) for k, v in self.arrays.items()}

    def replace(self, arrays: Mapping[str, np.ndarray]):
        new = self.copy()
        for k, v in arrays.items():
            if k not in new.arrays:
                raise ParamError(f"unknown parameter {k!r}")
            if np.shape(v) != new.arrays[k].shape:
                raise ParamError(f"{k}: shape {np.shape(v)} != {new.arrays[k].shape}")
            new.arrays[k] = np.array(v, dtype=np.float64)
        return new

    def copy(self):
        clone = type(self).__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.arrays = {k: v.copy() for k, v in self.arrays.items()}
        return clone

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays.values())

    def equals(self, other: "ParamSet") -> bool:
        """Bitwise equality of every array."""
        return self.arrays.keys() == other.arrays.keys() and all(
            np.array_equal(v, other.arrays[k]) and v.tobytes() == other.arrays[k].tobytes()
            for k, v in self.arrays.items()
        )

    def num_params(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def prefixed(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.{k}": v for k, v in self.arrays.items()}


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class EncoderParams(ParamSet):
    """Input embedding, then ``num_layers`` GIN layers with 2-layer MLPs."""

    @property
    def num_layers(self) -> int:
        return sum(1 for k in self.arrays if k.endswith(".w1") and k.startswith("layer"))

    @property
    def in_dim(self) -> int:
        return int(self.arrays["input.w"].shape[0])

    @property
    def hidden_dim(self) -> int:
        return int(self.arrays["input.w"].shape[1])

    @property
    def edge_dim(self) -> int:
        we = self.arrays.get("layer0.we")
        return 0 if we is None else int(we.shape[0])

    def validate(self) -> None:
        d = self.hidden_dim
        if self.num_layers < 1:
            raise ParamError("encoder needs at least one layer")
        for k in range(self.num_layers):
            for name, shape in (("w1", (d, d)), ("b1", (1, d)), ("w2", (d, d)), ("b2", (1, d))):
                arr = self.arrays.get(f"layer{k}.{name}")
                if arr is None or arr.shape != shape:
                    raise ParamError(f"layer{k}.{name}: expected shape {shape}")


def init_encoder(
    in_dim: int, hidden_dim: int = 32, num_layers: int = 5, edge_dim: int = 0, seed: int = 0
) -> EncoderParams:
    if num_layers < 1:
        raise ParamError("num_layers must be >= 1")
    rng = np.random.default_rng(seed)
    d = hidden_dim
    arrays = {"input.w": glorot(rng, in_dim, d), "input.b": np.zeros((1, d))}
    for k in range(num_layers):
        arrays[f"layer{k}.w1"] = glorot(rng, d, d)
        arrays[f"layer{k}.b1"] = np.zeros((1, d))
        arrays[f"layer{k}.w2"] = glorot(rng, d, d)
        arrays[f"layer{k}.b2"] = np.zeros((1, d))
        if edge_dim:
            arrays[f"layer{k}.we"] = glorot(rng, edge_dim, d)
    return EncoderParams(arrays)


class HeadParams(ParamSet):
    @property
    def dim(self) -> int:
        return int(self.arrays["w1"].shape[0])


def init_head(hidden_dim: int = 32, seed: int = 0) -> HeadParams:
    rng = np.random.default_rng(seed)
    d = hidden_dim
    return HeadParams(
        {
            "w1": glorot(rng, d, d),
            "b1": np.zeros((1, d)),
            "w2": glorot(rng, d, d),
            "b2": np.zeros((1, d)),
        }
    )


class AugmenterParams(ParamSet):
    """A GNN (``gnn.*`` keys, encoder layout) plus an edge MLP 2d -> d -> 1."""

    def gnn_view(self) -> EncoderParams:
        return EncoderParams({k[4:]: v for k, v in self.arrays.items() if k.startswith("gnn.")})

    @property
    def hidden_dim(self) -> int:
        return int(self.arrays["gnn.input.w"].shape[1])


def init_augmenter(
    in_dim: int, hidden_dim: int = 32, num_layers: int = 5, edge_dim: int = 0, seed: int = 0
) -> AugmenterParams:
    gnn = init_encoder(in_dim, hidden_dim, num_layers, edge_dim, seed)
    rng = np.random.default_rng([seed, 1])
    d = hidden_dim
    arrays = {f"gnn.{k}": v for k, v in gnn.arrays.items()}
    arrays.update(
        {
            "edge_mlp.w1": glorot(rng, 2 * d, d),
            "edge_mlp.b1": np.zeros((1, d)),
            "edge_mlp.w2": glorot(rng, d, 1),
            "edge_mlp.b2": np.zeros((1, 1)),
        }
    )
    return AugmenterParams(arrays)


def save_checkpoint(path, **sets: ParamSet) -> Path:
    """Write ``name.key`` -> array for every given set into one ``.npz``."""
    path = Path(path)
    flat: dict[str, np.ndarray] = {}
    for name, ps in sets.items():
        flat.update(ps.prefixed(name))
    with open(path, "wb") as fh:
        np.savez(fh, **flat)
    return path


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as data:
        return {k: np.array(data[k], dtype=np.float64) for k in data.files}


def extract(flat: Mapping[str, np.ndarray], prefix: str, cls=ParamSet):
    sub = {k[len(prefix) + 1 :]: v for k, v in flat.items() if k.startswith(prefix + ".")}
    if not sub:
        raise ParamError(f"checkpoint has no {prefix!r} parameters")
    return cls(sub)
