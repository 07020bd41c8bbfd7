"""InfoNCE estimate over cosine similarities and the min-max loss pair."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import (
    Tensor,
    TensorError,
    as_tensor,
    exp,
    expand_cols,
    log,
    logsumexp,
    matmul,
    mean,
    transpose,
    tsum,
)

ZERO_NORM = 1e-12


def normalize_rows(z: Tensor, name: str = "z") -> Tensor:
    z = as_tensor(z)
    sq = tsum(z * z, axis=1, keepdims=True)
    norms = np.sqrt(sq.data.reshape(-1))
    bad = np.flatnonzero(norms < ZERO_NORM)
    if bad.size:
        raise TensorError(f"{name}: row {int(bad[0])} has zero norm")
    # 1/||z|| = exp(-log(||z||^2) / 2)
    inv = exp(log(sq) * -0.5)
    return z * expand_cols(inv, z.shape[1])


def cosine_similarity_matrix(z1, z2) -> Tensor:
    z1, z2 = as_tensor(z1), as_tensor(z2)
    if z1.ndim != 2 or z2.ndim != 2 or z1.shape[1] != z2.shape[1]:
        raise TensorError(f"cosine_similarity_matrix: shapes {z1.shape} and {z2.shape}")
    return matmul(normalize_rows(z1, "z1"), transpose(normalize_rows(z2, "z2")))


def info_nce_from_similarity(sim: Tensor) -> Tensor:
    m = sim.shape[0]
    if sim.ndim != 2 or sim.shape[1] != m:
        raise TensorError(f"info_nce: similarity must be square, got {sim.shape}")
    if m < 2:
        raise TensorError("info_nce: need at least 2 pairs")
    eye = np.eye(m)
    positive = tsum(sim * Tensor._wrap(eye), axis=1)
    # negatives z_{i',2} for i' != i only; the positive is not in the denominator
    negatives = logsumexp(sim, axis=1, mask=eye == 0)
    return mean(positive - negatives)


def info_nce(z1, z2) -> Tensor:
    """Minibatch InfoNCE estimate; rows of ``z1`` are anchors, rows of ``z2`` views."""
    z1, z2 = as_tensor(z1), as_tensor(z2)
    if z1.shape[0] != z2.shape[0]:
        raise TensorError(f"info_nce: {z1.shape[0]} anchors vs {z2.shape[0]} views")
    return info_nce_from_similarity(cosine_similarity_matrix(z1, z2))


def nce_bounds(m: int) -> tuple[float, float]:
    """Range forced by cosine similarities in [-1, 1]."""
    c = math.log(m - 1)
    return -2.0 - c, 2.0 - c


@dataclass
class LossBundle:
    """``encoder_loss`` is descended by the encoder and head.

    ``augmenter_loss`` is descended by the augmenter: it equals
    ``nce + lambda_reg * reg``, i.e. the negation of the contrastive loss
    minus the drop penalty (``-nce - lambda_reg * reg``), which the augmenter
    climbs.
    """

    nce: Tensor
    reg: Tensor
    lambda_reg: float
    encoder_loss: Tensor
    augmenter_loss: Tensor
    augmenter_objective: Tensor

    def values(self) -> dict[str, float]:
        return {
            "nce": float(self.nce.data),
            "reg": float(self.reg.data),
            "encoder_loss": float(self.encoder_loss.data),
            "augmenter_loss": float(self.augmenter_loss.data),
        }


def assemble_losses(nce, reg, lambda_reg: float) -> LossBundle:
    nce, reg = as_tensor(nce), as_tensor(reg)
    if lambda_reg < 0 or not math.isfinite(lambda_reg):
        raise TensorError(f"lambda_reg must be finite and >= 0, got {lambda_reg}")
    if not (np.all(np.isfinite(nce.data)) and np.all(np.isfinite(reg.data))):
        raise TensorError("assemble_losses: non-finite input")
    encoder_loss = -nce
    penalty = reg * float(lambda_reg)
    objective = encoder_loss - penalty
    return LossBundle(
        nce=nce,
        reg=reg,
        lambda_reg=float(lambda_reg),
        encoder_loss=encoder_loss,
        augmenter_loss=nce + penalty,
        augmenter_objective=objective,
    )
