"""Adam with bias correction, usable for descent or ascent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import TensorError

DESCENT = "descent"
ASCENT = "ascent"


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, param: np.ndarray, **hyper) -> "AdamState":
        return cls(m=np.zeros_like(param, dtype=np.float64), v=np.zeros_like(param, dtype=np.float64), **hyper)


def adam_update(
    state: AdamState, param: np.ndarray, grad: np.ndarray, direction: str = DESCENT
) -> tuple[np.ndarray, AdamState]:
    """One Adam step; returns the new parameter and a new state.

    ``direction="ascent"`` applies the same step with the opposite sign, so a
    parameter climbs its objective instead of descending it.
    """
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if not (param.shape == grad.shape == state.m.shape == state.v.shape):
        raise TensorError(
            f"adam_update: shape mismatch param {param.shape}, grad {grad.shape}, "
            f"moments {state.m.shape}/{state.v.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise TensorError("adam_update: non-finite gradient")
    if direction not in (DESCENT, ASCENT):
        raise ValueError(f"direction must be {DESCENT!r} or {ASCENT!r}, got {direction!r}")

    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_param = param - step if direction == DESCENT else param + step
    new_state = AdamState(
        m=m, v=v, step=t, lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
    return new_param, new_state


@dataclass
class Adam:
    """Adam over a named dict of arrays."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict[str, AdamState] = field(default_factory=dict)

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], direction: str = DESCENT
    ) -> dict[str, np.ndarray]:
        out = dict(params)
        for name in params:
            if name not in grads:
                continue
            st = self.states.get(name)
            if st is None:
                st = AdamState.zeros_like(
                    params[name], lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps
                )
            out[name], self.states[name] = adam_update(st, params[name], grads[name], direction)
        return out
