"""
Adam with decoupled weight decay, and the warmup + cosine learning-rate schedule.

Adam betas and epsilon are not given for the original training runs; the standard
defaults (0.9, 0.999, 1e-8) are used. Weight decay defaults to 0.01.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bendr.app.core.exceptions import NonFiniteError, ShapeError
from bendr.app.core.tensor.tensor import Tensor


@dataclass
class AdamState:
    """
    Optimizer state for one ordered list of parameters.

    Attributes:
        betas (Tuple[float, float]): Exponential decay rates of the moment estimates.
        eps (float): Denominator floor.
        weight_decay (float): Decoupled weight-decay coefficient.
        step (int): Number of updates applied so far.
        first_moments (List[np.ndarray]): Per-parameter first-moment buffers.
        second_moments (List[np.ndarray]): Per-parameter second-moment buffers.
    """

    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    first_moments: List[np.ndarray] = field(default_factory=list)
    second_moments: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(cls, params: Sequence[Tensor], **kwargs) -> "AdamState":
        return cls(first_moments=[np.zeros_like(p.data) for p in params],
                   second_moments=[np.zeros_like(p.data) for p in params], **kwargs)

    def state_dict(self) -> Dict[str, np.ndarray]:
        """ Flat name -> array mapping, as stored in checkpoints. """
        state = {"step": np.array([self.step], dtype=np.float64)}
        for i, (m, v) in enumerate(zip(self.first_moments, self.second_moments)):
            state[f"m.{i}"] = m.copy()
            state[f"v.{i}"] = v.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        count = sum(1 for k in state if k.startswith("m."))
        self.step = int(state["step"][0])
        self.first_moments = [np.array(state[f"m.{i}"]) for i in range(count)]
        self.second_moments = [np.array(state[f"v.{i}"]) for i in range(count)]


def adam_step(params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]], state: AdamState, lr: float) -> None:
    """
    Apply one bias-corrected Adam update with decoupled weight decay, in place.

    Args:
        params (Sequence[Tensor]): Parameters to update.
        grads (Sequence[Optional[np.ndarray]]): Gradients aligned with `params` (None reads as zeros).
        state (AdamState): Optimizer state; its step counter is incremented.
        lr (float): Learning rate (>= 0).

    Raises:
        ShapeError: If gradients or moment buffers do not align with the parameters.
        NonFiniteError: If any gradient contains NaN or infinite values.
        ValueError: If `lr` is negative.
    """
    if lr < 0:
        raise ValueError(f"Learning rate must be non-negative, got {lr}")
    if len(params) != len(grads):
        raise ShapeError(f"adam_step got {len(params)} parameters but {len(grads)} gradients")
    if not state.first_moments and params:
        state.first_moments = [np.zeros_like(p.data) for p in params]
        state.second_moments = [np.zeros_like(p.data) for p in params]
    if len(state.first_moments) != len(params):
        raise ShapeError(f"AdamState tracks {len(state.first_moments)} parameters, got {len(params)}")

    grads = [np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64) for p, g in zip(params, grads)]
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape or state.first_moments[i].shape != p.shape:
            raise ShapeError(f"Parameter {i} has shape {p.shape}, gradient {g.shape}, "
                             f"moment {state.first_moments[i].shape}")
        if not np.isfinite(g).all():
            name = f" '{p.name}'" if p.name else ""
            raise NonFiniteError(f"Non-finite gradient for parameter {i}{name}")

    beta1, beta2 = state.betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        p.data = p.data - lr * state.weight_decay * p.data - lr * update


def lr_schedule(step: int, total_steps: int, warmup_frac: float, peak_lr: float) -> float:
    """
    Linear warmup to `peak_lr` over `warmup_frac * total_steps` steps, then cosine decay to 0.

    Steps outside [0, total_steps] are clamped.

    Args:
        step (int): Current step.
        total_steps (int): Total number of steps.
        warmup_frac (float): Fraction of steps spent warming up, in (0, 1).
        peak_lr (float): Learning rate reached at the end of warmup.

    Returns:
        float: Learning rate for this step.
    """
    step = min(max(step, 0), total_steps)
    warmup = warmup_frac * total_steps
    if step < warmup:
        return peak_lr * step / warmup
    remaining = total_steps - warmup
    progress = (step - warmup) / remaining if remaining > 0 else 1.0
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
