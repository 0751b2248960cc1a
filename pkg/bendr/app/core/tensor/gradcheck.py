"""
Finite-difference verification of analytic gradients.
"""

from typing import Callable, List, Sequence

import numpy as np

from bendr.app.core.tensor.tensor import Tensor


def numerical_gradient(fn: Callable[..., Tensor], inputs: Sequence[Tensor], index: int, h: float = 1e-5) -> np.ndarray:
    """
    Central-difference gradient of the scalar `fn(*inputs)` with respect to `inputs[index]`.

    Args:
        fn (Callable[..., Tensor]): Function returning a scalar tensor.
        inputs (Sequence[Tensor]): Arguments of `fn`.
        index (int): Which argument to differentiate.
        h (float): Step size.

    Returns:
        np.ndarray: Gradient with the shape of `inputs[index]`.
    """
    target = inputs[index]
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn(*inputs).item()
        flat[i] = original - h
        minus = fn(*inputs).item()
        flat[i] = original
        grad_flat[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """ ||analytic - numeric|| / max(||analytic||, ||numeric||), 0 when both vanish. """
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], h: float = 1e-5, rtol: float = 1e-4) -> List[float]:
    """
    Compare `backward()` gradients of `fn(*inputs)` against central finite differences.

    Only inputs with `requires_grad=True` are checked.

    Args:
        fn (Callable[..., Tensor]): Function returning a scalar tensor.
        inputs (Sequence[Tensor]): Arguments of `fn`.
        h (float): Finite-difference step.
        rtol (float): Maximum tolerated relative error.

    Returns:
        List[float]: Relative error of each checked input.

    Raises:
        AssertionError: If any relative error exceeds `rtol`.
    """
    for t in inputs:
        t.grad = None
    fn(*inputs).backward()

    errors = []
    for i, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_gradient(fn, inputs, i, h=h)
        err = relative_error(analytic, numeric)
        if err > rtol:
            raise AssertionError(f"Gradient check failed for input {i}: relative error {err:.3e} > {rtol:.1e}")
        errors.append(err)
    return errors
