"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward, zero_grads


def finite_difference_check(
    loss_fn,
    params: list[tuple[str, Tensor]],
    step: float = 1e-5,
    scale_floor: float = 0.1,
) -> dict[str, float]:
    """Compare analytic gradients against central differences.

    ``loss_fn`` must rebuild the forward loss from the parameters' current
    data (64-bit recommended). Error per element is
    ``|analytic - numeric| / max(|analytic|, |numeric|, scale_floor)``; the
    floor keeps near-zero gradients from turning roundoff into spurious
    relative error. Returns the max error per parameter name.
    """
    tensors = [t for _, t in params]
    zero_grads(tensors)
    loss = loss_fn()
    backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params
    }

    errors: dict[str, float] = {}
    for name, t in params:
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(loss_fn().data)
            flat[i] = orig - step
            down = float(loss_fn().data)
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * step)
        a = analytic[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), scale_floor)
        errors[name] = float(np.max(np.abs(a - numeric) / denom)) if a.size else 0.0
    return errors
