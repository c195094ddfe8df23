"""Central finite-difference gradient verification.

The check perturbs one coordinate at a time, so it is exact but O(n)
forward passes per tensor; pass `max_coords` to spot-check a random
subset on large models.
"""

import numpy as np

from .tensor import Tensor


def grad_check(fn, tensors, epsilon: float = 1e-5, max_coords: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and numeric gradients.

    `fn` must rebuild the scalar-output graph from `tensors` on every
    call and be deterministic (fix any dropout masks outside of it).
    Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-3); the
    floor keeps noise in near-zero gradients from registering as error.
    """
    tensors = list(tensors)
    for t in tensors:
        t.grad = None
    out = fn()
    out.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]

    coords = [(ti, fi) for ti, t in enumerate(tensors) for fi in range(t.data.size)]
    if max_coords is not None and len(coords) > max_coords:
        if rng is None:
            rng = np.random.default_rng(0)
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in picks]

    worst = 0.0
    for ti, fi in coords:
        t = tensors[ti]
        orig = t.data.flat[fi]
        t.data.flat[fi] = orig + epsilon
        f_plus = float(fn().data)
        t.data.flat[fi] = orig - epsilon
        f_minus = float(fn().data)
        t.data.flat[fi] = orig
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        a = analytic[ti].flat[fi]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
        worst = max(worst, rel)
    return worst
