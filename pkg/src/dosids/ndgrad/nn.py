"""Layer objects (parameters + forward) and the SGD optimizer.

Weights initialize uniformly in +-sqrt(6 / (fan_in + fan_out)), biases at
zero. Every layer takes its init generator explicitly so model builds are
reproducible from a seed.
"""

import numpy as np

from . import ops
from .tensor import Tensor


def _uniform_init(shape, fan_in, fan_out, rng) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)


class Conv1d:
    def __init__(self, c_in, c_out, kernel, stride=1, padding=0, bias=True, rng=None):
        self.stride = stride
        self.padding = padding
        self.weight = _uniform_init((c_out, c_in, kernel), c_in * kernel, c_out * kernel, rng)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True) if bias else None

    def __call__(self, x):
        return ops.conv1d(x, self.weight, self.stride, self.padding, self.bias)

    def parameters(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class ConvTranspose1d:
    def __init__(self, c_in, c_out, kernel, stride=1, padding=0, bias=True, rng=None):
        self.stride = stride
        self.padding = padding
        self.weight = _uniform_init((c_in, c_out, kernel), c_in * kernel, c_out * kernel, rng)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True) if bias else None

    def __call__(self, x):
        return ops.conv_transpose1d(x, self.weight, self.stride, self.padding, self.bias)

    def parameters(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class Dense:
    def __init__(self, n_in, n_out, bias=True, rng=None):
        self.weight = _uniform_init((n_out, n_in), n_in, n_out, rng)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True) if bias else None

    def __call__(self, x):
        return ops.dense(x, self.weight, self.bias)

    def parameters(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class BatchNorm1d:
    def __init__(self, channels, eps=1e-5, momentum=0.1):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running = ops.RunningStats(channels)
        self.eps = eps
        self.momentum = momentum

    def __call__(self, x, train):
        return ops.batch_norm1d(x, self.gamma, self.beta, self.running, train,
                                self.eps, self.momentum)

    def parameters(self):
        return [self.gamma, self.beta]


class LocalResponseNorm:
    """Parameterless divisive normalization across adjacent channels."""

    def __init__(self, size=5, alpha=1e-4, beta=0.75, k=2.0):
        self.size = size
        self.alpha = alpha
        self.beta = beta
        self.k = k

    def __call__(self, x):
        return ops.lrn(x, self.size, self.alpha, self.beta, self.k)

    def parameters(self):
        return []


class SgdState:
    """Velocity buffers plus the update hyperparameters."""

    def __init__(self, params, learning_rate, momentum=0.0, weight_decay=0.0):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in params]


class SGD:
    """v <- momentum*v + grad + weight_decay*param; param <- param - lr*v."""

    def __init__(self, params, learning_rate, momentum=0.0, weight_decay=0.0):
        self.params = list(params)
        self.state = SgdState(self.params, learning_rate, momentum, weight_decay)

    def step(self):
        st = self.state
        for p, v in zip(self.params, st.velocity):
            if p.grad is None:
                continue
            v *= st.momentum
            v += p.grad + st.weight_decay * p.data
            p.data -= st.learning_rate * v

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def sgd_update(params, grads, state: SgdState):
    """Functional form of the SGD step on raw arrays, for reuse in tests."""
    for p, g, v in zip(params, grads, state.velocity):
        v *= state.momentum
        v += g + state.weight_decay * p
        p -= state.learning_rate * v
    return params
