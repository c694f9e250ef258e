import numpy as np


class AdamW:
    """Adam with decoupled weight decay, updating a dict of arrays in place.

    Decay is applied only to names in ``decay``; biases and layer-norm
    parameters are left out by the caller.
    """

    def __init__(self, params, lr=2e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01, decay=None):
        if lr <= 0:
            raise ValueError(f"invalid learning rate {lr}")
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decay = set(params) if decay is None else set(decay)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, p in self.params.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.weight_decay and name in self.decay:
                p *= 1.0 - self.lr * self.weight_decay
            p -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
