from __future__ import annotations

from dataclasses import replace

import numpy as np

from .encoder import ModelConfig, forward, loss_and_grads


def random_batch(cfg: ModelConfig, batch: int = 3, length: int = 10, seed: int = 0):
    """Small random batch with ragged padding: ids, mask, segments, labels."""
    rng = np.random.default_rng(seed)
    ids = rng.integers(4, cfg.vocab_size, size=(batch, length))
    ids[:, 0] = 2
    mask = np.ones((batch, length), dtype=np.int64)
    for b in range(1, batch):
        cut = int(rng.integers(2, length))
        ids[b, cut:] = 0
        mask[b, cut:] = 0
    seg = np.zeros_like(ids)
    labels = rng.integers(0, cfg.n_classes, size=batch)
    return ids, mask, seg, labels


def gradient_check(
    parameters: dict[str, np.ndarray],
    small_batch,
    config: ModelConfig,
    samples_per_group: int = 20,
    step: float = 1e-5,
    seed: int = 0,
    return_details: bool = False,
    fd_dtype=np.longdouble,
):
    """Largest relative error between analytic and central-difference gradients.

    Analytic gradients are computed in float64 with dropout off. For every
    parameter tensor, ``samples_per_group`` scalar entries are drawn at random
    and compared with ``|ga - gn| / max(|ga|, |gn|, 1e-8)``.

    The finite differences are evaluated in ``fd_dtype`` (extended precision
    by default): in float64 the rounding noise of a step-1e-5 difference is
    around 1e-10, above the smallest true gradients of a freshly initialized
    encoder.
    """
    ids, mask, seg, labels = small_batch
    if len(ids) > 4 or np.shape(ids)[1] > 12:
        raise ValueError("gradient check expects batch <= 4 and length <= 12")
    cfg = replace(config, dropout_rate=0.0)
    params = {k: np.array(v, dtype=np.float64) for k, v in parameters.items()}
    labels = np.asarray(labels)
    _, grads, _ = loss_and_grads(ids, mask, seg, labels, params, cfg)
    params = {k: v.astype(fd_dtype) for k, v in params.items()}

    def loss():
        probs = forward(ids, mask, seg, params, cfg)
        return -np.mean(np.log(probs[np.arange(len(labels)), labels]))

    rng = np.random.default_rng(seed)
    worst = 0.0
    details = {}
    for name in sorted(params):
        p = params[name]
        flat = p.reshape(-1)
        picks = rng.choice(flat.size, size=min(samples_per_group, flat.size), replace=False)
        group_worst = 0.0
        for i in picks:
            old = flat[i]
            hi, lo = old + step, old - step
            flat[i] = hi
            up = loss()
            flat[i] = lo
            down = loss()
            flat[i] = old
            gn = (up - down) / (hi - lo)
            ga = fd_dtype(grads[name].reshape(-1)[i])
            err = float(abs(ga - gn) / max(abs(ga), abs(gn), fd_dtype(1e-8)))
            group_worst = max(group_worst, err)
        details[name] = group_worst
        worst = max(worst, group_worst)
    return (worst, details) if return_details else worst
