"""Transformer encoder classifier in numpy with a hand-written backward pass.

Post-norm blocks (attention, residual, layer norm; GELU feed-forward,
residual, layer norm) over summed token, position and segment embeddings.
The hidden state at the [CLS] position feeds a linear head and a softmax.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

N_CLASSES = 6
_NEG = -1e9
_GELU_C = math.sqrt(2.0 / math.pi)


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 256
    max_len: int = 50
    n_classes: int = N_CLASSES
    dropout_rate: float = 0.1
    layer_norm_epsilon: float = 1e-5

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes must be {N_CLASSES}")
        if min(self.vocab_size, self.d_model, self.n_layers, self.n_heads, self.ffn_dim) < 1:
            raise ValueError("sizes must be positive")
        if self.max_len < 2:
            raise ValueError("max_len must leave room for [CLS] and one token")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.d_model, cfg.ffn_dim
    shapes = {
        "tok_emb": (cfg.vocab_size, d),
        "pos_emb": (cfg.max_len, d),
        "seg_emb": (2, d),
    }
    for l in range(cfg.n_layers):
        p = f"layers.{l}."
        # no key bias: it shifts every score of a query equally and has zero gradient
        for name in ("wq", "wk", "wv", "wo"):
            shapes[p + "attn." + name] = (d, d)
        for name in ("bq", "bv", "bo"):
            shapes[p + "attn." + name] = (d,)
        shapes[p + "ln1.gamma"] = (d,)
        shapes[p + "ln1.beta"] = (d,)
        shapes[p + "ffn.w1"] = (d, f)
        shapes[p + "ffn.b1"] = (f,)
        shapes[p + "ffn.w2"] = (f, d)
        shapes[p + "ffn.b2"] = (d,)
        shapes[p + "ln2.gamma"] = (d,)
        shapes[p + "ln2.beta"] = (d,)
    shapes["head.w"] = (d, cfg.n_classes)
    shapes["head.b"] = (cfg.n_classes,)
    return shapes


def is_decayed(name: str) -> bool:
    """Weight decay applies to matrices and embeddings, never to biases or norms."""
    leaf = name.rsplit(".", 1)[-1]
    return leaf.startswith("w") or leaf.endswith("_emb")


def init_parameters(cfg: ModelConfig, seed: int = 0, dtype=np.float32, std: float = 0.02) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gamma":
            arr = np.ones(shape)
        elif is_decayed(name):
            arr = rng.normal(0.0, std, size=shape)
        else:
            arr = np.zeros(shape)
        params[name] = arr.astype(dtype)
    return params


def check_parameters(params: dict[str, np.ndarray], cfg: ModelConfig) -> None:
    for name, shape in parameter_shapes(cfg).items():
        if name not in params:
            raise ShapeError(f"missing parameter {name}")
        if params[name].shape != shape:
            raise ShapeError(f"{name}: expected {shape}, got {params[name].shape}")


# -- primitives ---------------------------------------------------------------


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = x - x.max(axis=axis, keepdims=True)
    np.exp(e, out=e)
    e /= e.sum(axis=axis, keepdims=True)
    return e


def _gelu(x):
    # in place to keep temporaries down; t is kept for the backward pass
    t = x * x
    t *= x
    t *= 0.044715
    t += x
    t *= _GELU_C
    np.tanh(t, out=t)
    y = t + 1.0
    y *= x
    y *= 0.5
    return y, t


def _gelu_grad(x, t):
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)


def _layer_norm(x, gamma, beta, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    return xhat * gamma + beta, (xhat, inv)


def _layer_norm_backward(dy, gamma, cache):
    xhat, inv = cache
    dxhat = dy * gamma
    n = xhat.shape[-1]
    dx = inv / n * (
        n * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    red = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(axis=red), dy.sum(axis=red)


def _dropout(x, rate, rng):
    if rate <= 0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep, keep


# -- forward / backward ----------------------------------------------------------


def _check_inputs(ids, mask, seg, params, cfg):
    if ids.ndim != 2 or mask.shape != ids.shape or seg.shape != ids.shape:
        raise ShapeError(f"ids/mask/segments must share a [batch, length] shape, got {ids.shape}, {mask.shape}, {seg.shape}")
    if ids.shape[1] > cfg.max_len or ids.shape[1] < 1:
        raise ShapeError(f"sequence length {ids.shape[1]} outside 1..{cfg.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= params["tok_emb"].shape[0]):
        raise ShapeError("token id outside the vocabulary")
    if seg.size and (seg.min() < 0 or seg.max() > 1):
        raise ShapeError("segment ids must be 0 or 1")


def forward(ids, mask, seg, params, cfg: ModelConfig, train: bool = False, rng=None, return_cache: bool = False):
    """Class probabilities ``[batch, n_classes]``.

    ``train=True`` with an ``rng`` enables dropout. With ``return_cache`` the
    intermediates needed by :func:`backward` are returned as well.
    """
    ids = np.asarray(ids)
    mask = np.asarray(mask)
    seg = np.asarray(seg)
    _check_inputs(ids, mask, seg, params, cfg)
    dtype = params["tok_emb"].dtype
    rate = cfg.dropout_rate if train else 0.0
    drop_rng = rng if train else None
    B, L = ids.shape
    H, dh = cfg.n_heads, cfg.head_dim
    scale = 1.0 / math.sqrt(dh)
    bias = np.where(mask[:, None, None, :] > 0, 0.0, _NEG).astype(dtype)

    h = params["tok_emb"][ids] + params["pos_emb"][:L][None] + params["seg_emb"][seg]
    h, emb_keep = _dropout(h, rate, drop_rng)
    caches = []
    for l in range(cfg.n_layers):
        p = f"layers.{l}."
        x = h
        q = (x @ params[p + "attn.wq"] + params[p + "attn.bq"]).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        k = (x @ params[p + "attn.wk"]).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        v = (x @ params[p + "attn.wv"] + params[p + "attn.bv"]).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        att = _softmax(q @ k.transpose(0, 1, 3, 2) * scale + bias)
        ctx = (att @ v).transpose(0, 2, 1, 3).reshape(B, L, H * dh)
        a = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        a, a_keep = _dropout(a, rate, drop_rng)
        h1, ln1 = _layer_norm(x + a, params[p + "ln1.gamma"], params[p + "ln1.beta"], cfg.layer_norm_epsilon)
        pre = h1 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
        act, t = _gelu(pre)
        f = act @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
        f, f_keep = _dropout(f, rate, drop_rng)
        h, ln2 = _layer_norm(h1 + f, params[p + "ln2.gamma"], params[p + "ln2.beta"], cfg.layer_norm_epsilon)
        caches.append((x, q, k, v, att, ctx, a_keep, h1, ln1, pre, act, t, f_keep, ln2))

    pooled = h[:, 0]
    logits = pooled @ params["head.w"] + params["head.b"]
    if not np.isfinite(logits).all():
        raise NonFiniteError("non-finite activation in forward pass")
    probs = _softmax(logits)
    if return_cache:
        return probs, (ids, seg, emb_keep, caches, pooled, L)
    return probs


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    tiny = np.finfo(probs.dtype).tiny
    return float(-np.mean(np.log(np.maximum(probs[np.arange(len(labels)), labels], tiny))))


def backward(probs, labels, cache, params, cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy with respect to every parameter."""
    ids, seg, emb_keep, caches, pooled, L = cache
    B = probs.shape[0]
    H, dh = cfg.n_heads, cfg.head_dim
    scale = 1.0 / math.sqrt(dh)
    grads: dict[str, np.ndarray] = {}

    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B
    grads["head.w"] = pooled.T @ dlogits
    grads["head.b"] = dlogits.sum(axis=0)
    dh_ = np.zeros((B, L, cfg.d_model), dtype=probs.dtype)
    dh_[:, 0] = dlogits @ params["head.w"].T

    for l in reversed(range(cfg.n_layers)):
        p = f"layers.{l}."
        x, q, k, v, att, ctx, a_keep, h1, ln1, pre, act, t, f_keep, ln2 = caches[l]
        dr2, grads[p + "ln2.gamma"], grads[p + "ln2.beta"] = _layer_norm_backward(dh_, params[p + "ln2.gamma"], ln2)
        df = dr2 if f_keep is None else dr2 * f_keep
        grads[p + "ffn.w2"] = act.reshape(-1, act.shape[-1]).T @ df.reshape(-1, df.shape[-1])
        grads[p + "ffn.b2"] = df.sum(axis=(0, 1))
        dpre = (df @ params[p + "ffn.w2"].T) * _gelu_grad(pre, t)
        grads[p + "ffn.w1"] = h1.reshape(-1, h1.shape[-1]).T @ dpre.reshape(-1, dpre.shape[-1])
        grads[p + "ffn.b1"] = dpre.sum(axis=(0, 1))
        dh1 = dr2 + dpre @ params[p + "ffn.w1"].T

        dr1, grads[p + "ln1.gamma"], grads[p + "ln1.beta"] = _layer_norm_backward(dh1, params[p + "ln1.gamma"], ln1)
        da = dr1 if a_keep is None else dr1 * a_keep
        grads[p + "attn.wo"] = ctx.reshape(-1, ctx.shape[-1]).T @ da.reshape(-1, da.shape[-1])
        grads[p + "attn.bo"] = da.sum(axis=(0, 1))
        dctx = (da @ params[p + "attn.wo"].T).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        datt = dctx @ v.transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ dctx
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True)) * scale
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q

        dx = dr1
        x2 = x.reshape(-1, x.shape[-1])
        for name, dproj in (("q", dq), ("k", dk), ("v", dv)):
            d2 = dproj.transpose(0, 2, 1, 3).reshape(B * L, H * dh)
            grads[p + f"attn.w{name}"] = x2.T @ d2
            if name != "k":
                grads[p + f"attn.b{name}"] = d2.sum(axis=0)
            dx = dx + (d2 @ params[p + f"attn.w{name}"].T).reshape(B, L, -1)
        dh_ = dx

    if emb_keep is not None:
        dh_ = dh_ * emb_keep
    dtok = np.zeros_like(params["tok_emb"])
    np.add.at(dtok, ids.reshape(-1), dh_.reshape(-1, dh_.shape[-1]))
    grads["tok_emb"] = dtok
    dpos = np.zeros_like(params["pos_emb"])
    dpos[:L] = dh_.sum(axis=0)
    grads["pos_emb"] = dpos
    dseg = np.zeros_like(params["seg_emb"])
    np.add.at(dseg, seg.reshape(-1), dh_.reshape(-1, dh_.shape[-1]))
    grads["seg_emb"] = dseg
    return grads


def loss_and_grads(ids, mask, seg, labels, params, cfg, train=False, rng=None):
    probs, cache = forward(ids, mask, seg, params, cfg, train=train, rng=rng, return_cache=True)
    labels = np.asarray(labels)
    return cross_entropy(probs, labels), backward(probs, labels, cache, params, cfg), probs


def attention_weights(ids, mask, seg, params, cfg) -> list[np.ndarray]:
    """Per-layer attention probabilities ``[batch, heads, query, key]`` in eval mode."""
    _, cache = forward(ids, mask, seg, params, cfg, return_cache=True)
    return [c[4] for c in cache[3]]
