"""Forward passes of the toy LM.

``forward_step`` is incremental decoding against per-layer caches.
``forward_full`` runs a whole (batch, time) block with a causal mask and can
return the activations that ``backward_full`` needs for training.

Architecture: pre-norm RMS blocks, multi-head attention with rotary
positions, SiLU MLP, untied output projection.
"""

from __future__ import annotations

import math

import numpy as np

from ..kvcache import CachePolicy, CacheStack, KvCache, attend
from ..numerics import rope_lookup, rotate_pairs
from .model import TinyLM

EPS = 1e-5


def _norm(x, gain):
    inv = 1.0 / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + EPS)
    n = x * inv
    return n * gain, n, inv


def _norm_back(dy, gain, n, inv):
    dn = dy * gain
    dx = inv * (dn - n * np.mean(dn * n, axis=-1, keepdims=True))
    return dx, dy * n


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def new_caches(model: TinyLM, policy: CachePolicy) -> CacheStack:
    return CacheStack(policy, model.config.n_layers)


def forward_step(model: TinyLM, token_id: int, caches, step_index: int) -> np.ndarray:
    """Feed one token, append its keys/values to every layer cache, return logits."""
    cfg = model.config
    if not 0 <= token_id < cfg.vocab_size:
        raise ValueError(f"token id {token_id} outside vocabulary of {cfg.vocab_size}")
    layers = list(caches)
    if len(layers) != cfg.n_layers:
        raise ValueError(f"expected {cfg.n_layers} layer caches, got {len(layers)}")
    if any(not isinstance(c, KvCache) for c in layers):
        raise TypeError("caches must be KvCache instances")
    if len({c.policy for c in layers}) != 1:
        raise ValueError("all layer caches must share one policy")

    H, dh = cfg.n_heads, cfg.d_head
    p = model.params
    x = p["tok_emb"][token_id].copy()
    for index, cache in enumerate(layers):
        w = model.layer(index)
        h, _, _ = _norm(x, w["attn_norm"])
        q = (h @ w["wq"]).reshape(H, dh)
        k = (h @ w["wk"]).reshape(H, dh)
        v = (h @ w["wv"]).reshape(H, dh)
        cache.append(k, v, step_index)
        query_pos = int(cache.cache_positions()[-1])
        a = attend(q, query_pos, cache).reshape(cfg.d_model)
        x = x + a @ w["wo"]
        h2, _, _ = _norm(x, w["mlp_norm"])
        u = h2 @ w["w1"]
        x = x + (u * _sigmoid(u)) @ w["w2"]
    hf, _, _ = _norm(x, p["final_norm"])
    return hf @ p["lm_head"]


def forward_full(model: TinyLM, tokens, positions=None, keep=False):
    """Causal forward pass over ``tokens`` of shape (B, T) or (T,).

    Returns logits with a matching leading shape. With ``keep=True`` also
    returns the saved activations for :func:`backward_full`.
    """
    cfg = model.config
    tokens = np.asarray(tokens, dtype=np.int64)
    squeeze = tokens.ndim == 1
    if squeeze:
        tokens = tokens[None, :]
    if tokens.min() < 0 or tokens.max() >= cfg.vocab_size:
        raise ValueError("token ids outside vocabulary")
    B, T = tokens.shape
    H, dh, D = cfg.n_heads, cfg.d_head, cfg.d_model
    pos = np.arange(T) if positions is None else np.asarray(positions)
    cos, sin = rope_lookup(pos, dh)
    cos, sin = cos[None, None], sin[None, None]
    future = np.triu(np.ones((T, T), dtype=bool), 1)
    scale = 1.0 / math.sqrt(dh)
    p = model.params

    def split(t):
        return t.reshape(B, T, H, dh).transpose(0, 2, 1, 3)

    x = p["tok_emb"][tokens]
    saved = []
    for index in range(cfg.n_layers):
        w = model.layer(index)
        h, n1, inv1 = _norm(x, w["attn_norm"])
        q, k, v = split(h @ w["wq"]), split(h @ w["wk"]), split(h @ w["wv"])
        qr, kr = rotate_pairs(q, cos, sin), rotate_pairs(k, cos, sin)
        s = np.where(future, -np.inf, (qr @ kr.swapaxes(-1, -2)) * scale)
        e = np.exp(s - s.max(axis=-1, keepdims=True))
        att = e / e.sum(axis=-1, keepdims=True)
        a = (att @ v).transpose(0, 2, 1, 3).reshape(B, T, D)
        x1 = x + a @ w["wo"]
        h2, n2, inv2 = _norm(x1, w["mlp_norm"])
        u = h2 @ w["w1"]
        sg = _sigmoid(u)
        z = u * sg
        x2 = x1 + z @ w["w2"]
        if keep:
            saved.append(dict(h=h, n1=n1, inv1=inv1, qr=qr, kr=kr, v=v, att=att, a=a,
                              h2=h2, n2=n2, inv2=inv2, u=u, sg=sg, z=z))
        x = x2
    hf, nf, invf = _norm(x, p["final_norm"])
    logits = hf @ p["lm_head"]
    if keep:
        state = dict(tokens=tokens, cos=cos, sin=sin, layers=saved, hf=hf, nf=nf, invf=invf)
        return logits, state
    return logits[0] if squeeze else logits


def backward_full(model: TinyLM, state: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every parameter given d(loss)/d(logits) of shape (B, T, V)."""
    cfg = model.config
    p = model.params
    B, T, _ = dlogits.shape
    H, dh, D = cfg.n_heads, cfg.d_head, cfg.d_model
    scale = 1.0 / math.sqrt(dh)
    cos, sin = state["cos"], state["sin"]
    grads: dict[str, np.ndarray] = {}

    def flat(t):
        return t.reshape(-1, t.shape[-1])

    grads["lm_head"] = flat(state["hf"]).T @ flat(dlogits)
    dx, grads["final_norm"] = _norm_back(dlogits @ p["lm_head"].T, p["final_norm"],
                                         state["nf"], state["invf"])
    grads["final_norm"] = grads["final_norm"].reshape(-1, D).sum(axis=0)

    for index in reversed(range(cfg.n_layers)):
        w = model.layer(index)
        s = state["layers"][index]
        pre = f"layers.{index}."
        # MLP residual branch
        grads[pre + "w2"] = flat(s["z"]).T @ flat(dx)
        dz = dx @ w["w2"].T
        du = dz * s["sg"] * (1.0 + s["u"] * (1.0 - s["sg"]))
        grads[pre + "w1"] = flat(s["h2"]).T @ flat(du)
        dn, dg = _norm_back(du @ w["w1"].T, w["mlp_norm"], s["n2"], s["inv2"])
        grads[pre + "mlp_norm"] = flat(dg).sum(axis=0)
        dx = dx + dn
        # attention residual branch
        grads[pre + "wo"] = flat(s["a"]).T @ flat(dx)
        da = (dx @ w["wo"].T).reshape(B, T, H, dh).transpose(0, 2, 1, 3)
        att = s["att"]
        datt = da @ s["v"].swapaxes(-1, -2)
        dv = att.swapaxes(-1, -2) @ da
        ds = att * (datt - np.sum(datt * att, axis=-1, keepdims=True)) * scale
        dqr = ds @ s["kr"]
        dkr = ds.swapaxes(-1, -2) @ s["qr"]
        dq = rotate_pairs(dqr, cos, -sin)
        dk = rotate_pairs(dkr, cos, -sin)

        def merge(t):
            return t.transpose(0, 2, 1, 3).reshape(B, T, D)

        dq, dk, dv = merge(dq), merge(dk), merge(dv)
        hf = flat(s["h"])
        grads[pre + "wq"] = hf.T @ flat(dq)
        grads[pre + "wk"] = hf.T @ flat(dk)
        grads[pre + "wv"] = hf.T @ flat(dv)
        dh_ = dq @ w["wq"].T + dk @ w["wk"].T + dv @ w["wv"].T
        dn, dg = _norm_back(dh_, w["attn_norm"], s["n1"], s["inv1"])
        grads[pre + "attn_norm"] = flat(dg).sum(axis=0)
        dx = dx + dn

    demb = np.zeros_like(p["tok_emb"])
    np.add.at(demb, state["tokens"].reshape(-1), flat(dx))
    grads["tok_emb"] = demb
    return grads
