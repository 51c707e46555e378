"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except the model container, whose
parameters the oracles read.
"""

import math

import numpy as np


def naive_matmul(a, b):
    m, k = len(a), len(a[0])
    n = len(b[0])
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return np.array(out)


def levenshtein(a, b):
    """Textbook O(len(a) * len(b)) edit distance."""
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1]))
        prev = cur
    return prev[-1]


def rope_complex(x, pos, base=10000.0):
    """Rotary encoding as multiplication of (even + i*odd) pairs by e^{i*pos*theta}."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    theta = base ** (-np.arange(0, d, 2) / d)
    z = (x[..., 0::2] + 1j * x[..., 1::2]) * np.exp(1j * pos * theta)
    out = np.empty_like(x)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def retained_indices(kind, n, window=None, sink=None, recent=None):
    """Original positions a policy keeps after n appends, straight from its definition."""
    if kind == "dense":
        return list(range(n))
    if kind == "window":
        return list(range(max(0, n - window), n))
    if n <= sink + recent:
        return list(range(n))
    return list(range(sink)) + list(range(n - recent, n))


def _rms(x, g, eps=1e-5):
    return g * x / math.sqrt(float(np.mean(x * x)) + eps)


def reference_logits(params, cfg, tokens, kind, window=None, sink=None, recent=None):
    """Per-step logits of incremental decoding, recomputed from scratch.

    Keeps every key/value ever produced, then at each step attends over the
    subset the policy retains, with rotary positions 0..len-1 for bounded
    policies and original positions for dense.
    """
    H, D = cfg.n_heads, cfg.d_model
    dh = D // H
    hist_k = [[] for _ in range(cfg.n_layers)]
    hist_v = [[] for _ in range(cfg.n_layers)]
    out = []
    for t, tok in enumerate(tokens):
        x = params["tok_emb"][tok].astype(np.float64)
        keep = retained_indices(kind, t + 1, window, sink, recent)
        rel = list(range(len(keep))) if kind != "dense" else keep
        for layer in range(cfg.n_layers):
            p = lambda name: params[f"layers.{layer}.{name}"]
            h = _rms(x, p("attn_norm"))
            q, k, v = h @ p("wq"), h @ p("wk"), h @ p("wv")
            hist_k[layer].append(k)
            hist_v[layer].append(v)
            heads = []
            for hd in range(H):
                sl = slice(hd * dh, (hd + 1) * dh)
                qr = rope_complex(q[sl], rel[-1])
                scores = []
                for pos, idx in zip(rel, keep):
                    kr = rope_complex(hist_k[layer][idx][sl], pos)
                    scores.append(float(qr @ kr) / math.sqrt(dh))
                m = max(scores)
                w = [math.exp(s - m) for s in scores]
                tot = sum(w)
                heads.append(sum((wi / tot) * hist_v[layer][idx][sl] for wi, idx in zip(w, keep)))
            x = x + np.concatenate(heads) @ p("wo")
            h2 = _rms(x, p("mlp_norm"))
            u = h2 @ p("w1")
            x = x + (u / (1.0 + np.exp(-u))) @ p("w2")
        out.append(_rms(x, params["final_norm"]) @ params["lm_head"])
    return np.array(out)
