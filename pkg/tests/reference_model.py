"""Straight-line transformer forward pass, used as a numeric oracle.

Single example, no batch dimension, explicit per-head loops, plain numpy.
Parameters come in as a {name: ndarray} dict with the package's naming
scheme so the same initialization can drive both implementations.
"""
from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
MASK = -1e9


def layer_norm(x, g, b):
    out = np.empty_like(x)
    for t in range(x.shape[0]):
        row = x[t]
        mu = row.mean()
        var = ((row - mu) ** 2).mean()
        out[t] = (row - mu) / np.sqrt(var + LN_EPS) * g + b
    return out


def softmax_rows(scores):
    out = np.empty_like(scores)
    for t in range(scores.shape[0]):
        row = scores[t] - scores[t].max()
        e = np.exp(row)
        out[t] = e / e.sum()
    return out


def attention(q_in, kv_in, bias, p, prefix, heads):
    d = q_in.shape[1]
    dh = d // heads
    q = q_in @ p[f"{prefix}.wq"] + p[f"{prefix}.bq"]
    k = kv_in @ p[f"{prefix}.wk"] + p[f"{prefix}.bk"]
    v = kv_in @ p[f"{prefix}.wv"] + p[f"{prefix}.bv"]
    ctx = np.zeros((q_in.shape[0], d))
    for m in range(heads):
        sl = slice(m * dh, (m + 1) * dh)
        scores = q[:, sl] @ k[:, sl].T * dh ** -0.5
        if bias is not None:
            scores = scores + bias
        ctx[:, sl] = softmax_rows(scores) @ v[:, sl]
    return ctx @ p[f"{prefix}.wo"] + p[f"{prefix}.bo"]


def ffn(x, p, prefix):
    h = np.maximum(x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"], 0.0)
    return h @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]


def ref_encoder(token_ids, p, cfg):
    """Final token states (T, d) for an unpadded id sequence."""
    t = len(token_ids)
    x = p["tok_emb"][np.asarray(token_ids)] * cfg.d_model ** 0.5
    x = x + p["pos_enc"][:t]
    for i in range(cfg.encoder_layers):
        h = layer_norm(x, p[f"enc{i}.ln1.g"], p[f"enc{i}.ln1.b"])
        x = x + attention(h, h, None, p, f"enc{i}.attn", cfg.attention_heads)
        x = x + ffn(layer_norm(x, p[f"enc{i}.ln2.g"], p[f"enc{i}.ln2.b"]), p, f"enc{i}.ff")
    return layer_norm(x, p["enc_ln_f.g"], p["enc_ln_f.b"])


def causal(t):
    bias = np.zeros((t, t))
    for i in range(t):
        bias[i, i + 1:] = MASK
    return bias


def ref_decoder_dist(dec_ids, memory, p, cfg):
    """Distribution over the vocabulary at the last decoder position.

    memory is (Tm, d); cross attention sees every memory slot (no padding
    in the single-example setting).
    """
    u = len(dec_ids)
    y = p["tok_emb"][np.asarray(dec_ids)] * cfg.d_model ** 0.5
    y = y + p["pos_dec"][:u]
    for i in range(cfg.decoder_layers):
        h = layer_norm(y, p[f"dec{i}.ln1.g"], p[f"dec{i}.ln1.b"])
        y = y + attention(h, h, causal(u), p, f"dec{i}.self", cfg.attention_heads)
        h = layer_norm(y, p[f"dec{i}.ln2.g"], p[f"dec{i}.ln2.b"])
        y = y + attention(h, memory, None, p, f"dec{i}.cross", cfg.attention_heads)
        h = layer_norm(y, p[f"dec{i}.ln3.g"], p[f"dec{i}.ln3.b"])
        y = y + ffn(h, p, f"dec{i}.ff")
    y = layer_norm(y, p["dec_ln_f.g"], p["dec_ln_f.b"])
    logits = y[-1] @ p["out.w"] + p["out.b"]
    e = np.exp(logits - logits.max())
    return e / e.sum()


def ref_selector_prob(h, p):
    """Scalar relevance probability for one sentence vector."""
    hidden = np.maximum(h @ p["sel.w1"] + p["sel.b1"], 0.0)
    o = (hidden @ p["sel.w2"] + p["sel.b2"]).item()
    o = min(max(o, -36.0), 36.0)
    return 1.0 / (1.0 + np.exp(o))


def params_as_arrays(params):
    return {name: t.data.copy() for name, t in params.items()}
