"""Joint selector-generator model on the shared encoder.

The encoder reads ``[CLS] context [SEP] answer [SEP]`` and produces token
states. Sentence vectors are grouped means of token states by sentence
ordinal; the selector scores each sentence vector with two feed-forward
layers and maps the output o to a probability p = 1 / (1 + exp(o)), so a
large positive o means irrelevant. The decoder generates the question with
causal self-attention plus cross-attention over either all encoder token
states (conditioning_mode "token_attention") or the single pooled vector
("pooled"). An auxiliary head classifies the question type from the pooled
vector.

Attention masking adds -1e9 to blocked score positions before softmax,
which underflows to an exact zero weight, so padding cannot leak into real
positions.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericError, SchemaError, VocabMismatchError
from .labeler import QUESTION_TYPES
from .tokenizer import BOS_ID, ModelInput, Vocabulary

_MASK_BIAS = -1e9
_LOGIT_CLAMP = 36.0  # keeps sigmoid strictly inside (0, 1) in float64
_LN_EPS = 1e-5


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 128
    encoder_layers: int = 2
    decoder_layers: int = 2
    attention_heads: int = 4
    feedforward_dim: int = 256
    selector_hidden: int = 128
    max_len: int = 256
    dropout: float = 0.0
    conditioning_mode: str = "token_attention"

    def validate(self) -> None:
        if self.vocab_size < 7:
            raise ValueError("vocab_size must cover the special tokens")
        if self.d_model < 1 or self.d_model % self.attention_heads != 0:
            raise ValueError("d_model must be a positive multiple of attention_heads")
        if min(self.encoder_layers, self.decoder_layers, self.attention_heads,
               self.feedforward_dim, self.selector_hidden) < 1:
            raise ValueError("layer, head and width counts must be positive")
        if self.max_len < 8:
            raise ValueError("max_len must be at least 8")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.conditioning_mode not in ("token_attention", "pooled"):
            raise ValueError(f"unknown conditioning_mode '{self.conditioning_mode}'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


def _attn_shapes(prefix: str, d: int) -> dict[str, tuple]:
    out = {}
    for w in ("wq", "wk", "wv", "wo"):
        out[f"{prefix}.{w}"] = (d, d)
    for b in ("bq", "bk", "bv", "bo"):
        out[f"{prefix}.{b}"] = (d,)
    return out


def param_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Every parameter tensor name and shape implied by a config."""
    d, ff, hid, v = cfg.d_model, cfg.feedforward_dim, cfg.selector_hidden, cfg.vocab_size
    shapes: dict[str, tuple] = {
        "tok_emb": (v, d),
        "pos_enc": (cfg.max_len, d),
        "pos_dec": (cfg.max_len, d),
    }
    for i in range(cfg.encoder_layers):
        shapes.update(_attn_shapes(f"enc{i}.attn", d))
        shapes.update({
            f"enc{i}.ln1.g": (d,), f"enc{i}.ln1.b": (d,),
            f"enc{i}.ln2.g": (d,), f"enc{i}.ln2.b": (d,),
            f"enc{i}.ff.w1": (d, ff), f"enc{i}.ff.b1": (ff,),
            f"enc{i}.ff.w2": (ff, d), f"enc{i}.ff.b2": (d,),
        })
    shapes.update({"enc_ln_f.g": (d,), "enc_ln_f.b": (d,)})
    for i in range(cfg.decoder_layers):
        shapes.update(_attn_shapes(f"dec{i}.self", d))
        shapes.update(_attn_shapes(f"dec{i}.cross", d))
        shapes.update({
            f"dec{i}.ln1.g": (d,), f"dec{i}.ln1.b": (d,),
            f"dec{i}.ln2.g": (d,), f"dec{i}.ln2.b": (d,),
            f"dec{i}.ln3.g": (d,), f"dec{i}.ln3.b": (d,),
            f"dec{i}.ff.w1": (d, ff), f"dec{i}.ff.b1": (ff,),
            f"dec{i}.ff.w2": (ff, d), f"dec{i}.ff.b2": (d,),
        })
    shapes.update({"dec_ln_f.g": (d,), "dec_ln_f.b": (d,)})
    shapes.update({
        "sel.w1": (d, hid), "sel.b1": (hid,),
        "sel.w2": (hid, 1), "sel.b2": (1,),
        "qt.w1": (d, hid), "qt.b1": (hid,),
        "qt.w2": (hid, len(QUESTION_TYPES)), "qt.b2": (len(QUESTION_TYPES),),
        "out.w": (d, v), "out.b": (v,),
    })
    return shapes


class Parameters:
    """Named parameter tensors; iteration order is name-sorted and fixed."""

    def __init__(self, tensors: dict[str, Tensor]):
        self.tensors = dict(sorted(tensors.items()))

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int = 0) -> "Parameters":
        cfg.validate()
        rng = np.random.default_rng(seed)
        tensors: dict[str, Tensor] = {}
        for name, shape in sorted(param_shapes(cfg).items()):
            if name.endswith(".g"):
                data = np.ones(shape)
            elif name.endswith((".b", ".b1", ".b2", ".bq", ".bk", ".bv", ".bo")):
                data = np.zeros(shape)
            else:
                data = rng.normal(0.0, 0.02, size=shape)
            tensors[name] = Tensor(data, requires_grad=True)
        return cls(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    def names(self) -> list[str]:
        return list(self.tensors)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def n_scalars(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def copy(self) -> "Parameters":
        return Parameters({k: Tensor(v.data.copy(), requires_grad=True)
                           for k, v in self.tensors.items()})


@dataclass
class EncoderOutput:
    """Per-example encoder products, batch dimension stripped."""

    token_states: np.ndarray      # (T, d)
    pooled: np.ndarray            # (d,)
    sentence_vectors: np.ndarray  # (n_sentences, d)
    model_input: ModelInput = field(repr=False, default=None)


def _check_finite(x: Tensor, where: str) -> None:
    if not np.isfinite(x.data).all():
        raise NumericError("non-finite activation", where=where)


def _layer_norm(x: Tensor, p: Parameters, prefix: str) -> Tensor:
    mu = ad.tmean(x, axis=-1, keepdims=True)
    xc = x - mu
    var = ad.tmean(xc * xc, axis=-1, keepdims=True)
    inv = ad.power(var + _LN_EPS, -0.5)
    return xc * inv * p[f"{prefix}.g"] + p[f"{prefix}.b"]


def _dropout(x: Tensor, rate: float, train: bool, rng) -> Tensor:
    if not train or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return x * Tensor(keep)


def _attention(q_in: Tensor, kv_in: Tensor, bias: np.ndarray | None,
               p: Parameters, prefix: str, heads: int) -> Tensor:
    bsz, tq, d = q_in.shape
    tk = kv_in.shape[1]
    dh = d // heads

    def split(x: Tensor, t: int) -> Tensor:
        return x.reshape((bsz, t, heads, dh)).transpose(0, 2, 1, 3)

    q = split(q_in @ p[f"{prefix}.wq"] + p[f"{prefix}.bq"], tq)
    k = split(kv_in @ p[f"{prefix}.wk"] + p[f"{prefix}.bk"], tk)
    v = split(kv_in @ p[f"{prefix}.wv"] + p[f"{prefix}.bv"], tk)
    scores = (q @ k.transpose(0, 1, 3, 2)) * (dh ** -0.5)
    if bias is not None:
        scores = scores + Tensor(bias)
    weights = ad.softmax(scores, axis=-1)
    ctx = (weights @ v).transpose(0, 2, 1, 3).reshape((bsz, tq, d))
    return ctx @ p[f"{prefix}.wo"] + p[f"{prefix}.bo"]


def _ffn(x: Tensor, p: Parameters, prefix: str) -> Tensor:
    return ad.relu(x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"]) @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]


def key_padding_bias(nonpad: np.ndarray) -> np.ndarray:
    """(B, T) 0/1 array of real positions -> (B, 1, 1, T) additive bias."""
    return (1.0 - nonpad.astype(np.float64))[:, None, None, :] * _MASK_BIAS


def causal_bias(t: int) -> np.ndarray:
    """(1, 1, T, T) additive bias hiding future positions."""
    upper = np.triu(np.ones((t, t)), k=1)
    return (upper * _MASK_BIAS)[None, None, :, :]


def encoder_states(token_ids: np.ndarray, nonpad: np.ndarray, p: Parameters,
                   cfg: ModelConfig, train: bool = False, rng=None) -> Tensor:
    """Batched encoder forward; returns final token states (B, T, d)."""
    bsz, t = token_ids.shape
    if t > cfg.max_len:
        raise ValueError(f"input length {t} exceeds max_len {cfg.max_len}")
    x = ad.getitem(p["tok_emb"], token_ids) * (cfg.d_model ** 0.5)
    x = x + ad.getitem(p["pos_enc"], np.arange(t))
    x = _dropout(x, cfg.dropout, train, rng)
    bias = key_padding_bias(nonpad)
    for i in range(cfg.encoder_layers):
        h = _layer_norm(x, p, f"enc{i}.ln1")
        x = x + _dropout(_attention(h, h, bias, p, f"enc{i}.attn", cfg.attention_heads),
                         cfg.dropout, train, rng)
        x = x + _dropout(_ffn(_layer_norm(x, p, f"enc{i}.ln2"), p, f"enc{i}.ff"),
                         cfg.dropout, train, rng)
        _check_finite(x, f"encoder layer {i}")
    return _layer_norm(x, p, "enc_ln_f")


def pooled_vector(token_states: Tensor, nonpad: np.ndarray) -> Tensor:
    """Mean of non-pad token states, batched: (B, T, d) -> (B, d)."""
    counts = nonpad.sum(axis=1, keepdims=True)
    weights = (nonpad / counts)[:, None, :]  # (B, 1, T)
    return (Tensor(weights) @ token_states).reshape((token_states.shape[0],
                                                     token_states.shape[2]))


def group_matrix(sentence_index: np.ndarray, n_sentences: list[int]) -> np.ndarray:
    """(B, T) ordinals -> (B, S, T) row-normalized membership matrix.

    Row s of example b averages the tokens of sentence s; rows past the
    example's sentence count are zero.
    """
    bsz, t = sentence_index.shape
    s_max = max(n_sentences) if n_sentences else 0
    g = np.zeros((bsz, max(s_max, 1), t))
    for b in range(bsz):
        for s in range(n_sentences[b]):
            members = sentence_index[b] == s
            count = int(members.sum())
            if count == 0:
                raise ValueError(f"sentence ordinal {s} has no tokens in example {b}")
            g[b, s, members] = 1.0 / count
    return g


def sentence_vectors_from_states(token_states: Tensor, gmat: np.ndarray) -> Tensor:
    return Tensor(gmat) @ token_states  # (B, S, d)


def selector_logits(sent_vecs: Tensor, p: Parameters) -> Tensor:
    h = ad.relu(sent_vecs @ p["sel.w1"] + p["sel.b1"])
    o = h @ p["sel.w2"] + p["sel.b2"]
    return ad.clip(o.reshape(o.shape[:-1]), -_LOGIT_CLAMP, _LOGIT_CLAMP)


def selector_probs(sent_vecs: Tensor, p: Parameters) -> Tensor:
    """p = 1 / (1 + exp(o)): probability of relevance decreases in o."""
    return ad.sigmoid(selector_logits(sent_vecs, p) * -1.0)


def qtype_logits(pooled: Tensor, p: Parameters) -> Tensor:
    return ad.relu(pooled @ p["qt.w1"] + p["qt.b1"]) @ p["qt.w2"] + p["qt.b2"]


def decoder_logits(dec_ids: np.ndarray, memory: Tensor,
                   memory_bias: np.ndarray | None, p: Parameters,
                   cfg: ModelConfig, train: bool = False, rng=None) -> Tensor:
    """Teacher-forced decoder forward; returns logits (B, U, V)."""
    bsz, u = dec_ids.shape
    if u > cfg.max_len:
        raise ValueError(f"target length {u} exceeds max_len {cfg.max_len}")
    y = ad.getitem(p["tok_emb"], dec_ids) * (cfg.d_model ** 0.5)
    y = y + ad.getitem(p["pos_dec"], np.arange(u))
    y = _dropout(y, cfg.dropout, train, rng)
    self_bias = causal_bias(u)
    for i in range(cfg.decoder_layers):
        h = _layer_norm(y, p, f"dec{i}.ln1")
        y = y + _dropout(_attention(h, h, self_bias, p, f"dec{i}.self", cfg.attention_heads),
                         cfg.dropout, train, rng)
        y = y + _dropout(
            _attention(_layer_norm(y, p, f"dec{i}.ln2"), memory, memory_bias,
                       p, f"dec{i}.cross", cfg.attention_heads),
            cfg.dropout, train, rng)
        y = y + _dropout(_ffn(_layer_norm(y, p, f"dec{i}.ln3"), p, f"dec{i}.ff"),
                         cfg.dropout, train, rng)
        _check_finite(y, f"decoder layer {i}")
    y = _layer_norm(y, p, "dec_ln_f")
    logits = y @ p["out.w"] + p["out.b"]
    _check_finite(logits, "output projection")
    return logits


def conditioning_memory(token_states: Tensor, pooled: Tensor,
                        nonpad: np.ndarray, cfg: ModelConfig):
    """Memory tensor and key bias for the configured conditioning mode."""
    if cfg.conditioning_mode == "token_attention":
        return token_states, key_padding_bias(nonpad)
    bsz, d = pooled.shape
    return pooled.reshape((bsz, 1, d)), None


# single-example convenience API


def encode_token_ids(token_ids: np.ndarray, p: Parameters, cfg: ModelConfig) -> np.ndarray:
    """Token states (T, d) for a raw id sequence, gradient-free."""
    with ad.no_grad():
        states = encoder_states(token_ids[None, :], np.ones((1, len(token_ids)), dtype=np.int64),
                                p, cfg)
    return states.data[0]


def reconstruct_sentence_vectors(token_states: np.ndarray,
                                 sentence_index: np.ndarray) -> np.ndarray:
    """Grouped mean of token states by sentence ordinal.

    Ordinals must be exactly 0..n-1 (positions marked -1 are skipped); an
    ordinal with no tokens is an error.
    """
    token_states = np.asarray(token_states, dtype=np.float64)
    sentence_index = np.asarray(sentence_index)
    if token_states.ndim != 2 or sentence_index.shape != (token_states.shape[0],):
        raise ValueError("token_states must be (T, d) with matching sentence_index")
    present = sentence_index[sentence_index >= 0]
    if present.size == 0:
        return np.zeros((0, token_states.shape[1]))
    n = int(present.max()) + 1
    out = np.zeros((n, token_states.shape[1]))
    for s in range(n):
        members = sentence_index == s
        count = int(members.sum())
        if count == 0:
            raise ValueError(f"sentence ordinal {s} has no tokens")
        out[s] = token_states[members].mean(axis=0)
    return out


def encoder_forward(model_input: ModelInput, p: Parameters, cfg: ModelConfig) -> EncoderOutput:
    """Run the encoder on one assembled input, gradient-free."""
    ids = model_input.token_ids[None, :]
    nonpad = np.ones_like(ids)
    with ad.no_grad():
        states = encoder_states(ids, nonpad, p, cfg)
        pooled = pooled_vector(states, nonpad.astype(np.float64))
    token_states = states.data[0]
    return EncoderOutput(
        token_states=token_states,
        pooled=pooled.data[0],
        sentence_vectors=reconstruct_sentence_vectors(token_states, model_input.sentence_index),
        model_input=model_input,
    )


def selector_forward(sentence_vectors: np.ndarray, p: Parameters) -> np.ndarray:
    """Relevance probabilities, one per sentence vector, each in (0, 1)."""
    sv = np.asarray(sentence_vectors, dtype=np.float64)
    if sv.ndim != 2:
        raise ValueError("sentence_vectors must be (n, d)")
    if sv.shape[0] == 0:
        return np.zeros(0)
    with ad.no_grad():
        probs = selector_probs(Tensor(sv[None]), p)
    return probs.data[0]


class DecoderSession:
    """Reusable decoding context for one encoded example."""

    def __init__(self, enc: EncoderOutput, p: Parameters, cfg: ModelConfig):
        self.p = p
        self.cfg = cfg
        t = enc.token_states.shape[0]
        states = Tensor(enc.token_states[None])
        pooled = Tensor(enc.pooled[None])
        self.memory, self.memory_bias = conditioning_memory(
            states, pooled, np.ones((1, t)), cfg)

    def step_logprobs(self, prefix_ids) -> np.ndarray:
        """Log-probabilities of the next token after the generated prefix."""
        ids = np.asarray([BOS_ID] + list(prefix_ids), dtype=np.int64)[None, :]
        with ad.no_grad():
            logits = decoder_logits(ids, self.memory, self.memory_bias, self.p, self.cfg)
            lp = ad.log_softmax(logits[0, -1], axis=-1)
        return lp.data


def decoder_step(enc: EncoderOutput, prefix_ids, p: Parameters,
                 cfg: ModelConfig) -> np.ndarray:
    """Distribution over the next token given generated prefix ids."""
    return np.exp(DecoderSession(enc, p, cfg).step_logprobs(prefix_ids))


# checkpoint container: zip of meta.json plus one float32 .npy per tensor

CHECKPOINT_VERSION = "1"


@dataclass
class Checkpoint:
    params: Parameters
    config: ModelConfig
    vocab_sha256: str
    step: int = 0
    seed: int = 0


def save_checkpoint(path: str, params: Parameters, cfg: ModelConfig,
                    vocab: Vocabulary, step: int = 0, seed: int = 0) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "vocab_sha256": vocab.sha256(),
        "step": int(step),
        "seed": int(seed),
        "tensors": params.names(),
    }
    def entry(name: str) -> zipfile.ZipInfo:
        # fixed timestamp keeps checkpoint bytes identical across reruns
        info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
        info.compress_type = zipfile.ZIP_DEFLATED
        return info

    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr(entry("meta.json"), json.dumps(meta, indent=1, sort_keys=True))
        for name, tensor in params.items():
            buf = io.BytesIO()
            np.save(buf, tensor.data.astype("<f4"), allow_pickle=False)
            zf.writestr(entry(f"tensors/{name}.npy"), buf.getvalue())


def load_checkpoint(path: str, expected_vocab: Vocabulary | None = None) -> Checkpoint:
    try:
        zf = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as e:
        if isinstance(e, OSError) and not isinstance(e, zipfile.BadZipFile):
            raise
        raise SchemaError(f"{path}: not a checkpoint container ({e})") from e
    with zf:
        try:
            meta = json.loads(zf.read("meta.json"))
            cfg = ModelConfig.from_dict(meta["config"])
            names = list(meta["tensors"])
        except (KeyError, ValueError, TypeError) as e:
            raise SchemaError(f"{path}: bad checkpoint metadata ({e})") from e
        if meta.get("version") != CHECKPOINT_VERSION:
            raise SchemaError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        expected = param_shapes(cfg)
        if set(names) != set(expected):
            raise SchemaError(f"{path}: tensor names do not match the stored config")
        tensors = {}
        for name in names:
            arr = np.load(io.BytesIO(zf.read(f"tensors/{name}.npy")), allow_pickle=False)
            if arr.shape != expected[name]:
                raise SchemaError(f"{path}: tensor {name} has shape {arr.shape}, "
                                  f"expected {expected[name]}")
            tensors[name] = Tensor(arr.astype(np.float64), requires_grad=True)
    ckpt = Checkpoint(Parameters(tensors), cfg, str(meta["vocab_sha256"]),
                      int(meta["step"]), int(meta["seed"]))
    if expected_vocab is not None and expected_vocab.sha256() != ckpt.vocab_sha256:
        raise VocabMismatchError(
            f"{path}: checkpoint was built with a different vocabulary")
    return ckpt
