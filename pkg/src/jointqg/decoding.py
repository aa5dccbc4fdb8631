"""Greedy and beam-search decoding.

Both decoders consume a scorer: a callable mapping the generated prefix
(ids, no BOS) to a (V,) array of next-token log-probabilities. PAD and BOS
are suppressed before any selection, so outputs never contain them.

Beam search keeps the beam_size best candidates per step ranked by
cumulative log-probability; candidates that just emitted EOS retire to a
finished pool and are never extended. The final answer is the best pooled
hypothesis by logp / len^length_alpha (the best unfinished one if nothing
finished), with exact score ties broken toward the lexicographically
smaller id sequence. beam_size=1 with length_alpha=0 follows exactly the
greedy path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Checkpoint, DecoderSession, encoder_forward
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, ModelInput

_SUPPRESSED = (PAD_ID, BOS_ID)


@dataclass(frozen=True)
class DecodeResult:
    ids: tuple[int, ...]   # generated ids, EOS included when finished
    logp: float
    score: float           # length-normalized
    finished: bool


def make_scorer(ckpt: Checkpoint, model_input: ModelInput):
    """Scorer over one encoded example; encodes once, steps many times."""
    enc = encoder_forward(model_input, ckpt.params, ckpt.config)
    session = DecoderSession(enc, ckpt.params, ckpt.config)
    return session.step_logprobs


def _masked(logprobs: np.ndarray) -> np.ndarray:
    lp = np.asarray(logprobs, dtype=np.float64).copy()
    if lp.ndim != 1 or lp.shape[0] <= max(_SUPPRESSED):
        raise ValueError("scorer must return a flat distribution over the vocabulary")
    lp[list(_SUPPRESSED)] = -np.inf
    return lp


def _norm_score(logp: float, length: int, alpha: float) -> float:
    return logp / (length ** alpha) if alpha != 0.0 else logp


def greedy_decode(scorer, max_len: int = 32) -> list[int]:
    """Argmax chain; ties resolve to the lowest token id."""
    if max_len < 1:
        raise ValueError("max_len must be positive")
    out: list[int] = []
    while len(out) < max_len:
        nxt = int(np.argmax(_masked(scorer(out))))
        out.append(nxt)
        if nxt == EOS_ID:
            break
    return out


def beam_search_decode(scorer, beam_size: int, max_len: int = 32,
                       length_alpha: float = 0.7) -> list[int]:
    """Best final hypothesis only."""
    return list(beam_search_nbest(scorer, beam_size, max_len, length_alpha)[0].ids)


def beam_search_nbest(scorer, beam_size: int, max_len: int = 32,
                      length_alpha: float = 0.7) -> list[DecodeResult]:
    """All final hypotheses, best first."""
    if beam_size < 1:
        raise ValueError("beam_size must be at least 1")
    if max_len < 1:
        raise ValueError("max_len must be positive")
    if length_alpha < 0:
        raise ValueError("length_alpha must be non-negative")

    active: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    pool: list[tuple[tuple[int, ...], float]] = []
    for _ in range(max_len):
        candidates: list[tuple[tuple[int, ...], float]] = []
        for ids, logp in active:
            lp = _masked(scorer(list(ids)))
            for tok in range(lp.shape[0]):
                if np.isfinite(lp[tok]):
                    candidates.append((ids + (tok,), logp + float(lp[tok])))
        if not candidates:
            break
        candidates.sort(key=lambda c: (-c[1], c[0]))
        survivors = candidates[:beam_size]
        active = []
        for ids, logp in survivors:
            if ids[-1] == EOS_ID:
                pool.append((ids, logp))
            else:
                active.append((ids, logp))
        if not active:
            break

    def as_result(item: tuple[tuple[int, ...], float], finished: bool) -> DecodeResult:
        ids, logp = item
        return DecodeResult(ids, logp, _norm_score(logp, len(ids), length_alpha), finished)

    finals = ([as_result(h, True) for h in pool] if pool
              else [as_result(h, False) for h in active])
    if not finals:
        raise ValueError("decoding produced no hypotheses")
    finals.sort(key=lambda r: (-r.score, r.ids))
    return finals


def decode_example(ckpt: Checkpoint, model_input: ModelInput, beam_size: int = 1,
                   max_len: int = 32, length_alpha: float = 0.7) -> list[int]:
    """Encode one input and decode it; beam_size=1 uses the greedy path."""
    scorer = make_scorer(ckpt, model_input)
    if beam_size == 1 and length_alpha == 0.0:
        return greedy_decode(scorer, max_len)
    return list(beam_search_nbest(scorer, beam_size, max_len, length_alpha)[0].ids)


def write_predictions_jsonl(records: list[dict], path: str) -> None:
    """One object per line: id, prediction, gold, beam_size, score."""
    required = {"id", "prediction", "gold", "beam_size", "score"}
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            missing = required - rec.keys()
            if missing:
                raise ValueError(f"prediction record missing {sorted(missing)}")
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_predictions_jsonl(path: str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
