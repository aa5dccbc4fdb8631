"""Synthetic corpora for training and harness tests.

Three families:

* memorization: 50 name/item stall descriptions a tiny decoder can learn
  to question verbatim.
* selector: four-sentence contexts where relevance is decidable from the
  tokens alone (the answer noun marks its sentences), so a trained
  selector ought to hit the labels.
* sweep: six-sentence contexts so top-k sweeps up to k=5 stay inside the
  sentence count.
"""
from __future__ import annotations

import json
import random

from jointqg.corpus import QAExample, RawDocument, build_example
from jointqg.labeler import RelevanceLabels, question_type_of
from jointqg.tokenizer import tokenize

NAMES = ["Alba", "Boris", "Carmen", "Dmitri", "Elena",
         "Felix", "Goran", "Hana", "Ivan", "Jonas"]
ITEMS = ["apples", "books", "candles", "drums", "engines"]

SELECTOR_NOUNS = ["amulet", "beacon", "chalice", "dagger",
                  "emerald", "falcon", "goblet", "harp"]
_FILLERS = [
    "Rain fell through the night.",
    "The road stays quiet.",
    "Winter came early that year.",
    "Markets open at dawn.",
    "Bells ring across the square.",
    "Dust settles on the shelves.",
]


def make_example(ident: str, context: str, question: str, answer: str) -> QAExample:
    return build_example(RawDocument(
        id=ident, context=context, question=question,
        answer_text=answer, answer_start=context.index(answer)))


def memorization_examples() -> list[QAExample]:
    out = []
    for name in NAMES:
        for item in ITEMS:
            ctx = f"{name} runs a market stall. The stall mostly sells {item}."
            out.append(make_example(
                f"mem-{name.lower()}-{item}", ctx,
                f"What does {name} sell?", item))
    return out


def selector_examples(n: int = 40, seed: int = 7
                      ) -> tuple[list[QAExample], list[RelevanceLabels], list[str]]:
    """Examples plus hand-made labels: the two sentences holding the
    answer noun are positive, the two fillers negative. k=2 throughout."""
    rng = random.Random(seed)
    examples, labels, qtypes = [], [], []
    for i in range(n):
        noun = SELECTOR_NOUNS[i % len(SELECTOR_NOUNS)]
        positives = [
            f"The {noun} rests in the stone vault.",
            f"Keepers guard the {noun} closely.",
        ]
        negatives = rng.sample(_FILLERS, 2)
        sentences = positives + negatives
        rng.shuffle(sentences)
        ctx = " ".join(sentences)
        ex = make_example(f"sel-{i}", ctx, f"Where is the {noun} kept?", noun)
        lab = tuple(1 if noun in tokenize(span.text(ctx)) else 0
                    for span in ex.sentences)
        examples.append(ex)
        labels.append(RelevanceLabels(lab, tuple(float(v) for v in lab), 2))
        qtypes.append(question_type_of(ex.document.question))
    return examples, labels, qtypes


_PLACES = ["harbor", "castle", "garden", "museum", "bridge", "temple", "tower", "mill"]
_THINGS = ["bell", "statue", "mosaic", "organ", "fresco", "clock", "anchor", "loom"]


def sweep_examples(n: int = 8) -> list[QAExample]:
    out = []
    for i in range(n):
        place, thing = _PLACES[i % len(_PLACES)], _THINGS[i % len(_THINGS)]
        ctx = (f"Travelers reach the {place} by road. "
               f"The {place} holds a famous {thing}. "
               f"Visitors admire the {thing} daily. "
               "Guides tell long stories. "
               "The weather shifts quickly. "
               "Evening brings quiet streets.")
        out.append(make_example(f"sweep-{i}", ctx,
                                f"What does the {place} hold?", thing))
    return out


def squad_dict(examples: list[QAExample]) -> dict:
    """Regroup examples into the SQuAD v1.1 shape, one paragraph per
    distinct context, order preserved."""
    paragraphs: dict[str, list[dict]] = {}
    order: list[str] = []
    for ex in examples:
        doc = ex.document
        if doc.context not in paragraphs:
            paragraphs[doc.context] = []
            order.append(doc.context)
        paragraphs[doc.context].append({
            "id": doc.id,
            "question": doc.question,
            "answers": [{"text": doc.answer_text, "answer_start": doc.answer_start}],
        })
    return {"version": "1.1", "data": [{
        "title": "synthetic",
        "paragraphs": [{"context": ctx, "qas": paragraphs[ctx]} for ctx in order],
    }]}


def write_squad_json(examples: list[QAExample], path: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(squad_dict(examples), fh, ensure_ascii=False)
    return str(path)
