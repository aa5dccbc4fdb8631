"""From raw paragraphs to weak relevance labels.

The workbench never sees gold sentence annotations. Instead it ranks each
sentence by cosine similarity between a cheap bag-of-words embedding of the
sentence and the same embedding of the answer span, then marks the top k
as relevant. This script walks one paragraph through that pipeline and
prints every intermediate.

Run from the repository root:

    python3 demos/01_sentences_and_labels.py
"""
from jointqg.corpus import RawDocument, build_example
from jointqg.embedding import BagMeanBackend
from jointqg.labeler import make_relevance_labels, question_type_of, rank_sentences

CONTEXT = (
    "The observatory sits on a ridge above the town of Valdern. "
    "Its main telescope was installed in 1908 by the Halloran brothers. "
    "Funding for the dome came from a regional mining cooperative. "
    "Visitors can tour the instrument hall on weekends."
)
QUESTION = "Who installed the main telescope at the observatory?"
ANSWER = "the Halloran brothers"


def main():
    doc = RawDocument(id="demo-1", context=CONTEXT, question=QUESTION,
                      answer_text=ANSWER,
                      answer_start=CONTEXT.index(ANSWER))
    example = build_example(doc)

    print("Sentence segmentation:")
    for i, text in enumerate(example.sentence_texts()):
        marker = "  <- answer lives here" if i == example.answer_sentence else ""
        print(f"  [{i}] {text}{marker}")

    backend = BagMeanBackend(dim=64, seed=0)
    labels = make_relevance_labels(example, backend, k=2)

    print("\nCosine similarity of each sentence to the answer span:")
    order = rank_sentences(labels.scores)
    for rank, i in enumerate(order):
        flag = "kept" if labels.labels[i] else "    "
        print(f"  rank {rank}  sentence {i}  score {labels.scores[i]:+.4f}  {flag}")

    print(f"\nWeak labels (k={labels.k}): {list(labels.labels)}")
    print(f"Positive sentence indices: {labels.positive_indices()}")
    print(f"Question type bucket: {question_type_of(QUESTION)!r}")

    # the labeler is honest about its limits: a sentence that paraphrases
    # the answer without sharing words with it will rank low
    print("\nNote: ranking is purely lexical. Sentences that refer to the")
    print("answer with different words score near zero, which is exactly")
    print("the weakness the trained selector is meant to improve on.")


if __name__ == "__main__":
    main()
