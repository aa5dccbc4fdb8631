"""What the three evaluation metrics actually reward.

Corpus BLEU-4 counts clipped n-gram overlap with a brevity penalty,
ROUGE-L measures the longest common subsequence, and the METEOR variant
here aligns tokens by exact match then by suffix stem and penalizes
fragmented alignments. Small edits move the three numbers in usefully
different ways.

    python3 demos/04_metric_tour.py
"""
from jointqg.metrics import bleu4, meteor_lite, rouge_l, score_corpus

GOLD = "what year was the observatory on the ridge built ?"

CANDIDATES = [
    ("verbatim", GOLD),
    ("one substitution", "what year was the telescope on the ridge built ?"),
    ("reordered", "the observatory on the ridge was built what year ?"),
    ("stemmed variants", "what year were the observatories on the ridge building ?"),
    ("too short", "what year ?"),
    ("padded out", "what year was the observatory on the ridge built built built ?"),
]


def main():
    ref = GOLD.split()
    print(f"gold: {GOLD}\n")
    print(f"{'candidate':<18} {'BLEU-4':>8} {'ROUGE-L':>8} {'METEOR':>8}")
    for label, text in CANDIDATES:
        cand = text.split()
        print(f"{label:<18} {bleu4([cand], [ref]):8.3f} "
              f"{rouge_l(cand, ref):8.3f} {meteor_lite(cand, ref):8.3f}")

    print("\nThings worth noticing:")
    print("- the identity row scores METEOR slightly under 1: a single")
    print("  perfect chunk still pays 0.5/m^3 of fragmentation penalty")
    print("- reordering leaves unigrams intact, so BLEU-4 only loses its")
    print("  higher orders while ROUGE-L tracks the broken subsequence")
    print("- 'observatories'/'building' still align through their stems")
    print("- repetition is clipped by BLEU, not rewarded")

    # corpus scoring aggregates BLEU over the pool but averages the
    # sentence-level metrics
    cands = [text.split() for _, text in CANDIDATES]
    refs = [ref] * len(cands)
    report = score_corpus(cands, refs, ids=[label for label, _ in CANDIDATES])
    print(f"\ncorpus over all six: {report.summary()}")


if __name__ == "__main__":
    main()
