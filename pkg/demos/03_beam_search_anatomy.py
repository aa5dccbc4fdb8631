"""Why beam search beats greedy, shown on a five-token toy model.

The scorer below is a hand-written probability table, not a neural net.
Token ids follow the package convention: 0 and 2 (padding, begin marker)
are never generated, 3 ends a hypothesis, 1 and 4 are ordinary words. The
table is rigged so the step-one favorite leads into a low-probability
dead end.

    python3 demos/03_beam_search_anatomy.py
"""
import numpy as np

from jointqg.decoding import beam_search_nbest, greedy_decode

TABLE = {
    (): {1: 0.45, 4: 0.40, 3: 0.14},
    (1,): {1: 0.39, 4: 0.39, 3: 0.21},
    (4,): {1: 0.04, 4: 0.05, 3: 0.90},     # committing to 4 pays off
    (1, 1): {1: 0.30, 4: 0.19, 3: 0.50},
}
DEFAULT = {1: 0.33, 4: 0.33, 3: 0.33}


def scorer(prefix_ids):
    row = TABLE.get(tuple(prefix_ids), DEFAULT)
    probs = np.full(5, 0.005)
    for tok, p in row.items():
        probs[tok] = p
    return np.log(probs)


def show(title, results):
    print(title)
    for r in results:
        state = "finished" if r.finished else "cut off"
        print(f"  ids {list(r.ids)!s:<12} log p {r.logp:7.3f}  "
              f"score {r.score:7.3f}  {state}")


def main():
    print("Greedy path:", greedy_decode(scorer, max_len=3))
    print("It grabs token 1 (p=0.45) and never recovers.\n")

    show("Beam of 3, no length normalization (alpha=0):",
         beam_search_nbest(scorer, beam_size=3, max_len=3, length_alpha=0.0))
    print("\nThe winner starts with token 4: 0.40 * 0.90 beats anything")
    print("reachable through token 1.\n")

    # length normalization divides log p by len^alpha, which forgives
    # longer hypotheses their extra factors
    for alpha in (0.0, 0.7, 1.0):
        best = beam_search_nbest(scorer, beam_size=3, max_len=3,
                                 length_alpha=alpha)[0]
        print(f"alpha={alpha:3.1f} -> best {list(best.ids)} score {best.score:.3f}")

    print("\nBeam of 1 with alpha=0 reproduces greedy exactly:")
    one = beam_search_nbest(scorer, beam_size=1, max_len=3, length_alpha=0.0)[0]
    print(f"  {list(one.ids)} == {greedy_decode(scorer, max_len=3)}")


if __name__ == "__main__":
    main()
