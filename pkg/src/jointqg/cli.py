"""Command-line entry points.

Subcommands map onto the library pipeline:

    prepare        SQuAD JSON -> corpus.jsonl
    label          corpus.jsonl -> labels.jsonl (relevance + question type)
    train          full pipeline run from an experiment config
    generate       decode a corpus with an existing checkpoint
    evaluate       score a predictions file -> report.json
    sweep-k        pipeline once per k, collecting a CSV
    compare-modes  pipeline once per training mode, with metric deltas
"""
from __future__ import annotations

import argparse
import json
import sys

from . import corpus as C
from . import decoding as D
from . import metrics as MX
from . import model as M
from .embedding import BackendSpec, create_backend
from .harness import ExperimentConfig, compare_modes, run_pipeline, sweep_top_k
from .labeler import label_examples, write_labels_jsonl
from .tokenizer import Vocabulary, assemble_model_input, tokenize


def _add_config_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointqg",
                                     description="selector-generator question generation workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="convert SQuAD-format JSON to corpus JSONL")
    p.add_argument("input", help="SQuAD-format JSON file")
    p.add_argument("--out", required=True, help="corpus JSONL to write")

    p = sub.add_parser("label", help="write weak relevance labels for a corpus")
    p.add_argument("corpus", help="corpus JSONL from prepare")
    p.add_argument("--out", required=True, help="labels JSONL to write")
    p.add_argument("--backend", default="bag_mean",
                   choices=["bag_mean", "precomputed_file"],
                   help="embedding backend (model_encoder needs a full run)")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--source", default=None, help="vector table for precomputed_file")

    p = sub.add_parser("train", help="run the full pipeline from a config")
    _add_config_overrides(p)
    p.add_argument("--mode", default=None,
                   choices=["joint", "generation_only", "two_step", "aux_qtc"])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--lambda", dest="lambda_weight", type=float, default=None)
    p.add_argument("--beam", dest="beam_size", type=int, default=None)
    p.add_argument("--backend", default=None,
                   choices=["bag_mean", "precomputed_file", "model_encoder"])

    p = sub.add_parser("generate", help="decode a corpus with a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--data", required=True, help="corpus JSONL to decode")
    p.add_argument("--vocab", required=True, help="vocab.txt saved with the checkpoint")
    p.add_argument("--out", required=True, help="predictions JSONL to write")
    p.add_argument("--beam", dest="beam_size", type=int, default=1)
    p.add_argument("--max-len", type=int, default=32)
    p.add_argument("--alpha", type=float, default=0.7)

    p = sub.add_parser("evaluate", help="score predictions against gold questions")
    p.add_argument("predictions", help="predictions JSONL from generate")
    p.add_argument("--out", required=True, help="report JSON to write")

    p = sub.add_parser("sweep-k", help="run the pipeline for each k")
    _add_config_overrides(p)
    p.add_argument("--k-list", required=True,
                   help="comma-separated k values, e.g. 1,2,3,4,5")

    p = sub.add_parser("compare-modes", help="run the pipeline per training mode")
    _add_config_overrides(p)
    p.add_argument("--modes", default="joint,two_step",
                   help="comma-separated training modes")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    for key in ("seed", "k", "beam_size"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "lambda_weight", None) is not None:
        overrides["lambda_weight"] = args.lambda_weight
    if getattr(args, "backend", None):
        overrides["backend"] = args.backend
    return cfg.with_overrides(**overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "prepare":
        examples = C.load_squad_json(args.input)
        C.write_corpus_jsonl(examples, args.out)
        print(f"wrote {len(examples)} examples to {args.out}")
        return 0

    if args.command == "label":
        examples = C.read_corpus_jsonl(args.corpus)
        spec = BackendSpec(kind=args.backend, dim=args.dim, seed=args.seed,
                           source=args.source)
        backend = create_backend(spec)
        labels = label_examples(examples, backend, args.k)
        write_labels_jsonl(examples, labels, args.out)
        print(f"wrote labels for {len(examples)} examples to {args.out}")
        return 0

    if args.command == "train":
        report, run_dir = run_pipeline(_load_config(args))
        print(f"run dir: {run_dir}")
        print(json.dumps(report.summary(), indent=1))
        return 0

    if args.command == "generate":
        vocab = Vocabulary.load(args.vocab)
        ckpt = M.load_checkpoint(args.checkpoint, expected_vocab=vocab)
        examples = C.read_corpus_jsonl(args.data)
        records = []
        for ex in examples:
            mi = assemble_model_input(ex, vocab, ckpt.config.max_len)
            scorer = D.make_scorer(ckpt, mi)
            best = D.beam_search_nbest(scorer, args.beam_size, args.max_len,
                                       args.alpha)[0]
            records.append({"id": ex.document.id,
                            "prediction": vocab.decode(list(best.ids)),
                            "gold": ex.document.question,
                            "beam_size": args.beam_size,
                            "score": best.score})
        D.write_predictions_jsonl(records, args.out)
        print(f"wrote {len(records)} predictions to {args.out}")
        return 0

    if args.command == "evaluate":
        records = D.read_predictions_jsonl(args.predictions)
        if not records:
            print("no predictions to score", file=sys.stderr)
            return 1
        cands = [tokenize(r["prediction"]) for r in records]
        refs = [tokenize(r["gold"]) for r in records]
        report = MX.score_corpus(cands, refs, ids=[str(r["id"]) for r in records])
        MX.write_report_json(report, args.out)
        print(json.dumps(report.summary(), indent=1))
        return 0

    if args.command == "sweep-k":
        try:
            k_list = [int(x) for x in args.k_list.split(",") if x.strip()]
        except ValueError:
            print("--k-list must be comma-separated integers", file=sys.stderr)
            return 2
        rows, errors = sweep_top_k(_load_config(args), k_list)
        for row in rows:
            print(row)
        if errors:
            print(f"{len(errors)} k value(s) failed; see sweep_k_errors.csv",
                  file=sys.stderr)
        return 0

    if args.command == "compare-modes":
        modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
        rows = compare_modes(_load_config(args), modes)
        for row in rows:
            print(row)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
