"""End-to-end experiment pipeline and batch studies.

``run_pipeline`` drives prepare -> vocab -> label -> train -> generate ->
evaluate inside a fresh run directory, leaving every intermediate artifact
on disk: corpus.jsonl, vocab.txt, labels.jsonl, model.ckpt (plus
selector.ckpt for two_step), train_log.jsonl, predictions.jsonl and
report.json. The report embeds the fully resolved configuration, a short
hash of it, and a content hash of the input data so results stay
attributable. A lock file guards each run directory against concurrent
reuse; any stage failure aborts with the stage name while partial
artifacts stay on disk for inspection.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

from . import corpus as C
from . import decoding as D
from . import metrics as MX
from . import model as M
from . import training as T
from .embedding import BackendSpec, create_backend
from .errors import StageError
from .labeler import label_examples, question_type_of, write_labels_jsonl
from .tokenizer import Vocabulary, assemble_model_input, tokenize

_MODEL_FIELDS = {f.name for f in dataclasses.fields(M.ModelConfig)} - {"vocab_size"}
_TRAIN_FIELDS = {f.name for f in dataclasses.fields(T.TrainConfig)}


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, JSON-serializable."""

    train_data: str
    out_dir: str
    eval_data: str | None = None
    seed: int = 0
    k: int = 4
    vocab_max_size: int = 30000
    vocab_min_freq: int = 1
    backend: BackendSpec = field(default_factory=BackendSpec)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    beam_size: int = 1
    max_decode_len: int = 32
    length_alpha: float = 0.7

    def __post_init__(self):
        if isinstance(self.backend, dict):
            self.backend = BackendSpec(**self.backend)
        unknown = set(self.model) - _MODEL_FIELDS
        if unknown:
            raise ValueError(f"unknown model fields: {sorted(unknown)}")
        unknown = set(self.train) - _TRAIN_FIELDS
        if unknown:
            raise ValueError(f"unknown train fields: {sorted(unknown)}")

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with non-None overrides applied; mode/lambda reach train."""
        out = dataclasses.replace(self)
        out.model = dict(self.model)
        out.train = dict(self.train)
        for key, value in kw.items():
            if value is None:
                continue
            if key in ("mode", "lambda_weight"):
                out.train[key] = value
            elif key == "backend":
                out.backend = BackendSpec(kind=value, dim=self.backend.dim,
                                          seed=self.backend.seed,
                                          source=self.backend.source)
            elif hasattr(out, key):
                setattr(out, key, value)
            else:
                raise ValueError(f"unknown override '{key}'")
        return out

    def train_config(self) -> T.TrainConfig:
        kw = dict(self.train)
        kw.setdefault("seed", self.seed)
        kw.setdefault("k", self.k)
        cfg = T.TrainConfig(**kw)
        cfg.validate()
        return cfg

    def model_config(self, vocab_size: int) -> M.ModelConfig:
        cfg = M.ModelConfig(vocab_size=vocab_size, **self.model)
        cfg.validate()
        return cfg

    def resolved(self) -> dict:
        """Full configuration with every default filled in."""
        out = dataclasses.asdict(self)
        out["backend"] = dataclasses.asdict(self.backend)
        model = dataclasses.asdict(M.ModelConfig(vocab_size=0, **self.model))
        del model["vocab_size"]
        out["model"] = model
        out["train"] = dataclasses.asdict(self.train_config())
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage(name: str):
    """Decorator-free stage wrapper: call fn, rewrap any failure."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False

    return _Ctx()


class RunLock:
    """O_EXCL lock file; refuses a directory already in use."""

    def __init__(self, run_dir: str):
        self.path = os.path.join(run_dir, "lock")

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(f"run directory is locked: {self.path}") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass
        return False


def _make_run_dir(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = os.path.join(cfg.out_dir, f"run-{stamp}-{cfg.config_hash()}")
    run_dir = base
    n = 1
    while True:
        try:
            os.makedirs(run_dir, exist_ok=False)
            return run_dir
        except FileExistsError:
            n += 1
            run_dir = f"{base}-{n}"


def _decode_inputs(examples, vocab, model_cfg, train_cfg, selector_ckpt):
    """Model inputs for evaluation; a selector checkpoint filters sentences
    the way two_step inference requires."""
    inputs = []
    for ex in examples:
        mi = assemble_model_input(ex, vocab, model_cfg.max_len)
        if selector_ckpt is not None:
            enc = M.encoder_forward(mi, selector_ckpt.params, selector_ckpt.config)
            probs = M.selector_forward(enc.sentence_vectors, selector_ckpt.params)
            keep = T.selector_keep_indices(probs, mi.kept_sentences, train_cfg.k)
            mi = assemble_model_input(ex, vocab, model_cfg.max_len, keep=keep)
        inputs.append(mi)
    return inputs


def run_pipeline(cfg: ExperimentConfig) -> tuple[MX.MetricReport, str]:
    """Execute every stage; returns the evaluation report and run dir."""
    run_dir = _make_run_dir(cfg)
    with RunLock(run_dir):
        with _stage("prepare"):
            train_examples = C.load_squad_json(cfg.train_data)
            C.write_corpus_jsonl(train_examples, os.path.join(run_dir, "corpus.jsonl"))
            data_hash = _file_sha256(cfg.train_data)
            if cfg.eval_data and cfg.eval_data != cfg.train_data:
                eval_examples = C.load_squad_json(cfg.eval_data)
                data_hash = f"{data_hash}:{_file_sha256(cfg.eval_data)}"
            else:
                eval_examples = train_examples

        with _stage("vocab"):
            vocab = Vocabulary.build(train_examples, cfg.vocab_max_size,
                                     cfg.vocab_min_freq)
            vocab.save(os.path.join(run_dir, "vocab.txt"))
            model_cfg = cfg.model_config(len(vocab))
            train_cfg = cfg.train_config()

        with _stage("label"):
            init_params = M.Parameters.init(model_cfg, seed=cfg.seed)
            backend = create_backend(cfg.backend, params=init_params,
                                     config=model_cfg, vocab=vocab)
            labels = label_examples(train_examples, backend, cfg.k)
            qtypes = [question_type_of(ex.document.question) for ex in train_examples]
            write_labels_jsonl(train_examples, labels,
                               os.path.join(run_dir, "labels.jsonl"))

        with _stage("train"):
            refresh = None
            if train_cfg.refresh_labels_each_epoch:
                def refresh(params):
                    live = create_backend(
                        BackendSpec("model_encoder"), params=params,
                        config=model_cfg, vocab=vocab)
                    return label_examples(train_examples, live, cfg.k)
            result = T.train(train_examples, labels, qtypes, vocab, model_cfg,
                             train_cfg, log_path=os.path.join(run_dir, "train_log.jsonl"),
                             label_refresh=refresh)
            ckpt_path = os.path.join(run_dir, "model.ckpt")
            M.save_checkpoint(ckpt_path, result.params, model_cfg, vocab,
                              step=result.steps, seed=train_cfg.seed)
            selector_path = None
            if result.selector_params is not None:
                selector_path = os.path.join(run_dir, "selector.ckpt")
                M.save_checkpoint(selector_path, result.selector_params, model_cfg,
                                  vocab, step=result.steps, seed=train_cfg.seed)

        with _stage("generate"):
            ckpt = M.load_checkpoint(ckpt_path, expected_vocab=vocab)
            selector_ckpt = (M.load_checkpoint(selector_path, expected_vocab=vocab)
                             if selector_path else None)
            inputs = _decode_inputs(eval_examples, vocab, ckpt.config, train_cfg,
                                    selector_ckpt)
            records = []
            for ex, mi in zip(eval_examples, inputs):
                scorer = D.make_scorer(ckpt, mi)
                best = D.beam_search_nbest(scorer, cfg.beam_size,
                                           cfg.max_decode_len, cfg.length_alpha)[0]
                records.append({
                    "id": ex.document.id,
                    "prediction": vocab.decode(list(best.ids)),
                    "gold": ex.document.question,
                    "beam_size": cfg.beam_size,
                    "score": best.score,
                })
            D.write_predictions_jsonl(records, os.path.join(run_dir, "predictions.jsonl"))

        with _stage("evaluate"):
            cands = [tokenize(r["prediction"]) for r in records]
            refs = [tokenize(r["gold"]) for r in records]
            report = MX.score_corpus(cands, refs, ids=[r["id"] for r in records])
            MX.write_report_json(report, os.path.join(run_dir, "report.json"), extra={
                "config": cfg.resolved(),
                "config_hash": cfg.config_hash(),
                "data_sha256": data_hash,
                "vocab_size": len(vocab),
                "selector_f1": result.selector_f1,
            })
    return report, run_dir


def sweep_top_k(cfg: ExperimentConfig, k_list: list[int]) -> tuple[list[dict], list[dict]]:
    """Run the pipeline once per k; failed runs land in an error sidecar
    and do not stop the sweep. Writes sweep_k.csv (and sweep_k_errors.csv
    when needed) under out_dir."""
    if not k_list:
        raise ValueError("k_list must not be empty")
    rows: list[dict] = []
    errors: list[dict] = []
    for k in k_list:
        sub = cfg.with_overrides(k=int(k),
                                 out_dir=os.path.join(cfg.out_dir, f"k{k}"))
        try:
            report, _ = run_pipeline(sub)
            rows.append({"k": int(k), "bleu4": report.bleu4,
                         "meteor_lite": report.meteor_lite,
                         "rouge_l": report.rouge_l})
        except Exception as e:  # noqa: BLE001 - sweep must survive bad cells
            stage = e.stage if isinstance(e, StageError) else "unknown"
            errors.append({"k": int(k), "stage": stage, "error": str(e)})
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "sweep_k.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["k", "bleu4", "meteor_lite", "rouge_l"])
        writer.writeheader()
        writer.writerows(rows)
    if errors:
        with open(os.path.join(cfg.out_dir, "sweep_k_errors.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["k", "stage", "error"])
            writer.writeheader()
            writer.writerows(errors)
    return rows, errors


def compare_modes(cfg: ExperimentConfig,
                  modes: tuple[str, ...] = ("joint", "two_step")) -> list[dict]:
    """Run each training mode on the same data; rows carry metric deltas
    against the first mode. Writes compare_modes.csv under out_dir."""
    if len(modes) < 2:
        raise ValueError("compare_modes needs at least two modes")
    rows: list[dict] = []
    for mode in modes:
        sub = cfg.with_overrides(mode=mode,
                                 out_dir=os.path.join(cfg.out_dir, f"mode-{mode}"))
        report, _ = run_pipeline(sub)
        rows.append({"mode": mode, "bleu4": report.bleu4,
                     "meteor_lite": report.meteor_lite,
                     "rouge_l": report.rouge_l})
    base = rows[0]
    for row in rows:
        for metric in ("bleu4", "meteor_lite", "rouge_l"):
            row[f"delta_{metric}"] = row[metric] - base[metric]
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "compare_modes.csv"), "w", newline="",
              encoding="utf-8") as fh:
        fields = ["mode", "bleu4", "meteor_lite", "rouge_l",
                  "delta_bleu4", "delta_meteor_lite", "delta_rouge_l"]
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return rows
