"""Answer-aware question generation with a jointly trained sentence
selector, written against plain numpy.

The public surface mirrors the pipeline stages: corpus loading and
sentence segmentation (:mod:`jointqg.corpus`), tokenization and input
assembly (:mod:`jointqg.tokenizer`), weak relevance labeling
(:mod:`jointqg.embedding`, :mod:`jointqg.labeler`), the joint model and
its training loop (:mod:`jointqg.model`, :mod:`jointqg.training`),
decoding (:mod:`jointqg.decoding`), metrics (:mod:`jointqg.metrics`) and
experiment orchestration (:mod:`jointqg.harness`).
"""

from .corpus import (QAExample, RawDocument, SentenceSpan, align_answer,
                     load_squad_json, split_sentences)
from .embedding import BackendSpec, cosine_similarity, create_backend
from .labeler import (QUESTION_TYPES, RelevanceLabels, make_relevance_labels,
                      question_type_of)
from .metrics import MetricReport, bleu4, meteor_lite, rouge_l, score_corpus
from .model import (Checkpoint, EncoderOutput, ModelConfig, Parameters,
                    decoder_step, encoder_forward, load_checkpoint,
                    reconstruct_sentence_vectors, save_checkpoint,
                    selector_forward)
from .tokenizer import ModelInput, Vocabulary, assemble_model_input, tokenize
from .training import (Adam, TrainConfig, TrainResult, generation_loss,
                       joint_loss, selection_loss, train)
from .decoding import beam_search_decode, beam_search_nbest, greedy_decode
from .harness import ExperimentConfig, compare_modes, run_pipeline, sweep_top_k

__version__ = "0.1.0"

__all__ = [
    "QAExample", "RawDocument", "SentenceSpan", "align_answer",
    "load_squad_json", "split_sentences",
    "BackendSpec", "cosine_similarity", "create_backend",
    "QUESTION_TYPES", "RelevanceLabels", "make_relevance_labels",
    "question_type_of",
    "MetricReport", "bleu4", "meteor_lite", "rouge_l", "score_corpus",
    "Checkpoint", "EncoderOutput", "ModelConfig", "Parameters",
    "decoder_step", "encoder_forward", "load_checkpoint",
    "reconstruct_sentence_vectors", "save_checkpoint", "selector_forward",
    "ModelInput", "Vocabulary", "assemble_model_input", "tokenize",
    "Adam", "TrainConfig", "TrainResult", "generation_loss", "joint_loss",
    "selection_loss", "train",
    "beam_search_decode", "beam_search_nbest", "greedy_decode",
    "ExperimentConfig", "compare_modes", "run_pipeline", "sweep_top_k",
    "__version__",
]
