"""Embedding backends and cosine similarity."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jointqg.embedding import (
    BackendSpec, BagMeanBackend, ModelEncoderBackend, PrecomputedBackend,
    cosine_similarity, create_backend, embed_tokens,
)
from jointqg.errors import SchemaError
from jointqg.model import encode_token_ids

finite_vec = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    min_size=2, max_size=6)


def write_table(tmp_path, rows: dict[str, list[float]], dim: int):
    lines = [f"dim {dim}"]
    for tok, vals in rows.items():
        lines.append(tok + "\t" + " ".join(str(v) for v in vals))
    p = tmp_path / "table.tsv"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(p)


# ------------------------------------------------------------- backends

def test_bag_mean_single_token_is_its_vector():
    be = BagMeanBackend(dim=16, seed=3)
    v = be.embed_tokens(["alpha"])
    assert np.array_equal(v, be.token_vector("alpha"))
    assert np.array_equal(be.embed_tokens(["alpha", "alpha"]), v)


def test_bag_mean_deterministic_under_seed():
    a = BagMeanBackend(dim=16, seed=3).embed_tokens(["x", "y"])
    b = BagMeanBackend(dim=16, seed=3).embed_tokens(["x", "y"])
    c = BagMeanBackend(dim=16, seed=4).embed_tokens(["x", "y"])
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bag_mean_rejects_empty():
    with pytest.raises(ValueError):
        BagMeanBackend(dim=8).embed_tokens([])


def test_precomputed_mean(tmp_path):
    path = write_table(tmp_path, {"a": [1.0, 0.0], "b": [0.0, 2.0]}, 2)
    be = PrecomputedBackend(path)
    assert np.array_equal(be.embed_tokens(["a"]), [1.0, 0.0])
    assert np.array_equal(be.embed_tokens(["a", "a"]), [1.0, 0.0])
    assert np.allclose(be.embed_tokens(["a", "b"]), [0.5, 1.0])


def test_precomputed_miss_uses_unk_row(tmp_path):
    path = write_table(tmp_path, {"a": [1.0, 0.0], "<unk>": [9.0, 9.0]}, 2)
    be = PrecomputedBackend(path)
    assert np.array_equal(be.embed_tokens(["nope"]), [9.0, 9.0])


def test_precomputed_miss_defaults_to_zeros(tmp_path):
    path = write_table(tmp_path, {"a": [1.0, 0.0]}, 2)
    assert np.array_equal(PrecomputedBackend(path).embed_tokens(["nope"]), [0.0, 0.0])


def test_precomputed_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("a\t1 2\n")
    with pytest.raises(SchemaError):
        PrecomputedBackend(str(p))


def test_precomputed_rejects_wrong_width(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("dim 3\na\t1 2\n")
    with pytest.raises(SchemaError):
        PrecomputedBackend(str(p))


def test_precomputed_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        PrecomputedBackend(str(tmp_path / "absent.tsv"))


def test_model_encoder_backend_pools_token_states(tiny_vocab, tiny_model_cfg, tiny_params):
    be = ModelEncoderBackend(tiny_params, tiny_model_cfg, tiny_vocab)
    vec = be.embed_tokens(["what", "is"])
    assert vec.shape == (tiny_model_cfg.d_model,)
    assert np.isfinite(vec).all()
    from jointqg.tokenizer import CLS_ID, SEP_ID
    ids = np.asarray([CLS_ID] + tiny_vocab.encode("what is") + [SEP_ID])
    states = encode_token_ids(ids, tiny_params, tiny_model_cfg)
    assert np.allclose(vec, states[1:-1].mean(axis=0))


def test_create_backend_dispatch(tmp_path):
    assert isinstance(create_backend(BackendSpec("bag_mean", dim=8)), BagMeanBackend)
    path = write_table(tmp_path, {"a": [1.0]}, 1)
    assert isinstance(create_backend(BackendSpec("precomputed_file", source=path)),
                      PrecomputedBackend)
    with pytest.raises(ValueError):
        create_backend(BackendSpec("nonsense"))


def test_embed_tokens_function_dispatches():
    be = BagMeanBackend(dim=8, seed=0)
    assert np.array_equal(embed_tokens(["tok"], be), be.embed_tokens(["tok"]))


# ------------------------------------------------------------- cosine

def test_cosine_self_similarity():
    v = np.array([0.3, -1.2, 4.0])
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)


def test_cosine_orthogonal():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_known_value():
    got = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    assert got == pytest.approx(0.70710678, abs=1e-8)


def test_cosine_degenerate_flagged():
    val, degenerate = cosine_similarity(np.zeros(3), np.ones(3), return_flag=True)
    assert val == 0.0 and degenerate is True
    val, degenerate = cosine_similarity(np.ones(3), np.ones(3), return_flag=True)
    assert degenerate is False


def test_cosine_dim_mismatch():
    with pytest.raises(ValueError):
        cosine_similarity(np.ones(2), np.ones(3))


@given(finite_vec, finite_vec.map(lambda v: v), st.floats(min_value=1e-3, max_value=1e3))
def test_cosine_scale_invariance_and_symmetry(u, v, alpha):
    n = min(len(u), len(v))
    u, v = np.asarray(u[:n]), np.asarray(v[:n])
    assert cosine_similarity(u, v) == cosine_similarity(v, u)
    assert abs(cosine_similarity(u, v)) <= 1 + 1e-12
    assert cosine_similarity(alpha * u, v) == pytest.approx(
        cosine_similarity(u, v), abs=1e-9)
