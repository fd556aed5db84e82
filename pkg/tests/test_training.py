from dataclasses import replace

import numpy as np
import pytest

from codemix.common.datasets.bpe import PAD_ID, RESERVED_TOKENS
from codemix.common.datasets.factory import TweetDataset, make_dataset
from codemix.common.datasets.utils import collate, iterate_batches
from codemix.common.errors import ConfigError, NumericalError
from codemix.common.logger import TRAIN_LOG_COLUMNS
from codemix.common.models.configuration_codemix import TrainConfig, resolve_train_config
from codemix.common.models.factory import make_model
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.optim import Adam
from codemix.scripts.eval import eval_model
from codemix.scripts.train import train, update_model
from tests.conftest import CONFIGS_DIR, TOY_UNLABELED


def test_collate_pads_to_longest_in_batch(toy_dataset):
    items = [toy_dataset[0], toy_dataset[1], toy_dataset[2]]
    batch = collate(items)
    n_max = max(item.sequence.n for item in items)
    assert batch["ids"].shape == (3, n_max)
    assert batch["n"].tolist() == [item.sequence.n for item in items]
    padding = np.arange(n_max)[None, :] >= batch["n"][:, None]
    assert np.all(batch["ids"][padding] == PAD_ID)
    assert not np.any(batch["ids"][~padding] == PAD_ID)
    assert batch["uid"] == [item.uid for item in items]
    with pytest.raises(ValueError):
        collate([])


def test_iterate_batches_covers_every_tweet_once(toy_dataset):
    batches = list(iterate_batches(toy_dataset, 5, np.random.default_rng(0)))
    assert [len(b["uid"]) for b in batches] == [5, 5, 5, 5, 5, 5, 2]
    uids = [uid for b in batches for uid in b["uid"]]
    assert sorted(uids) == sorted(item.uid for item in toy_dataset)
    in_order = [uid for b in iterate_batches(toy_dataset, 5) for uid in b["uid"]]
    assert in_order == [item.uid for item in toy_dataset]


def test_adam_zero_gradient_leaves_params_unchanged():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    optimizer = Adam(params, lr=0.1)
    optimizer.step({"w": np.zeros(3)})
    np.testing.assert_array_equal(params["w"], [1.0, -2.0, 3.0])


def test_adam_first_step_moves_by_lr():
    params = {"w": np.array([1.0, -2.0])}
    Adam(params, lr=0.1).step({"w": np.array([5.0, -0.01])})
    np.testing.assert_allclose(params["w"], [0.9, -1.9], atol=1e-6)


def test_adam_skips_frozen_params_and_pad_row():
    params = {"emb": np.ones((3, 2)), "frozen": np.ones(2)}
    params["emb"][PAD_ID] = 0.0
    optimizer = Adam(params, lr=0.1, frozen={"frozen"}, embedding_names=["emb"])
    optimizer.step({"emb": np.ones((3, 2)), "frozen": np.ones(2)})
    np.testing.assert_array_equal(params["emb"][PAD_ID], [0.0, 0.0])
    np.testing.assert_array_equal(params["frozen"], [1.0, 1.0])
    assert np.all(params["emb"][1:] < 1.0)


def test_update_model_returns_log_items(tiny_config, toy_vocab, toy_dataset):
    model = make_model(tiny_config, toy_vocab)
    optimizer = Adam(model.params, lr=1e-2)
    batch = next(iterate_batches(toy_dataset, 4))
    before = {k: v.copy() for k, v in model.params.items()}
    info = update_model(model, batch, optimizer, np.random.default_rng(0))
    assert info["batch_size"] == 4
    assert info["loss"] > 0
    assert any(not np.array_equal(before[k], model.params[k]) for k in before)


def test_zero_learning_rate_keeps_initial_params(tiny_config, toy_vocab, toy_dataset):
    cfg = replace(tiny_config, learning_rate=0.0, epochs=2)
    result = train(cfg, toy_dataset, toy_vocab)
    fresh = make_model(cfg, toy_vocab)
    for name, value in fresh.params.items():
        np.testing.assert_array_equal(result.checkpoint.model.params[name], value)


def test_training_is_deterministic(tiny_config, toy_vocab, toy_dataset):
    cfg = replace(tiny_config, dropout_rate=0.3)
    a = train(cfg, toy_dataset, toy_vocab)
    b = train(cfg, toy_dataset, toy_vocab)
    assert a.log == b.log
    for name, value in a.checkpoint.model.params.items():
        np.testing.assert_array_equal(b.checkpoint.model.params[name], value)


def test_training_outputs_are_byte_identical(tmp_path, tiny_config, toy_vocab, toy_dataset):
    cfg = replace(tiny_config, dropout_rate=0.3)
    outputs = []
    for run in ("a", "b"):
        out, log_csv = tmp_path / f"{run}.safetensors", tmp_path / f"{run}.csv"
        train(cfg, toy_dataset, toy_vocab, val_set=toy_dataset, out_checkpoint=out, log_csv=log_csv)
        outputs.append((out.read_bytes(), log_csv.read_bytes()))
    assert outputs[0] == outputs[1]


def test_different_seeds_differ(tiny_config, toy_vocab, toy_dataset):
    a = train(tiny_config, toy_dataset, toy_vocab)
    b = train(replace(tiny_config, seed=8), toy_dataset, toy_vocab)
    assert not np.array_equal(a.checkpoint.model.params["cnn.fc.weight"], b.checkpoint.model.params["cnn.fc.weight"])


def test_early_stopping_without_improvement(tiny_config, toy_vocab, toy_dataset):
    cfg = replace(tiny_config, learning_rate=0.0, epochs=10, early_stop_patience=1)
    result = train(cfg, toy_dataset, toy_vocab, val_set=toy_dataset)
    assert [row["epoch"] for row in result.log] == [1, 2]
    assert result.checkpoint.epoch == 1


def test_log_rows_and_csv(tmp_path, tiny_config, toy_vocab, toy_dataset):
    log_csv = tmp_path / "log.csv"
    out = tmp_path / "model.safetensors"
    result = train(tiny_config, toy_dataset, toy_vocab, out_checkpoint=out, log_csv=log_csv)
    assert out.exists()
    assert len(result.log) == tiny_config.epochs
    assert all(list(row) == TRAIN_LOG_COLUMNS for row in result.log)
    lines = log_csv.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(TRAIN_LOG_COLUMNS)
    assert len(lines) == tiny_config.epochs + 1
    best = max(row["val_weighted_f1"] for row in result.log)
    assert result.checkpoint.best_score == best


def test_pad_rows_stay_zero(tiny_config, toy_vocab, toy_dataset):
    result = train(replace(tiny_config, learning_rate=5e-2), toy_dataset, toy_vocab)
    model = result.checkpoint.model
    for name in model.embedding_names:
        assert not np.any(model.params[name][PAD_ID])


def test_non_finite_loss_raises(monkeypatch, tiny_config, toy_vocab, toy_dataset):
    def nan_model(cfg, vocab):
        model = make_model(cfg, vocab)
        model.params["cnn.fc.weight"][...] = np.nan
        return model

    monkeypatch.setattr("codemix.scripts.train.make_model", nan_model)
    with pytest.raises(NumericalError, match="epoch 1, batch 0"):
        train(tiny_config, toy_dataset, toy_vocab)


def test_empty_or_unlabeled_training_set(tiny_config, toy_vocab):
    with pytest.raises(ValueError, match="empty"):
        train(tiny_config, TweetDataset([]), toy_vocab)
    unlabeled = make_dataset(TOY_UNLABELED, toy_vocab)
    with pytest.raises(ValueError, match="label"):
        train(tiny_config, unlabeled, toy_vocab)


def test_resolve_train_config_precedence(tmp_path):
    cfg = resolve_train_config(CONFIGS_DIR / "toy.yaml", ["epochs=5", "dropout_rate=0.1"], seed=3)
    assert cfg.epochs == 5
    assert cfg.dropout_rate == 0.1
    assert cfg.seed == 3
    assert cfg.batch_size == 8
    assert cfg.learning_rate == TrainConfig().learning_rate

    assert resolve_train_config(seed=None) == TrainConfig()
    assert resolve_train_config(CONFIGS_DIR / "default.yaml") == TrainConfig()

    path = tmp_path / "config.json"
    path.write_text('{"hidden_size": 12}', encoding="utf-8")
    assert resolve_train_config(path).hidden_size == 12


@pytest.mark.parametrize("overrides", [["no_such_key=1"], ["epochs=many"], ["dropout_rate=1.5"], ["epochs=0"]])
def test_resolve_train_config_rejects_bad_values(overrides):
    with pytest.raises(ConfigError):
        resolve_train_config(overrides=overrides)


def test_resolve_train_config_rejects_non_mapping(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        resolve_train_config(path)


@pytest.mark.slow
def test_overfits_toy_corpus(toy_vocab, toy_dataset):
    result = train(TrainConfig(epochs=200, max_len=64), toy_dataset, toy_vocab)
    assert any(row["train_accuracy"] == 1.0 for row in result.log)
    assert result.checkpoint.best_score == 1.0
    report = eval_model(result.checkpoint.model, toy_dataset)["ensemble"]["report"]
    assert report.accuracy == 1.0
    assert result.log[-1]["train_loss"] < result.log[0]["train_loss"]


def test_make_model_starts_from_external_vectors(tmp_path, tiny_config, toy_vocab, toy_dataset):
    token = toy_vocab.tokens[len(RESERVED_TOKENS)]
    path = tmp_path / "vectors.tsv"
    path.write_text(f"{token}\t1 2 3 4 5 6\n", encoding="utf-8")
    cfg = replace(tiny_config, embedding_path=str(path), embedding_trainable=False)
    model = make_model(cfg, toy_vocab)
    for name in model.embedding_names:
        np.testing.assert_array_equal(model.params[name][toy_vocab.token_to_id[token]], [1, 2, 3, 4, 5, 6])
    assert not model.embedding_table("cnn").trainable
    item = toy_dataset[0]
    _, grads = model.loss_and_grads(item.sequence.ids, item.sequence.n, int(item.label))
    assert not set(model.embedding_names) & set(grads)


def test_forward_rejects_a_non_zero_pad_row(tiny_model, toy_dataset):
    params = dict(tiny_model.params)
    params["cnn.embedding"] = params["cnn.embedding"].copy()
    params["cnn.embedding"][PAD_ID] = 1.0
    model = CodeMixEnsemble(tiny_model.config, params=params)
    item = toy_dataset[0]
    with pytest.raises(ValueError, match="pad row"):
        model.predict(item.sequence.ids, item.sequence.n)
