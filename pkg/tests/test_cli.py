import json
import logging

import numpy as np
import pytest

from codemix.common.checkpoint import load_checkpoint
from codemix.common.datasets.factory import make_dataset
from codemix.scripts.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, make_parser
from tests.conftest import CONFIGS_DIR, DATA_DIR, TOY_TRAIN, TOY_UNLABELED

TOY_CONFIG = str(CONFIGS_DIR / "toy.yaml")


@pytest.fixture(autouse=True)
def restore_logging():
    # `main` reconfigures the root logger.
    handlers, level = logging.root.handlers[:], logging.root.level
    yield
    logging.root.handlers[:] = handlers
    logging.root.setLevel(level)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    vocab = out / "vocab.json"
    checkpoint = out / "model.safetensors"
    handlers = logging.root.handlers[:]
    assert main(["train-bpe", "--corpus", str(TOY_TRAIN), "--vocab-size", "200", "--out", str(vocab)]) == EXIT_OK
    code = main(
        [
            "train",
            "--train", str(TOY_TRAIN),
            "--val", str(TOY_TRAIN),
            "--vocab", str(vocab),
            "--config", TOY_CONFIG,
            "--out-checkpoint", str(checkpoint),
            "--translit-rules", str(DATA_DIR / "hinglish_rules.tsv"),
            "epochs=2",
        ]
    )
    logging.root.handlers[:] = handlers
    assert code == EXIT_OK
    return {"dir": out, "vocab": vocab, "checkpoint": checkpoint}


def test_train_bpe_is_deterministic(tmp_path, trained):
    out = tmp_path / "vocab.json"
    assert main(["train-bpe", "--corpus", str(TOY_TRAIN), "--vocab-size", "200", "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == trained["vocab"].read_bytes()


def test_train_bpe_vocab_size_too_small(tmp_path):
    out = tmp_path / "vocab.json"
    assert main(["train-bpe", "--corpus", str(TOY_TRAIN), "--vocab-size", "10", "--out", str(out)]) == EXIT_USAGE
    assert not out.exists()


def test_train_writes_checkpoint_and_log(trained):
    checkpoint = load_checkpoint(trained["checkpoint"])
    assert checkpoint.config.epochs == 2
    assert checkpoint.config.embedding_dim == 16
    assert checkpoint.rules is not None
    assert checkpoint.rules.rules["accha"] == "अच्छा"
    lines = trained["checkpoint"].with_suffix(".csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,train_loss,val_weighted_f1,val_macro_f1,train_accuracy"
    assert len(lines) == 3


def test_train_with_missing_vocab_writes_nothing(tmp_path):
    out = tmp_path / "model.safetensors"
    code = main(
        [
            "train",
            "--train", str(TOY_TRAIN),
            "--vocab", str(tmp_path / "missing.json"),
            "--config", TOY_CONFIG,
            "--out-checkpoint", str(out),
            "epochs=1",
        ]
    )
    assert code == EXIT_DATA
    assert list(tmp_path.iterdir()) == []


def test_train_with_unknown_config_key(tmp_path, trained):
    out = tmp_path / "model.safetensors"
    code = main(
        [
            "train",
            "--train", str(TOY_TRAIN),
            "--vocab", str(trained["vocab"]),
            "--out-checkpoint", str(out),
            "no_such_key=1",
        ]
    )
    assert code == EXIT_USAGE
    assert not out.exists()


def test_eval_writes_report(tmp_path, trained, capsys):
    report_path = tmp_path / "report.json"
    code = main(
        [
            "eval",
            "--data", str(TOY_TRAIN),
            "--checkpoint", str(trained["checkpoint"]),
            "--vocab", str(trained["vocab"]),
            "--out-report", str(report_path),
        ]
    )
    assert code == EXIT_OK
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["ensemble_mode"] == "product"
    assert np.array(report["confusion"]).sum() == 32
    assert set(report["components"]) == {"cnn", "attention"}
    assert 0.0 <= report["weighted_f1"] <= 1.0
    out = capsys.readouterr().out
    assert "gold \\ pred" in out
    assert "weighted_f1:" in out


def test_eval_other_ensemble_mode(tmp_path, trained):
    report_path = tmp_path / "report.json"
    code = main(
        [
            "eval",
            "--data", str(TOY_TRAIN),
            "--checkpoint", str(trained["checkpoint"]),
            "--ensemble-mode", "weighted_average",
            "--out-report", str(report_path),
        ]
    )
    assert code == EXIT_OK
    assert json.loads(report_path.read_text(encoding="utf-8"))["ensemble_mode"] == "weighted_average"


def test_eval_needs_labels(trained):
    code = main(["eval", "--data", str(TOY_UNLABELED), "--checkpoint", str(trained["checkpoint"])])
    assert code == EXIT_USAGE


def test_eval_on_empty_file(tmp_path, trained):
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    assert main(["eval", "--data", str(empty), "--checkpoint", str(trained["checkpoint"])]) == EXIT_DATA


def test_eval_with_mismatched_vocab(tmp_path, trained):
    other = tmp_path / "other.json"
    assert main(["train-bpe", "--corpus", str(TOY_UNLABELED), "--vocab-size", "100", "--out", str(other)]) == EXIT_OK
    args = ["eval", "--data", str(TOY_TRAIN), "--checkpoint", str(trained["checkpoint"]), "--vocab", str(other)]
    assert main(args) == EXIT_DATA
    assert main([*args, "--force"]) == EXIT_OK


def test_predict_writes_json_lines(tmp_path, trained):
    out = tmp_path / "predictions.jsonl"
    code = main(["predict", "--data", str(TOY_UNLABELED), "--checkpoint", str(trained["checkpoint"]), "--out", str(out)])
    assert code == EXIT_OK

    checkpoint = load_checkpoint(trained["checkpoint"])
    cfg = checkpoint.config
    dataset = make_dataset(TOY_UNLABELED, checkpoint.vocab, checkpoint.rules, cfg.translit_lang, cfg.max_len)
    records = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert [r["uid"] for r in records] == ["u1", "u2", "u3"]
    for record, item in zip(records, dataset, strict=True):
        for key in ("p_cnn", "p_att", "p_final"):
            assert len(record[key]) == 3
            assert abs(sum(record[key]) - 1.0) < 1e-9
        product = np.array(record["p_cnn"]) * np.array(record["p_att"])
        np.testing.assert_allclose(record["p_final"], product / product.sum(), rtol=0, atol=1e-9)
        assert record["class"] in ("negative", "neutral", "positive")
        assert len(record["attention"]) == item.sequence.n
        assert abs(sum(record["attention"]) - 1.0) < 1e-9


def test_export_vectors(tmp_path, trained):
    out = tmp_path / "vectors.csv"
    code = main(
        ["export-vectors", "--data", str(TOY_TRAIN), "--checkpoint", str(trained["checkpoint"]), "--out", str(out)]
    )
    assert code == EXIT_OK
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("uid,label,component,dim0,")
    assert lines[0].endswith(",pc1,pc2")
    assert len(lines) == 1 + 2 * 32


def test_missing_checkpoint(tmp_path):
    out = tmp_path / "predictions.jsonl"
    code = main(["predict", "--data", str(TOY_TRAIN), "--checkpoint", str(tmp_path / "nope"), "--out", str(out)])
    assert code == EXIT_DATA
    assert not out.exists()


def test_sys_info(capsys):
    assert main(["sys-info"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "`codemix` version" in out
    assert "Numpy version" in out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["no-such-command"],
        ["train-bpe", "--corpus", "x.txt"],
        ["train-bpe", "--corpus", "x.txt", "--out", "v.json", "--vocab-size", "many"],
        ["eval", "--data", "x.txt", "--checkpoint", "m", "--ensemble-mode", "max"],
    ],
)
def test_usage_errors_exit_with_one(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == EXIT_USAGE


def test_parser_defaults():
    args = make_parser().parse_args(["train-bpe", "--corpus", "c.txt", "--out", "v.json"])
    assert args.vocab_size == 8000
    assert args.translit_lang == "lang2"
    args = make_parser().parse_args(["train", "--train", "t", "--vocab", "v", "--out-checkpoint", "m", "epochs=3"])
    assert args.overrides == ["epochs=3"]
    assert args.seed is None
