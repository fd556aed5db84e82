from pathlib import Path

import pytest

from codemix.common.datasets.bpe import bpe_train
from codemix.common.datasets.factory import encode_tweets, load_clean_corpus
from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.models.modeling_ensemble import CodeMixEnsemble

TESTS_DIR = Path(__file__).parent
DATA_DIR = TESTS_DIR / "data"
CONFIGS_DIR = TESTS_DIR.parent / "configs"

TOY_TRAIN = DATA_DIR / "toy_train.txt"
TOY_UNLABELED = DATA_DIR / "toy_unlabeled.txt"
TOY_VOCAB_SIZE = 300


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end runs that take several seconds")


@pytest.fixture(scope="session")
def toy_clean():
    return load_clean_corpus(TOY_TRAIN)


@pytest.fixture(scope="session")
def toy_vocab(toy_clean):
    return bpe_train(toy_clean, TOY_VOCAB_SIZE)


@pytest.fixture(scope="session")
def toy_dataset(toy_clean, toy_vocab):
    return encode_tweets(toy_clean, toy_vocab, max_len=64)


@pytest.fixture
def tiny_config():
    return TrainConfig(
        seed=7,
        epochs=3,
        batch_size=8,
        dropout_rate=0.0,
        max_len=64,
        vocab_size=TOY_VOCAB_SIZE,
        embedding_dim=6,
        hidden_size=4,
        num_filters=3,
    )


@pytest.fixture
def tiny_model(tiny_config, toy_vocab):
    return CodeMixEnsemble(tiny_config, vocab_size=len(toy_vocab))
