import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    """Role forests trained on a small synthetic corpus, saved to disk."""
    from miditonal.classifier import load_corpus, save_models, train_role_models
    from miditonal.forest import ForestParams
    from miditonal.synth import write_corpus

    corpus = tmp_path_factory.mktemp("corpus")
    labels = write_corpus(corpus, 60, seed=5)
    data, failures = load_corpus(corpus, labels)
    assert not failures
    out = tmp_path_factory.mktemp("models")
    save_models(train_role_models(data, ForestParams(n_trees=30, seed=3)), out)
    return out


@pytest.fixture(scope="session")
def models(model_dir):
    from miditonal.classifier import load_models

    return load_models(model_dir)
