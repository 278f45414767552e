import pathlib

import pytest

import cognet

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def toy():
    bundle, ddi = cognet.synthetic_dataset(40, 0.9, 5)
    config = cognet.ModelConfig()
    config.embed_dim = 16
    config.heads = 2
    config.gate_hidden = 8
    config.max_len = 12
    model = cognet.Recommender.create(bundle, config, ddi)
    train = cognet.TrainConfig()
    train.epochs = 3
    train.learning_rate = 1e-3
    log = model.fit(bundle, train)
    return bundle, ddi, model, log


@pytest.fixture(scope="session")
def schema():
    import json

    return json.loads((ROOT / "docs" / "explain.schema.json").read_text())
