import math

import jsonschema
import numpy as np
import pytest

import cognet


def test_training_log_is_finite(toy):
    _, _, _, log = toy
    assert [e.epoch for e in log] == [1, 2, 3]
    assert all(math.isfinite(e.train_loss) for e in log)
    assert all(e.validation_jaccard is not None for e in log)


def test_parameters_are_named(toy):
    _, _, model, _ = toy
    names = model.parameter_names()
    assert "graph.lambda" in names
    assert "copy.w_copy" in names
    assert model.parameter("output.w_gen").shape == (16, 32)


def test_predictions_are_duplicate_free_distributions(toy):
    bundle, _, model, _ = toy
    for patient, visits in zip(bundle.test, model.predict(bundle.test)):
        assert len(visits) == len(patient.visits)
        for v in visits:
            rec = v["recommended"]
            assert len(rec) == len(set(rec))
            assert all(0 <= m < bundle.num_medications for m in rec)
            probs = v["step_probs"]
            # One row per emitted token; END is missing when the cap was hit.
            steps = len(rec) if len(rec) == 12 else len(rec) + 1
            assert probs.shape == (steps, bundle.num_medications + 2)
            assert np.allclose(probs.sum(axis=1), 1.0)
            assert np.all(probs[:, bundle.num_medications] == 0.0)


def test_greedy_matches_width_one(toy):
    bundle, _, model, _ = toy
    greedy = model.predict(bundle.test, greedy=True)
    narrow = model.predict(bundle.test, beam_width=1)
    assert [[v["recommended"] for v in p] for p in greedy] == [[v["recommended"] for v in p] for p in narrow]


def test_bootstrap_full_fraction_has_zero_spread(toy):
    bundle, _, model, _ = toy
    report = model.evaluate(bundle.test, rounds=5, frac=1.0)
    for key in ("jaccard", "f1", "prauc", "ddi", "avg_drugs"):
        assert report[key]["std"] == 0.0
    sampled = model.evaluate(bundle.test, rounds=5, frac=0.8)
    assert 0.0 <= sampled["jaccard"]["mean"] <= 1.0


def test_explain_matches_schema(toy, schema):
    bundle, _, model, _ = toy
    patient = next(p for p in bundle.test if len(p.visits) >= 2)
    report = model.explain(patient, 2, bundle.medications)
    jsonschema.validate(report, schema)
    for row in report["copy_probabilities"]:
        assert len(row) == len(report["history_medications"])
        assert sum(row) <= 1.0 + 1e-9
    assert sum(report["visit_weights"]) == pytest.approx(1.0)


def test_explain_rejects_first_visit(toy):
    bundle, _, model, _ = toy
    with pytest.raises(cognet.ValidationError):
        model.explain(bundle.test[0], 1, bundle.medications)


def test_checkpoint_round_trip(toy, tmp_path):
    bundle, _, model, _ = toy
    model.save(tmp_path / "ck")
    loaded = cognet.Recommender.load(tmp_path / "ck")
    for name in model.parameter_names():
        assert np.array_equal(model.parameter(name), loaded.parameter(name))
    assert np.array_equal(model.ddi, loaded.ddi)
    assert model.evaluate(bundle.test, rounds=3) == loaded.evaluate(bundle.test, rounds=3)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(cognet.ValidationError):
        cognet.Recommender.load(tmp_path / "absent")


def test_copy_ablation(toy):
    bundle, ddi, _, _ = toy
    config = cognet.ModelConfig()
    config.embed_dim = 8
    config.heads = 2
    model = cognet.Recommender.create(bundle, config, ddi, ablations="copy")
    assert model.ablations == "copy"
    patient = next(p for p in bundle.test if len(p.visits) >= 2)
    with pytest.raises(cognet.ValidationError):
        model.explain(patient, 2, bundle.medications)
    with pytest.raises(ValueError):
        cognet.Recommender.create(bundle, config, ddi, ablations="bogus")
