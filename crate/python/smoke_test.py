"""Smoke test for the `vrn` extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
Run with:                 python -m pytest python/smoke_test.py
"""

import os
import tempfile

import pytest

import vrn


@pytest.fixture(scope="module")
def dataset():
    return vrn.Dataset(hops=1, questions=400, label_fraction=0.5, seed=3)


def test_dataset_shapes(dataset):
    train, valid, test = dataset.split_sizes
    assert train + valid + test == 400
    assert dataset.num_entities > 100
    text, answers, qtype = dataset.questions("test")[0]
    assert text and answers and qtype
    scope = dataset.scope(answers[0])
    assert scope[0] == (0, answers[0])
    assert all(hop <= 1 for hop, _ in scope)


def test_train_answer_and_reload(dataset):
    model = vrn.Model(dataset, dim=16)
    model.pretrain(epochs=3)
    log = model.train(epochs=1, learning_rate=2.0)
    assert log and log[-1][0] == model.step
    metrics = model.evaluate("test")
    assert 0.0 <= metrics["hits_at_1"] <= 1.0
    assert 0.0 <= metrics["entity_accuracy"] <= 1.0

    question = dataset.questions("test")[0][0]
    greedy = model.answer(question)
    wide = model.answer(question, beam=4)
    assert len(greedy["candidates"]) == 1 and len(wide["candidates"]) == 4
    assert greedy["candidates"][0] == wide["candidates"][0]
    assert "-[" in model.explain(question) or model.explain(question) == ""

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.bin")
        model.save(path)
        again = vrn.Model.load(path, dataset)
        assert again.answer(question) == greedy
        assert again.step == model.step


def test_errors(dataset):
    with pytest.raises(ValueError):
        vrn.Dataset(hops=5)
    with pytest.raises(ValueError):
        dataset.questions("nope")
    with pytest.raises(ValueError):
        vrn.Model(dataset).answer("   ")


def test_baseline_and_oracles(dataset):
    assert 0.0 <= dataset.supervised_baseline() <= 1.0
    reports = vrn.oracle_check(1)
    assert len(reports) >= 6
    assert all(passed for _, passed, _ in reports), reports
