import pytest

import perfloop


def test_fixtures_listed_and_loaded():
    names = perfloop.fixture_names()
    assert {"eshopper", "mm1", "two-station"} <= set(names)
    f = perfloop.load_fixture("mm1")
    assert f["expected"]["utilization"]["basis"]
    assert perfloop.validate_model(f["model"])["components"][0]["name"] == "server"


def test_mva_known_case():
    r = perfloop.mva([2.0, 1.0], 2)
    assert r["X"] == pytest.approx(3 / 7, abs=1e-15)
    assert r["R"] == pytest.approx(14 / 3, abs=1e-12)


def test_fuzzy_prob():
    assert perfloop.fuzzy_prob(0.4, 0.4, 0.8) == 0.0
    assert perfloop.fuzzy_prob(0.6, 0.4, 0.8) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(perfloop.ValidationError):
        perfloop.fuzzy_prob(0.5, 0.8, 0.4)


def test_simulate_annotate_detect():
    f = perfloop.load_fixture("mm1")
    run = dict(f["run"], duration_s=60, warmup_s=5)
    out = perfloop.simulate(f["model"], run)
    assert out["stats"]["completed"] > 0
    assert perfloop.ingest(out["spans"], out["utilization"])["traces"] == out["stats"]["completed"]
    annotated = perfloop.annotate(f["model"], out["spans"], out["utilization"])
    demand = annotated["model"]["components"][0]["operations"][0]["service_demand"]
    # One span per trace: its self-time includes the wait in the queue.
    assert demand == pytest.approx(0.01 / (1 - 0.5), rel=0.2)
    assert isinstance(perfloop.detect(annotated["model"]), list)
    assert perfloop.link(f["model"], out["spans"])["links"]


def test_refactor_and_preview():
    model = perfloop.Session.from_fixture("two-station").model()
    after = perfloop.refactor(model, "clone:back")
    assert any(c["name"] == "cloned-back" for c in after["components"])
    p = perfloop.preview(model, [{"kind": "CLONE", "target": "back"}])
    assert "delta" in p
    with pytest.raises(perfloop.NotFoundError):
        perfloop.refactor(model, "clone:ghost")
    with pytest.raises(perfloop.ParseError):
        perfloop.refactor(model, "split:back")


def test_session_round_trip():
    s = perfloop.Session.from_fixture("two-station")
    assert s.iteration == 0
    s.apply("clone:back", scope="MODEL_ONLY")
    assert s.generation == 0
    s.measure()
    assert s.generation == 1
    assert len(s.history()) == 2
    assert perfloop.replay(s.record_file())["identical"]
