from __future__ import annotations

import json

import numpy as np
from fastapi.testclient import TestClient
from scipy import stats

from escforge.corpus import STRATEGIES, SUPPORTER, load_corpus
from escforge.counselor import Counselor, TransitionModel
from escforge.gateway import ScriptedBackend
from escforge.prompts import PromptLibrary
from escforge.service import (
    RATING_METRICS,
    ServiceSettings,
    SessionStore,
    SupportStack,
    create_app,
)

from conftest import alternating_dialogue


def one_hot_model(label="Question"):
    n = len(STRATEGIES)
    prior = np.zeros(n)
    prior[STRATEGIES.index(label)] = 1.0
    transitions = np.zeros((6, n, n))
    transitions[:, :, STRATEGIES.index(label)] = 1.0
    return TransitionModel(
        labels=STRATEGIES,
        prior=prior,
        transitions=transitions,
        counts=np.zeros((6, n, n), dtype=int),
        prior_counts=np.zeros(n, dtype=int),
    )


def make_stack(replies):
    backend = ScriptedBackend([{"role_tag": SUPPORTER, "text": text} for text in replies])
    return SupportStack(
        counselor=Counselor(mode="statistical", model=one_hot_model()),
        supporter_backend=backend,
        prompts=PromptLibrary(),
        exemplar=alternating_dialogue(2),
    )


def make_settings(tmp_path, replies_a=None, replies_b=None, seed=0):
    replies_a = replies_a if replies_a is not None else [f"supportive reply {i}" for i in range(10)]
    models = {"model-a": make_stack(replies_a)}
    if replies_b is not None:
        models["model-b"] = make_stack(replies_b)
    return ServiceSettings(models=models, rng_seed=seed, log_path=tmp_path / "sessions.jsonl")


def make_client(settings):
    return TestClient(create_app(settings))


def full_scores(value=5):
    return {metric: value for metric in RATING_METRICS}


# --- session creation -------------------------------------------------------------


def test_create_single_session(tmp_path):
    client = make_client(make_settings(tmp_path))
    response = client.post("/sessions", json={"arm": "single", "models": ["model-a"]})
    assert response.status_code == 200
    body = response.json()
    assert body["session_id"]
    assert body["labels"] == ["single"]


def test_create_unknown_model_is_400(tmp_path):
    client = make_client(make_settings(tmp_path))
    response = client.post("/sessions", json={"arm": "single", "models": ["nope"]})
    assert response.status_code == 400


def test_ab_orders_reproducible_with_fixed_seed(tmp_path):
    mappings = []
    for _ in range(2):
        settings = make_settings(tmp_path, replies_b=["b reply"], seed=99)
        store = SessionStore(settings)
        mappings.append(
            [store.create("ab", ["model-a", "model-b"], None).model_by_label for _ in range(20)]
        )
    assert mappings[0] == mappings[1]


def test_ab_order_uniform_chi_square(tmp_path):
    settings = make_settings(tmp_path, replies_b=["b"], seed=7)
    store = SessionStore(settings)
    counts = {"model-a": 0, "model-b": 0}
    for _ in range(10_000):
        session = store.create("ab", ["model-a", "model-b"], None)
        counts[session.model_by_label["A"]] += 1
    result = stats.chisquare(list(counts.values()))
    assert result.pvalue > 0.01


# --- messaging ---------------------------------------------------------------------


def test_single_arm_reply_carries_strategy(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    response = client.post(f"/sessions/{sid}/messages", json={"text": "I failed my exam"})
    assert response.status_code == 200
    replies = response.json()["replies"]
    assert len(replies) == 1
    assert replies[0]["label"] == "single"
    assert replies[0]["strategy"] in STRATEGIES
    assert replies[0]["text"] == "supportive reply 0"


def test_ab_arm_returns_two_labeled_replies(tmp_path):
    client = make_client(make_settings(tmp_path, replies_b=[f"b reply {i}" for i in range(10)]))
    sid = client.post("/sessions", json={"arm": "ab", "models": ["model-a", "model-b"]}).json()["session_id"]
    replies = client.post(f"/sessions/{sid}/messages", json={"text": "hello"}).json()["replies"]
    assert [r["label"] for r in replies] == ["A", "B"]


def test_empty_message_is_400(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/messages", json={"text": "   "}).status_code == 400


def test_message_to_closed_session_is_409(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    client.post(f"/sessions/{sid}/messages", json={"text": "hi"})
    client.post(f"/sessions/{sid}/rating", json={"scores": full_scores()})
    assert client.post(f"/sessions/{sid}/messages", json={"text": "more"}).status_code == 409


def test_backend_failure_leaves_session_consistent(tmp_path):
    client = make_client(make_settings(tmp_path, replies_a=["only one reply"]))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/messages", json={"text": "first"}).status_code == 200
    assert client.post(f"/sessions/{sid}/messages", json={"text": "second"}).status_code == 502
    record = client.get(f"/sessions/{sid}/export").json()
    texts = [u["text"] for u in record["utterances"]]
    # second seeker turn retained, no supporter turn after it
    assert texts == ["first", "only one reply", "second"]


# --- rating -------------------------------------------------------------------------


def test_rating_stores_and_closes(tmp_path):
    settings = make_settings(tmp_path)
    client = make_client(settings)
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    response = client.post(f"/sessions/{sid}/rating", json={"scores": full_scores()})
    assert response.status_code == 200
    assert response.json()["stored"] is True
    assert response.json()["unblinded_mapping"] == {"single": "model-a"}
    # rating events land in the append-only log
    log_lines = [json.loads(line) for line in open(settings.log_path, encoding="utf-8")]
    assert any(line["event"] == "rating" for line in log_lines)


def test_rating_rejects_out_of_range(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/rating", json={"scores": full_scores(6)}).status_code == 400


def test_rating_rejects_missing_metric(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    scores = full_scores()
    scores.pop("Suggestion")
    assert client.post(f"/sessions/{sid}/rating", json={"scores": scores}).status_code == 400


def test_rating_never_accepted_twice(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/rating", json={"scores": full_scores()}).status_code == 200
    assert client.post(f"/sessions/{sid}/rating", json={"scores": full_scores()}).status_code == 409


def test_ab_choice_rating(tmp_path):
    client = make_client(make_settings(tmp_path, replies_b=["b"]))
    sid = client.post("/sessions", json={"arm": "ab", "models": ["model-a", "model-b"]}).json()["session_id"]
    response = client.post(f"/sessions/{sid}/rating", json={"ab_choice": "Tie"})
    assert response.status_code == 200
    mapping = response.json()["unblinded_mapping"]
    assert set(mapping) == {"A", "B"}
    assert set(mapping.values()) == {"model-a", "model-b"}


def test_ab_rating_requires_choice(tmp_path):
    client = make_client(make_settings(tmp_path, replies_b=["b"]))
    sid = client.post("/sessions", json={"arm": "ab", "models": ["model-a", "model-b"]}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/rating", json={"ab_choice": "B is fine"}).status_code == 400


# --- export --------------------------------------------------------------------------


def test_export_roundtrips_through_loader(tmp_path):
    client = make_client(make_settings(tmp_path))
    sid = client.post("/sessions", json={"arm": "single", "models": ["model-a"]}).json()["session_id"]
    for text in ("message one", "message two", "message three"):
        assert client.post(f"/sessions/{sid}/messages", json={"text": text}).status_code == 200
    client.post(f"/sessions/{sid}/rating", json={"scores": full_scores(4)})
    record = client.get(f"/sessions/{sid}/export").json()
    assert len(record["utterances"]) == 6
    path = tmp_path / "export.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    loaded = load_corpus(path)
    assert len(loaded) == 1
    assert loaded[0].meta["rating"]["scores"]["Overall"] == 4


def test_ab_export_carries_both_branches(tmp_path):
    client = make_client(
        make_settings(tmp_path, replies_a=[f"a{i}" for i in range(4)], replies_b=[f"b{i}" for i in range(4)])
    )
    sid = client.post("/sessions", json={"arm": "ab", "models": ["model-a", "model-b"]}).json()["session_id"]
    client.post(f"/sessions/{sid}/messages", json={"text": "hello"})
    record = client.get(f"/sessions/{sid}/export").json()
    branches = record["meta"]["ab_branches"]
    assert set(branches) == {"A", "B"}
    assert len(branches["A"]) == len(branches["B"]) == 1


def test_export_unknown_session_is_404(tmp_path):
    client = make_client(make_settings(tmp_path))
    assert client.get("/sessions/of-nowhere/export").status_code == 404


def test_strategies_and_healthz(tmp_path):
    client = make_client(make_settings(tmp_path))
    assert client.get("/healthz").json() == {"status": "ok"}
    assert client.get("/strategies").json()["strategies"] == list(STRATEGIES)


def test_static_ui_is_served_when_configured(tmp_path):
    static = tmp_path / "ui"
    static.mkdir()
    (static / "index.html").write_text("<html><body>rater ui</body></html>", encoding="utf-8")
    settings = make_settings(tmp_path)
    settings.static_dir = static
    client = make_client(settings)
    response = client.get("/")
    assert response.status_code == 200
    assert "rater ui" in response.text
    # API routes still win over the static mount
    assert client.get("/healthz").json() == {"status": "ok"}


def test_build_service_settings_from_config(tmp_path):
    from escforge.cli import _build_service_settings
    from escforge.config import load_config
    from conftest import write_fixture

    fixture = tmp_path / "service_fixture.jsonl"
    write_fixture(fixture, [(SUPPORTER, "a scripted reply")])
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "service": {
                    "rng_seed": 3,
                    "models": {"main": {"counselor_mode": "statistical"}},
                }
            }
        ),
        encoding="utf-8",
    )
    settings = _build_service_settings(load_config(config_path), str(fixture))
    assert set(settings.models) == {"main"}
    client = make_client(settings)
    sid = client.post("/sessions", json={"arm": "single", "models": ["main"]}).json()["session_id"]
    reply = client.post(f"/sessions/{sid}/messages", json={"text": "hi"}).json()["replies"][0]
    assert reply["text"] == "a scripted reply"
    assert reply["strategy"] in STRATEGIES
