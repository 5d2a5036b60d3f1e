import http.client
import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from oracles import gain_oracle_logistic, propagate_oracle_logistic
from safeguard.confirmation import ConfirmationCosts
from safeguard.frontend import LogisticFrontEnd, TabularFrontEnd, frontend_predict
from safeguard.service import (ConfirmationRejected, SessionRow,
                               UnknownInstanceError, confirm_concept,
                               replay_log, serve, session_metrics,
                               start_session)

W = np.array([1.0, 2.0, 3.0])
B = -2.0


def make_frontend():
    return LogisticFrontEnd(weights=W, intercept=B)


def demo_rows():
    # scores at tau=0.15: hi 0.982 (covered 1), lo 0.119 (covered 0),
    # the rest sit inside [0.15, 0.85] and abstain
    return [
        SessionRow(id="hi", q=np.array([1.0, 1.0, 1.0]),
                   truth=np.array([1, 1, 1]), label=1),
        SessionRow(id="lo", q=np.array([0.0, 0.0, 0.0]),
                   truth=np.array([0, 0, 0]), label=0),
        SessionRow(id="mid", q=np.array([0.75, 0.75, 0.25]),
                   truth=np.array([1, 1, 1]), label=1),
        SessionRow(id="row 7", q=np.array([0.5, 0.5, 0.5]),
                   truth=np.array([0, 1, 1]), label=1),
        SessionRow(id="flat", q=np.array([0.4, 0.6, 0.5]),
                   truth=np.array([0, 1, 0]), label=0),
    ]


def test_start_session_gates_instances():
    session = start_session(make_frontend(), demo_rows(), tau=0.15)
    assert session.instances["hi"].decision == 1
    assert session.instances["lo"].decision == 0
    assert session.instances["hi"].flags == []
    for key in ("mid", "row 7", "flat"):
        st = session.instances[key]
        assert st.decision is None
        assert st.flags, key
    # flags are gain-ranked against the independent oracle
    st = session.instances["mid"]
    gains = {k: gain_oracle_logistic(list(W), B, list(st.p), k)
             for k in range(3)}
    expect = sorted(range(3), key=lambda k: (-gains[k], k))
    assert [k for k, _ in st.flags] == expect
    assert st.flags[0][0] == 2          # heaviest weight dominates


def test_start_session_restart_identity():
    a = start_session(make_frontend(), demo_rows(), tau=0.15)
    b = start_session(make_frontend(), demo_rows(), tau=0.15)
    for key in a.instances:
        assert a.instances[key].ybar == b.instances[key].ybar
        assert a.instances[key].flags == b.instances[key].flags


def test_start_session_validation():
    fe = make_frontend()
    with pytest.raises(ValueError, match="at least one"):
        start_session(fe, [], tau=0.15)
    with pytest.raises(ValueError, match="duplicate"):
        start_session(fe, [SessionRow("a", np.array([0.5, 0.5, 0.5]))] * 2,
                      tau=0.15)
    with pytest.raises(ValueError, match="outside"):
        start_session(fe, [SessionRow("a", np.array([0.5, 1.5, 0.5]))],
                      tau=0.15)
    with pytest.raises(ValueError, match="hard bits"):
        start_session(fe, [SessionRow("a", np.array([0.5, 0.5, 0.5]),
                                      truth=np.array([0, 2, 1]))], tau=0.15)
    with pytest.raises(ValueError, match="binary"):
        start_session(TabularFrontEnd(table=np.full((2, 3), 1 / 3), m=1),
                      [SessionRow("a", np.array([0.5]))], tau=0.15)


def test_tau_zero_keeps_exact_endpoints_covered():
    fe = TabularFrontEnd(table=np.array([[1.0, 0.0], [0.0, 1.0]]), m=1)
    session = start_session(
        fe, [SessionRow("sure", np.array([1.0])),
             SessionRow("soft", np.array([0.3]))], tau=0.0)
    assert session.instances["sure"].ybar == 1.0
    assert session.instances["sure"].decision == 1
    assert session.instances["soft"].decision is None


def test_tau_half_abstains_almost_nothing():
    session = start_session(make_frontend(), demo_rows(), tau=0.5)
    for key, st in session.instances.items():
        if st.ybar == 0.5:
            assert st.decision is None, key
        else:
            assert st.decision is not None, key


def test_confirmation_resolves_instance():
    session = start_session(make_frontend(), demo_rows(), tau=0.15)
    before = session_metrics(session)
    st = session.instances["mid"]
    top = st.flags[0][0]
    assert top == 2
    confirm_concept(session, "mid", top, 1)
    assert st.p[2] == 1.0 and 2 in st.confirmed
    expected = propagate_oracle_logistic(list(W), B, [0.75, 0.75, 1.0])
    assert st.ybar == pytest.approx(expected, abs=1e-12)
    assert st.ybar > 0.85 and st.decision == 1 and st.flags == []
    after = session_metrics(session)
    assert after["n_covered"] == before["n_covered"] + 1
    assert after["coverage"] == pytest.approx(
        before["coverage"] + 1 / session.n)
    assert session.revision == 1
    assert session.confirmations_used == 1


def test_confirmation_reranks_remaining_flags():
    session = start_session(make_frontend(), demo_rows(), tau=0.3)
    st = session.instances["flat"]
    assert st.decision is None
    confirm_concept(session, "flat", 0, 0)      # still abstained at tau=0.3
    assert st.decision is None
    assert [k for k, _ in st.flags] == sorted(
        (k for k in range(3) if k != 0),
        key=lambda k: (-gain_oracle_logistic(list(W), B, list(st.p), k), k))


def test_full_confirmation_matches_frontend_exactly():
    # a nearly flat front-end keeps every score inside the abstention band,
    # so review continues until all three concepts are pinned
    fe = LogisticFrontEnd(weights=np.array([0.1, 0.1, 0.1]), intercept=-0.15)
    session = start_session(fe, demo_rows(), tau=0.45)
    for key, st in session.instances.items():
        assert st.decision is None, key
        while st.flags:
            k = st.flags[0][0]
            confirm_concept(session, key, k, int(st.truth[k]))
        assert st.confirmed == {0, 1, 2}
        assert st.ybar == frontend_predict(fe, st.truth)


def test_zero_weight_concept_changes_nothing():
    fe = LogisticFrontEnd(weights=np.array([0.0, 2.0, 3.0]), intercept=B)
    session = start_session(
        fe, [SessionRow("a", np.array([0.5, 0.6, 0.4]))], tau=0.2)
    st = session.instances["a"]
    assert st.flags[-1] == (0, 0.0)             # dead concept ranks last
    before = st.ybar
    confirm_concept(session, "a", 0, 1)
    assert abs(st.ybar - before) < 1e-15
    assert st.decision is None


def test_rejections():
    session = start_session(make_frontend(), demo_rows(), tau=0.15,
                            budget=1.5)
    with pytest.raises(UnknownInstanceError):
        confirm_concept(session, "ghost", 0, 1)
    with pytest.raises(ConfirmationRejected) as exc:
        confirm_concept(session, "hi", 0, 1)
    assert exc.value.reason == "covered"
    with pytest.raises(ValueError, match="out of range"):
        confirm_concept(session, "mid", 5, 1)
    with pytest.raises(ValueError, match="0 or 1"):
        confirm_concept(session, "mid", 0, 2)
    confirm_concept(session, "flat", 1, 1)
    with pytest.raises(ConfirmationRejected) as exc:
        confirm_concept(session, "flat", 1, 0)
    assert exc.value.reason == "already-confirmed"
    with pytest.raises(ConfirmationRejected) as exc:
        confirm_concept(session, "flat", 0, 0)
    assert exc.value.reason == "budget-exhausted"
    assert exc.value.detail == {"budget_remaining": 0.5, "cost": 1.0}
    # failures never advance the revision counter
    assert session.revision == 1


def test_metrics_budget_accounting():
    session = start_session(make_frontend(), demo_rows(), tau=0.15,
                            budget=10.0,
                            costs=ConfirmationCosts(np.array([1.0, 2.0, 4.0])))
    confirm_concept(session, "mid", 2, 1)
    m = session_metrics(session)
    assert m["budget_remaining"] == 6.0
    assert m["confirmations_used"] == 1
    unlimited = start_session(make_frontend(), demo_rows(), tau=0.15)
    assert session_metrics(unlimited)["budget_remaining"] is None


def test_selective_accuracy_over_labeled_covered():
    session = start_session(make_frontend(), demo_rows(), tau=0.15)
    m = session_metrics(session)
    # covered: hi (pred 1, label 1) and lo (pred 0, label 0)
    assert m["n_covered"] == 2
    assert m["selective_accuracy"] == 1.0
    unlabeled = start_session(
        make_frontend(), [SessionRow("a", np.array([1.0, 1.0, 1.0]))],
        tau=0.15)
    assert session_metrics(unlabeled)["selective_accuracy"] is None


def test_log_and_replay(tmp_path):
    log = tmp_path / "audit.jsonl"
    fe = make_frontend()
    session = start_session(fe, demo_rows(), tau=0.15, budget=5.0,
                            log_path=str(log))
    confirm_concept(session, "mid", 2, 1)
    confirm_concept(session, "flat", 2, 0)
    confirm_concept(session, "flat", 1, 1)
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert [rec["revision"] for rec in lines] == [1, 2, 3]
    assert all(set(rec) == {"revision", "instance", "concept", "value",
                            "cost", "pre_ybar", "post_ybar", "ts"}
               for rec in lines)

    fresh = start_session(fe, demo_rows(), tau=0.15, budget=5.0)
    replay_log(fresh, log)
    assert fresh.revision == session.revision
    assert fresh.budget_remaining == session.budget_remaining
    assert fresh.confirmations_used == session.confirmations_used
    for key in session.instances:
        a, b = session.instances[key], fresh.instances[key]
        assert np.array_equal(a.p, b.p)
        assert a.confirmed == b.confirmed
        assert a.ybar == b.ybar and a.decision == b.decision


def test_replay_rejects_tampered_log(tmp_path):
    log = tmp_path / "audit.jsonl"
    fe = make_frontend()
    session = start_session(fe, demo_rows(), tau=0.15, log_path=str(log))
    confirm_concept(session, "mid", 2, 1)
    rec = json.loads(log.read_text())
    rec["post_ybar"] += 0.05
    log.write_text(json.dumps(rec) + "\n")
    fresh = start_session(fe, demo_rows(), tau=0.15)
    with pytest.raises(ValueError, match="does not match recorded"):
        replay_log(fresh, log)


# ---------------------------------------------------------------- HTTP layer

@pytest.fixture()
def server():
    session = start_session(make_frontend(), demo_rows(), tau=0.15,
                            budget=2.0, expose_truth=True)
    srv = serve(session, port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield session, base
    srv.shutdown()
    srv.server_close()


def get(base, path):
    try:
        with urllib.request.urlopen(base + path, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def post(base, path, payload):
    req = urllib.request.Request(
        base + path, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_http_session_and_metrics(server):
    session, base = server
    status, body = get(base, "/session")
    assert status == 200
    assert body["tau"] == 0.15 and body["n"] == 5 and body["m"] == 3
    assert body["costs"] == [1.0, 1.0, 1.0]
    assert body["revision"] == 0
    status, metrics = get(base, "/metrics")
    assert metrics["n_covered"] + metrics["n_abstained"] == 5
    local = session_metrics(session)
    local["revision"] = session.revision
    assert metrics == local


def test_http_abstentions_and_instance(server):
    _, base = server
    status, body = get(base, "/abstentions")
    ids = [item["id"] for item in body["abstentions"]]
    assert ids == ["mid", "row 7", "flat"]
    for item in body["abstentions"]:
        gains = [f["gain"] for f in item["flags"]]
        assert gains == sorted(gains, reverse=True)
    status, inst = get(base, "/instances/row%207")
    assert status == 200 and inst["id"] == "row 7"
    assert inst["covered"] is False and inst["confirmed"] == []
    assert inst["truth"] == [0, 1, 1]           # expose_truth on
    status, body = get(base, "/instances/ghost")
    assert status == 404 and "revision" in body


def test_http_confirm_roundtrip(server):
    session, base = server
    status, body = post(base, "/instances/mid/confirm",
                        {"concept": 2, "value": 1})
    assert status == 200
    assert body["covered"] is True and body["decision"] == 1
    assert body["confirmed"] == [2]
    assert body["budget_remaining"] == 1.0
    assert body["revision"] == 1
    status, metrics = get(base, "/metrics")
    assert metrics["n_covered"] == 3 and metrics["revision"] == 1
    # rendered numbers come straight from the gate, not a cached copy
    assert metrics["coverage"] == 3 / 5


def test_http_errors(server):
    _, base = server
    status, body = post(base, "/instances/hi/confirm",
                        {"concept": 0, "value": 1})
    assert status == 409 and body["reason"] == "covered"
    status, body = post(base, "/instances/ghost/confirm",
                        {"concept": 0, "value": 1})
    assert status == 404
    status, body = post(base, "/instances/mid/confirm", {"concept": 0})
    assert status == 400
    status, body = post(base, "/instances/mid/confirm",
                        {"concept": 9, "value": 1})
    assert status == 400
    status, body = post(base, "/nope", {})
    assert status == 404
    # every response carries the revision stamp
    assert "revision" in body
    assert body["revision"] == 0                # nothing above mutated state


def test_http_budget_409_detail(server):
    _, base = server
    assert post(base, "/instances/mid/confirm",
                {"concept": 2, "value": 1})[0] == 200
    assert post(base, "/instances/row%207/confirm",
                {"concept": 2, "value": 1})[0] == 200
    status, body = post(base, "/instances/flat/confirm",
                        {"concept": 2, "value": 1})
    assert status == 409
    assert body["reason"] == "budget-exhausted"
    assert body["budget_remaining"] == 0.0 and body["cost"] == 1.0


def test_http_static_ui(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<h1>review</h1>")
    (ui / "app.js").write_text("console.log(1)")
    (tmp_path / "secret.txt").write_text("nope")
    session = start_session(make_frontend(), demo_rows(), tau=0.15)
    srv = serve(session, port=0, ui_dir=str(ui))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    host, port = srv.server_address
    try:
        base = f"http://{host}:{port}"
        with urllib.request.urlopen(base + "/", timeout=10) as resp:
            assert resp.status == 200
            assert resp.headers["Content-Type"].startswith("text/html")
            assert resp.read() == b"<h1>review</h1>"
        with urllib.request.urlopen(base + "/app.js", timeout=10) as resp:
            assert resp.status == 200
            assert resp.read() == b"console.log(1)"
        conn = http.client.HTTPConnection(host, port, timeout=10)
        conn.request("GET", "/../secret.txt")
        resp = conn.getresponse()
        assert resp.status == 404
        resp.read()
        conn.close()
    finally:
        srv.shutdown()
        srv.server_close()
