import base64
import dataclasses
import json
import threading
import urllib.request

import pytest

from foldforge.agents import ScriptedAgent
from foldforge.config import DEFAULT_CONFIG
from foldforge.env import run_episode
from foldforge.service import make_server

from conftest import FOLDS, load_fixture, load_script


@pytest.fixture(scope="module")
def server():
    config = dataclasses.replace(DEFAULT_CONFIG, targets_dir=str(FOLDS), max_steps=5)
    srv = make_server("127.0.0.1:0", config)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def call(server, method, path, body=None):
    port = server.server_address[1]
    url = f"http://127.0.0.1:{port}{path}"
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode())


def act(p1, p2, a):
    return json.dumps({"action": "add_crease", "p1": p1, "p2": p2, "assignment": a})


class TestService:
    def test_healthz(self, server):
        status, body = call(server, "GET", "/healthz")
        assert status == 200 and body["status"] == "ok"

    def test_create_observe_act_score(self, server):
        status, body = call(server, "POST", "/sessions", {"target_id": "single_vertical"})
        assert status == 200
        ep = body["episode_id"]

        status, obs = call(server, "GET", f"/sessions/{ep}/observation")
        assert status == 200
        assert obs["foldability_feedback"] is True
        for key in ("target_png", "current_png", "cp_png"):
            assert base64.b64decode(obs[key])[:8] == b"\x89PNG\r\n\x1a\n"

        status, res = call(server, "POST", f"/sessions/{ep}/action", {"raw": act([5, 0], [5, 10], "V")})
        assert status == 200
        assert res["accepted"] is True and res["verdict"] == "valid"

        status, score = call(server, "GET", f"/sessions/{ep}/score")
        assert status == 200
        assert score["qe"] == 1.0 and score["gs"] == 1.0 and score["ss"] is None

    def test_matches_in_process_run(self, server):
        # Driving the same script over HTTP and in-process yields the same
        # final FOLD text and score.
        script = load_script("map_fold")
        status, body = call(server, "POST", "/sessions", {"target_id": "map_fold"})
        ep = body["episode_id"]
        for raw in script:
            status, res = call(server, "POST", f"/sessions/{ep}/action", {"raw": raw})
            assert res["accepted"], res
        status, record = call(server, "GET", f"/sessions/{ep}/record")
        assert status == 200

        rec, score = run_episode(
            load_fixture("map_fold"),
            ScriptedAgent(script),
            max_steps=5,
        )
        assert record["final_fold_text"] == rec.final_fold_text
        status, http_score = call(server, "GET", f"/sessions/{ep}/score")
        assert http_score["qe"] == score.qe
        assert http_score["gs"] == score.gs

    def test_sessions_are_isolated(self, server):
        _, a = call(server, "POST", "/sessions", {"target_id": "blank"})
        _, b = call(server, "POST", "/sessions", {"target_id": "blank"})
        call(server, "POST", f"/sessions/{a['episode_id']}/action", {"raw": act([5, 0], [5, 10], "V")})
        _, rec_a = call(server, "GET", f"/sessions/{a['episode_id']}/record")
        _, rec_b = call(server, "GET", f"/sessions/{b['episode_id']}/record")
        assert rec_a["steps_attempted"] == 1
        assert rec_b["steps_attempted"] == 0
        assert rec_a["final_fold_text"] != rec_b["final_fold_text"]

    def test_unknown_episode_404(self, server):
        status, body = call(server, "GET", "/sessions/deadbeef/observation")
        assert status == 404
        assert body["error"] == "UnknownEpisode"

    def test_budget_exhausted_status_code(self, server):
        _, body = call(server, "POST", "/sessions", {"target_id": "blank"})
        ep = body["episode_id"]
        for _ in range(5):
            call(server, "POST", f"/sessions/{ep}/action", {"raw": "junk"})
        status, body = call(server, "POST", f"/sessions/{ep}/action", {"raw": "junk"})
        assert status == 409
        assert body["error"] == "BudgetExhausted"

    def test_inline_target(self, server):
        text = (FOLDS / "kite.fold").read_text()
        status, body = call(server, "POST", "/sessions", {"target_fold": text})
        assert status == 200

    def test_bad_target_rejected(self, server):
        status, body = call(server, "POST", "/sessions", {"target_id": "no_such_thing"})
        assert status == 400
        status, body = call(server, "POST", "/sessions", {})
        assert status == 400

    def test_concurrent_sessions_stay_isolated(self, server):
        import concurrent.futures

        _, a = call(server, "POST", "/sessions", {"target_id": "blank"})
        _, b = call(server, "POST", "/sessions", {"target_id": "blank"})

        def drive(episode_id, action_raw, n):
            for _ in range(n):
                call(server, "POST", f"/sessions/{episode_id}/action", {"raw": action_raw})

        with concurrent.futures.ThreadPoolExecutor(max_workers=2) as pool:
            fa = pool.submit(drive, a["episode_id"], act([5, 0], [5, 10], "V"), 3)
            fb = pool.submit(drive, b["episode_id"], act([0, 5], [10, 5], "M"), 3)
            fa.result()
            fb.result()
        _, rec_a = call(server, "GET", f"/sessions/{a['episode_id']}/record")
        _, rec_b = call(server, "GET", f"/sessions/{b['episode_id']}/record")
        assert rec_a["steps_attempted"] == 3 and rec_b["steps_attempted"] == 3
        assert rec_a["steps_valid"] == 1 and rec_b["steps_valid"] == 1  # then duplicates
        assert '"V"' in rec_a["final_fold_text"]
        assert '"M"' in rec_b["final_fold_text"]

    def test_unparseable_body(self, server):
        port = server.server_address[1]
        req = urllib.request.Request(
            f"http://127.0.0.1:{port}/sessions", data=b"{not json", method="POST"
        )
        try:
            with urllib.request.urlopen(req) as resp:
                status = resp.status
        except urllib.error.HTTPError as exc:
            status = exc.code
        assert status == 400
