"""JSON-over-HTTP session service.

Endpoints (bodies and responses are JSON; images travel as base64 PNG):

    GET  /healthz
    POST /sessions                {"target_id": name} or {"target_fold": text}
    GET  /sessions/<id>/observation
    POST /sessions/<id>/action    {"raw": "<agent text>"}
    GET  /sessions/<id>/score
    GET  /sessions/<id>/record

Sessions are isolated; steps within one session are serialized by a lock.
Acting on an exhausted episode returns 409 with error "BudgetExhausted".
"""

from __future__ import annotations

import base64
import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import DEFAULT_CONFIG, EnvConfig
from .env import BudgetExhausted, Session, SessionClosed
from .foldfile import FoldError, load_fold, parse_fold
from .scorer_client import EmbeddingClient
from .solver import SolverError


class ServiceState:
    def __init__(self, config: EnvConfig = DEFAULT_CONFIG):
        self.config = config
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def load_target(self, target_id: str):
        if self.config.targets_dir is None:
            raise FileNotFoundError("no targets directory configured")
        path = Path(self.config.targets_dir) / f"{target_id}.fold"
        if not path.is_file():
            raise FileNotFoundError(f"unknown target {target_id!r}")
        return load_fold(path)

    def create_session(self, target_id: str | None, target_fold: str | None) -> Session:
        if (target_id is None) == (target_fold is None):
            raise ValueError("provide exactly one of target_id / target_fold")
        if target_id is not None:
            target = self.load_target(target_id)
            name = target_id
        else:
            target = parse_fold(target_fold)
            name = "inline"
        session = Session(target, self.config, target_name=name)
        with self._registry_lock:
            self.sessions[session.episode_id] = session
            self.locks[session.episode_id] = threading.Lock()
        return session

    def get(self, episode_id: str) -> tuple[Session, threading.Lock]:
        with self._registry_lock:
            if episode_id not in self.sessions:
                raise KeyError(episode_id)
            return self.sessions[episode_id], self.locks[episode_id]

    def scorer(self) -> EmbeddingClient | None:
        addr = self.config.resolved_scorer_addr()
        return EmbeddingClient(addr) if addr else None


def _b64(img) -> str:
    return base64.b64encode(img.to_png_bytes()).decode("ascii")


_SESSION_PATH = re.compile(r"^/sessions/([0-9a-f]+)/(observation|action|score|record)$")


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState  # attached by make_server

    # Silence per-request stderr logging.
    def log_message(self, fmt, *args):  # noqa: D102
        pass

    def _reply(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length <= 0:
            return {}
        doc = json.loads(self.rfile.read(length).decode("utf-8"))
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    def do_GET(self):  # noqa: N802
        if self.path == "/healthz":
            self._reply(200, {"status": "ok"})
            return
        m = _SESSION_PATH.match(self.path)
        if not m:
            self._reply(404, {"error": "NotFound"})
            return
        episode_id, verb = m.groups()
        try:
            session, lock = self.state.get(episode_id)
        except KeyError:
            self._reply(404, {"error": "UnknownEpisode"})
            return
        if verb == "observation":
            with lock:
                obs = session.observation()
                self._reply(
                    200,
                    {
                        "target_png": _b64(obs.target_img),
                        "current_png": _b64(obs.current_img),
                        "cp_png": _b64(obs.cp_img),
                        "foldability_feedback": obs.foldability_feedback,
                        "prompt_template_id": obs.prompt_template_id,
                        "steps_attempted": session.record.steps_attempted,
                        "max_steps": session.record.max_steps,
                    },
                )
        elif verb == "score":
            with lock:
                score = session.score(self.state.scorer())
            self._reply(200, score.as_dict())
        elif verb == "record":
            with lock:
                self._reply(200, session.record.as_dict())
        else:
            self._reply(405, {"error": "MethodNotAllowed"})

    def do_POST(self):  # noqa: N802
        try:
            doc = self._read_json()
        except (ValueError, json.JSONDecodeError) as exc:
            self._reply(400, {"error": "BadRequest", "detail": str(exc)})
            return
        if self.path == "/sessions":
            try:
                session = self.state.create_session(
                    doc.get("target_id"), doc.get("target_fold")
                )
            except (ValueError, FileNotFoundError, FoldError, SolverError) as exc:
                self._reply(400, {"error": type(exc).__name__, "detail": str(exc)})
                return
            self._reply(
                200,
                {
                    "episode_id": session.episode_id,
                    "max_steps": session.record.max_steps,
                },
            )
            return
        m = _SESSION_PATH.match(self.path)
        if not m or m.group(2) != "action":
            self._reply(404, {"error": "NotFound"})
            return
        try:
            session, lock = self.state.get(m.group(1))
        except KeyError:
            self._reply(404, {"error": "UnknownEpisode"})
            return
        raw = doc.get("raw")
        if not isinstance(raw, str):
            self._reply(400, {"error": "BadRequest", "detail": "missing 'raw' text"})
            return
        with lock:
            try:
                result = session.submit(raw)
            except BudgetExhausted as exc:
                self._reply(409, {"error": "BudgetExhausted", "detail": str(exc)})
                return
            except SessionClosed as exc:
                self._reply(409, {"error": "SessionClosed", "detail": str(exc)})
                return
            self._reply(
                200,
                {
                    "accepted": result.accepted,
                    "verdict": result.verdict,
                    "foldability_feedback": result.observation.foldability_feedback,
                    "steps_attempted": session.record.steps_attempted,
                    "max_steps": session.record.max_steps,
                },
            )


def make_server(addr: str, config: EnvConfig = DEFAULT_CONFIG) -> ThreadingHTTPServer:
    """Build the HTTP server; caller decides how to run it."""
    host, _, port = addr.rpartition(":")
    state = ServiceState(config)
    handler = type("Handler", (_Handler,), {"state": state})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
    server.state = state
    return server


def serve(addr: str, config: EnvConfig = DEFAULT_CONFIG) -> None:
    server = make_server(addr, config)
    host, port = server.server_address[:2]
    print(f"forge service listening on {host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
