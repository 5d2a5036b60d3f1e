"""Live review loop: a human confirms concepts until abstentions resolve.

A session gates every instance once at startup. Covered instances are frozen;
abstained instances carry gain-ranked flags telling the reviewer which
concept is worth confirming next. Each confirmation pins one concept to an
observed 0/1 value, recomputes the propagated score, re-applies the gate, and
re-ranks the remaining flags on the updated vector (interactive gains, unlike
the offline planner's static ones — the outcome of each confirmation is known
here, so fresher gains are strictly better informed).

Every mutation appends one JSON line to the audit log; replaying the log onto
the same artifacts reproduces the session state exactly. The HTTP layer is a
thin JSON mapping over the session object; every response carries the session
revision so clients can detect staleness.
"""
from __future__ import annotations

import json
import mimetypes
import os
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote

import numpy as np

from .confirmation import ConfirmationCosts, gain
from .gate import apply_gate
from .propagation import propagate_exact
from .types import ABSTAIN

__all__ = [
    "SessionRow",
    "ReviewSession",
    "UnknownInstanceError",
    "ConfirmationRejected",
    "start_session",
    "confirm_concept",
    "session_metrics",
    "replay_log",
    "serve",
]


class UnknownInstanceError(Exception):
    pass


class ConfirmationRejected(Exception):
    """reason is one of: covered, already-confirmed, budget-exhausted."""

    def __init__(self, reason: str, message: str, **detail):
        super().__init__(message)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class SessionRow:
    id: str
    q: np.ndarray
    truth: np.ndarray | None = None    # hard concepts, when known (demo mode)
    label: int | None = None


@dataclass
class _InstanceState:
    id: str
    p: np.ndarray
    confirmed: set
    ybar: float
    decision: int | None               # None while abstained
    flags: list                        # (concept, gain) ranked
    truth: np.ndarray | None
    label: int | None


def _score(frontend, p) -> float:
    out = propagate_exact(frontend, p)
    if np.ndim(out) == 0:
        return float(out)
    if np.shape(out) == (2,):
        return float(out[1])
    raise ValueError("review sessions support binary front-ends only")


def _rank_flags(frontend, p, confirmed) -> list:
    flags = [(k, gain(frontend, p, k))
             for k in range(p.shape[0]) if k not in confirmed]
    flags.sort(key=lambda t: (-t[1], t[0]))
    return flags


def _decide(ybar: float, tau: float) -> int | None:
    d = apply_gate(ybar, tau)
    return None if d is ABSTAIN else int(d)


@dataclass
class ReviewSession:
    frontend: object
    tau: float
    costs: ConfirmationCosts
    budget_remaining: float
    instances: dict                    # id -> _InstanceState, insertion order
    expose_truth: bool = False
    log_path: str | None = None
    revision: int = 0
    confirmations_used: int = 0
    lock: threading.RLock = field(default_factory=threading.RLock)

    @property
    def m(self) -> int:
        return self.costs.m

    @property
    def n(self) -> int:
        return len(self.instances)


def start_session(frontend, rows, tau: float, costs: ConfirmationCosts | None = None,
                  budget: float | None = None, expose_truth: bool = False,
                  log_path: str | None = None) -> ReviewSession:
    """Gate every instance; abstained ones get gain-ranked concept flags.

    budget None means unlimited. Starting twice from the same artifacts gives
    identical initial state.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("a session needs at least one instance")
    m = np.asarray(rows[0].q, dtype=float).shape[0]
    if costs is None:
        costs = ConfirmationCosts.unit(m)
    if costs.m != m:
        raise ValueError("costs dimension must match the concept count")
    instances: dict = {}
    for row in rows:
        p = np.array(np.asarray(row.q, dtype=float), copy=True)
        if p.shape != (m,):
            raise ValueError(f"instance {row.id}: expected {m} concept probabilities")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"instance {row.id}: probabilities outside [0, 1]")
        truth = None
        if row.truth is not None:
            truth = np.asarray(row.truth, dtype=np.int8)
            if truth.shape != (m,) or not np.all((truth == 0) | (truth == 1)):
                raise ValueError(f"instance {row.id}: truth must be m hard bits")
        ybar = _score(frontend, p)
        decision = _decide(ybar, tau)
        key = str(row.id)
        if key in instances:
            raise ValueError(f"duplicate instance id {key!r}")
        instances[key] = _InstanceState(
            id=key, p=p, confirmed=set(), ybar=ybar, decision=decision,
            flags=[] if decision is not None else _rank_flags(frontend, p, set()),
            truth=truth,
            label=None if row.label is None else int(row.label),
        )
    return ReviewSession(
        frontend=frontend, tau=float(tau), costs=costs,
        budget_remaining=float("inf") if budget is None else float(budget),
        instances=instances, expose_truth=expose_truth, log_path=log_path,
    )


def _append_log(session: ReviewSession, record: dict) -> None:
    if session.log_path is None:
        return
    with open(session.log_path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def confirm_concept(session: ReviewSession, instance_id: str, concept: int,
                    value: int, _log: bool = True) -> _InstanceState:
    """Pin one concept of an abstained instance to its observed value.

    The observed value is taken as ground truth and never overridden. Raises
    UnknownInstanceError, ConfirmationRejected, or ValueError on bad input.
    """
    with session.lock:
        key = str(instance_id)
        st = session.instances.get(key)
        if st is None:
            raise UnknownInstanceError(f"unknown instance {key!r}")
        if st.decision is not None:
            raise ConfirmationRejected(
                "covered", f"instance {key!r} is already covered; covered "
                "instances are immutable")
        concept = int(concept)
        if not 0 <= concept < session.m:
            raise ValueError(f"concept index {concept} out of range")
        if int(value) not in (0, 1):
            raise ValueError("observed value must be 0 or 1")
        if concept in st.confirmed:
            raise ConfirmationRejected(
                "already-confirmed", f"concept {concept} of instance {key!r} "
                "was already confirmed")
        cost = float(session.costs.values[concept])
        if cost > session.budget_remaining:
            raise ConfirmationRejected(
                "budget-exhausted",
                f"cost {cost} exceeds remaining budget {session.budget_remaining}",
                budget_remaining=session.budget_remaining, cost=cost)

        pre_ybar = st.ybar
        st.p[concept] = float(int(value))
        st.confirmed.add(concept)
        st.ybar = _score(session.frontend, st.p)
        st.decision = _decide(st.ybar, session.tau)
        st.flags = [] if st.decision is not None else \
            _rank_flags(session.frontend, st.p, st.confirmed)
        session.budget_remaining -= cost
        session.confirmations_used += 1
        session.revision += 1
        if _log:
            _append_log(session, {
                "revision": session.revision, "instance": key,
                "concept": concept, "value": int(value), "cost": cost,
                "pre_ybar": pre_ybar, "post_ybar": st.ybar,
                "ts": time.time(),
            })
        return st


def session_metrics(session: ReviewSession) -> dict:
    with session.lock:
        n = session.n
        covered = [st for st in session.instances.values() if st.decision is not None]
        labeled = [st for st in covered if st.label is not None]
        acc = None
        if labeled:
            acc = float(np.mean([st.decision == st.label for st in labeled]))
        return {
            "n": n,
            "n_covered": len(covered),
            "n_abstained": n - len(covered),
            "coverage": len(covered) / n,
            "selective_accuracy": acc,
            "confirmations_used": session.confirmations_used,
            "budget_remaining": None if session.budget_remaining == float("inf")
            else session.budget_remaining,
            "tau": session.tau,
        }


def replay_log(session: ReviewSession, path) -> ReviewSession:
    """Re-apply an audit log to a freshly started session, byte-for-byte.

    Each record is checked against the recomputed score; appends stay off
    during replay and resume afterwards if the session has a log path.
    """
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            st = confirm_concept(session, rec["instance"], rec["concept"],
                                 rec["value"], _log=False)
            if abs(st.ybar - rec["post_ybar"]) > 1e-9:
                raise ValueError(
                    f"log line {line_no}: replayed score {st.ybar} does not "
                    f"match recorded {rec['post_ybar']}")
    return session


def _instance_payload(session: ReviewSession, st: _InstanceState) -> dict:
    out = {
        "id": st.id,
        "p": [float(v) for v in st.p],
        "confirmed": sorted(st.confirmed),
        "ybar": float(st.ybar),
        "decision": st.decision,
        "covered": st.decision is not None,
        "flags": [{"concept": k, "gain": float(g),
                   "cost": float(session.costs.values[k])}
                  for k, g in st.flags],
    }
    if session.expose_truth and st.truth is not None:
        out["truth"] = [int(v) for v in st.truth]
        out["label"] = st.label
    return out


class _Handler(BaseHTTPRequestHandler):
    # class attributes injected by serve(): session, ui_dir
    session: ReviewSession = None
    ui_dir: str | None = None
    server_version = "review-service/1"

    def log_message(self, fmt, *args):
        pass

    def _json(self, code: int, obj: dict) -> None:
        obj = dict(obj)
        obj["revision"] = self.session.revision
        body = json.dumps(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(body)

    def _static(self, path: str) -> None:
        if self.ui_dir is None:
            self._json(404, {"error": "no such endpoint"})
            return
        rel = path.lstrip("/") or "index.html"
        base = os.path.realpath(self.ui_dir)
        target = os.path.realpath(os.path.join(base, rel))
        if not target.startswith(base + os.sep) and target != base:
            self._json(404, {"error": "no such file"})
            return
        if not os.path.isfile(target):
            self._json(404, {"error": "no such file"})
            return
        ctype = mimetypes.guess_type(target)[0] or "application/octet-stream"
        with open(target, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        s = self.session
        path = self.path.split("?", 1)[0]
        with s.lock:
            if path == "/session":
                self._json(200, {
                    "tau": s.tau, "n": s.n, "m": s.m,
                    "costs": [float(c) for c in s.costs.values],
                    "expose_truth": s.expose_truth,
                    "metrics": session_metrics(s),
                })
            elif path == "/metrics":
                self._json(200, session_metrics(s))
            elif path == "/abstentions":
                items = [
                    {"id": st.id, "ybar": float(st.ybar),
                     "flags": [{"concept": k, "gain": float(g),
                                "cost": float(s.costs.values[k])}
                               for k, g in st.flags]}
                    for st in s.instances.values() if st.decision is None
                ]
                self._json(200, {"abstentions": items})
            elif path.startswith("/instances/"):
                key = unquote(path[len("/instances/"):])
                st = s.instances.get(key)
                if st is None:
                    self._json(404, {"error": f"unknown instance {key!r}"})
                else:
                    self._json(200, _instance_payload(s, st))
            else:
                self._static(path)

    def do_POST(self):
        s = self.session
        path = self.path.split("?", 1)[0]
        if not (path.startswith("/instances/") and path.endswith("/confirm")):
            self._json(404, {"error": "no such endpoint"})
            return
        key = unquote(path[len("/instances/"):-len("/confirm")])
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            concept = payload["concept"]
            value = payload["value"]
        except (ValueError, KeyError, json.JSONDecodeError):
            self._json(400, {"error": "body must be JSON with concept and value"})
            return
        try:
            with s.lock:
                st = confirm_concept(s, key, concept, value)
                out = _instance_payload(s, st)
                out["budget_remaining"] = session_metrics(s)["budget_remaining"]
                self._json(200, out)
        except UnknownInstanceError as exc:
            self._json(404, {"error": str(exc)})
        except ConfirmationRejected as exc:
            body = {"error": str(exc), "reason": exc.reason}
            body.update(exc.detail)
            self._json(409, body)
        except ValueError as exc:
            self._json(400, {"error": str(exc)})


def serve(session: ReviewSession, host: str = "127.0.0.1", port: int = 8000,
          ui_dir: str | None = None) -> ThreadingHTTPServer:
    """Bind the HTTP server (port 0 picks an ephemeral port); caller runs
    serve_forever()."""
    handler = type("BoundHandler", (_Handler,),
                   {"session": session, "ui_dir": ui_dir})
    return ThreadingHTTPServer((host, port), handler)
