"""HTTP session API for interactive triage.

A session holds a prior and the transcript of asked symptoms with the
user's yes/no answers; the policy (RL checkpoint or greedy info-gain) picks
each next question.  The reported differential is always recomputed from
the transcript through the same posterior arithmetic the rest of the system
uses, so API output and offline replay agree bit for bit.

Sessions live in process, guarded by per-session locks; an optional
write-through journal file lets a restarted server recover them.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from typing import Literal

from .env import EnvConfig, termination
from .greedy import select_question
from .knowledge import AnswerHistory, Belief, KnowledgeMatrix, posterior_from_history
from .qnet import MlpParams, forward

PRIOR_SUM_TOL = 1e-3


class CreateSessionBody(BaseModel):
    policy: Literal["rl", "greedy"]
    prior: list[float] | None = None


class AnswerBody(BaseModel):
    answer: Literal["yes", "no"]


@dataclass
class Session:
    session_id: str
    policy: str
    prior: Belief
    history: AnswerHistory
    asked: list[tuple[int, str]] = field(default_factory=list)
    pending: int | None = None
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False)


class SessionStore:
    def __init__(self, journal_path: str | Path | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal_fh = None

    def open_journal(self, n_symptoms: int) -> None:
        if self._journal_path is None:
            return
        if self._journal_path.exists():
            self._replay(n_symptoms)
        self._journal_fh = open(self._journal_path, "a", encoding="utf-8")

    def _replay(self, n_symptoms: int) -> None:
        with open(self._journal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                ev = json.loads(line)
                op = ev["op"]
                if op == "create":
                    self._sessions[ev["id"]] = Session(
                        session_id=ev["id"],
                        policy=ev["policy"],
                        prior=Belief(np.array(ev["prior"])),
                        history=AnswerHistory.empty(n_symptoms),
                    )
                elif op == "question":
                    self._sessions[ev["id"]].pending = ev["symptom"]
                elif op == "answer":
                    s = self._sessions[ev["id"]]
                    s.history = s.history.with_answer(ev["symptom"], ev["answer"])
                    s.asked.append((ev["symptom"], ev["answer"]))
                    s.pending = None
                elif op == "delete":
                    self._sessions.pop(ev["id"], None)

    def journal(self, event: dict) -> None:
        if self._journal_fh is not None:
            self._journal_fh.write(json.dumps(event) + "\n")
            self._journal_fh.flush()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def remove(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None


def _parse_prior(raw: list[float] | None, n_conditions: int) -> Belief:
    if raw is None:
        return Belief.uniform(n_conditions)
    probs = np.asarray(raw, dtype=float)
    if probs.shape != (n_conditions,):
        raise ValueError(f"prior must have {n_conditions} entries")
    if not np.isfinite(probs).all() or (probs < 0).any():
        raise ValueError("prior entries must be finite and non-negative")
    total = probs.sum()
    if abs(total - 1.0) > PRIOR_SUM_TOL:
        raise ValueError(f"prior sums to {total}, not 1")
    return Belief(probs / total)


def build_app(
    world: KnowledgeMatrix,
    rl_params: MlpParams | None = None,
    env_cfg: EnvConfig = EnvConfig(),
    journal_path: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="symcheck triage service")
    store = SessionStore(journal_path)
    store.open_journal(world.n_symptoms)

    if rl_params is not None and rl_params.n_out != world.n_symptoms:
        raise ValueError("checkpoint output size does not match world symptoms")

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def posterior_of(session: Session) -> Belief:
        return posterior_from_history(session.prior, world, session.history)

    def differential_of(posterior: Belief) -> list[dict]:
        order = np.argsort(-posterior.probs, kind="stable")
        return [
            {
                "condition": world.condition_names[i],
                "probability": float(posterior.probs[i]),
            }
            for i in order
        ]

    def status_of(session: Session, posterior: Belief) -> tuple[bool, str | None]:
        reason = termination(posterior, len(session.asked), world.n_symptoms, env_cfg)
        return reason != "none", (reason if reason != "none" else None)

    def next_question(session: Session, posterior: Belief) -> int:
        if session.policy == "greedy":
            return select_question(posterior, world, {s for s, _ in session.asked})
        features = np.concatenate(
            [
                (posterior if env_cfg.state_prior_mode == "posterior" else session.prior).probs,
                session.history.entries.astype(float),
            ]
        )
        q = forward(rl_params, features)
        masked = np.where(session.history.asked, -np.inf, q)
        return int(np.argmax(masked))

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        if body.policy == "rl" and rl_params is None:
            return error(400, "no RL checkpoint loaded; use policy 'greedy'")
        try:
            prior = _parse_prior(body.prior, world.n_conditions)
        except ValueError as exc:
            return error(400, str(exc))
        session = Session(
            session_id=uuid.uuid4().hex,
            policy=body.policy,
            prior=prior,
            history=AnswerHistory.empty(world.n_symptoms),
        )
        store.add(session)
        store.journal(
            {
                "op": "create",
                "id": session.session_id,
                "policy": session.policy,
                "prior": [float(p) for p in prior.probs],
            }
        )
        return {
            "session_id": session.session_id,
            "differential": differential_of(posterior_of(session)),
        }

    @app.get("/sessions/{session_id}/question")
    def get_question(session_id: str):
        session = store.get(session_id)
        if session is None:
            return error(404, "unknown session")
        with session.lock:
            posterior = posterior_of(session)
            done, reason = status_of(session, posterior)
            if done:
                return {"done": True, "done_reason": reason}
            if session.pending is None:
                session.pending = next_question(session, posterior)
                store.journal(
                    {"op": "question", "id": session_id, "symptom": session.pending}
                )
            return {"symptom_name": world.symptom_names[session.pending]}

    @app.post("/sessions/{session_id}/answer")
    def post_answer(session_id: str, body: AnswerBody):
        session = store.get(session_id)
        if session is None:
            return error(404, "unknown session")
        with session.lock:
            posterior = posterior_of(session)
            done, _ = status_of(session, posterior)
            if done:
                return error(409, "session already finished")
            if session.pending is None:
                return error(409, "no question issued; GET the question first")
            symptom = session.pending
            session.history = session.history.with_answer(symptom, body.answer)
            session.asked.append((symptom, body.answer))
            session.pending = None
            store.journal(
                {
                    "op": "answer",
                    "id": session_id,
                    "symptom": symptom,
                    "answer": body.answer,
                }
            )
            posterior = posterior_of(session)
            done, reason = status_of(session, posterior)
            return {
                "differential": differential_of(posterior),
                "questions_asked": len(session.asked),
                "done": done,
                "done_reason": reason,
            }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            return error(404, "unknown session")
        with session.lock:
            posterior = posterior_of(session)
            done, reason = status_of(session, posterior)
            return {
                "session_id": session.session_id,
                "policy": session.policy,
                "questions_asked": len(session.asked),
                "asked": [
                    {"symptom_name": world.symptom_names[s], "answer": a}
                    for s, a in session.asked
                ],
                "differential": differential_of(posterior),
                "done": done,
                "done_reason": reason,
                "pending_question": (
                    world.symptom_names[session.pending]
                    if session.pending is not None
                    else None
                ),
            }

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        if not store.remove(session_id):
            return error(404, "unknown session")
        store.journal({"op": "delete", "id": session_id})

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
