"""HTTP session API: event-sourced interactive sessions over JSON.

All mutating requests append to the on-disk event log before they are
acknowledged, so any session can be rebuilt from the data directory
alone (crash-restart replays bit-exactly).
"""

from __future__ import annotations

import json
import threading
import uuid
import warnings
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import SCHEMA_VERSION, adaptive, exdos
from .config import EngineConfig
from .corpus import featurize, load_corpus
from .errors import PersumError, SessionConverged
from .simulate import SumRecomSession


class CreateSession(BaseModel):
    mode: str = Field(pattern="^(adaptive|sumrecom)$")
    corpus_id: str
    budget: int = Field(gt=0)
    unit: str = "unigram"
    seed: int = 0


class AdaptiveFeedback(BaseModel):
    kind: str = Field(pattern="^(concept|reject_sentence)$")
    target: int
    action: int | None = None
    weight: float | None = None
    confidence: float = 1.0


class PreferenceFeedback(BaseModel):
    winner: str = Field(pattern="^(left|right)$")


class SummarizeRequest(BaseModel):
    corpus_id: str
    budget: int = Field(gt=0)
    seed: int = 0


def _versioned(payload: dict) -> dict:
    payload["schema_version"] = SCHEMA_VERSION
    return payload


class SessionBox:
    """One live session plus its exclusive mutation guard."""

    def __init__(self, mode, state, corpus_id):
        self.mode = mode
        self.state = state
        self.corpus_id = corpus_id
        self.lock = threading.Lock()

    @property
    def converged(self) -> bool:
        if self.mode == "adaptive":
            return all(c.status != "unqueried" for c in self.state.concepts.values())
        return self.state.converged


def create_app(config: EngineConfig | None = None, data_root=None) -> FastAPI:
    config = config or EngineConfig.from_env()
    from .config import data_dir as default_data_dir
    root = Path(data_root) if data_root else default_data_dir()
    corpora_dir = root / "corpora"
    sessions_dir = root / "sessions"
    sessions_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="persum", version="0.1.0")
    boxes: dict[str, SessionBox] = {}
    corpora_cache = {}

    def get_corpus(corpus_id: str):
        if corpus_id in corpora_cache:
            return corpora_cache[corpus_id]
        jsonl = corpora_dir / f"{corpus_id}.jsonl"
        txtdir = corpora_dir / corpus_id
        try:
            if jsonl.exists():
                corp = load_corpus(jsonl, "jsonl")
            elif txtdir.is_dir():
                corp = load_corpus(txtdir, "txt_dir")
            else:
                raise HTTPException(404, f"unknown corpus '{corpus_id}'")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                featurize(corp)
        except PersumError as exc:
            raise HTTPException(422, str(exc)) from exc
        corpora_cache[corpus_id] = corp
        return corp

    def session_path(session_id: str) -> Path:
        return sessions_dir / session_id

    def persist_meta(session_id, box: SessionBox):
        meta = {"mode": box.mode, "corpus_id": box.corpus_id}
        (session_path(session_id) / "meta.json").write_text(
            json.dumps(meta, sort_keys=True), encoding="utf-8")

    def restore(session_id: str) -> SessionBox:
        d = session_path(session_id)
        meta_path = d / "meta.json"
        if not meta_path.exists():
            raise HTTPException(404, f"unknown session '{session_id}'")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        corp = get_corpus(meta["corpus_id"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if meta["mode"] == "adaptive":
                state = adaptive.load_session(d, corp)
            else:
                state = SumRecomSession.load(d, corp)
        box = SessionBox(meta["mode"], state, meta["corpus_id"])
        boxes[session_id] = box
        return box

    def get_box(session_id: str) -> SessionBox:
        if session_id in boxes:
            return boxes[session_id]
        return restore(session_id)

    # -- endpoints -------------------------------------------------------
    @app.get("/healthz")
    def healthz():
        return _versioned({"status": "ok"})

    @app.post("/sessions")
    def create_session(body: CreateSession):
        corp = get_corpus(body.corpus_id)
        session_id = str(uuid.uuid4())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                if body.mode == "adaptive":
                    state = adaptive.start_session(
                        corp, budget_words=body.budget, unit=body.unit,
                        seed=body.seed, hyper=config.exdos_hyper())
                    adaptive.save_session(state, session_path(session_id))
                else:
                    state = SumRecomSession(
                        corpus=corp, word_budget=body.budget, unit=body.unit,
                        seed=body.seed, concept_budget=config.concept_queries,
                        summary_budget=config.summary_queries,
                        pool_size=config.pool_size)
                    state.save(session_path(session_id))
            except PersumError as exc:
                raise HTTPException(422, str(exc)) from exc
        box = SessionBox(body.mode, state, body.corpus_id)
        boxes[session_id] = box
        persist_meta(session_id, box)
        return _versioned({
            "session_id": session_id,
            "mode": body.mode,
            "status": "converged" if box.converged else "awaiting_feedback",
        })

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        box = get_box(session_id)
        with box.lock:
            if box.mode == "adaptive":
                try:
                    group = adaptive.next_query_group(box.state, config.group_size)
                except SessionConverged:
                    return _versioned({"status": "converged", "query": None})
                return _versioned({
                    "status": "awaiting_feedback",
                    "query": {
                        "kind": "concept_group",
                        "concepts": [
                            {
                                "concept_id": item["concept"].concept_id,
                                "label": item["concept"].label,
                                "base_score": item["concept"].base_score,
                                "examples": [
                                    {"sentence_id": s.id, "text": s.text}
                                    for s in item["examples"]
                                ],
                            }
                            for item in group
                        ],
                    },
                })
            pending = box.state.pending_query()
            if pending is None:
                return _versioned({"status": "converged", "query": None})
            return _versioned({"status": "awaiting_feedback", "query": pending})

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: dict):
        box = get_box(session_id)
        with box.lock:
            if box.converged:
                raise HTTPException(409, "session already converged")
            try:
                if box.mode == "adaptive":
                    fb = AdaptiveFeedback(**body)
                    if fb.kind == "concept":
                        if fb.action is None or fb.weight is None:
                            raise HTTPException(
                                422, "concept feedback needs 'action' and 'weight'")
                        event = adaptive.ConceptFeedback(
                            concept_id=fb.target, action=fb.action,
                            weight=fb.weight, confidence=fb.confidence)
                    else:
                        event = adaptive.SentenceRejection(sentence_id=fb.target)
                    adaptive.apply_feedback(box.state, event)
                    adaptive.save_session(box.state, session_path(session_id))
                else:
                    fb = PreferenceFeedback(**body)
                    box.state.apply_answer(fb.winner)
                    box.state.save(session_path(session_id))
            except HTTPException:
                raise
            except SessionConverged as exc:
                raise HTTPException(409, str(exc)) from exc
            except (PersumError, ValueError) as exc:
                raise HTTPException(422, str(exc)) from exc
            except TypeError as exc:
                raise HTTPException(422, f"malformed feedback body: {exc}") from exc
            persist_meta(session_id, box)
            return _versioned({
                "status": "converged" if box.converged else "awaiting_feedback",
            })

    @app.get("/sessions/{session_id}/summary")
    def get_summary(session_id: str):
        box = get_box(session_id)
        with box.lock:
            if box.mode == "adaptive":
                summary = box.state.current_summary
            else:
                summary = box.state.current_summary()
            if summary is None:
                return _versioned({"status": "awaiting_feedback", "summary": None})
            corp = box.state.corpus
            return _versioned({
                "status": "converged" if box.converged else "awaiting_feedback",
                "summary": {
                    **summary.as_dict(),
                    "sentences": [
                        {
                            "sentence_id": i,
                            "text": corp.sentences[i].text,
                            "concepts": sorted(
                                corp.sentences[i].concept_ids & _accepted_ids(box)),
                        }
                        for i in summary.sentence_ids
                    ],
                },
            })

    def _accepted_ids(box: SessionBox) -> set:
        if box.mode == "adaptive":
            return {
                cid for cid, c in box.state.concepts.items() if c.status == "accepted"
            }
        return set()

    @app.post("/summarize")
    def summarize(body: SummarizeRequest):
        corp = get_corpus(body.corpus_id)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                data = exdos.labeled_set_from_corpus(corp)
                model = exdos.train(data, K=2, hyper=config.exdos_hyper(), seed=body.seed)
                summary = exdos.select_summary(
                    model, corp, body.budget, hyper=config.exdos_hyper(), seed=body.seed)
            except PersumError as exc:
                raise HTTPException(422, str(exc)) from exc
        return _versioned({
            "summary": {
                **summary.as_dict(),
                "sentences": [
                    {"sentence_id": i, "text": corp.sentences[i].text}
                    for i in summary.sentence_ids
                ],
            },
        })

    return app


def serve(config: EngineConfig | None = None, port: int = 8080,
          host: str = "127.0.0.1", data_root=None):
    import uvicorn
    uvicorn.run(create_app(config, data_root), host=host, port=port, log_level="warning")
