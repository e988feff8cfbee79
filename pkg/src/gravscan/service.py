"""HTTP service for the crowd evaluation protocol.

Each session assigns an annotator 20 stimuli (10 with human truth, 10
synthetic) in a randomized order, serves the replay payloads (image
pixels + dense trajectory), collects human/synthetic judgments into an
append-only JSON-lines store, and exposes live agreement statistics.

Ground truth is joined server-side when a judgment is appended; no
payload sent to a client ever contains it.
"""
from __future__ import annotations

import json
import os
import random
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles

from .agreement import CrowdReport, JudgmentRecord, crowd_report
from .io import Manifest, load_manifest, read_pgm, read_scanpath, read_trajectory
from .types import MetricUndefinedError, PROVENANCES, ValidationError

SESSION_SIZE = 20
PER_CLASS = 10
EXPERTISE_LEVELS = (1, 2, 3, 4, 5)


@dataclass
class Session:
    session_id: str
    expertise: int
    education: str
    stimuli: tuple[str, ...]
    judged: dict[str, str] = field(default_factory=dict)


class AnnotationStore:
    """Durable session/judgment state behind a single writer lock.

    Files next to the judgment store ``<store>``:
      - ``<store>``           one JSON line per acknowledged judgment
      - ``<store>.sessions``  one JSON line per created session
      - ``<store>.state``     RNG seed and session counter
    Appends are flushed and fsynced before a request is acknowledged, so
    acknowledged state survives restarts.
    """

    def __init__(self, store_path, seed: int = 0):
        self.store_path = Path(store_path)
        self.sessions_path = Path(str(store_path) + ".sessions")
        self.state_path = Path(str(store_path) + ".state")
        self.lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.records: list[JudgmentRecord] = []
        self.seed = seed
        self.counter = 0
        self._load()

    def _load(self) -> None:
        if self.state_path.exists():
            state = json.loads(self.state_path.read_text())
            self.seed = int(state["seed"])
            self.counter = int(state["counter"])
        if self.sessions_path.exists():
            for line in self.sessions_path.read_text().splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                sess = Session(
                    session_id=doc["session_id"],
                    expertise=int(doc["expertise"]),
                    education=doc.get("education", ""),
                    stimuli=tuple(doc["stimuli"]),
                )
                self.sessions[sess.session_id] = sess
        if self.store_path.exists():
            from .agreement import load_store

            self.records = load_store(self.store_path)
            for rec in self.records:
                sess = self.sessions.get(rec.session_id)
                if sess is not None:
                    sess.judged[rec.stimulus_id] = rec.label

    @staticmethod
    def _append(path: Path, doc: dict) -> None:
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def next_rng(self) -> random.Random:
        """Seeded per-session RNG; the counter advances durably."""
        rng = random.Random(self.seed * 1_000_003 + self.counter)
        self.counter += 1
        self.state_path.write_text(json.dumps({"seed": self.seed, "counter": self.counter}))
        return rng

    def add_session(self, session: Session) -> None:
        self.sessions[session.session_id] = session
        self._append(
            self.sessions_path,
            {
                "session_id": session.session_id,
                "expertise": session.expertise,
                "education": session.education,
                "stimuli": list(session.stimuli),
                "created_at": time.time(),
            },
        )

    def add_judgment(self, record: JudgmentRecord) -> None:
        self._append(
            self.store_path,
            {
                "session_id": record.session_id,
                "stimulus_id": record.stimulus_id,
                "label": record.label,
                "truth": record.truth,
                "expertise": record.expertise,
                "education": record.education,
                "submitted_at": record.submitted_at,
            },
        )
        self.records.append(record)
        self.sessions[record.session_id].judged[record.stimulus_id] = record.label


def _replay_payload(entry, fps_default: float = 25.0) -> tuple[list[dict], float]:
    """Trajectory samples and duration for one stimulus, truth-free."""
    trajectory = read_trajectory(entry.scanpath)
    if trajectory is not None and len(trajectory):
        samples = [
            {"x": float(x), "y": float(y), "t": float(t)}
            for (x, y), t in zip(trajectory.pos, trajectory.t)
        ]
        return samples, float(trajectory.t[-1])
    path = read_scanpath(entry.scanpath)
    samples = [{"x": f.x, "y": f.y, "t": f.t} for f in path.fixations]
    duration = path.fixations[-1].t + path.fixations[-1].d if path.fixations else 0.0
    return samples, float(duration)


def create_app(manifest_path, store_path, *, seed: int = 0, static_dir=None) -> FastAPI:
    manifest = load_manifest(manifest_path)
    by_id = manifest.by_id()
    human_pool = sorted(s.id for s in manifest.stimuli if s.truth == "human")
    synthetic_pool = sorted(s.id for s in manifest.stimuli if s.truth == "synthetic")
    store = AnnotationStore(store_path, seed=seed)

    app = FastAPI(title="gravscan annotation service")

    @app.post("/sessions")
    def create_session(payload: dict):
        expertise = payload.get("expertise")
        if not isinstance(expertise, int) or expertise not in EXPERTISE_LEVELS:
            raise HTTPException(status_code=400, detail="expertise must be an integer in 1..5")
        education = str(payload.get("education", ""))
        if len(human_pool) < PER_CLASS or len(synthetic_pool) < PER_CLASS:
            raise HTTPException(
                status_code=503,
                detail=f"stimulus pool needs >= {PER_CLASS} per class, "
                f"got {len(human_pool)} human / {len(synthetic_pool)} synthetic",
            )
        with store.lock:
            rng = store.next_rng()
            chosen = rng.sample(human_pool, PER_CLASS) + rng.sample(synthetic_pool, PER_CLASS)
            rng.shuffle(chosen)
            # the 10/10 split is a protocol invariant: verify before serving
            n_human = sum(1 for sid in chosen if by_id[sid].truth == "human")
            assert len(chosen) == SESSION_SIZE and n_human == PER_CLASS
            session = Session(
                session_id=uuid.uuid4().hex,
                expertise=expertise,
                education=education,
                stimuli=tuple(chosen),
            )
            store.add_session(session)
        stimuli = []
        for sid in session.stimuli:
            samples, duration = _replay_payload(by_id[sid])
            stimuli.append(
                {
                    "id": sid,
                    "image_url": f"/stimuli/{sid}/image",
                    "trajectory": samples,
                    "duration_s": duration,
                }
            )
        return {"session_id": session.session_id, "stimuli": stimuli}

    @app.post("/sessions/{session_id}/judgments")
    def submit_judgment(session_id: str, payload: dict):
        stimulus_id = payload.get("stimulus_id")
        label = payload.get("label")
        if label not in PROVENANCES:
            raise HTTPException(status_code=400, detail=f"label must be one of {PROVENANCES}")
        with store.lock:
            session = store.sessions.get(session_id)
            if session is None:
                raise HTTPException(status_code=404, detail="unknown session")
            if stimulus_id not in session.stimuli:
                raise HTTPException(status_code=404, detail="stimulus not part of this session")
            previous = session.judged.get(stimulus_id)
            if previous is not None:
                if previous == label:
                    return {"ok": True}
                raise HTTPException(status_code=409, detail="stimulus already judged with a different label")
            record = JudgmentRecord(
                session_id=session_id,
                stimulus_id=stimulus_id,
                label=label,
                truth=by_id[stimulus_id].truth,
                expertise=session.expertise,
                education=session.education,
                submitted_at=time.time(),
            )
            store.add_judgment(record)
        return {"ok": True}

    @app.get("/stats")
    def stats():
        with store.lock:
            records = list(store.records)
            sessions = list(store.sessions.values())
        try:
            report = crowd_report(records, session_size=SESSION_SIZE)
        except MetricUndefinedError:
            report = CrowdReport.empty()
        complete = sum(1 for s in sessions if len(s.judged) >= SESSION_SIZE)
        return {
            "report": report.as_dict(),
            "sessions_created": len(sessions),
            "complete_sessions": complete,
            "incomplete_sessions": len(sessions) - complete,
            "judgments": len(records),
        }

    @app.get("/stimuli/{stimulus_id}/image")
    def stimulus_image(stimulus_id: str):
        entry = by_id.get(stimulus_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown stimulus")
        frame = read_pgm(entry.image)
        gray = np.rint(frame.brightness * 255).astype(int)
        return {
            "w": frame.grid.width,
            "h": frame.grid.height,
            "gray": gray.ravel().tolist(),
        }

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app
