"""HTTP session service for human-in-the-loop labeling.

Each session runs one active-learning loop on a background worker. The only
externally driven mutation is label submission: the worker blocks in
awaiting_labels until every pending group has a label, then advances the
round. Sessions checkpoint to disk before blocking so a restarted service
restores the identical pending batch.
"""

from __future__ import annotations

import base64
import dataclasses
import io as _io
import json
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from . import dataset as ds
from .al_loop import ALConfig, ALSession, RoundEntry, RunRecord
from .classifier import TrainConfig
from .dataset import Pools, SampleGroup

STATES = ("training", "selecting", "awaiting_labels", "finished", "failed")


def _colormap_lut() -> np.ndarray:
    """Fixed 256-entry perceptual ramp (dark blue -> orange -> light yellow)."""
    t = np.linspace(0.0, 1.0, 256)
    r = np.clip(1.5 * t, 0, 1)
    g = np.clip(1.5 * t - 0.35, 0, 1)
    b = np.clip(0.8 - 1.2 * t, 0, 1) + np.clip(2.5 * t - 1.9, 0, 0.6)
    return (np.stack([r, g, b], axis=1) * 255).astype(np.uint8)


_LUT = _colormap_lut()


def render_png(depth: np.ndarray) -> bytes:
    """Per-image min/max normalization to 8 bit, colormapped PNG."""
    lo, hi = float(depth.min()), float(depth.max())
    scale = (hi - lo) or 1.0
    idx = np.clip((depth - lo) / scale * 255.0, 0, 255).astype(np.uint8)
    rgb = _LUT[idx]
    buf = _io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _b64png(depth: np.ndarray) -> str:
    return base64.b64encode(render_png(depth)).decode("ascii")


def clone_pools(pools: Pools) -> Pools:
    """Fresh pools sharing the immutable images but not the label state."""
    out = Pools(pools.class_names, pools.norm_range)
    for gid, g in {**pools.unlabeled, **pools.labeled}.items():
        clone = SampleGroup(id=g.id, observed=g.observed, variants=list(g.variants))
        hidden = pools._hidden_labels.get(gid, g.label if g.label is not None else -1)
        out.add_unlabeled(clone, hidden_label=hidden)
    return out


def parse_config(payload: dict) -> ALConfig:
    train_payload = payload.get("train", {})
    try:
        cfg = ALConfig(
            strategy=payload.get("strategy", "duis"),
            rounds=int(payload.get("rounds", 6)),
            n_batch=int(payload.get("n_batch", 10)),
            n_cand=int(payload.get("n_cand", 30)),
            initial_labeled=int(payload.get("initial_labeled", payload.get("n_batch", 10))),
            seed=int(payload.get("seed", 0)),
            train=TrainConfig(
                learning_rate=float(train_payload.get("learning_rate", 0.1)),
                momentum=float(train_payload.get("momentum", 0.9)),
                batch_size=int(train_payload.get("batch_size", 64)),
                epochs=int(train_payload.get("epochs", 60)),
                seed=int(train_payload.get("seed", 0))),
            oracle_mode=payload.get("oracle_mode", "human"))
    except (ValueError, TypeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return cfg


class Session:
    """Single-writer session state machine with a background worker."""

    def __init__(self, sid: str, cfg: ALConfig, pools: Pools,
                 test_groups: list[SampleGroup], checkpoint_path: Path,
                 label_timeout_s: float | None = None):
        self.id = sid
        self.cfg = cfg
        self.label_timeout_s = label_timeout_s
        self.checkpoint_path = checkpoint_path
        self.al = ALSession(cfg, pools, test_groups)
        self.state = "selecting"
        self.error: str | None = None
        self.pending: list[str] = []
        self.submitted: dict[str, int] = {}
        self.label_history: list[list[tuple[str, int]]] = []
        self._lock = threading.Lock()
        self._labels_done = threading.Event()
        self._advanced_for_round: int | None = None
        self._thread: threading.Thread | None = None

    # -- worker ------------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._work, daemon=True)
        self._thread.start()

    def _work(self):
        try:
            while not self.al.finished:
                with self._lock:
                    if not self.pending:  # fresh round: select
                        self.state = "selecting"
                if not self.pending:
                    self.al.ensure_model()  # no-op except after a restore
                    batch = self.al.next_batch()
                    with self._lock:
                        self.pending = batch
                        self.submitted = {}
                        self._labels_done.clear()
                        self._advanced_for_round = None
                        self.state = "awaiting_labels"
                    self.checkpoint()
                if self.cfg.oracle_mode == "simulated":
                    labels = {gid: self.al.pools.hidden_label(gid) for gid in self.pending}
                    with self._lock:
                        self.submitted = labels
                        self._labels_done.set()
                if not self._labels_done.wait(timeout=self.label_timeout_s):
                    raise TimeoutError("labeling timed out")
                with self._lock:
                    self.state = "training"
                    ids = list(self.pending)
                    labels = [self.submitted[g] for g in ids]
                self.al.apply_labels(ids, labels)
                self.al.train_and_evaluate(ids)
                self.al.round += 1
                with self._lock:
                    self.label_history.append(list(zip(ids, labels)))
                    self.pending = []
                    self.submitted = {}
                self.checkpoint()
            with self._lock:
                self.state = "finished"
            self.checkpoint()
        except Exception as exc:  # surface the failure in the snapshot
            with self._lock:
                self.state = "failed"
                self.error = f"{type(exc).__name__}: {exc}"
            self.checkpoint()

    # -- API surface ---------------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "id": self.id,
                "state": self.state,
                "error": self.error,
                "round": self.al.round,
                "rounds_total": self.cfg.rounds,
                "strategy": self.cfg.strategy,
                "labeled_count": len(self.al.pools.labeled),
                "pending_count": len(self.pending),
                "class_names": self.al.pools.class_names,
                "metrics": [
                    {"round": e.round, "labeled_count": e.labeled_count,
                     "accuracy": e.accuracy, "precision": e.precision,
                     "recall": e.recall, "f1": e.f1}
                    for e in self.al.record.entries],
            }

    def queries(self) -> list[dict]:
        with self._lock:
            if self.state != "awaiting_labels":
                raise HTTPException(status_code=409, detail="session is not awaiting labels")
            pending = [g for g in self.pending if g not in self.submitted]
        items = []
        for gid in pending:
            group = self.al.pools.unlabeled[gid]
            items.append({
                "group_id": gid,
                "classes": self.al.pools.class_names,
                "observed_png": _b64png(group.observed.depth_m),
                "variant_pngs": [_b64png(v.depth_m) for v in group.variants],
            })
        return items

    def submit(self, labels: dict[str, int]) -> dict:
        with self._lock:
            if self.state != "awaiting_labels":
                raise HTTPException(status_code=409, detail="session is not awaiting labels")
            for gid, lab in labels.items():
                if gid not in self.pending:
                    raise HTTPException(status_code=422, detail=f"unknown group {gid!r}")
                if not isinstance(lab, int) or not 0 <= lab < self.al.pools.class_count:
                    raise HTTPException(status_code=422, detail=f"invalid class {lab!r}")
            self.submitted.update(labels)  # idempotent; last value wins
            remaining = [g for g in self.pending if g not in self.submitted]
            if not remaining and self._advanced_for_round != self.al.round:
                self._advanced_for_round = self.al.round
                self._labels_done.set()
            return {"accepted": len(labels), "remaining": len(remaining)}

    # -- persistence -----------------------------------------------------------

    def checkpoint(self):
        with self._lock:
            data = {
                "id": self.id,
                "config": self.cfg.to_dict(),
                "state": self.state,
                "error": self.error,
                "round": self.al.round,
                "pending": list(self.pending),
                "submitted": dict(self.submitted),
                "label_history": [[list(p) for p in round_labels]
                                  for round_labels in self.label_history],
                "entries": [dataclasses.asdict(e) for e in self.al.record.entries],
            }
        self.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.checkpoint_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=2))
        tmp.replace(self.checkpoint_path)

    @classmethod
    def restore(cls, path: Path, pools: Pools, test_groups: list[SampleGroup],
                label_timeout_s: float | None = None) -> "Session":
        data = json.loads(path.read_text())
        cfg_d = dict(data["config"])
        train_d = cfg_d.pop("train")
        cfg = ALConfig(train=TrainConfig(**train_d), **cfg_d)
        sess = cls(data["id"], cfg, pools, test_groups, path,
                   label_timeout_s=label_timeout_s)
        for round_labels in data["label_history"]:
            ids = [gid for gid, _ in round_labels]
            labels = [lab for _, lab in round_labels]
            sess.al.apply_labels(ids, labels)
            sess.label_history.append([(g, int(l)) for g, l in round_labels])
        sess.al.record.entries = [
            RoundEntry(**e) for e in data["entries"]]
        sess.al.round = data["round"]
        sess.state = data["state"]
        sess.error = data.get("error")
        sess.pending = list(data["pending"])
        sess.submitted = {k: int(v) for k, v in data["submitted"].items()}
        return sess

    def resume(self):
        """Continue a restored session: re-enter the worker loop."""
        if self.state in ("finished", "failed"):
            return
        self._labels_done.clear()
        if self.pending and set(self.pending) == set(self.submitted):
            self._labels_done.set()
        self.start()


class SessionManager:
    def __init__(self, data_dir: str | Path, label_timeout_s: float | None = None):
        self.data_dir = Path(data_dir)
        self.label_timeout_s = label_timeout_s
        self.pools_template, self.test_groups, self.meta = ds.load_dataset(self.data_dir)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    @property
    def class_names(self) -> list[str]:
        return self.pools_template.class_names

    def create(self, payload: dict) -> Session:
        cfg = parse_config(payload)
        sid = uuid.uuid4().hex[:12]
        pools = clone_pools(self.pools_template)
        try:
            sess = Session(sid, cfg, pools, self.test_groups,
                           self.data_dir / "sessions" / f"{sid}.json",
                           label_timeout_s=self.label_timeout_s)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with self._lock:
            self.sessions[sid] = sess
        sess.start()
        return sess

    def restore_all(self) -> list[str]:
        """Restore every checkpointed session found in the dataset directory."""
        restored = []
        for path in sorted((self.data_dir / "sessions").glob("*.json")):
            sid = path.stem
            if sid in self.sessions:
                continue
            sess = Session.restore(path, clone_pools(self.pools_template),
                                   self.test_groups, label_timeout_s=self.label_timeout_s)
            with self._lock:
                self.sessions[sid] = sess
            sess.resume()
            restored.append(sid)
        return restored

    def get(self, sid: str) -> Session:
        sess = self.sessions.get(sid)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid!r}")
        return sess


def create_app(data_dir: str | Path, static_dir: str | Path | None = None,
               label_timeout_s: float | None = None,
               restore: bool = True) -> FastAPI:
    app = FastAPI(title="spadal labeling service")
    manager = SessionManager(data_dir, label_timeout_s=label_timeout_s)
    if restore and (Path(data_dir) / "sessions").is_dir():
        manager.restore_all()
    app.state.manager = manager

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/classes")
    def classes():
        return {"class_names": manager.class_names}

    @app.post("/api/sessions", status_code=201)
    def create_session(payload: dict):
        sess = manager.create(payload)
        return {"id": sess.id}

    @app.get("/api/sessions/{sid}")
    def get_state(sid: str):
        return manager.get(sid).snapshot()

    @app.get("/api/sessions/{sid}/queries")
    def get_queries(sid: str):
        return {"items": manager.get(sid).queries()}

    @app.post("/api/sessions/{sid}/labels")
    def submit_labels(sid: str, payload: dict):
        labels = payload.get("labels", payload)
        if not isinstance(labels, dict):
            raise HTTPException(status_code=422, detail="labels must be an object")
        return manager.get(sid).submit(labels)

    @app.get("/api/sessions/{sid}/metrics.csv", response_class=PlainTextResponse)
    def metrics_csv(sid: str):
        return manager.get(sid).al.record.to_csv()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
