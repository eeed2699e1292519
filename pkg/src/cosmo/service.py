"""HTTP facade over the pipeline: log upload, constraint discovery, training
and simulation as background jobs, report retrieval.

All ids are content-addressed (hash of inputs plus configuration), so
repeating an identical request reuses the existing artifact or job instead of
recomputing. The service holds no logic of its own beyond plumbing; every
operation is the same call the command-line interface makes.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .artifacts import build_dfg, export_dot
from .condnet import (
    ConditionedNet,
    NetConfig,
    TrainConfig,
    Vocabulary,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .condnet.training import fit_normalizers
from .declare import (
    ConstraintUniverse,
    ConstraintVector,
    augment,
    check_consistency,
    fulfillment_vector,
    instantiate_universe,
)
from .errors import ConsistencyError, CosmoError, DataError, FingerprintMismatchError
from .eventlog import EventLog, SplitSpec, parse_jsonl, split
from .simulator import (
    ConditionEdit,
    SeedEvent,
    SimulationConfig,
    build_phi_s,
    simulate,
)

TERMINAL = ("done", "failed")
_TRANSITIONS = {"queued": {"running"}, "running": {"done", "failed"}}


def content_id(payload) -> str:
    if isinstance(payload, bytes):
        body = payload
    else:
        body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(body).hexdigest()[:16]


@dataclass
class JobRecord:
    job_id: str
    kind: str  # train | simulate | discover
    status: str = "queued"
    progress: float = 0.0
    result: Optional[str] = None
    error: Optional[str] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def transition(self, status: str, *, progress: Optional[float] = None,
                   result: Optional[str] = None, error: Optional[str] = None):
        with self._lock:
            if status != self.status:
                if status not in _TRANSITIONS.get(self.status, set()):
                    raise RuntimeError(
                        f"job {self.job_id}: illegal transition "
                        f"{self.status} -> {status}"
                    )
                self.status = status
            if progress is not None:
                self.progress = progress
            if result is not None:
                if self.status != "done":
                    raise RuntimeError("result reference requires status done")
                self.result = result
            if error is not None:
                self.error = error

    def to_json(self) -> dict:
        return {"job_id": self.job_id, "kind": self.kind, "status": self.status,
                "progress": round(self.progress, 4), "result": self.result,
                "error": self.error}


class NotFound(Exception):
    pass


class Workspace:
    """Append-only artifact store on local disk."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("logs", "universes", "checkpoints", "reports"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    def path(self, kind: str, item_id: str, suffix: str) -> Path:
        if not item_id.replace("-", "").isalnum():
            raise NotFound(f"invalid {kind} id {item_id!r}")
        return self.root / kind / f"{item_id}{suffix}"

    def put(self, kind: str, item_id: str, suffix: str, body: bytes) -> Path:
        target = self.path(kind, item_id, suffix)
        if not target.exists():  # content-addressed: identical body, skip write
            tmp = target.with_suffix(target.suffix + ".tmp")
            tmp.write_bytes(body)
            tmp.rename(target)
        return target

    def get(self, kind: str, item_id: str, suffix: str) -> Path:
        target = self.path(kind, item_id, suffix)
        if not target.exists():
            raise NotFound(f"unknown {kind} id {item_id!r}")
        return target


class DiscoverRequest(BaseModel):
    log_id: str
    groups: list[str] = ["E", "C", "PR", "NR"]
    min_support: float = 0.1


class TrainRequest(BaseModel):
    log_id: str
    universe_id: str
    config: dict = {}


class SimulateRequest(BaseModel):
    checkpoint_id: str
    universe_id: str
    edits: list  # [coordinate, target] pairs
    base_log_id: Optional[str] = None
    base_case: Optional[str] = None
    base: Optional[list[int]] = None
    n_traces: int = 300
    max_len: int = 50
    sampling: str = "multinomial"
    temperature: float = 1.0
    seed: int = 0
    seed_activities: list[str] = []


class ConsistencyRequest(BaseModel):
    universe_id: str
    vector: list[int]


class CosmoService:
    def __init__(self, workspace: str | Path, workers: int = 2):
        self.store = Workspace(workspace)
        self.jobs: dict[str, JobRecord] = {}
        self.jobs_lock = threading.Lock()
        self.pool = ThreadPoolExecutor(max_workers=workers)

    # ---- artifact loading -------------------------------------------------
    def load_log(self, log_id: str) -> EventLog:
        return parse_jsonl(self.store.get("logs", log_id, ".jsonl"))

    def load_universe(self, universe_id: str) -> ConstraintUniverse:
        path = self.store.get("universes", universe_id, ".json")
        return ConstraintUniverse.from_json(json.loads(path.read_text()))

    def load_net(self, checkpoint_id: str,
                 expected_fingerprint: Optional[str] = None) -> ConditionedNet:
        path = self.store.get("checkpoints", checkpoint_id, ".ck")
        return load_checkpoint(path, expected_fingerprint)

    # ---- jobs -------------------------------------------------------------
    def submit(self, job_id: str, kind: str, fn) -> JobRecord:
        with self.jobs_lock:
            existing = self.jobs.get(job_id)
            if existing is not None:  # identical request: dedupe
                return existing
            record = JobRecord(job_id, kind)
            self.jobs[job_id] = record

        def run():
            record.transition("running")
            try:
                result = fn(record)
            except Exception as exc:  # failure detail surfaces via GET /jobs
                record.transition("failed", error=f"{type(exc).__name__}: {exc}")
            else:
                record.transition("done", progress=1.0, result=result)

        self.pool.submit(run)
        return record

    # ---- operations -------------------------------------------------------
    def ingest_log(self, body: bytes) -> dict:
        log_id = content_id(body)
        path = self.store.put("logs", log_id, ".jsonl", body)
        try:
            log = parse_jsonl(path)
        except CosmoError:
            path.unlink(missing_ok=True)
            raise
        return {"log_id": log_id, "n_traces": len(log),
                "activities": list(log.activity_set)}

    def log_summary(self, log_id: str) -> dict:
        log = self.load_log(log_id)
        lengths = sorted(len(t) for t in log.traces)
        return {
            "log_id": log_id,
            "n_traces": len(log),
            "n_events": sum(lengths),
            "activities": list(log.activity_set),
            "length_min": lengths[0],
            "length_max": lengths[-1],
            "length_mean": round(sum(lengths) / len(lengths), 3),
        }

    def discover(self, req: DiscoverRequest) -> dict:
        log = self.load_log(req.log_id)
        universe = instantiate_universe(log, req.groups, req.min_support)
        body = json.dumps(universe.to_json(), sort_keys=True,
                          separators=(",", ":")).encode()
        self.store.put("universes", universe.fingerprint, ".json", body)
        return {"universe_id": universe.fingerprint, "size": len(universe)}

    def start_train(self, req: TrainRequest) -> JobRecord:
        log = self.load_log(req.log_id)
        universe = self.load_universe(req.universe_id)
        cfg = dict(req.config)
        job_id = content_id({"kind": "train", "log": req.log_id,
                             "universe": req.universe_id, "config": cfg})
        seed = int(cfg.get("seed", 0))
        val_ratio = float(cfg.get("val_ratio", 0.2))
        epochs = int(cfg.get("epochs", 20))
        net_config = NetConfig(
            embed_dim=int(cfg.get("embed_dim", 32)),
            hidden_dim=int(cfg.get("hidden_dim", 128)),
            n_layers=int(cfg.get("n_layers", 1)),
        )
        train_config = TrainConfig(
            learning_rate=float(cfg.get("learning_rate", 1e-3)),
            batch_size=int(cfg.get("batch_size", 32)),
            epochs=epochs, seed=seed,
            lam_time=float(cfg.get("lam_time", 1.0)),
            patience=cfg.get("patience"),
        )

        def run(record: JobRecord) -> str:
            if val_ratio > 0:
                train_log, val_log = split(log, SplitSpec(ratio=1 - val_ratio,
                                                          seed=seed))
                aug_val = augment(val_log, universe)
            else:
                train_log, aug_val = log, None
            aug_train = augment(train_log, universe)
            exec_norm, rem_norm = fit_normalizers(aug_train)
            net = ConditionedNet(net_config, Vocabulary(log.activity_set),
                                 len(universe), universe.fingerprint,
                                 exec_norm, rem_norm, seed=seed)

            def progress(epoch, _row):
                record.transition("running", progress=(epoch + 1) / epochs)

            train(net, aug_train, train_config, aug_val, progress=progress)
            path = self.store.path("checkpoints", job_id, ".ck")
            save_checkpoint(net, path)
            return f"/checkpoints/{job_id}"

        return self.submit(job_id, "train", run)

    def _resolve_base(self, req: SimulateRequest,
                      universe: ConstraintUniverse):
        if req.base is not None:
            base = ConstraintVector(universe, tuple(int(b) for b in req.base))
            seeds = tuple(SeedEvent(a) for a in req.seed_activities)
            if not seeds:
                raise DataError("seed_activities required with an explicit base")
            return base, seeds
        if req.base_log_id is None:
            raise DataError("provide either base (bit vector) or base_log_id")
        base_log = self.load_log(req.base_log_id)
        if req.base_case is None:
            trace = base_log.traces[0]
        else:
            matches = [t for t in base_log.traces if t.case_id == req.base_case]
            if not matches:
                raise DataError(f"case {req.base_case!r} not in log "
                                f"{req.base_log_id}")
            trace = matches[0]
        base = fulfillment_vector(universe, trace)
        if req.seed_activities:
            seeds = tuple(SeedEvent(a) for a in req.seed_activities)
        else:
            seeds = tuple(SeedEvent(t.events[0].activity)
                          for t in base_log.traces)
        return base, seeds

    def start_simulate(self, req: SimulateRequest) -> JobRecord:
        universe = self.load_universe(req.universe_id)
        # 409 on fingerprint mismatch and 400 on inconsistent edits must
        # surface before a job is queued
        net = self.load_net(req.checkpoint_id, universe.fingerprint)
        base, seeds = self._resolve_base(req, universe)
        edits = tuple(ConditionEdit(int(c), int(t)) for c, t in req.edits)
        config = SimulationConfig(
            n_traces=req.n_traces, max_len=req.max_len, sampling=req.sampling,
            temperature=req.temperature, seed=req.seed, edits=edits,
            seed_events=seeds,
        )
        build_phi_s(base, edits)
        job_id = content_id({"kind": "simulate",
                             "checkpoint": req.checkpoint_id,
                             "universe": req.universe_id,
                             "base": list(base.bits),
                             "config": config.to_json()})

        def run(record: JobRecord) -> str:
            report = simulate(net, base, config)
            self.store.put("reports", job_id, ".json", report.to_json_bytes())
            return f"/reports/{job_id}"

        return self.submit(job_id, "simulate", run)

    def get_report(self, report_id: str) -> dict:
        path = self.store.get("reports", report_id, ".json")
        return json.loads(path.read_text())

    def report_dfg(self, report_id: str, threshold: float) -> str:
        report = self.get_report(report_id)
        dfg = build_dfg([t["activities"] for t in report["traces"]])
        return export_dot(dfg, threshold)

    def consistency(self, req: ConsistencyRequest) -> dict:
        universe = self.load_universe(req.universe_id)
        vector = ConstraintVector(universe, tuple(int(b) for b in req.vector))
        violations = check_consistency(vector)
        return {"violations": [str(v) for v in violations],
                "consistent": not violations}


def create_app(workspace: str | Path, workers: int = 2) -> FastAPI:
    service = CosmoService(workspace, workers)
    app = FastAPI(title="cosmo", version="1.0")
    app.state.service = service

    @app.exception_handler(NotFound)
    async def _not_found(_req, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(FingerprintMismatchError)
    async def _mismatch(_req, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ConsistencyError)
    async def _inconsistent(_req, exc: ConsistencyError):
        return JSONResponse(status_code=400, content={
            "detail": "edit set produces a contradictory constraint vector",
            "violations": [str(v) for v in exc.violations],
        })

    @app.exception_handler(CosmoError)
    async def _cosmo(_req, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/logs")
    async def upload_log(request: Request):
        body = await request.body()
        if not body:
            return JSONResponse(status_code=400,
                                content={"detail": "empty request body"})
        return service.ingest_log(body)

    @app.get("/logs/{log_id}/summary")
    async def log_summary(log_id: str):
        return service.log_summary(log_id)

    @app.get("/logs/{log_id}/vector")
    async def log_vector(log_id: str, universe_id: str,
                         case: Optional[str] = None):
        log = service.load_log(log_id)
        universe = service.load_universe(universe_id)
        if case is None:
            trace = log.traces[0]
        else:
            matches = [t for t in log.traces if t.case_id == case]
            if not matches:
                raise NotFound(f"case {case!r} not in log {log_id}")
            trace = matches[0]
        vec = fulfillment_vector(universe, trace)
        return {"case_id": trace.case_id, "universe_id": universe.fingerprint,
                "bits": list(vec.bits)}

    @app.post("/discover")
    async def discover(req: DiscoverRequest):
        return service.discover(req)

    @app.get("/universes/{universe_id}")
    async def get_universe(universe_id: str):
        universe = service.load_universe(universe_id)
        return {"universe_id": universe.fingerprint,
                "size": len(universe),
                "instances": universe.to_json()}

    @app.post("/train")
    async def start_train(req: TrainRequest):
        return service.start_train(req).to_json()

    @app.post("/simulate")
    async def start_simulate(req: SimulateRequest):
        return service.start_simulate(req).to_json()

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        record = service.jobs.get(job_id)
        if record is None:
            raise NotFound(f"unknown job id {job_id!r}")
        return record.to_json()

    @app.get("/reports/{report_id}")
    async def get_report(report_id: str):
        return service.get_report(report_id)

    @app.get("/reports/{report_id}/dfg")
    async def report_dfg(report_id: str, threshold: float = 0.0):
        return PlainTextResponse(service.report_dfg(report_id, threshold),
                                 media_type="text/vnd.graphviz")

    @app.post("/consistency")
    async def consistency(req: ConsistencyRequest):
        return service.consistency(req)

    return app
