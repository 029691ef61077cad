"""HTTP backend bridging the frozen models and the exploration UI.

Artifacts (dataset file pairs, checkpoints) are addressed by file name inside
a workspace directory. Session state persists as one JSON document per
session in the state directory; uploaded fields are stored next to it as
binary blobs. GA runs execute on a background thread and publish one
immutable snapshot per finished generation, which the poll endpoint reads
without blocking the run.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .autoencoder import load_ae
from .checkpoint import file_sha256
from .data import FieldGrid, ParamSpace, load_dataset
from .errors import ConfigError, DomainError, FlowSurrogateError, UsageError
from .explorer import (
    Candidate,
    FitnessWeights,
    GAConfig,
    GenerationRecord,
    PreferenceEntry,
    candidate_seed,
    cluster_and_recommend,
    lineage_to_doc,
    make_preference,
    optimize,
    project2d,
)
from .flow import load_flow
from .surrogate import (
    denormalize,
    normalize,
    predict_and_quantify,
    predict_latent_stats,
    reverse_predict,
)

PREFERENCE_UQ_SAMPLES = 8
DEFAULT_PREDICT_SAMPLES = 20


class NotFoundError(FlowSurrogateError):
    pass


class ConflictError(FlowSurrogateError):
    pass


# --- payload builders (shared with tests for byte-equality checks) ----------

def central_slices(field: FieldGrid) -> dict:
    vol = field.as_3d()
    d, h, w = field.dims
    planes = {
        "z": vol[d // 2, :, :],
        "y": vol[:, h // 2, :],
        "x": vol[:, :, w // 2],
    }
    return {
        axis: {"dims": list(plane.shape), "values": [float(v) for v in plane.ravel()]}
        for axis, plane in planes.items()
    }


def predict_payload(flow, ae, space: ParamSpace, raw_params, n: int, seed: int) -> dict:
    raw = np.asarray(raw_params, dtype=np.float64).ravel()
    params = normalize(space, raw)
    result = predict_and_quantify(flow, ae, params, n, seed)
    return {
        "params_raw": [float(v) for v in raw],
        "params_normalized": [float(v) for v in params],
        "n": n,
        "seed": seed,
        "mean_slices": central_slices(result.mean_field),
        "var_slices": central_slices(result.var_field),
        "latent_mean": [float(v) for v in result.mean_latent],
        "latent_var": [float(v) for v in result.var_latent],
        "mean_uncertainty": float(result.var_field.values.mean()),
        "latent_uncertainty": float(result.var_latent.mean()),
        "value_range": [float(v) for v in ae.value_range],
    }


def reverse_payload(flow, ae, space: ParamSpace, field: FieldGrid) -> dict:
    params = reverse_predict(flow, ae, field)
    return {
        "params_normalized": [float(v) for v in params],
        "params_raw": [float(v) for v in denormalize(space, params)],
    }


def recommend_payload(flow, space: ParamSpace, final_gen, k: int, seed: int) -> dict:
    recommendations, labels = cluster_and_recommend(final_gen, k, flow, seed=seed)
    latents = np.array([c.latent_mean for c in final_gen.candidates])
    projected = project2d(latents)
    return {
        "k": k,
        "recommendations": [
            {
                "params_normalized": [float(v) for v in rec["params_normalized"]],
                "params_raw": [float(v) for v in denormalize(space, rec["params_normalized"])],
                "cluster_size": rec["cluster_size"],
                "member_ids": rec["member_ids"],
            }
            for rec in recommendations
        ],
        "projection": [
            {
                "candidate_id": final_gen.candidates[i].id,
                "x": float(projected[i, 0]),
                "y": float(projected[i, 1]),
                "cluster": int(labels[i]),
            }
            for i in range(len(final_gen.candidates))
        ],
    }


# --- session state -----------------------------------------------------------

@dataclass
class GARun:
    run_id: str
    config: GAConfig
    weights: FitnessWeights
    status: str = "running"            # running | done | failed
    generations: list = dc_field(default_factory=list)  # generation docs
    records: list = dc_field(default_factory=list)      # live GenerationRecords
    error: str | None = None
    thread: threading.Thread | None = dc_field(default=None, repr=False)

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "config": {
                "population": self.config.population,
                "generations": self.config.generations,
                "mutation_rate": self.config.mutation_rate,
                "mutation_sigma": self.config.mutation_sigma,
                "k_nearest": self.config.k_nearest,
                "elite_count": self.config.elite_count,
                "uq_samples": self.config.uq_samples,
                "seed": self.config.seed,
            },
            "weights": [self.weights.w1, self.weights.w2, self.weights.w3],
            "generations_done": len(self.generations),
            "error": self.error,
        }


@dataclass
class Session:
    id: str
    dataset_id: str
    ae_id: str
    flow_id: str
    seed: int
    space: ParamSpace
    dims: tuple
    value_range: tuple
    ae: object
    flow: object
    preferences: list[PreferenceEntry] = dc_field(default_factory=list)
    runs: dict = dc_field(default_factory=dict)   # run_id -> GARun
    run_counter: int = 0
    upload_counter: int = 0
    lock: threading.Lock = dc_field(default_factory=threading.Lock, repr=False)

    def preference_table(self) -> list[dict]:
        return [
            {
                "index": i,
                "params_raw": [float(v) for v in p.raw_params],
                "params_normalized": [float(v) for v in p.params],
                "score": p.score,
            }
            for i, p in enumerate(self.preferences)
        ]

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "dataset": self.dataset_id,
            "ae": self.ae_id,
            "flow": self.flow_id,
            "seed": self.seed,
            "param_space": self.space.to_json(),
            "dims": list(self.dims),
            "preferences": [
                {
                    "params_raw": [float(v) for v in p.raw_params],
                    "params_normalized": [float(v) for v in p.params],
                    "score": p.score,
                    "latent_mean": [float(v) for v in p.latent_mean],
                }
                for p in self.preferences
            ],
            "runs": [
                {**run.to_doc(), "generations": run.generations}
                for run in self.runs.values()
            ],
            "run_counter": self.run_counter,
            "upload_counter": self.upload_counter,
        }


class ExplorationService:
    """Owns artifact loading, session state, persistence and GA threads."""

    def __init__(self, workspace: Path, state_dir: Path):
        self.workspace = Path(workspace)
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self.registry_lock = threading.Lock()
        self._load_persisted_sessions()

    # -- artifact handling --

    def _artifact(self, name: str) -> Path:
        path = self.workspace / name
        if not path.exists():
            raise NotFoundError(f"artifact not found: {name}")
        return path

    def create_session(self, dataset_id: str, ae_id: str, flow_id: str, seed: int = 0) -> Session:
        dataset = load_dataset(self._artifact(dataset_id))
        ae_path = self._artifact(ae_id)
        ae = load_ae(ae_path)
        flow = load_flow(self._artifact(flow_id))
        if flow.ae_ref is not None:
            sha = file_sha256(ae_path)
            if flow.ae_ref.get("sha256") != sha:
                raise ConflictError(
                    f"flow checkpoint was trained against {flow.ae_ref.get('name')} "
                    f"(sha {flow.ae_ref.get('sha256', '')[:12]}...), not {ae_id}")
        if ae.dims != dataset.dims:
            raise ConflictError("autoencoder dims do not match the dataset")
        session = Session(
            id=uuid.uuid4().hex[:12],
            dataset_id=dataset_id, ae_id=ae_id, flow_id=flow_id, seed=seed,
            space=dataset.space, dims=dataset.dims, value_range=dataset.value_range,
            ae=ae, flow=flow,
        )
        with self.registry_lock:
            self.sessions[session.id] = session
        self._persist(session)
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"session not found: {session_id}")
        return session

    # -- persistence --

    def _session_path(self, session_id: str) -> Path:
        return self.state_dir / f"session_{session_id}.json"

    def _persist(self, session: Session) -> None:
        path = self._session_path(session.id)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(session.to_doc(), sort_keys=True))
        tmp.replace(path)

    def _load_persisted_sessions(self) -> None:
        for path in sorted(self.state_dir.glob("session_*.json")):
            doc = json.loads(path.read_text())
            try:
                ae = load_ae(self.workspace / doc["ae"])
                flow = load_flow(self.workspace / doc["flow"])
            except (ConfigError, FileNotFoundError):
                continue  # artifacts gone; skip the stale session
            session = Session(
                id=doc["id"], dataset_id=doc["dataset"], ae_id=doc["ae"],
                flow_id=doc["flow"], seed=int(doc["seed"]),
                space=ParamSpace.from_json(doc["param_space"]),
                dims=tuple(doc["dims"]),
                value_range=tuple(ae.value_range),
                ae=ae, flow=flow,
                run_counter=int(doc.get("run_counter", 0)),
                upload_counter=int(doc.get("upload_counter", 0)),
            )
            for p in doc["preferences"]:
                session.preferences.append(PreferenceEntry(
                    params=np.array(p["params_normalized"]),
                    score=float(p["score"]),
                    latent_mean=np.array(p["latent_mean"]),
                    raw_params=np.array(p["params_raw"]),
                ))
            for run_doc in doc.get("runs", []):
                cfg = GAConfig(**run_doc["config"])
                weights = FitnessWeights(*run_doc["weights"])
                run = GARun(run_id=run_doc["run_id"], config=cfg, weights=weights,
                            status=run_doc["status"], generations=run_doc["generations"],
                            error=run_doc.get("error"))
                if run.status == "running":
                    run.status = "failed"
                    run.error = "interrupted by service restart"
                session.runs[run.run_id] = run
            self.sessions[session.id] = session

    # -- operations --

    def add_preference(self, session: Session, raw_params, score: float) -> list[dict]:
        if not -1.0 <= score <= 1.0:
            raise DomainError(f"preference score {score} outside [-1, 1]")
        raw = np.asarray(raw_params, dtype=np.float64).ravel()
        with session.lock:
            for p in session.preferences:
                if np.array_equal(p.raw_params, raw) and p.score == score:
                    return session.preference_table()  # idempotent
            entry = make_preference(session.flow, session.space, raw, score,
                                    seed=session.seed, uq_samples=PREFERENCE_UQ_SAMPLES)
            session.preferences.append(entry)
            table = session.preference_table()
        self._persist(session)
        return table

    def delete_preference(self, session: Session, index: int) -> list[dict]:
        with session.lock:
            if not 0 <= index < len(session.preferences):
                raise NotFoundError(f"preference index {index} out of range")
            session.preferences.pop(index)
            table = session.preference_table()
        self._persist(session)
        return table

    def start_ga(self, session: Session, config: GAConfig, weights: FitnessWeights) -> GARun:
        with session.lock:
            if any(run.status == "running" for run in session.runs.values()):
                raise ConflictError("a GA run is already active for this session")
            if not session.preferences:
                raise UsageError("cannot start optimization with zero preferences")
            run = GARun(run_id=f"run-{session.run_counter}", config=config, weights=weights)
            session.run_counter += 1
            session.runs[run.run_id] = run
            prefs = list(session.preferences)

        def worker():
            try:
                def publish(record):
                    doc = lineage_to_doc([record], session.space)["generations"][0]
                    with session.lock:
                        run.records.append(record)
                        run.generations.append(doc)
                    self._persist(session)

                optimize(config, prefs, weights, session.flow, on_generation=publish)
                with session.lock:
                    run.status = "done"
            except Exception as exc:  # published as failed, never silent
                with session.lock:
                    run.status = "failed"
                    run.error = str(exc)
            self._persist(session)

        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        run.thread = thread
        return run

    def get_run(self, session: Session, run_id: str) -> GARun:
        run = session.runs.get(run_id)
        if run is None:
            raise NotFoundError(f"run not found: {run_id}")
        return run

    def promote(self, session: Session, run_id: str, candidate_id: int, score: float) -> list[dict]:
        if not -1.0 <= score <= 1.0:
            raise DomainError(f"preference score {score} outside [-1, 1]")
        run = self.get_run(session, run_id)
        with session.lock:
            found = self._find_candidate_doc(run, candidate_id)
            raw = np.array(found["raw_params"])
            params = np.array(found["params"])
            latent = self._candidate_latent(session, run, candidate_id)
            for p in session.preferences:
                if np.array_equal(p.raw_params, raw) and p.score == score:
                    return session.preference_table()
            session.preferences.append(PreferenceEntry(
                params=params, score=float(score), latent_mean=latent, raw_params=raw))
            table = session.preference_table()
        self._persist(session)
        return table

    @staticmethod
    def _find_candidate_doc(run: GARun, candidate_id: int) -> dict:
        for gen_doc in run.generations:
            for cand in gen_doc["candidates"]:
                if cand["id"] == candidate_id:
                    return cand
        raise NotFoundError(f"candidate {candidate_id} not in run {run.run_id}")

    def _candidate_latent(self, session: Session, run: GARun, candidate_id: int) -> np.ndarray:
        for record in run.records:
            for cand in record.candidates:
                if cand.id == candidate_id:
                    return np.asarray(cand.latent_mean)
        # restored run: the stats are exactly recomputable from the stored
        # lineage. Elites copied their evaluation, so walk the self-parent
        # chain to the candidate that was actually evaluated and replay its
        # per-candidate seed.
        doc = self._find_candidate_doc(run, candidate_id)
        while doc["elite"]:
            doc = self._find_candidate_doc(run, doc["parent_ids"][0])
        mean, _ = predict_latent_stats(
            session.flow, np.array(doc["params"]), run.config.uq_samples,
            seed=candidate_seed(run.config.seed, doc["id"]))
        return mean

    def recommend(self, session: Session, run_id: str, k: int) -> dict:
        run = self.get_run(session, run_id)
        with session.lock:
            if run.status != "done":
                raise ConflictError(f"run {run_id} is {run.status}, not done")
            if run.records:
                final = run.records[-1]
            else:
                final = self._rebuild_final_generation(session, run)
        return recommend_payload(session.flow, session.space, final, k, seed=session.seed)

    def _rebuild_final_generation(self, session: Session, run: GARun) -> GenerationRecord:
        gen_doc = run.generations[-1]
        candidates = []
        for cand_doc in gen_doc["candidates"]:
            cand = Candidate(id=cand_doc["id"], params=np.array(cand_doc["params"]),
                             parent_ids=list(cand_doc["parent_ids"]),
                             elite=bool(cand_doc["elite"]))
            cand.sim, cand.div, cand.unc = cand_doc["sim"], cand_doc["div"], cand_doc["unc"]
            cand.fitness = cand_doc["fitness"]
            cand.latent_mean = self._candidate_latent(session, run, cand.id)
            candidates.append(cand)
        return GenerationRecord(
            index=gen_doc["index"], candidates=candidates,
            weights=FitnessWeights(*gen_doc["weights"]),
            mean_fitness=gen_doc["mean_fitness"], max_fitness=gen_doc["max_fitness"])

    def reverse(self, session: Session, payload: bytes) -> dict:
        d, h, w = session.dims
        expected = d * h * w * 4
        if len(payload) != expected:
            raise DomainError(
                f"field payload has {len(payload)} bytes, expected {expected} "
                f"({d}x{h}x{w} little-endian float32)")
        values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        field = FieldGrid(session.dims, values, session.value_range)
        with session.lock:
            name = f"upload_{session.id}_{session.upload_counter}.bin"
            session.upload_counter += 1
        (self.state_dir / name).write_bytes(payload)
        self._persist(session)
        return reverse_payload(session.flow, session.ae, session.space, field)


# --- HTTP layer ---------------------------------------------------------------

def error_response(status: int, code: str, message: str, detail=None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message, "detail": detail})


def create_app(workspace, state_dir) -> FastAPI:
    service = ExplorationService(Path(workspace), Path(state_dir))
    app = FastAPI(title="flowsurrogate exploration service")
    app.state.service = service

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return error_response(404, "not_found", str(exc))

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError):
        return error_response(409, "conflict", str(exc))

    @app.exception_handler(FlowSurrogateError)
    async def _validation(request: Request, exc: FlowSurrogateError):
        return error_response(422, "validation", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _request_validation(request: Request, exc: RequestValidationError):
        return error_response(422, "validation", "invalid request body",
                              detail=exc.errors())

    @app.post("/sessions")
    def create_session(body: dict):
        for key in ("dataset", "ae", "flow"):
            if key not in body:
                raise DomainError(f"missing required field {key!r}")
        session = service.create_session(
            body["dataset"], body["ae"], body["flow"], seed=int(body.get("seed", 0)))
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = service.get(session_id)
        with session.lock:
            doc = session.to_doc()
        doc["runs"] = [
            {k: v for k, v in run.items() if k != "generations"}
            for run in doc["runs"]
        ]
        return doc

    @app.post("/sessions/{session_id}/predict")
    def predict(session_id: str, body: dict):
        session = service.get(session_id)
        if "params" not in body:
            raise DomainError("missing required field 'params'")
        n = int(body.get("n", DEFAULT_PREDICT_SAMPLES))
        seed = int(body.get("seed", session.seed))
        return predict_payload(session.flow, session.ae, session.space,
                               body["params"], n, seed)

    @app.post("/sessions/{session_id}/preferences")
    def add_preference(session_id: str, body: dict):
        session = service.get(session_id)
        for key in ("params", "score"):
            if key not in body:
                raise DomainError(f"missing required field {key!r}")
        table = service.add_preference(session, body["params"], float(body["score"]))
        return {"preferences": table}

    @app.delete("/sessions/{session_id}/preferences/{index}")
    def delete_preference(session_id: str, index: int):
        session = service.get(session_id)
        return {"preferences": service.delete_preference(session, index)}

    @app.post("/sessions/{session_id}/ga")
    def start_ga(session_id: str, body: dict):
        session = service.get(session_id)
        weights_doc = body.get("weights")
        if weights_doc is None:
            raise DomainError("missing required field 'weights'")
        weights = FitnessWeights(float(weights_doc["w1"]), float(weights_doc["w2"]),
                                 float(weights_doc["w3"]))
        cfg_doc = dict(body.get("config", {}))
        cfg_doc.setdefault("seed", session.seed)
        try:
            config = GAConfig(**cfg_doc)
        except TypeError as exc:
            raise DomainError(f"invalid GA config: {exc}") from exc
        run = service.start_ga(session, config, weights)
        return {"run_id": run.run_id, "status": run.status}

    @app.get("/sessions/{session_id}/ga/{run_id}")
    def poll_ga(session_id: str, run_id: str):
        session = service.get(session_id)
        run = service.get_run(session, run_id)
        with session.lock:
            doc = run.to_doc()
            doc["generations"] = list(run.generations)
        return doc

    @app.post("/sessions/{session_id}/ga/{run_id}/promote")
    def promote(session_id: str, run_id: str, body: dict):
        session = service.get(session_id)
        for key in ("candidate_id", "score"):
            if key not in body:
                raise DomainError(f"missing required field {key!r}")
        table = service.promote(session, run_id, int(body["candidate_id"]),
                                float(body["score"]))
        return {"preferences": table}

    @app.post("/sessions/{session_id}/recommend")
    def recommend(session_id: str, body: dict):
        session = service.get(session_id)
        for key in ("run_id", "k"):
            if key not in body:
                raise DomainError(f"missing required field {key!r}")
        return service.recommend(session, body["run_id"], int(body["k"]))

    @app.post("/sessions/{session_id}/reverse")
    async def reverse(session_id: str, request: Request):
        session = service.get(session_id)
        payload = await request.body()
        return service.reverse(session, payload)

    return app
