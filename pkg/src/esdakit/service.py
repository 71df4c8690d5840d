"""HTTP facade over the full pipeline with asynchronous training jobs.

One service process owns one analysis session: a dataset, at most one
running training job, and the derived artifacts (diagnostics, clusters,
narratives, report). Training runs on a worker thread so request handling
never blocks; every other endpoint computes on the request path. Read
endpoints are side-effect-free apart from lazily filling caches that are
fully determined by the session state, so replaying a saved state file
reconstructs every response.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .context import (
    ContextCorpus,
    FetchConfig,
    extract_keyphrases,
    fetch_region_documents,
    find_paragraphs,
)
from .dataset import load_geojson, queen_adjacency
from .diagnostics import compute_diagnostics
from .errors import EsdaError, JobError, NotFoundError, RangeError
from .narrative import (
    apply_identifier_edit,
    render_coefficient_narrative,
    render_correlation_narrative,
    render_diagnostic_narrative,
    render_feature_narrative,
)
from .patterns import detect_clusters
from .regression import (
    Convergence,
    ModelSpec,
    calibrate,
    gaussian_aicc,
    raw_scale_coefficients,
)
from .report import ReportItem, export_html, mutate_report, new_report
from .screening import (
    apply_transform,
    classify_bivariate,
    classify_quantile,
    pearson,
    profile_feature,
    vif,
)
from .state import (
    AnalyticalState,
    dataset_fingerprint,
    load_state,
    save_state,
    state_fingerprint,
)

JOB_STATUSES = ("queued", "running", "converged", "failed", "cancelled")

DIAGNOSTIC_KINDS = ("local_r2", "cooks_d", "std_residual")

# Plain-language pop-over text for each indicator shown by a client.
INDICATOR_EXPLANATIONS = {
    "r2": "Share of the response variance reproduced by the fitted values; "
    "1 is a perfect fit, 0 no better than the mean.",
    "adj_r2": "R-squared penalized for model complexity, so adding "
    "uninformative terms lowers it.",
    "aicc": "Complexity-corrected fit score; lower is better, and values "
    "are comparable across global and locally weighted models.",
    "bandwidth": "Kernel extent used for local fitting. Adaptive bandwidths "
    "count nearest neighbors; fixed bandwidths are distances in meters. "
    "Small bandwidths mean the relationship varies over short distances.",
    "enp": "Effective number of parameters consumed by a surface; close to "
    "1 means the surface behaves like a single global coefficient.",
    "local_r2": "Goodness of fit evaluated within each region's kernel "
    "neighborhood; low values mark places the model explains poorly.",
    "cooks_d": "Influence of one region on the whole fit; regions above "
    "the 4/n threshold are flagged as potential outliers.",
    "std_residual": "Residual scaled by its standard error; large positive "
    "values mean the model predicts above the observation.",
    "morans_i": "Spatial autocorrelation of the residuals; a significant "
    "positive value means errors cluster in space and structure remains.",
    "significance": "Per-region t-test of a local coefficient against zero "
    "with a multiple-testing correction shared across the surface.",
    "vif": "Variance inflation factor; values above 10 mean a predictor is "
    "nearly a linear combination of the others.",
}

_HTTP_STATUS = {
    "parse_error": 400,
    "empty_input": 400,
    "unsupported_geometry": 400,
    "geometry_error": 400,
    "range_error": 400,
    "invalid_spec": 400,
    "transform_domain": 400,
    "degenerate_distribution": 400,
    "undefined_correlation": 400,
    "degenerate_variable": 400,
    "not_found": 404,
    "job_error": 409,
    "integrity_error": 409,
    "version_error": 409,
    "export_error": 409,
}


def _safe(x):
    """JSON-safe copy: numpy scalars/arrays to builtins, non-finite floats
    to the same string tokens the state file uses."""
    if isinstance(x, dict):
        return {k: _safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_safe(v) for v in x.tolist()]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        x = float(x)
    if isinstance(x, float):
        if np.isnan(x):
            return "NaN"
        if np.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    return x


def _spec_from_json(tree: dict) -> ModelSpec:
    if not isinstance(tree, dict):
        raise RangeError("spec must be a JSON object")
    conv = tree.get("convergence", {})
    return ModelSpec(
        dependent=tree.get("dependent", ""),
        independents=tuple(tree.get("independents", ())),
        family=tree.get("family", "gwr"),
        kernel=tree.get("kernel", "bisquare"),
        bandwidth_mode=tree.get("bandwidth_mode", "adaptive"),
        search_range=(
            tuple(tree["search_range"]) if tree.get("search_range") else None
        ),
        convergence=Convergence(
            tolerance=float(conv.get("tolerance", 1e-5)),
            max_iterations=int(conv.get("max_iterations", 200)),
        ),
    )


def _spec_json(spec: ModelSpec) -> dict:
    return {
        "dependent": spec.dependent,
        "independents": list(spec.independents),
        "family": spec.family,
        "kernel": spec.kernel,
        "bandwidth_mode": spec.bandwidth_mode,
        "search_range": list(spec.search_range) if spec.search_range else None,
        "convergence": {
            "tolerance": spec.convergence.tolerance,
            "max_iterations": spec.convergence.max_iterations,
        },
    }


def _doc_json(doc) -> dict:
    return {
        "kind": doc.kind,
        "template_version": doc.template_version,
        "map_anchors": sorted(doc.map_anchors),
        "edits": [[pid, label] for pid, label in doc.edits],
        "paragraphs": [
            {
                "paragraph_id": p.paragraph_id,
                "template_id": p.template_id,
                "role": p.role,
                "text": p.text,
                "anchors": list(p.anchors),
                "identifier": p.identifier,
                "default_identifier": p.default_identifier,
                "parent_id": p.parent_id,
                "keyphrase_regions": list(p.keyphrase_regions),
                "data": _safe(dict(p.data)),
            }
            for p in doc.paragraphs
        ],
    }


@dataclass
class TrainingJob:
    """One asynchronous calibration request and its status timeline."""

    job_id: int
    spec: ModelSpec
    bandwidth: float | None = None
    status: str = "queued"
    progress: dict = field(default_factory=dict)
    error: dict | None = None
    result: str | None = None
    cancel_requested: bool = False
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.history.append(("queued", time.monotonic()))

    def transition(self, status: str) -> None:
        self.status = status
        self.history.append((status, time.monotonic()))

    def to_json(self) -> dict:
        return _safe(
            {
                "job_id": self.job_id,
                "spec": _spec_json(self.spec),
                "status": self.status,
                "progress": dict(self.progress),
                "error": self.error,
                "result": self.result,
                "history": [[s, t] for s, t in self.history],
            }
        )


class Session:
    """Mutable single-analysis session shared by the HTTP app and the CLI."""

    def __init__(self, fetch_config: FetchConfig | None = None):
        self.lock = threading.RLock()
        self.fetch_config = fetch_config or FetchConfig()
        self.raw: bytes | None = None
        self.table = None
        self.weights = None
        self.last_spec: ModelSpec | None = None
        self.model = None
        self.diagnostics = None
        self.diag_params: dict = {}
        self.cluster_sets: dict = {}
        self.docs: dict = {}
        self.edits: dict = {}
        self.report = None
        self.assets: dict[str, bytes] = {}
        self.corpus: ContextCorpus | None = None
        self.seeds: dict[str, int] = {}
        self.jobs: list[TrainingJob] = []
        self.threads: list[threading.Thread] = []

    # ------------------------------------------------------------ dataset

    def load_dataset(self, raw: bytes) -> dict:
        table = load_geojson(raw)
        weights = queen_adjacency(table)
        with self.lock:
            self.raw = raw
            self.table = table
            self.weights = weights
            self.model = None
            self.diagnostics = None
            self.diag_params = {}
            self.cluster_sets = {}
            self.docs = {}
            self.edits = {}
        return self.dataset_summary()

    def require_table(self):
        if self.table is None:
            raise NotFoundError("no dataset loaded")
        return self.table

    def require_model(self):
        if self.model is None:
            raise NotFoundError("no calibrated model in this session")
        return self.model

    def dataset_summary(self) -> dict:
        table = self.require_table()
        return _safe(
            {
                "fingerprint": dataset_fingerprint(self.raw),
                "n": table.n,
                "region_ids": list(table.region_ids),
                "columns": sorted(table.columns),
                "exclusions": table.exclusion_report(),
                "fitting_rows": int(len(table.fitting_rows())),
            }
        )

    def column(self, name: str) -> np.ndarray:
        table = self.require_table()
        if name not in table.columns:
            raise NotFoundError(f"no column {name!r}", column=name)
        return table.column(name)

    # --------------------------------------------------------------- jobs

    def submit_job(self, spec: ModelSpec, bandwidth: float | None = None) -> TrainingJob:
        table = self.require_table()
        spec.validate(table)  # invalid specs fail synchronously
        with self.lock:
            job = TrainingJob(len(self.jobs) + 1, spec, bandwidth)
            self.jobs.append(job)
            self.last_spec = spec
            self._pump()
        return job

    def job(self, job_id: int) -> TrainingJob:
        for job in self.jobs:
            if job.job_id == job_id:
                return job
        raise NotFoundError(f"no job {job_id}")

    def cancel_job(self, job_id: int) -> TrainingJob:
        with self.lock:
            job = self.job(job_id)
            if job.status == "queued":
                job.transition("cancelled")
            elif job.status == "running":
                job.cancel_requested = True
            else:
                raise JobError(f"job {job_id} already {job.status}")
        return job

    def _pump(self) -> None:
        # single worker: start the oldest queued job when nothing runs
        if any(j.status == "running" for j in self.jobs):
            return
        for job in self.jobs:
            if job.status == "queued":
                job.transition("running")
                thread = threading.Thread(target=self._run, args=(job,), daemon=True)
                self.threads.append(thread)
                thread.start()
                return

    def _run(self, job: TrainingJob) -> None:
        def on_progress(update: dict):
            with self.lock:
                job.progress = dict(update)
            return not job.cancel_requested

        try:
            model = calibrate(
                self.table, job.spec, bandwidth=job.bandwidth, progress=on_progress
            )
        except JobError:
            with self.lock:
                job.transition("cancelled")
                self._pump()
        except EsdaError as err:
            with self.lock:
                job.error = err.to_json()
                job.transition("failed")
                self._pump()
        except Exception as err:  # surface unexpected failures in the job
            with self.lock:
                job.error = {"type": "error", "message": str(err), "detail": {}}
                job.transition("failed")
                self._pump()
        else:
            with self.lock:
                if job.cancel_requested:
                    job.transition("cancelled")  # no partial model persisted
                else:
                    self.model = model
                    self.diagnostics = None
                    self.diag_params = {}
                    self.cluster_sets = {}
                    self.docs = {}
                    self.edits = {}
                    job.result = "model"
                    job.transition("converged")
                self._pump()

    def wait_for_jobs(self, timeout: float = 300.0) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self.lock:
                if not any(j.status in ("queued", "running") for j in self.jobs):
                    return
            time.sleep(0.01)
        raise JobError("timed out waiting for jobs to resolve")

    # -------------------------------------------------------- derived data

    def get_diagnostics(self, **params):
        explicit = {k: v for k, v in params.items() if v is not None}
        with self.lock:
            if self.diagnostics is not None:
                merged = dict(self.diag_params)
                merged.update(explicit)
                if merged == self.diag_params:
                    return self.diagnostics
        defaults = {
            "xi": 0.05,
            "permutations": 999,
            "seed": 0,
            "convention": "predicted-observed",
        }
        defaults.update(explicit)
        with self.lock:
            model = self.require_model()
            diag = compute_diagnostics(
                model,
                self.table,
                self.weights,
                xi=defaults["xi"],
                permutations=defaults["permutations"],
                seed=defaults["seed"],
                convention=defaults["convention"],
            )
            self.diagnostics = diag
            self.diag_params = defaults
            self.seeds["diagnostics"] = defaults["seed"]
            self.cluster_sets = {}
            self.docs = {k: v for k, v in self.docs.items() if not _derived(k)}
            return diag

    def get_clusters(self, surface: str, resolution=None, min_size=None, seed=None):
        with self.lock:
            explicit = (resolution, min_size, seed)
            if surface in self.cluster_sets and explicit == (None, None, None):
                return self.cluster_sets[surface]
            model = self.require_model()
            diag = self.get_diagnostics()
            if surface not in model.surfaces:
                raise NotFoundError(f"no surface {surface!r}")
            col = model.surfaces.index(surface)
            kwargs = {}
            if resolution is not None:
                kwargs["resolution"] = float(resolution)
            if min_size is not None:
                kwargs["min_size"] = int(min_size)
            kwargs["seed"] = int(seed) if seed is not None else 0
            clusters = detect_clusters(
                surface,
                model,
                diag.significance.mask[:, col],
                self.weights,
                self.table,
                **kwargs,
            )
            self.cluster_sets[surface] = clusters
            self.seeds["patterns"] = kwargs["seed"]
            self.docs.pop(f"coef:{surface}", None)
            return clusters

    def get_doc(self, key: str):
        with self.lock:
            if key in self.docs:
                return self.docs[key]
            doc = self._render_doc(key)
            for pid, label in self.edits.get(key, ()):
                doc = apply_identifier_edit(doc, pid, label)
            self.docs[key] = doc
            return doc

    def _render_doc(self, key: str):
        table = self.require_table()
        if key.startswith("feature:"):
            name = key.split(":", 1)[1]
            return render_feature_narrative(name, profile_feature(self.column(name)))
        if key.startswith("correlation:"):
            names = key.split(":", 1)[1].split(",")
            for name in names:
                self.column(name)
            results = [
                pearson(table.column(a), table.column(b), x_name=a, y_name=b)
                for a, b in itertools.combinations(names, 2)
            ]
            vif_result = None
            if len(names) >= 2:
                stack = np.column_stack([table.column(n) for n in names])
                vif_result = vif(stack, names=tuple(names))
            return render_correlation_narrative(results, vif=vif_result)
        if key.startswith("diag:"):
            kind = key.split(":", 1)[1]
            if kind not in DIAGNOSTIC_KINDS:
                raise NotFoundError(f"no diagnostic narrative kind {kind!r}")
            return render_diagnostic_narrative(
                kind, self.get_diagnostics(), self.require_model(), table
            )
        if key.startswith("coef:"):
            surface = key.split(":", 1)[1]
            model = self.require_model()
            if surface not in model.surfaces:
                raise NotFoundError(f"no surface {surface!r}")
            clusters = self.get_clusters(surface)
            col = model.surfaces.index(surface)
            mask = self.get_diagnostics().significance.mask[:, col]
            return render_coefficient_narrative(surface, clusters, mask, model, table)
        raise NotFoundError(f"no narrative document {key!r}")

    def edit_identifier(self, key: str, paragraph_id: str, label):
        with self.lock:
            doc = self.get_doc(key)
            doc = apply_identifier_edit(doc, paragraph_id, label)
            self.docs[key] = doc
            history = [e for e in self.edits.get(key, []) if e[0] != paragraph_id]
            history.append((paragraph_id, label))
            self.edits[key] = history
            return doc

    # --------------------------------------------------------------- state

    def snapshot(self) -> AnalyticalState:
        with self.lock:
            if self.raw is None:
                raise NotFoundError("no dataset loaded")
            corpus_keys = ()
            if self.corpus is not None:
                corpus_keys = tuple(
                    sorted((r.title, str(r.revision)) for r in self.corpus.regions)
                )
            return AnalyticalState(
                dataset_fingerprint=dataset_fingerprint(self.raw),
                dataset_geojson=self.raw.decode("utf-8"),
                spec=self.model.spec if self.model is not None else self.last_spec,
                model=self.model,
                diagnostics=self.diagnostics,
                cluster_sets=tuple(
                    self.cluster_sets[k] for k in sorted(self.cluster_sets)
                ),
                narrative_edits=tuple(
                    (k, tuple(v)) for k, v in sorted(self.edits.items()) if v
                ),
                report=self.report,
                report_assets=tuple(
                    (aid, hashlib.sha256(blob).hexdigest())
                    for aid, blob in sorted(self.assets.items())
                ),
                corpus_cache_keys=corpus_keys,
                seeds=tuple(sorted(self.seeds.items())),
            )

    def restore(self, blob: bytes) -> dict:
        state = load_state(blob)
        if state.dataset_geojson is None:
            if self.raw is None:
                raise NotFoundError(
                    "state has no embedded dataset and none is loaded"
                )
            state = load_state(blob, dataset=self.raw)
            raw = self.raw
        else:
            raw = state.dataset_geojson.encode("utf-8")
        table = load_geojson(raw)
        weights = queen_adjacency(table)
        with self.lock:
            self.raw = raw
            self.table = table
            self.weights = weights
            self.last_spec = state.spec
            self.model = state.model
            self.diagnostics = state.diagnostics
            self.diag_params = {}
            self.cluster_sets = {cs.surface: cs for cs in state.cluster_sets}
            self.docs = {}
            self.edits = {k: list(v) for k, v in state.narrative_edits}
            self.report = state.report
            self.seeds = {name: v for name, v in state.seeds}
            if state.diagnostics is not None:
                self.diag_params = {
                    "xi": state.diagnostics.significance.xi,
                    "permutations": state.diagnostics.morans_i_residuals.permutations,
                    "seed": state.diagnostics.morans_i_residuals.seed,
                    "convention": state.diagnostics.std_residuals.convention,
                }
            # reconnect stored asset bytes that still match the registry
            wanted = dict(state.report_assets)
            self.assets = {
                aid: blob
                for aid, blob in self.assets.items()
                if aid in wanted
                and hashlib.sha256(blob).hexdigest() == wanted[aid]
            }
        return {
            "fingerprint": state.dataset_fingerprint,
            "state_fingerprint": state_fingerprint(state),
            "has_model": state.model is not None,
            "cluster_surfaces": sorted(self.cluster_sets),
            "missing_assets": sorted(set(wanted) - set(self.assets)),
        }


def _derived(doc_key: str) -> bool:
    """Docs invalidated by a diagnostics refresh (model-derived)."""
    return doc_key.startswith(("diag:", "coef:"))


def create_app(
    session: Session | None = None, fetch_config: FetchConfig | None = None
) -> FastAPI:
    app = FastAPI(title="esdakit service", docs_url=None, redoc_url=None)
    sess = session or Session(fetch_config=fetch_config)
    if fetch_config is not None:
        sess.fetch_config = fetch_config
    app.state.session = sess

    async def esda_error(request: Request, exc: EsdaError):
        status = _HTTP_STATUS.get(exc.code, 422)
        return JSONResponse(status_code=status, content=_safe(exc.to_json()))

    app.add_exception_handler(EsdaError, esda_error)

    # ------------------------------------------------------------ dataset

    @app.post("/dataset")
    async def upload_dataset(request: Request):
        raw = await request.body()
        return sess.load_dataset(raw)

    @app.get("/dataset/summary")
    async def dataset_summary():
        return sess.dataset_summary()

    @app.get("/dataset/geojson")
    async def dataset_geojson():
        sess.require_table()
        return Response(content=sess.raw, media_type="application/geo+json")

    # ----------------------------------------------------------- screening

    @app.get("/features")
    async def features():
        table = sess.require_table()
        return {"columns": sorted(table.columns), "n": table.n}

    @app.get("/features/{name}/profile")
    async def feature_profile(name: str, bins: int = 20):
        prof = profile_feature(sess.column(name), bins=bins)
        return _safe(
            {
                "name": name,
                "bin_edges": prof.bin_edges,
                "counts": prof.counts,
                "skewness": prof.skewness,
                "ks_statistic": prof.ks_statistic,
                "ks_p": prof.ks_p,
                "suggested_transforms": list(prof.suggested_transforms),
                "n_values": prof.n_values,
                "mean": prof.mean,
                "std": prof.std,
                "minimum": prof.minimum,
                "maximum": prof.maximum,
            }
        )

    @app.post("/transforms")
    async def transform(request: Request):
        body = await request.json()
        name = body.get("column", "")
        values = apply_transform(
            sess.column(name), body.get("kind", ""), region_ids=sess.table.region_ids
        )
        return _safe({"column": name, "kind": body.get("kind"), "values": values})

    @app.post("/correlations")
    async def correlations(request: Request):
        body = await request.json()
        names = list(body.get("names", ()))
        threshold = float(body.get("threshold", 0.7))
        table = sess.require_table()
        for name in names:
            sess.column(name)
        out = []
        for a, b in itertools.combinations(names, 2):
            r = pearson(
                table.column(a), table.column(b), x_name=a, y_name=b,
                threshold=threshold,
            )
            out.append(
                {
                    "x_name": r.x_name,
                    "y_name": r.y_name,
                    "r": r.r,
                    "p": r.p,
                    "flagged_strong": r.flagged_strong,
                    "threshold": r.threshold,
                }
            )
        return _safe({"results": out})

    @app.post("/vif")
    async def vif_endpoint(request: Request):
        body = await request.json()
        names = list(body.get("names", ()))
        for name in names:
            sess.column(name)
        stack = np.column_stack([sess.table.column(n) for n in names])
        result = vif(stack, names=tuple(names))
        return _safe(
            {
                "names": list(result.names),
                "values": result.values,
                "severe": result.severe,
                "collinear": result.collinear,
            }
        )

    @app.post("/classify")
    async def classify(request: Request):
        body = await request.json()
        k = int(body.get("k", 5))
        if "dependent" in body and "independent" in body:
            dep = sess.column(body["dependent"])
            ind = sess.column(body["independent"])
            bi = classify_bivariate(dep, ind, k=k)
            return _safe(
                {
                    "mode": "bivariate",
                    "rows": bi.rows,
                    "cols": bi.cols,
                    "zones": bi.zones,
                    "k": bi.k,
                    "dep_boundaries": bi.dep_boundaries,
                    "ind_boundaries": bi.ind_boundaries,
                    "region_ids": list(sess.table.region_ids),
                }
            )
        q = classify_quantile(sess.column(body.get("column", "")), k=k)
        return _safe(
            {
                "mode": "quantile",
                "classes": q.classes,
                "boundaries": q.boundaries,
                "k_requested": q.k_requested,
                "k_effective": q.k_effective,
                "reduced": q.reduced,
                "region_ids": list(sess.table.region_ids),
            }
        )

    # ---------------------------------------------------------------- jobs

    @app.post("/spec/validate")
    async def validate_spec(request: Request):
        body = await request.json()
        spec = _spec_from_json(body)
        spec.validate(sess.require_table())
        return {"valid": True, "surfaces": list(spec.surface_names())}

    @app.post("/jobs")
    async def create_job(request: Request):
        body = await request.json()
        spec = _spec_from_json(body.get("spec", body))
        bandwidth = body.get("bandwidth")
        job = sess.submit_job(spec, None if bandwidth is None else float(bandwidth))
        return job.to_json()

    @app.get("/jobs")
    async def list_jobs():
        return {"jobs": [j.to_json() for j in sess.jobs]}

    @app.get("/jobs/{job_id}")
    async def poll_job(job_id: int):
        return sess.job(job_id).to_json()

    @app.post("/jobs/{job_id}/cancel")
    async def cancel_job(job_id: int):
        return sess.cancel_job(job_id).to_json()

    # --------------------------------------------------------------- model

    @app.get("/model")
    async def model_summary():
        model = sess.require_model()
        n = len(model.row_index)
        if isinstance(model.bandwidths, tuple):
            bandwidths = list(model.bandwidths)
        elif model.bandwidths is None:
            bandwidths = None
        else:
            bandwidths = model.bandwidths
        return _safe(
            {
                "family": model.spec.family,
                "spec": _spec_json(model.spec),
                "surfaces": list(model.surfaces),
                "bandwidths": bandwidths,
                "n": n,
                "aicc": gaussian_aicc(n, model.rss, model.hat_trace),
                "rss": model.rss,
                "sigma2": model.sigma2,
                "hat_trace": model.hat_trace,
                "enp_per_surface": list(model.enp_per_surface),
                "converged": model.converged,
                "iterations": model.iterations,
                "search": [
                    {
                        "bandwidth": s.bandwidth,
                        "score": s.score,
                        "boundary": s.boundary,
                        "evaluations": s.evaluations,
                    }
                    for s in model.search
                ],
            }
        )

    @app.get("/surfaces")
    async def surfaces():
        model = sess.require_model()
        return {"surfaces": list(model.surfaces)}

    @app.get("/surfaces/{name}")
    async def surface(name: str):
        model = sess.require_model()
        if name not in model.surfaces:
            raise NotFoundError(f"no surface {name!r}")
        col = model.surfaces.index(name)
        se = model.local_se[:, col]
        std = model.coefficients[:, col]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, std / se, np.inf * np.sign(std))
        ids = [sess.table.region_ids[i] for i in model.row_index]
        return _safe(
            {
                "surface": name,
                "region_ids": ids,
                "values": raw_scale_coefficients(model, name),
                "standardized": std,
                "se": se,
                "t": t,
            }
        )

    # ---------------------------------------------------------- diagnostics

    @app.get("/diagnostics")
    async def diagnostics(
        xi: float | None = None,
        permutations: int | None = None,
        seed: int | None = None,
        convention: str | None = None,
    ):
        diag = sess.get_diagnostics(
            xi=xi, permutations=permutations, seed=seed, convention=convention
        )
        model = sess.model
        ids = [sess.table.region_ids[i] for i in model.row_index]
        return _safe(
            {
                "region_ids": ids,
                "aicc": diag.aicc,
                "r2": diag.r2,
                "adj_r2": diag.adj_r2,
                "local_r2": {
                    "values": diag.local_r2.values,
                    "clamped": diag.local_r2.clamped,
                    "clamp_flags": diag.local_r2.clamp_flags,
                    "undefined_flags": diag.local_r2.undefined_flags,
                    "bandwidth_used": diag.local_r2.bandwidth_used,
                },
                "cooks_d": {
                    "values": diag.cooks_d.values,
                    "mask": diag.cooks_d.mask,
                    "threshold": diag.cooks_d.threshold,
                    "infinite_flags": diag.cooks_d.infinite_flags,
                },
                "std_residuals": {
                    "values": diag.std_residuals.values,
                    "labels": list(diag.std_residuals.labels),
                    "convention": diag.std_residuals.convention,
                },
                "morans_i_residuals": {
                    "statistic": diag.morans_i_residuals.statistic,
                    "pseudo_p": diag.morans_i_residuals.pseudo_p,
                    "permutations": diag.morans_i_residuals.permutations,
                    "seed": diag.morans_i_residuals.seed,
                },
                "significance": {
                    "surfaces": list(model.surfaces),
                    "mask": diag.significance.mask,
                    "t_values": diag.significance.t_values,
                    "adjusted_alpha": list(diag.significance.adjusted_alpha),
                    "critical_t": list(diag.significance.critical_t),
                    "se_zero_flags": diag.significance.se_zero_flags,
                    "xi": diag.significance.xi,
                },
            }
        )

    @app.get("/explanations")
    async def explanations():
        return dict(INDICATOR_EXPLANATIONS)

    @app.get("/explanations/{indicator}")
    async def explanation(indicator: str):
        if indicator not in INDICATOR_EXPLANATIONS:
            raise NotFoundError(f"no explanation for {indicator!r}")
        return {"indicator": indicator, "text": INDICATOR_EXPLANATIONS[indicator]}

    # -------------------------------------------------------------- clusters

    @app.get("/clusters/{surface_name}")
    async def clusters(
        surface_name: str,
        resolution: float | None = None,
        min_size: int | None = None,
        seed: int | None = None,
    ):
        cs = sess.get_clusters(surface_name, resolution, min_size, seed)

        def one(c):
            return {
                "cluster_id": c.cluster_id,
                "sign": c.sign,
                "region_ids": list(c.region_ids),
                "size": c.size,
                "mean_coefficient": c.mean_coefficient,
                "centroid": list(c.centroid),
                "extent": list(c.extent),
                "location_identifier": c.location_identifier,
            }

        return _safe(
            {
                "surface": cs.surface,
                "positive_clusters": [one(c) for c in cs.positive_clusters],
                "negative_clusters": [one(c) for c in cs.negative_clusters],
                "isolated": list(cs.isolated),
                "zero_flagged": list(cs.zero_flagged),
            }
        )

    # ------------------------------------------------------------ narratives

    @app.get("/narratives/feature/{name}")
    async def narrative_feature(name: str):
        return _doc_json(sess.get_doc(f"feature:{name}"))

    @app.get("/narratives/correlation")
    async def narrative_correlation(names: str):
        return _doc_json(sess.get_doc(f"correlation:{names}"))

    @app.get("/narratives/diagnostic/{kind}")
    async def narrative_diagnostic(kind: str):
        return _doc_json(sess.get_doc(f"diag:{kind}"))

    @app.get("/narratives/coefficient/{surface_name}")
    async def narrative_coefficient(surface_name: str):
        return _doc_json(sess.get_doc(f"coef:{surface_name}"))

    @app.post("/narratives/edits")
    async def narrative_edit(request: Request):
        body = await request.json()
        doc = sess.edit_identifier(
            body.get("doc", ""), body.get("paragraph_id", ""), body.get("label")
        )
        return _doc_json(doc)

    # --------------------------------------------------------------- context

    @app.post("/context/fetch")
    async def context_fetch(request: Request):
        body = await request.json()
        pages = dict(body.get("pages", {}))
        resolution = body.get("resolution", "county")
        corpus = fetch_region_documents(pages, resolution, config=sess.fetch_config)
        with sess.lock:
            sess.corpus = corpus
        return {
            "resolution": corpus.resolution,
            "regions": [
                {
                    "region_id": r.region_id,
                    "title": r.title,
                    "revision": str(r.revision),
                    "sections": len(r.sections),
                }
                for r in corpus.regions
            ],
            "warnings": list(corpus.warnings),
        }

    @app.get("/keyphrases")
    async def keyphrases(n: int = 20, regions: str | None = None):
        if sess.corpus is None:
            raise NotFoundError("no context corpus fetched")
        docs = sess.corpus.regions
        if regions:
            docs = sess.corpus.slice(regions.split(","))
        ranked = extract_keyphrases(docs, n=n)
        return _safe(
            {
                "n": ranked.n,
                "entries": [
                    {
                        "phrase": e.phrase,
                        "score": e.score,
                        "topic": e.topic,
                        "region_ids": list(e.region_ids),
                    }
                    for e in ranked.entries
                ],
            }
        )

    @app.get("/paragraphs")
    async def paragraphs(phrase: str, regions: str | None = None):
        if sess.corpus is None:
            raise NotFoundError("no context corpus fetched")
        docs = sess.corpus.regions
        if regions:
            docs = sess.corpus.slice(regions.split(","))
        matches = find_paragraphs(docs, phrase)
        return {
            "phrase": phrase,
            "matches": [
                {
                    "region_id": m.region_id,
                    "topic": m.topic,
                    "paragraph": m.paragraph,
                    "offsets": list(m.offsets),
                }
                for m in matches
            ],
        }

    # ---------------------------------------------------------------- report

    def report_json(rep):
        return {
            "title": rep.title,
            "created_at": rep.created_at,
            "modified_at": rep.modified_at,
            "template_version": rep.template_version,
            "items": [
                {
                    "kind": i.kind,
                    "content": i.content,
                    "palette": i.palette,
                    "source_module": i.source_module,
                    "state_hash": i.state_hash,
                }
                for i in rep.items
            ],
        }

    @app.post("/report")
    async def create_report(request: Request):
        body = await request.json()
        with sess.lock:
            sess.report = new_report(
                body.get("title", "Untitled analysis"),
                template_version=body.get("template_version", "1"),
                timestamp=body.get("timestamp"),
            )
        return report_json(sess.report)

    @app.get("/report")
    async def get_report():
        if sess.report is None:
            raise NotFoundError("no report in this session")
        return report_json(sess.report)

    @app.post("/report/mutate")
    async def report_mutate(request: Request):
        body = await request.json()
        if sess.report is None:
            raise NotFoundError("no report in this session")
        payload = dict(body.get("payload", {}))
        if "item" in payload and isinstance(payload["item"], dict):
            payload["item"] = ReportItem(
                kind=payload["item"].get("kind", ""),
                content=payload["item"].get("content", ""),
                palette=payload["item"].get("palette"),
                source_module=payload["item"].get("source_module", ""),
                state_hash=payload["item"].get("state_hash", ""),
            )
        with sess.lock:
            sess.report, noop = mutate_report(
                sess.report,
                body.get("action", ""),
                payload,
                timestamp=body.get("timestamp"),
            )
        out = report_json(sess.report)
        out["noop"] = noop
        return out

    @app.post("/report/assets")
    async def upload_asset(request: Request):
        body = await request.json()
        asset_id = body.get("asset_id", "")
        if not asset_id:
            raise RangeError("asset_id is required")
        try:
            blob = base64.b64decode(body.get("data_base64", ""), validate=True)
        except Exception as err:
            raise RangeError(f"invalid base64 payload: {err}") from err
        with sess.lock:
            sess.assets[asset_id] = blob
        return {"asset_id": asset_id, "sha256": hashlib.sha256(blob).hexdigest()}

    @app.get("/report/export")
    async def report_export():
        if sess.report is None:
            raise NotFoundError("no report in this session")
        html = export_html(sess.report, assets=dict(sess.assets))
        return Response(content=html, media_type="text/html; charset=utf-8")

    # ----------------------------------------------------------------- state

    @app.get("/state/save")
    async def state_save():
        state = sess.snapshot()
        blob = save_state(state)
        return Response(
            content=blob,
            media_type="application/json",
            headers={
                "Content-Disposition": "attachment; filename=analysis-state.json",
                "X-State-Fingerprint": hashlib.sha256(blob).hexdigest(),
            },
        )

    @app.post("/state/load")
    async def state_load(request: Request):
        blob = await request.body()
        return sess.restore(blob)

    return app
