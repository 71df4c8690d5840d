"""Versioned save/load of the complete analytical state.

The save format is canonical JSON: object keys sorted, floats written with
17 significant digits (bit round-trip), non-finite values written as the
string tokens "NaN" / "Infinity" / "-Infinity" and decoded back only in
numeric fields. Identical states therefore produce identical bytes, and a
save -> load -> save cycle is byte-stable.

Validation is fail-closed on both ends: save refuses to emit a state with
dangling cross-references, and load validates schema version, dataset
fingerprint, and every reference before returning.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .diagnostics import (
    CooksD,
    DiagnosticsReport,
    LocalR2,
    MoranResult,
    Significance,
    StdResiduals,
)
from .errors import IntegrityError, ParseError, VersionError
from .narrative import NarrativeDoc
from .patterns import Cluster, ClusterSet
from .regression import BandwidthSearch, CalibratedModel, Convergence, ModelSpec
from .report import Report, ReportItem

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AnalyticalState:
    """Everything needed to resume an analysis without retraining."""

    dataset_fingerprint: str
    schema_version: int = SCHEMA_VERSION
    dataset_geojson: str | None = None  # embedded raw document (optional)
    spec: ModelSpec | None = None
    model: CalibratedModel | None = None
    diagnostics: DiagnosticsReport | None = None
    cluster_sets: tuple[ClusterSet, ...] = ()
    narrative_edits: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()
    report: Report | None = None
    report_assets: tuple[tuple[str, str], ...] = ()  # (asset id, sha256)
    corpus_cache_keys: tuple[tuple[str, str], ...] = ()  # (title, revision)
    seeds: tuple[tuple[str, int], ...] = ()


def dataset_fingerprint(raw: bytes | str) -> str:
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------- canonical JSON


def _float_token(v: float) -> str:
    if math.isnan(v):
        return '"NaN"'
    if math.isinf(v):
        return '"Infinity"' if v > 0 else '"-Infinity"'
    return f"{v:.17g}"


def _ser(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float_token(obj))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _ser(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            if not isinstance(key, str):
                raise IntegrityError(f"non-string key {key!r} in state tree")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _ser(obj[key], out)
        out.append("}")
    else:
        raise IntegrityError(
            f"unserializable value of type {type(obj).__name__} in state tree"
        )


def _canonical(tree: dict) -> bytes:
    out: list[str] = []
    _ser(tree, out)
    return "".join(out).encode("ascii")


def _num(v) -> float:
    if isinstance(v, str):
        if v == "NaN":
            return float("nan")
        if v == "Infinity":
            return float("inf")
        if v == "-Infinity":
            return float("-inf")
        raise IntegrityError(f"unexpected string {v!r} in numeric field")
    return float(v)


def _farray(values, ndim=1) -> np.ndarray:
    if ndim == 1:
        return np.array([_num(v) for v in values], dtype=float)
    return np.array([[_num(v) for v in row] for row in values], dtype=float)


def _barray(values, ndim=1) -> np.ndarray:
    if ndim == 1:
        return np.array([bool(v) for v in values], dtype=bool)
    return np.array([[bool(v) for v in row] for row in values], dtype=bool)


def _fl(values) -> list:
    return [float(v) for v in values]


# ------------------------------------------------------------------ to tree


def _spec_tree(spec: ModelSpec) -> dict:
    return {
        "dependent": spec.dependent,
        "independents": list(spec.independents),
        "family": spec.family,
        "kernel": spec.kernel,
        "bandwidth_mode": spec.bandwidth_mode,
        "search_range": (
            [float(spec.search_range[0]), float(spec.search_range[1])]
            if spec.search_range is not None
            else None
        ),
        "convergence": {
            "tolerance": float(spec.convergence.tolerance),
            "max_iterations": int(spec.convergence.max_iterations),
        },
    }


def _spec_from(tree: dict) -> ModelSpec:
    return ModelSpec(
        dependent=tree["dependent"],
        independents=tuple(tree["independents"]),
        family=tree["family"],
        kernel=tree["kernel"],
        bandwidth_mode=tree["bandwidth_mode"],
        search_range=(
            (_num(tree["search_range"][0]), _num(tree["search_range"][1]))
            if tree.get("search_range") is not None
            else None
        ),
        convergence=Convergence(
            tolerance=_num(tree["convergence"]["tolerance"]),
            max_iterations=int(tree["convergence"]["max_iterations"]),
        ),
    )


def _model_tree(model: CalibratedModel) -> dict:
    if model.bandwidths is None:
        bw = None
    elif isinstance(model.bandwidths, tuple):
        bw = {"kind": "per_surface", "values": _fl(model.bandwidths)}
    else:
        bw = {"kind": "single", "values": [float(model.bandwidths)]}
    return {
        "spec": _spec_tree(model.spec),
        "surfaces": list(model.surfaces),
        "row_index": [int(i) for i in model.row_index],
        "coefficients": [_fl(row) for row in model.coefficients],
        "bandwidths": bw,
        "fitted": _fl(model.fitted),
        "residuals": _fl(model.residuals),
        "hat_trace": float(model.hat_trace),
        "hat_diagonal": _fl(model.hat_diagonal),
        "enp_per_surface": _fl(model.enp_per_surface),
        "local_se": [_fl(row) for row in model.local_se],
        "sigma2": float(model.sigma2),
        "rss": float(model.rss),
        "standardization_params": {
            name: [float(m), float(s)]
            for name, (m, s) in model.standardization_params.items()
        },
        "converged": bool(model.converged),
        "iterations": int(model.iterations),
        "soc_history": _fl(model.soc_history),
        "rss_history": _fl(model.rss_history),
        "search": [
            {
                "bandwidth": float(s.bandwidth),
                "score": float(s.score),
                "boundary": bool(s.boundary),
                "evaluations": int(s.evaluations),
                "probes": [[float(b), float(v)] for b, v in s.probes],
            }
            for s in model.search
        ],
    }


def _model_from(tree: dict) -> CalibratedModel:
    bw_tree = tree.get("bandwidths")
    if bw_tree is None:
        bandwidths = None
    elif bw_tree["kind"] == "per_surface":
        bandwidths = tuple(_num(v) for v in bw_tree["values"])
    else:
        bandwidths = _num(bw_tree["values"][0])
    return CalibratedModel(
        spec=_spec_from(tree["spec"]),
        surfaces=tuple(tree["surfaces"]),
        row_index=tuple(int(i) for i in tree["row_index"]),
        coefficients=_farray(tree["coefficients"], ndim=2),
        bandwidths=bandwidths,
        fitted=_farray(tree["fitted"]),
        residuals=_farray(tree["residuals"]),
        hat_trace=_num(tree["hat_trace"]),
        hat_diagonal=_farray(tree["hat_diagonal"]),
        enp_per_surface=tuple(_num(v) for v in tree["enp_per_surface"]),
        local_se=_farray(tree["local_se"], ndim=2),
        sigma2=_num(tree["sigma2"]),
        rss=_num(tree["rss"]),
        standardization_params={
            name: (_num(pair[0]), _num(pair[1]))
            for name, pair in tree["standardization_params"].items()
        },
        converged=bool(tree["converged"]),
        iterations=int(tree["iterations"]),
        soc_history=tuple(_num(v) for v in tree["soc_history"]),
        rss_history=tuple(_num(v) for v in tree["rss_history"]),
        search=tuple(
            BandwidthSearch(
                bandwidth=_num(s["bandwidth"]),
                score=_num(s["score"]),
                boundary=bool(s["boundary"]),
                evaluations=int(s["evaluations"]),
                probes=tuple((_num(b), _num(v)) for b, v in s["probes"]),
            )
            for s in tree["search"]
        ),
    )


def _diag_tree(diag: DiagnosticsReport) -> dict:
    return {
        "aicc": float(diag.aicc),
        "r2": float(diag.r2),
        "adj_r2": float(diag.adj_r2),
        "local_r2": {
            "values": _fl(diag.local_r2.values),
            "clamped": _fl(diag.local_r2.clamped),
            "clamp_flags": [bool(v) for v in diag.local_r2.clamp_flags],
            "undefined_flags": [bool(v) for v in diag.local_r2.undefined_flags],
            "bandwidth_used": (
                float(diag.local_r2.bandwidth_used)
                if diag.local_r2.bandwidth_used is not None
                else None
            ),
        },
        "cooks_d": {
            "values": _fl(diag.cooks_d.values),
            "mask": [bool(v) for v in diag.cooks_d.mask],
            "threshold": float(diag.cooks_d.threshold),
            "infinite_flags": [bool(v) for v in diag.cooks_d.infinite_flags],
        },
        "std_residuals": {
            "values": _fl(diag.std_residuals.values),
            "labels": list(diag.std_residuals.labels),
            "convention": diag.std_residuals.convention,
        },
        "morans_i_residuals": {
            "statistic": float(diag.morans_i_residuals.statistic),
            "pseudo_p": float(diag.morans_i_residuals.pseudo_p),
            "permutations": int(diag.morans_i_residuals.permutations),
            "seed": int(diag.morans_i_residuals.seed),
        },
        "significance": {
            "mask": [[bool(v) for v in row] for row in diag.significance.mask],
            "t_values": [_fl(row) for row in diag.significance.t_values],
            "adjusted_alpha": _fl(diag.significance.adjusted_alpha),
            "critical_t": _fl(diag.significance.critical_t),
            "se_zero_flags": [
                [bool(v) for v in row] for row in diag.significance.se_zero_flags
            ],
            "xi": float(diag.significance.xi),
        },
    }


def _diag_from(tree: dict) -> DiagnosticsReport:
    return DiagnosticsReport(
        aicc=_num(tree["aicc"]),
        r2=_num(tree["r2"]),
        adj_r2=_num(tree["adj_r2"]),
        local_r2=LocalR2(
            values=_farray(tree["local_r2"]["values"]),
            clamped=_farray(tree["local_r2"]["clamped"]),
            clamp_flags=_barray(tree["local_r2"]["clamp_flags"]),
            undefined_flags=_barray(tree["local_r2"]["undefined_flags"]),
            bandwidth_used=(
                _num(tree["local_r2"]["bandwidth_used"])
                if tree["local_r2"]["bandwidth_used"] is not None
                else None
            ),
        ),
        cooks_d=CooksD(
            values=_farray(tree["cooks_d"]["values"]),
            mask=_barray(tree["cooks_d"]["mask"]),
            threshold=_num(tree["cooks_d"]["threshold"]),
            infinite_flags=_barray(tree["cooks_d"]["infinite_flags"]),
        ),
        std_residuals=StdResiduals(
            values=_farray(tree["std_residuals"]["values"]),
            labels=tuple(tree["std_residuals"]["labels"]),
            convention=tree["std_residuals"]["convention"],
        ),
        morans_i_residuals=MoranResult(
            statistic=_num(tree["morans_i_residuals"]["statistic"]),
            pseudo_p=_num(tree["morans_i_residuals"]["pseudo_p"]),
            permutations=int(tree["morans_i_residuals"]["permutations"]),
            seed=int(tree["morans_i_residuals"]["seed"]),
        ),
        significance=Significance(
            mask=_barray(tree["significance"]["mask"], ndim=2),
            t_values=_farray(tree["significance"]["t_values"], ndim=2),
            adjusted_alpha=tuple(_num(v) for v in tree["significance"]["adjusted_alpha"]),
            critical_t=tuple(_num(v) for v in tree["significance"]["critical_t"]),
            se_zero_flags=_barray(tree["significance"]["se_zero_flags"], ndim=2),
            xi=_num(tree["significance"]["xi"]),
        ),
    )


def _clusters_tree(cs: ClusterSet) -> dict:
    def one(c: Cluster) -> dict:
        return {
            "cluster_id": c.cluster_id,
            "surface": c.surface,
            "sign": c.sign,
            "region_ids": list(c.region_ids),
            "size": int(c.size),
            "mean_coefficient": float(c.mean_coefficient),
            "centroid": _fl(c.centroid),
            "extent": _fl(c.extent),
            "location_identifier": c.location_identifier,
        }

    return {
        "surface": cs.surface,
        "positive_clusters": [one(c) for c in cs.positive_clusters],
        "negative_clusters": [one(c) for c in cs.negative_clusters],
        "isolated": list(cs.isolated),
        "zero_flagged": list(cs.zero_flagged),
    }


def _clusters_from(tree: dict) -> ClusterSet:
    def one(t: dict) -> Cluster:
        return Cluster(
            cluster_id=t["cluster_id"],
            surface=t["surface"],
            sign=t["sign"],
            region_ids=tuple(t["region_ids"]),
            size=int(t["size"]),
            mean_coefficient=_num(t["mean_coefficient"]),
            centroid=(_num(t["centroid"][0]), _num(t["centroid"][1])),
            extent=tuple(_num(v) for v in t["extent"]),
            location_identifier=t["location_identifier"],
        )

    return ClusterSet(
        surface=tree["surface"],
        positive_clusters=tuple(one(t) for t in tree["positive_clusters"]),
        negative_clusters=tuple(one(t) for t in tree["negative_clusters"]),
        isolated=tuple(tree["isolated"]),
        zero_flagged=tuple(tree["zero_flagged"]),
    )


def _report_tree(report: Report) -> dict:
    return {
        "title": report.title,
        "items": [
            {
                "kind": i.kind,
                "content": i.content,
                "palette": i.palette,
                "source_module": i.source_module,
                "state_hash": i.state_hash,
            }
            for i in report.items
        ],
        "created_at": report.created_at,
        "modified_at": report.modified_at,
        "template_version": report.template_version,
    }


def _report_from(tree: dict) -> Report:
    return Report(
        title=tree["title"],
        items=tuple(
            ReportItem(
                kind=i["kind"],
                content=i["content"],
                palette=i.get("palette"),
                source_module=i.get("source_module", ""),
                state_hash=i.get("state_hash", ""),
            )
            for i in tree["items"]
        ),
        created_at=tree["created_at"],
        modified_at=tree["modified_at"],
        template_version=tree["template_version"],
    )


# ---------------------------------------------------------------- validation


def _validate(state: AnalyticalState) -> None:
    """Cross-reference and fingerprint checks; IntegrityError on failure."""
    if state.dataset_geojson is not None:
        actual = dataset_fingerprint(state.dataset_geojson)
        if actual != state.dataset_fingerprint:
            raise IntegrityError(
                "embedded dataset does not match the recorded fingerprint",
                reference="dataset_fingerprint",
                expected=state.dataset_fingerprint,
                actual=actual,
            )
    cluster_ids = {
        c.cluster_id for cs in state.cluster_sets for c in cs.clusters
    }
    if state.model is not None:
        for cs in state.cluster_sets:
            if cs.surface not in state.model.surfaces:
                raise IntegrityError(
                    f"cluster set references unknown surface {cs.surface!r}",
                    reference=f"cluster_set:{cs.surface}",
                )
    if state.diagnostics is not None:
        if state.model is None:
            raise IntegrityError(
                "diagnostics present without a calibrated model",
                reference="diagnostics",
            )
        n = len(state.model.row_index)
        if len(state.diagnostics.std_residuals.values) != n:
            raise IntegrityError(
                "diagnostics arrays do not match the model's row count",
                reference="diagnostics",
            )
    for doc_key, edits in state.narrative_edits:
        for pid, _ in edits:
            if ":cluster:" in pid:
                cid = pid.split(":cluster:", 1)[1]
                if cid not in cluster_ids:
                    raise IntegrityError(
                        f"narrative edit references missing cluster {cid!r}",
                        reference=pid,
                    )
    asset_ids = {aid for aid, _ in state.report_assets}
    if state.report is not None:
        for i, item in enumerate(state.report.items):
            if item.kind != "paragraph" and item.content not in asset_ids:
                raise IntegrityError(
                    f"report item {i} references missing asset "
                    f"{item.content!r}",
                    reference=f"report_item:{i}:{item.content}",
                )


# ------------------------------------------------------------------ save/load


def save_state(state: AnalyticalState) -> bytes:
    """Canonical bytes for the state; validates before serializing."""
    _validate(state)
    tree: dict = {
        "schema_version": int(state.schema_version),
        "dataset_fingerprint": state.dataset_fingerprint,
        "narrative_edits": [
            {"doc": doc, "edits": [[pid, label] for pid, label in edits]}
            for doc, edits in state.narrative_edits
        ],
        "report_assets": [[aid, digest] for aid, digest in state.report_assets],
        "corpus_cache_keys": [[t, r] for t, r in state.corpus_cache_keys],
        "seeds": [[name, int(v)] for name, v in state.seeds],
    }
    if state.dataset_geojson is not None:
        tree["dataset_geojson"] = state.dataset_geojson
    if state.spec is not None:
        tree["spec"] = _spec_tree(state.spec)
    if state.model is not None:
        tree["calibration"] = _model_tree(state.model)
    if state.diagnostics is not None:
        tree["diagnostics"] = _diag_tree(state.diagnostics)
    if state.cluster_sets:
        tree["cluster_sets"] = [_clusters_tree(cs) for cs in state.cluster_sets]
    if state.report is not None:
        tree["report"] = _report_tree(state.report)
    return _canonical(tree)


def state_fingerprint(state: AnalyticalState) -> str:
    return hashlib.sha256(save_state(state)).hexdigest()


def load_state(
    blob: bytes | str, dataset: bytes | str | None = None
) -> AnalyticalState:
    """Parse, version-check, rebuild, and validate a saved state."""
    if isinstance(blob, bytes):
        text = blob.decode("utf-8", errors="strict")
    else:
        text = blob
    try:
        tree = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"state file is not valid JSON: {exc}") from exc
    if not isinstance(tree, dict):
        raise ParseError("state file must hold a JSON object")
    version = tree.get("schema_version")
    if version != SCHEMA_VERSION:
        raise VersionError(
            f"unsupported state schema version {version!r}; highest "
            f"supported is {SCHEMA_VERSION}",
            supported=SCHEMA_VERSION,
            found=version,
        )
    try:
        state = AnalyticalState(
            schema_version=int(version),
            dataset_fingerprint=tree["dataset_fingerprint"],
            dataset_geojson=tree.get("dataset_geojson"),
            spec=_spec_from(tree["spec"]) if "spec" in tree else None,
            model=_model_from(tree["calibration"]) if "calibration" in tree else None,
            diagnostics=(
                _diag_from(tree["diagnostics"]) if "diagnostics" in tree else None
            ),
            cluster_sets=tuple(
                _clusters_from(t) for t in tree.get("cluster_sets", ())
            ),
            narrative_edits=tuple(
                (
                    entry["doc"],
                    tuple((pid, label) for pid, label in entry["edits"]),
                )
                for entry in tree.get("narrative_edits", ())
            ),
            report=_report_from(tree["report"]) if "report" in tree else None,
            report_assets=tuple(
                (aid, digest) for aid, digest in tree.get("report_assets", ())
            ),
            corpus_cache_keys=tuple(
                (t, r) for t, r in tree.get("corpus_cache_keys", ())
            ),
            seeds=tuple((name, int(v)) for name, v in tree.get("seeds", ())),
        )
    except IntegrityError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise IntegrityError(
            f"state file structure is invalid: {exc!r}", reference=str(exc)
        ) from exc
    _validate(state)
    if dataset is not None:
        actual = dataset_fingerprint(dataset)
        if actual != state.dataset_fingerprint:
            raise IntegrityError(
                "supplied dataset does not match the state's fingerprint",
                reference="dataset_fingerprint",
                expected=state.dataset_fingerprint,
                actual=actual,
            )
    return state


def apply_narrative_edits(
    doc: NarrativeDoc,
    state: AnalyticalState,
    doc_key: str,
) -> NarrativeDoc:
    """Re-apply the saved identifier edits for ``doc_key`` to a fresh doc."""
    from .narrative import apply_identifier_edit

    for key, edits in state.narrative_edits:
        if key != doc_key:
            continue
        for pid, label in edits:
            doc = apply_identifier_edit(doc, pid, label)
    return doc
