"""Batch CLI driving the pipeline headlessly.

Subcommands chain through a state file: ``ingest`` writes one with the
dataset embedded, and each later stage loads it, adds its artifact, and
writes it back (in place or to ``--out``). Results print as JSON on
stdout; failures print the engine's machine-readable error JSON on stderr
and exit nonzero.
"""

from __future__ import annotations

import itertools
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .context import FetchConfig, extract_keyphrases, fetch_region_documents
from .dataset import load_geojson, queen_adjacency
from .diagnostics import compute_diagnostics
from .errors import EsdaError, NotFoundError
from .narrative import (
    apply_identifier_edit,
    render_coefficient_narrative,
    render_correlation_narrative,
    render_diagnostic_narrative,
    render_feature_narrative,
)
from .patterns import detect_clusters
from .regression import Convergence, ModelSpec, calibrate, gaussian_aicc
from .report import ReportItem, export_html, mutate_report, new_report
from .screening import pearson, profile_feature, vif
from .service import _doc_json, _safe
from .state import (
    AnalyticalState,
    dataset_fingerprint,
    load_state,
    save_state,
    state_fingerprint,
)

DIAGNOSTIC_KINDS = ("local_r2", "cooks_d", "std_residual")


def _echo(payload: dict) -> None:
    click.echo(json.dumps(_safe(payload), indent=2))


def _read_state(path: str) -> AnalyticalState:
    return load_state(Path(path).read_bytes())


def _write_state(state: AnalyticalState, path: str) -> None:
    Path(path).write_bytes(save_state(state))


def _table_of(state: AnalyticalState):
    if state.dataset_geojson is None:
        raise NotFoundError("state has no embedded dataset; run ingest first")
    return load_geojson(state.dataset_geojson)


def _require_model(state: AnalyticalState):
    if state.model is None:
        raise NotFoundError("state has no calibrated model; run train first")
    return state.model


def _require_diagnostics(state: AnalyticalState):
    if state.diagnostics is None:
        raise NotFoundError("state has no diagnostics; run diagnose first")
    return state.diagnostics


def _apply_saved_edits(doc, state: AnalyticalState, key: str):
    for doc_key, edits in state.narrative_edits:
        if doc_key != key:
            continue
        for pid, label in edits:
            doc = apply_identifier_edit(doc, pid, label)
    return doc


@click.group()
def cli():
    """Exploratory spatial regression pipeline."""


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--id-property", default=None, help="feature property to use as region id")
@click.option("--out", required=True, type=click.Path(), help="state file to write")
def ingest(dataset, id_property, out):
    """Load a GeoJSON dataset and start a new analysis state."""
    raw = Path(dataset).read_bytes()
    table = load_geojson(raw, id_property=id_property)
    state = AnalyticalState(
        dataset_fingerprint=dataset_fingerprint(raw),
        dataset_geojson=raw.decode("utf-8"),
    )
    _write_state(state, out)
    _echo(
        {
            "state": out,
            "fingerprint": state.dataset_fingerprint,
            "n": table.n,
            "columns": sorted(table.columns),
            "exclusions": table.exclusion_report(),
        }
    )


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--columns", required=True, help="comma-separated column names")
@click.option("--bins", default=20, show_default=True)
@click.option("--threshold", default=0.7, show_default=True)
def screen(state_path, columns, bins, threshold):
    """Profile features, correlate pairs, and compute VIF."""
    state = _read_state(state_path)
    table = _table_of(state)
    names = [n for n in columns.split(",") if n]
    for name in names:
        if name not in table.columns:
            raise NotFoundError(f"no column {name!r}", column=name)
    profiles = {}
    for name in names:
        p = profile_feature(table.column(name), bins=bins)
        profiles[name] = {
            "skewness": p.skewness,
            "ks_p": p.ks_p,
            "suggested_transforms": list(p.suggested_transforms),
            "mean": p.mean,
            "std": p.std,
        }
    correlations = [
        {
            "x_name": r.x_name,
            "y_name": r.y_name,
            "r": r.r,
            "p": r.p,
            "flagged_strong": r.flagged_strong,
        }
        for a, b in itertools.combinations(names, 2)
        for r in (
            pearson(table.column(a), table.column(b), x_name=a, y_name=b,
                    threshold=threshold),
        )
    ]
    out = {"profiles": profiles, "correlations": correlations}
    if len(names) >= 2:
        stack = np.column_stack([table.column(n) for n in names])
        v = vif(stack, names=tuple(names))
        out["vif"] = {"names": list(v.names), "values": v.values, "severe": v.severe}
    _echo(out)


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--dependent", required=True)
@click.option("--independents", required=True, help="comma-separated column names")
@click.option("--family", default="gwr", show_default=True,
              type=click.Choice(["ols", "gwr", "mgwr"]))
@click.option("--kernel", default="bisquare", show_default=True,
              type=click.Choice(["bisquare", "gaussian", "boxcar"]))
@click.option("--bandwidth-mode", default="adaptive", show_default=True,
              type=click.Choice(["adaptive", "fixed"]))
@click.option("--bandwidth", default=None, type=float,
              help="skip the search and fit at this bandwidth")
@click.option("--tolerance", default=1e-5, show_default=True)
@click.option("--max-iterations", default=200, show_default=True)
@click.option("--verbose", is_flag=True, help="print progress lines to stderr")
@click.option("--out", default=None, type=click.Path(),
              help="state file to write (defaults to in place)")
def train(state_path, dependent, independents, family, kernel, bandwidth_mode,
          bandwidth, tolerance, max_iterations, verbose, out):
    """Calibrate a model and persist it into the state."""
    state = _read_state(state_path)
    table = _table_of(state)
    spec = ModelSpec(
        dependent=dependent,
        independents=tuple(n for n in independents.split(",") if n),
        family=family,
        kernel=kernel,
        bandwidth_mode=bandwidth_mode,
        convergence=Convergence(tolerance=tolerance, max_iterations=max_iterations),
    )

    def progress(update):
        print(
            " ".join(f"{k}={v}" for k, v in sorted(update.items())),
            file=sys.stderr,
        )
        return True

    model = calibrate(
        table, spec, bandwidth=bandwidth, progress=progress if verbose else None
    )
    state = replace(
        state,
        spec=spec,
        model=model,
        diagnostics=None,
        cluster_sets=(),
        narrative_edits=(),
        seeds=(),
    )
    _write_state(state, out or state_path)
    n = len(model.row_index)
    if isinstance(model.bandwidths, tuple):
        bandwidths = list(model.bandwidths)
    else:
        bandwidths = model.bandwidths
    _echo(
        {
            "state": out or state_path,
            "family": family,
            "surfaces": list(model.surfaces),
            "bandwidths": bandwidths,
            "aicc": gaussian_aicc(n, model.rss, model.hat_trace),
            "enp_per_surface": list(model.enp_per_surface),
            "iterations": model.iterations,
            "converged": model.converged,
        }
    )


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--xi", default=0.05, show_default=True)
@click.option("--permutations", default=999, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--convention", default="predicted-observed", show_default=True,
              type=click.Choice(["predicted-observed", "observed-predicted"]))
@click.option("--out", default=None, type=click.Path())
def diagnose(state_path, xi, permutations, seed, convention, out):
    """Compute the diagnostics suite and persist it into the state."""
    state = _read_state(state_path)
    table = _table_of(state)
    model = _require_model(state)
    weights = queen_adjacency(table)
    diag = compute_diagnostics(
        model, table, weights, xi=xi, permutations=permutations, seed=seed,
        convention=convention,
    )
    seeds = dict(state.seeds)
    seeds["diagnostics"] = seed
    state = replace(state, diagnostics=diag, seeds=tuple(sorted(seeds.items())))
    _write_state(state, out or state_path)
    _echo(
        {
            "state": out or state_path,
            "aicc": diag.aicc,
            "r2": diag.r2,
            "adj_r2": diag.adj_r2,
            "morans_i": diag.morans_i_residuals.statistic,
            "morans_p": diag.morans_i_residuals.pseudo_p,
            "outliers": int(np.sum(diag.cooks_d.mask)),
            "significant_per_surface": {
                name: int(np.sum(diag.significance.mask[:, i]))
                for i, name in enumerate(model.surfaces)
            },
        }
    )


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--surface", required=True)
@click.option("--resolution", default=1.0, show_default=True)
@click.option("--min-size", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path())
def clusters(state_path, surface, resolution, min_size, seed, out):
    """Detect coefficient clusters for one surface."""
    state = _read_state(state_path)
    table = _table_of(state)
    model = _require_model(state)
    diag = _require_diagnostics(state)
    if surface not in model.surfaces:
        raise NotFoundError(f"no surface {surface!r}")
    col = model.surfaces.index(surface)
    cs = detect_clusters(
        surface, model, diag.significance.mask[:, col], queen_adjacency(table),
        table, resolution=resolution, min_size=min_size, seed=seed,
    )
    kept = tuple(c for c in state.cluster_sets if c.surface != surface)
    seeds = dict(state.seeds)
    seeds["patterns"] = seed
    state = replace(
        state,
        cluster_sets=tuple(sorted(kept + (cs,), key=lambda c: c.surface)),
        seeds=tuple(sorted(seeds.items())),
    )
    _write_state(state, out or state_path)
    _echo(
        {
            "state": out or state_path,
            "surface": surface,
            "positive": [
                {"id": c.cluster_id, "size": c.size, "mean": c.mean_coefficient}
                for c in cs.positive_clusters
            ],
            "negative": [
                {"id": c.cluster_id, "size": c.size, "mean": c.mean_coefficient}
                for c in cs.negative_clusters
            ],
            "isolated": len(cs.isolated),
            "zero_flagged": len(cs.zero_flagged),
        }
    )


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", required=True,
              type=click.Choice(["feature", "correlation", "local_r2", "cooks_d",
                                 "std_residual", "coefficient"]))
@click.option("--name", default=None,
              help="column (feature), comma names (correlation), or surface")
def narrate(state_path, kind, name):
    """Render a narrative document and print it as JSON."""
    state = _read_state(state_path)
    table = _table_of(state)
    if kind == "feature":
        if not name or name not in table.columns:
            raise NotFoundError(f"no column {name!r}")
        doc = render_feature_narrative(name, profile_feature(table.column(name)))
        key = f"feature:{name}"
    elif kind == "correlation":
        names = [n for n in (name or "").split(",") if n]
        if len(names) < 2:
            raise NotFoundError("correlation narrative needs --name a,b[,c...]")
        results = [
            pearson(table.column(a), table.column(b), x_name=a, y_name=b)
            for a, b in itertools.combinations(names, 2)
        ]
        stack = np.column_stack([table.column(n) for n in names])
        doc = render_correlation_narrative(results, vif=vif(stack, tuple(names)))
        key = f"correlation:{name}"
    elif kind in DIAGNOSTIC_KINDS:
        doc = render_diagnostic_narrative(
            kind, _require_diagnostics(state), _require_model(state), table
        )
        key = f"diag:{kind}"
    else:
        model = _require_model(state)
        if not name or name not in model.surfaces:
            raise NotFoundError(f"no surface {name!r}")
        cs = {c.surface: c for c in state.cluster_sets}.get(name)
        if cs is None:
            raise NotFoundError(
                f"state has no cluster set for {name!r}; run clusters first"
            )
        col = model.surfaces.index(name)
        mask = _require_diagnostics(state).significance.mask[:, col]
        doc = render_coefficient_narrative(name, cs, mask, model, table)
        key = f"coef:{name}"
    doc = _apply_saved_edits(doc, state, key)
    _echo(_doc_json(doc))


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--pages", required=True, multiple=True,
              help="region=Page Title (repeatable)")
@click.option("--resolution", default="county", show_default=True)
@click.option("--offline/--online", default=True, show_default=True)
@click.option("--fixtures", default=None, type=click.Path(file_okay=False),
              help="fixture directory for offline mode")
@click.option("--cache", default=None, type=click.Path(file_okay=False),
              help="cache directory for online mode")
@click.option("--n", default=20, show_default=True, help="keyphrases to return")
@click.option("--out", default=None, type=click.Path())
def context(state_path, pages, resolution, offline, fixtures, cache, n, out):
    """Fetch regional documents and extract keyphrases."""
    state = _read_state(state_path)
    mapping = {}
    for entry in pages:
        region, _, title = entry.partition("=")
        if not region or not title:
            raise NotFoundError(f"bad --pages entry {entry!r}; use region=Title")
        mapping[region] = title
    config = FetchConfig(
        offline=offline,
        fixture_dir=Path(fixtures) if fixtures else None,
        cache_dir=Path(cache) if cache else None,
    )
    corpus = fetch_region_documents(mapping, resolution, config=config)
    ranked = extract_keyphrases(corpus.regions, n=n)
    keys = tuple(sorted((r.title, str(r.revision)) for r in corpus.regions))
    state = replace(state, corpus_cache_keys=keys)
    _write_state(state, out or state_path)
    _echo(
        {
            "state": out or state_path,
            "regions": [
                {"region_id": r.region_id, "title": r.title, "sections": len(r.sections)}
                for r in corpus.regions
            ],
            "warnings": list(corpus.warnings),
            "keyphrases": [
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


@cli.command()
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--title", required=True)
@click.option("--surface", "surfaces", required=True, multiple=True,
              help="coefficient surface to narrate (repeatable)")
@click.option("--include-diagnostics", is_flag=True,
              help="also add the diagnostic narratives")
@click.option("--timestamp", default="1970-01-01T00:00:00Z", show_default=True,
              help="fixed timestamp for deterministic output")
@click.option("--export", "export_path", required=True, type=click.Path(),
              help="HTML file to write")
@click.option("--out", default=None, type=click.Path())
def report(state_path, title, surfaces, include_diagnostics, timestamp,
           export_path, out):
    """Compose a report from narratives and export self-contained HTML."""
    state = _read_state(state_path)
    table = _table_of(state)
    model = _require_model(state)
    diag = _require_diagnostics(state)
    docs = []
    if include_diagnostics:
        for kind in DIAGNOSTIC_KINDS:
            doc = render_diagnostic_narrative(kind, diag, model, table)
            docs.append((f"diag:{kind}", doc))
    by_surface = {c.surface: c for c in state.cluster_sets}
    for surface in surfaces:
        if surface not in model.surfaces:
            raise NotFoundError(f"no surface {surface!r}")
        if surface not in by_surface:
            raise NotFoundError(
                f"state has no cluster set for {surface!r}; run clusters first"
            )
        col = model.surfaces.index(surface)
        doc = render_coefficient_narrative(
            surface, by_surface[surface], diag.significance.mask[:, col],
            model, table,
        )
        docs.append((f"coef:{surface}", doc))
    rep = new_report(title, template_version=docs[0][1].template_version,
                     timestamp=timestamp)
    count = 0
    for key, doc in docs:
        doc = _apply_saved_edits(doc, state, key)
        for para in doc.paragraphs:
            rep, _ = mutate_report(
                rep,
                "add",
                {
                    "item": ReportItem(
                        kind="paragraph", content=para.text,
                        source_module=key.split(":", 1)[0],
                    )
                },
                timestamp=timestamp,
            )
            count += 1
    html = export_html(rep)
    Path(export_path).write_bytes(html)
    state = replace(state, report=rep)
    _write_state(state, out or state_path)
    _echo(
        {
            "state": out or state_path,
            "export": export_path,
            "paragraphs": count,
            "bytes": len(html),
        }
    )


@cli.group(name="state")
def state_group():
    """Validate, copy, and inspect state files."""


@state_group.command("save")
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path())
def state_save(state_path, out):
    """Re-save a state file canonically (validates every reference)."""
    state = _read_state(state_path)
    _write_state(state, out)
    _echo({"state": out, "fingerprint": state_fingerprint(state)})


@state_group.command("load")
@click.argument("state_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", default=None, type=click.Path(exists=True, dir_okay=False),
              help="raw GeoJSON to verify against the state's fingerprint")
def state_load(state_path, dataset):
    """Validate a state file and print a summary of its contents."""
    blob = Path(state_path).read_bytes()
    raw = Path(dataset).read_bytes() if dataset else None
    state = load_state(blob, dataset=raw)
    _echo(
        {
            "schema_version": state.schema_version,
            "fingerprint": state.dataset_fingerprint,
            "state_fingerprint": state_fingerprint(state),
            "has_dataset": state.dataset_geojson is not None,
            "has_model": state.model is not None,
            "has_diagnostics": state.diagnostics is not None,
            "cluster_surfaces": sorted(c.surface for c in state.cluster_sets),
            "narrative_edits": sum(len(e) for _, e in state.narrative_edits),
            "has_report": state.report is not None,
        }
    )


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as err:
        err.show()
        sys.exit(err.exit_code or 2)
    except EsdaError as err:
        print(json.dumps(_safe(err.to_json())), file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
