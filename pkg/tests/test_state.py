"""Round-trip, canonical-bytes, and integrity tests for saved state."""

import dataclasses
import hashlib
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esdakit.dataset import load_geojson, queen_adjacency
from esdakit.diagnostics import compute_diagnostics
from esdakit.errors import IntegrityError, ParseError, VersionError
from esdakit.narrative import render_coefficient_narrative
from esdakit.patterns import detect_clusters
from esdakit.regression import ModelSpec, calibrate
from esdakit.report import ReportItem, mutate_report, new_report
from esdakit.state import (
    SCHEMA_VERSION,
    AnalyticalState,
    apply_narrative_edits,
    dataset_fingerprint,
    load_state,
    save_state,
    state_fingerprint,
)
from esdakit.synthetic import multiscale_dataset

PNG = b"\x89PNG\r\n\x1a\n" + b"\x00" * 16


@pytest.fixture(scope="module")
def pipeline():
    """Case-study-shaped state: model, diagnostics, clusters, edits, report."""
    raw, _truth = multiscale_dataset(8, 8, noise=0.1, seed=3)
    table = load_geojson(raw)
    weights = queen_adjacency(table)
    spec = ModelSpec(dependent="y", independents=("x1", "x2"), family="gwr")
    model = calibrate(table, spec, bandwidth=24.0)
    diag = compute_diagnostics(model, table, weights, seed=11)
    col = model.surfaces.index("x1")
    clusters = detect_clusters(
        "x1", model, diag.significance.mask[:, col], weights, table, seed=0
    )
    doc = render_coefficient_narrative(
        "x1", clusters, diag.significance.mask[:, col], model, table
    )
    edits = []
    for para in doc.paragraphs:
        if para.default_identifier is not None and ":cluster:" in para.paragraph_id:
            edits.append((para.paragraph_id, "the northern block"))
            break
    report = new_report("Case study", template_version="1", timestamp="t0")
    report, _ = mutate_report(
        report,
        "add",
        {"item": ReportItem(kind="paragraph", content="Summary of the fit.")},
        timestamp="t1",
    )
    report, _ = mutate_report(
        report,
        "add",
        {
            "item": ReportItem(
                kind="map_figure",
                content="fig-x1",
                palette="viridis",
                source_module="patterns",
            )
        },
        timestamp="t2",
    )
    state = AnalyticalState(
        dataset_fingerprint=dataset_fingerprint(raw),
        dataset_geojson=raw.decode("utf-8"),
        spec=spec,
        model=model,
        diagnostics=diag,
        cluster_sets=(clusters,),
        narrative_edits=(("coef:x1", tuple(edits)),),
        report=report,
        report_assets=(("fig-x1", hashlib.sha256(PNG).hexdigest()),),
        corpus_cache_keys=(("Some_County", "123456"),),
        seeds=(("diagnostics", 11), ("patterns", 0)),
    )
    return {
        "raw": raw,
        "table": table,
        "weights": weights,
        "model": model,
        "diag": diag,
        "clusters": clusters,
        "doc": doc,
        "edits": tuple(edits),
        "state": state,
    }


class TestCanonicalBytes:
    def test_save_load_save_identical(self, pipeline):
        blob = save_state(pipeline["state"])
        again = save_state(load_state(blob))
        assert blob == again

    def test_fingerprint_is_sha256_of_bytes(self, pipeline):
        blob = save_state(pipeline["state"])
        assert state_fingerprint(pipeline["state"]) == hashlib.sha256(blob).hexdigest()

    def test_equal_states_equal_bytes(self, pipeline):
        s = pipeline["state"]
        twin = dataclasses.replace(s)
        assert save_state(s) == save_state(twin)

    def test_strict_json_no_bare_nan(self, pipeline):
        def boom(token):
            raise AssertionError(f"bare constant {token} in output")

        blob = save_state(pipeline["state"])
        json.loads(blob.decode("ascii"), parse_constant=boom)

    def test_floats_bit_round_trip(self, pipeline):
        loaded = load_state(save_state(pipeline["state"]))
        m0, m1 = pipeline["state"].model, loaded.model
        assert m0.coefficients.tobytes() == m1.coefficients.tobytes()
        assert m0.local_se.tobytes() == m1.local_se.tobytes()
        assert m1.sigma2 == m0.sigma2 and isinstance(m1.sigma2, float)
        d0, d1 = pipeline["state"].diagnostics, loaded.diagnostics
        assert d1.aicc == d0.aicc
        assert d0.local_r2.values.tobytes() == d1.local_r2.values.tobytes()

    def test_non_finite_values_survive(self, pipeline):
        s = pipeline["state"]
        vals = s.diagnostics.cooks_d.values.copy()
        vals[0] = np.inf
        vals[1] = np.nan
        vals[2] = -np.inf
        diag = dataclasses.replace(
            s.diagnostics, cooks_d=dataclasses.replace(s.diagnostics.cooks_d, values=vals)
        )
        blob = save_state(dataclasses.replace(s, diagnostics=diag))
        text = blob.decode("ascii")
        assert '"Infinity"' in text and '"NaN"' in text and '"-Infinity"' in text
        out = load_state(blob).diagnostics.cooks_d.values
        assert math.isinf(out[0]) and out[0] > 0
        assert math.isnan(out[1])
        assert math.isinf(out[2]) and out[2] < 0

    def test_integral_floats_restore_as_floats(self, pipeline):
        s = pipeline["state"]
        model = dataclasses.replace(s.model, sigma2=4.0, rss=16.0)
        loaded = load_state(save_state(dataclasses.replace(s, model=model)))
        assert loaded.model.sigma2 == 4.0 and isinstance(loaded.model.sigma2, float)
        assert isinstance(loaded.model.rss, float)


class TestSections:
    def test_staged_state_omits_calibration(self, pipeline):
        staged = AnalyticalState(
            dataset_fingerprint=dataset_fingerprint(pipeline["raw"])
        )
        blob = save_state(staged)
        tree = json.loads(blob)
        assert "calibration" not in tree
        assert "diagnostics" not in tree
        assert "report" not in tree
        loaded = load_state(blob)
        assert loaded.model is None and loaded.diagnostics is None
        assert loaded.cluster_sets == ()

    def test_embedded_dataset_round_trip(self, pipeline):
        loaded = load_state(save_state(pipeline["state"]))
        assert loaded.dataset_geojson == pipeline["raw"].decode("utf-8")
        # the embedded copy parses to the same table
        table = load_geojson(loaded.dataset_geojson)
        assert table.region_ids == pipeline["table"].region_ids

    def test_state_without_embedded_dataset(self, pipeline):
        slim = dataclasses.replace(pipeline["state"], dataset_geojson=None)
        blob = save_state(slim)
        assert "dataset_geojson" not in json.loads(blob)
        assert load_state(blob).dataset_geojson is None


class TestCaseStudy:
    def test_cluster_ids_survive(self, pipeline):
        loaded = load_state(save_state(pipeline["state"]))
        want = [c.cluster_id for c in pipeline["clusters"].clusters]
        got = [c.cluster_id for c in loaded.cluster_sets[0].clusters]
        assert got == want and want

    def test_structural_equality_after_reload(self, pipeline):
        loaded = load_state(save_state(pipeline["state"]))
        cs0, cs1 = pipeline["state"].cluster_sets[0], loaded.cluster_sets[0]
        assert cs1.surface == cs0.surface
        for a, b in zip(cs0.clusters, cs1.clusters):
            assert a.region_ids == b.region_ids
            assert a.location_identifier == b.location_identifier
        assert loaded.report.items == pipeline["state"].report.items
        assert loaded.narrative_edits == pipeline["state"].narrative_edits
        assert loaded.seeds == pipeline["state"].seeds
        assert loaded.corpus_cache_keys == pipeline["state"].corpus_cache_keys

    def test_narrative_edits_reapply(self, pipeline):
        loaded = load_state(save_state(pipeline["state"]))
        fresh = render_coefficient_narrative(
            "x1",
            pipeline["clusters"],
            pipeline["diag"].significance.mask[
                :, pipeline["model"].surfaces.index("x1")
            ],
            pipeline["model"],
            pipeline["table"],
        )
        replayed = apply_narrative_edits(fresh, loaded, "coef:x1")
        pid, label = pipeline["edits"][0]
        assert label in replayed.paragraph(pid).text
        assert replayed.paragraph(pid).identifier == label

    def test_load_decodes_fresh_arrays(self, pipeline):
        blob = save_state(pipeline["state"])
        a = load_state(blob)
        b = load_state(blob)
        a.model.coefficients[0, 0] = 999.0
        assert b.model.coefficients[0, 0] != 999.0
        assert pipeline["state"].model.coefficients[0, 0] != 999.0


class TestErrors:
    def test_truncated_file(self, pipeline):
        blob = save_state(pipeline["state"])
        with pytest.raises(ParseError):
            load_state(blob[: len(blob) // 2])

    def test_non_object_root(self):
        with pytest.raises(ParseError):
            load_state(b"[1, 2, 3]")

    def test_unknown_schema_version(self, pipeline):
        tree = json.loads(save_state(pipeline["state"]))
        tree["schema_version"] = 99
        with pytest.raises(VersionError) as err:
            load_state(json.dumps(tree))
        assert err.value.detail["supported"] == SCHEMA_VERSION
        assert err.value.detail["found"] == 99

    def test_dataset_mismatch(self, pipeline):
        blob = save_state(pipeline["state"])
        other, _ = multiscale_dataset(8, 8, noise=0.1, seed=4)
        with pytest.raises(IntegrityError) as err:
            load_state(blob, dataset=other)
        assert err.value.detail["reference"] == "dataset_fingerprint"

    def test_dataset_match_accepted(self, pipeline):
        blob = save_state(pipeline["state"])
        loaded = load_state(blob, dataset=pipeline["raw"])
        assert loaded.dataset_fingerprint == pipeline["state"].dataset_fingerprint

    def test_tampered_embedded_dataset(self, pipeline):
        tree = json.loads(save_state(pipeline["state"]))
        tree["dataset_geojson"] = tree["dataset_geojson"].replace("cell-0000", "cell-9999", 1)
        with pytest.raises(IntegrityError):
            load_state(json.dumps(tree))

    def test_corrupt_cluster_reference_is_named(self, pipeline):
        tree = json.loads(save_state(pipeline["state"]))
        pid, label = tree["narrative_edits"][0]["edits"][0]
        bogus = pid.rsplit(":", 1)[0] + ":bogus"
        tree["narrative_edits"][0]["edits"][0][0] = bogus
        with pytest.raises(IntegrityError) as err:
            load_state(json.dumps(tree))
        assert "bogus" in str(err.value)
        assert err.value.detail["reference"] == bogus

    def test_missing_report_asset_is_named(self, pipeline):
        tree = json.loads(save_state(pipeline["state"]))
        for item in tree["report"]["items"]:
            if item["kind"] != "paragraph":
                item["content"] = "ghost"
        with pytest.raises(IntegrityError) as err:
            load_state(json.dumps(tree))
        assert "ghost" in str(err.value)

    def test_save_refuses_dangling_asset(self, pipeline):
        s = pipeline["state"]
        bad = dataclasses.replace(s, report_assets=())
        with pytest.raises(IntegrityError):
            save_state(bad)

    def test_save_refuses_unknown_surface(self, pipeline):
        s = pipeline["state"]
        cs = dataclasses.replace(s.cluster_sets[0], surface="zz")
        with pytest.raises(IntegrityError):
            save_state(dataclasses.replace(s, cluster_sets=(cs,)))

    def test_save_refuses_diagnostics_without_model(self, pipeline):
        s = pipeline["state"]
        bad = dataclasses.replace(
            s, model=None, cluster_sets=(), narrative_edits=()
        )
        with pytest.raises(IntegrityError):
            save_state(bad)

    def test_save_refuses_length_mismatch(self, pipeline):
        s = pipeline["state"]
        short = dataclasses.replace(
            s.diagnostics.std_residuals,
            values=s.diagnostics.std_residuals.values[:3],
            labels=s.diagnostics.std_residuals.labels[:3],
        )
        diag = dataclasses.replace(s.diagnostics, std_residuals=short)
        with pytest.raises(IntegrityError):
            save_state(dataclasses.replace(s, diagnostics=diag))


class TestFuzzedReferences:
    @given(st.integers(0, 10**9))
    @settings(max_examples=25, deadline=None)
    def test_one_corrupted_reference_always_caught(self, pipeline, seed):
        rng = random.Random(seed)
        tree = json.loads(save_state(pipeline["state"]))
        target = rng.choice(["cluster_edit", "asset", "surface"])
        if target == "cluster_edit":
            pid, _ = tree["narrative_edits"][0]["edits"][0]
            tree["narrative_edits"][0]["edits"][0][0] = (
                pid.rsplit(":", 1)[0] + f":fz{seed % 997}"
            )
        elif target == "asset":
            for item in tree["report"]["items"]:
                if item["kind"] != "paragraph":
                    item["content"] = f"fz{seed % 997}"
        else:
            tree["cluster_sets"][0]["surface"] = f"fz{seed % 997}"
        with pytest.raises(IntegrityError) as err:
            load_state(json.dumps(tree))
        assert f"fz{seed % 997}" in str(err.value) or "reference" in err.value.detail


class TestRoundTripProperty:
    @given(
        st.lists(
            st.tuples(
                st.text("abcdefgh", min_size=1, max_size=6),
                st.integers(0, 2**31 - 1),
            ),
            max_size=4,
        ),
        st.lists(
            st.tuples(
                st.text("ABCdef_", min_size=1, max_size=8),
                st.text("0123456789", min_size=1, max_size=8),
            ),
            max_size=3,
        ),
        st.binary(min_size=1, max_size=40),
    )
    @settings(max_examples=60, deadline=None)
    def test_any_saved_state_reloads(self, seeds, keys, raw):
        dedup_seeds = tuple({k: v for k, v in seeds}.items())
        state = AnalyticalState(
            dataset_fingerprint=dataset_fingerprint(raw),
            corpus_cache_keys=tuple(keys),
            seeds=dedup_seeds,
        )
        blob = save_state(state)
        loaded = load_state(blob, dataset=raw)
        assert save_state(loaded) == blob
        assert loaded.seeds == dedup_seeds
