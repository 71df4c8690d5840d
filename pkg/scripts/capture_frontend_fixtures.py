"""Record real service responses as JSON fixtures for the frontend tests.

Drives the HTTP app in-process through the demo pipeline and dumps each
response body under frontend/tests/fixtures/, so the TypeScript suite
runs against byte-real payload shapes.

    python3 scripts/capture_frontend_fixtures.py [--out frontend/tests/fixtures]
"""

import argparse
import json
import pathlib
import sys

from fastapi.testclient import TestClient

from esdakit.context import FetchConfig
from esdakit.service import Session, create_app
from esdakit.synthetic import multiscale_dataset

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONTEXT_FIXTURES = ROOT / "tests" / "fixtures" / "context"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--out", type=pathlib.Path, default=ROOT / "frontend" / "tests" / "fixtures"
    )
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    session = Session(
        fetch_config=FetchConfig(offline=True, fixture_dir=CONTEXT_FIXTURES)
    )
    client = TestClient(create_app(session))
    raw, _ = multiscale_dataset(20, 20, noise=0.1, seed=20)

    def dump(name, response):
        assert response.status_code == 200, (name, response.text)
        payload = response.json()
        (args.out / f"{name}.json").write_text(
            json.dumps(payload, indent=1, sort_keys=True) + "\n"
        )
        print(f"  {name}.json", file=sys.stderr)
        return payload

    dump("dataset_upload", client.post("/dataset", content=raw))
    dump("summary", client.get("/dataset/summary"))
    dump("geojson", client.get("/dataset/geojson"))
    dump("features", client.get("/features"))
    dump("profile_x1", client.get("/features/x1/profile"))
    dump("profile_x2", client.get("/features/x2/profile"))
    dump("profile_y", client.get("/features/y/profile"))
    dump("vif", client.post("/vif", json={"names": ["x1", "x2"]}))
    dump("vif_severe", client.post("/vif", json={"names": ["x1", "x2", "y"]}))
    dump(
        "correlations",
        client.post("/correlations", json={"names": ["y", "x1", "x2"]}),
    )
    dump(
        "bivariate",
        client.post(
            "/classify", json={"dependent": "y", "independent": "x1", "k": 3}
        ),
    )
    dump(
        "quantile",
        client.post("/classify", json={"column": "y", "k": 5}),
    )

    job = dump(
        "job_submitted",
        client.post(
            "/jobs",
            json={
                "dependent": "y",
                "independents": ["x1", "x2"],
                "family": "gwr",
                "bandwidth": 24.0,
            },
        ),
    )
    session.wait_for_jobs()
    dump("job_converged", client.get(f"/jobs/{job['job_id']}"))
    dump("model", client.get("/model"))
    dump("surfaces", client.get("/surfaces"))
    dump("surface_x2", client.get("/surfaces/x2"))
    dump("diagnostics", client.get("/diagnostics", params={"seed": 0}))
    dump("explanations", client.get("/explanations"))
    dump("clusters_x2", client.get("/clusters/x2"))
    dump("narrative_x2", client.get("/narratives/coefficient/x2"))
    dump("narrative_cooks", client.get("/narratives/diagnostic/cooks_d"))
    dump("narrative_local_r2", client.get("/narratives/diagnostic/local_r2"))

    dump(
        "context_fetch",
        client.post(
            "/context/fetch",
            json={
                "pages": {"39009": "Athens County, Ohio",
                          "39045": "Fairfield County, Ohio",
                          "18105": "Monroe County, Indiana"},
                "resolution": "county",
            },
        ),
    )
    keyphrases = dump("keyphrases", client.get("/keyphrases"))
    phrase = keyphrases["entries"][0]["phrase"]
    dump("paragraphs", client.get("/paragraphs", params={"phrase": phrase}))

    dump(
        "report_created",
        client.post("/report", json={"title": "Demo report"}),
    )
    dump(
        "report_mutated",
        client.post(
            "/report/mutate",
            json={
                "action": "add",
                "payload": {
                    "item": {"kind": "paragraph", "content": "Opening paragraph."}
                },
            },
        ),
    )
    dump("report", client.get("/report"))
    print(f"fixtures written to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
