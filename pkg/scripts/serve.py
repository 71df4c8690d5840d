"""Run the HTTP analysis service.

    python3 scripts/serve.py --port 8000 [--offline --fixtures tests/fixtures/context]
"""

import argparse
import pathlib

import uvicorn

from esdakit.context import FetchConfig
from esdakit.service import Session, create_app


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8000)
    ap.add_argument("--offline", action="store_true",
                    help="serve encyclopedia context from local fixtures only")
    ap.add_argument("--fixtures", type=pathlib.Path, default=None)
    ap.add_argument("--cache", type=pathlib.Path, default=None)
    args = ap.parse_args(argv)
    fetch = FetchConfig(
        offline=args.offline, fixture_dir=args.fixtures, cache_dir=args.cache
    )
    app = create_app(Session(), fetch_config=fetch)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


if __name__ == "__main__":
    main()
