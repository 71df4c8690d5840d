"""Synthetic spatial datasets for tests, benchmarks, and demos.

Builds grid-of-squares GeoJSON documents with seeded attribute columns,
including a multiscale regression surface where one coefficient is constant
over space and another varies smoothly, which is the canonical fixture for
exercising multiscale calibration.
"""

from __future__ import annotations

import json
import math

import numpy as np


def grid_geojson(
    rows: int,
    cols: int,
    columns: dict[str, np.ndarray] | None = None,
    origin: tuple[float, float] = (-100.0, 35.0),
    cell_deg: float = 0.05,
) -> bytes:
    """GeoJSON FeatureCollection of a rows x cols grid of square cells.

    Cell (r, c) spans ``origin + (c, r) * cell_deg``; region ids are
    ``cell-<index>`` with index = r * cols + c (row-major).
    """
    columns = columns or {}
    n = rows * cols
    for name, vec in columns.items():
        if len(vec) != n:
            raise ValueError(f"column {name!r} has length {len(vec)}, expected {n}")
    lon0, lat0 = origin
    features = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            x0 = lon0 + c * cell_deg
            y0 = lat0 + r * cell_deg
            ring = [
                [x0, y0],
                [x0 + cell_deg, y0],
                [x0 + cell_deg, y0 + cell_deg],
                [x0, y0 + cell_deg],
                [x0, y0],
            ]
            props = {"id": f"cell-{i:04d}"}
            for name, vec in columns.items():
                props[name] = float(vec[i])
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                    "properties": props,
                }
            )
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc).encode("utf-8")


def multiscale_surface(rows: int, cols: int) -> dict[str, np.ndarray]:
    """True coefficient surfaces on the grid: one constant, one smooth wave."""
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    u = cc / max(cols - 1, 1)
    v = rr / max(rows - 1, 1)
    constant = np.full(rows * cols, 2.0)
    varying = (1.0 + np.sin(math.pi * u) * np.cos(math.pi * v)).ravel()
    return {"beta_const": constant, "beta_vary": varying}


def multiscale_dataset(
    rows: int = 20,
    cols: int = 20,
    noise: float = 0.1,
    seed: int = 20,
) -> tuple[bytes, dict[str, np.ndarray]]:
    """Grid dataset with y = b_const * x1 + b_vary(u) * x2 + eps.

    Returns the GeoJSON bytes and the ground-truth surfaces; covariates are
    iid standard normal draws so the two scales are identifiable.
    """
    rng = np.random.default_rng(seed)
    n = rows * cols
    truth = multiscale_surface(rows, cols)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    eps = rng.normal(0.0, noise, n)
    y = truth["beta_const"] * x1 + truth["beta_vary"] * x2 + eps
    data = grid_geojson(rows, cols, {"y": y, "x1": x1, "x2": x2})
    truth = dict(truth, x1=x1, x2=x2, y=y)
    return data, truth


def global_linear_dataset(
    rows: int = 12, cols: int = 12, noise: float = 0.1, seed: int = 7
) -> tuple[bytes, dict[str, np.ndarray]]:
    """Grid dataset generated by a purely global linear model."""
    rng = np.random.default_rng(seed)
    n = rows * cols
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    y = 1.0 + 2.0 * x1 - 1.5 * x2 + rng.normal(0.0, noise, n)
    return grid_geojson(rows, cols, {"y": y, "x1": x1, "x2": x2}), {
        "x1": x1,
        "x2": x2,
        "y": y,
    }


def county_scale_dataset(
    rows: int = 53, cols: int = 53, p: int = 14, seed: int = 1
) -> bytes:
    """Election-scale grid (~2800 regions, p numeric covariates plus target)."""
    rng = np.random.default_rng(seed)
    n = rows * cols
    cols_out: dict[str, np.ndarray] = {}
    X = rng.standard_normal((n, p))
    beta = rng.normal(0.0, 1.0, p)
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    wave = np.sin(2 * math.pi * cc / cols) * np.cos(2 * math.pi * rr / rows)
    y = X @ beta + 1.5 * wave.ravel() * X[:, 0] + rng.normal(0.0, 0.5, n)
    cols_out["y"] = y
    for j in range(p):
        cols_out[f"x{j + 1}"] = X[:, j]
    return grid_geojson(rows, cols, cols_out)
