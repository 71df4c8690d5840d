"""Feature profiling and relationship screening.

Everything needed to configure a model before calibration: normality
checks (K-S against a fitted normal), skewness-driven transform
suggestions, Pearson correlation with strong-pair flagging, variance
inflation factors, and univariate/bivariate quantile classification for
choropleth rendering.

All functions are pure over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (
    DegenerateDistributionError,
    RangeError,
    TransformDomainError,
    UndefinedCorrelationError,
)

# |r| at or above this is flagged as a strong linear correlation
STRONG_CORRELATION_THRESHOLD = 0.7

# VIF above this indicates potentially severe multicollinearity
VIF_SEVERE_THRESHOLD = 10.0

DEFAULT_UNIVARIATE_CLASSES = 5
DEFAULT_BIVARIATE_GRID = 4

TRANSFORM_KINDS = ("log", "log1p", "sqrt", "zscore")


@dataclass(frozen=True)
class FeatureProfile:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    skewness: float
    ks_statistic: float
    ks_p: float
    suggested_transforms: tuple[str, ...]
    n_values: int
    mean: float
    std: float
    minimum: float
    maximum: float


@dataclass(frozen=True)
class CorrelationResult:
    x_name: str
    y_name: str
    r: float
    p: float
    flagged_strong: bool
    threshold: float = STRONG_CORRELATION_THRESHOLD


@dataclass(frozen=True)
class VifResult:
    names: tuple[str, ...]
    values: tuple[float, ...]  # +inf sentinel under perfect collinearity
    severe: tuple[bool, ...]  # value > 10
    collinear: tuple[bool, ...]  # infinity sentinel flag


@dataclass(frozen=True)
class QuantileClasses:
    classes: np.ndarray  # per-region class index, 0-based
    boundaries: tuple[float, ...]  # upper value bound of each class
    k_requested: int
    k_effective: int
    reduced: bool  # fewer distinct values than requested classes


@dataclass(frozen=True)
class BivariateClasses:
    rows: np.ndarray  # dependent-variable class per region
    cols: np.ndarray  # independent-variable class per region
    zones: tuple[str, ...]  # diagonal | above | below
    k: int
    dep_boundaries: tuple[float, ...]
    ind_boundaries: tuple[float, ...]


def _clean(column: np.ndarray) -> np.ndarray:
    col = np.asarray(column, dtype=float)
    return col[~np.isnan(col)]


def profile_feature(column: np.ndarray, bins: int = 20) -> FeatureProfile:
    """Histogram, skewness, and K-S normality test for one feature.

    The K-S test compares against a normal with the sample mean and std;
    because the parameters are estimated from the same sample, the asymptotic
    p-value is conservative (no Lilliefors correction is applied).
    """
    values = _clean(column)
    if values.size < 8:
        raise RangeError(f"need >= 8 non-missing values, got {values.size}")
    mean = float(values.mean())
    std = float(values.std())
    if std == 0.0:
        raise DegenerateDistributionError("constant column has zero variance")
    counts, edges = np.histogram(values, bins=bins)
    skew = float(stats.skew(values, bias=False))
    ks = stats.kstest(values, "norm", args=(mean, std))
    return FeatureProfile(
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        skewness=skew,
        ks_statistic=float(ks.statistic),
        ks_p=float(ks.pvalue),
        suggested_transforms=_suggest_transforms(values, skew),
        n_values=int(values.size),
        mean=mean,
        std=std,
        minimum=float(values.min()),
        maximum=float(values.max()),
    )


def _suggest_transforms(values: np.ndarray, skew: float) -> tuple[str, ...]:
    # |skew| <= 1 counts as near-symmetric; log needs strictly positive data,
    # log1p covers right-skewed data that touches zero
    if abs(skew) <= 1.0:
        return ()
    if values.min() > 0.0:
        return ("log", "sqrt")
    if skew > 1.0 and values.min() >= 0.0:
        return ("log1p",)
    return ()


def apply_transform(
    column: np.ndarray, kind: str, region_ids: tuple[str, ...] | None = None
) -> np.ndarray:
    """Elementwise transform with domain validation.

    Domain violations raise with the offending region ids (indices when no
    ids are supplied). zscore uses the population std.
    """
    col = np.asarray(column, dtype=float)
    ids = region_ids if region_ids is not None else tuple(
        str(i) for i in range(col.size)
    )

    def offenders(bad: np.ndarray) -> list[str]:
        return [ids[i] for i in np.nonzero(bad)[0][:20]]

    if kind == "log":
        bad = ~(col > 0.0)
        if bad.any():
            raise TransformDomainError(
                "log requires all values > 0", regions=offenders(bad)
            )
        return np.log(col)
    if kind == "log1p":
        bad = ~(col > -1.0)
        if bad.any():
            raise TransformDomainError(
                "log1p requires all values > -1", regions=offenders(bad)
            )
        return np.log1p(col)
    if kind == "sqrt":
        bad = ~(col >= 0.0)
        if bad.any():
            raise TransformDomainError(
                "sqrt requires all values >= 0", regions=offenders(bad)
            )
        return np.sqrt(col)
    if kind == "zscore":
        std = col.std()
        if std == 0.0:
            raise DegenerateDistributionError("zscore of a constant column")
        return (col - col.mean()) / std
    raise RangeError(f"unknown transform kind {kind!r}", kind=kind)


def pearson(
    x: np.ndarray,
    y: np.ndarray,
    x_name: str = "x",
    y_name: str = "y",
    threshold: float = STRONG_CORRELATION_THRESHOLD,
) -> CorrelationResult:
    """Pearson r with a two-sided p-value from the t distribution (n-2 dof)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise RangeError("x and y must have equal length")
    n = x.size
    if n < 3:
        raise RangeError(f"need length >= 3, got {n}")
    if x.std() == 0.0 or y.std() == 0.0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    zx = x - x.mean()
    zy = y - y.mean()
    r = float(np.dot(zx, zy) / np.sqrt(np.dot(zx, zx) * np.dot(zy, zy)))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * np.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), df=n - 2))
    return CorrelationResult(
        x_name=x_name,
        y_name=y_name,
        r=r,
        p=p,
        flagged_strong=abs(r) >= threshold,
        threshold=threshold,
    )


def vif(independents: np.ndarray, names: tuple[str, ...] | None = None) -> VifResult:
    """Variance inflation factors among the independent variables.

    VIF_j = 1 / (1 - R_j^2) where R_j^2 comes from regressing column j on
    the remaining columns plus an intercept. Perfect collinearity yields
    an infinity sentinel with a flag rather than an exception.
    """
    X = np.asarray(independents, dtype=float)
    if X.ndim != 2:
        raise RangeError("independents must be an n x p matrix")
    n, p = X.shape
    if p < 2:
        raise RangeError("VIF needs at least 2 columns")
    if n <= p:
        raise RangeError(f"need n > p, got n={n}, p={p}")
    names = names or tuple(f"x{j}" for j in range(p))
    values: list[float] = []
    collinear: list[bool] = []
    for j in range(p):
        yj = X[:, j]
        others = np.delete(X, j, axis=1)
        design = np.column_stack([np.ones(n), others])
        coef, *_ = np.linalg.lstsq(design, yj, rcond=None)
        resid = yj - design @ coef
        tss = float(np.sum((yj - yj.mean()) ** 2))
        if tss == 0.0:
            values.append(float("inf"))
            collinear.append(True)
            continue
        r2 = 1.0 - float(np.sum(resid**2)) / tss
        if r2 >= 1.0 - 1e-12:
            values.append(float("inf"))
            collinear.append(True)
        else:
            values.append(1.0 / (1.0 - r2))
            collinear.append(False)
    return VifResult(
        names=names,
        values=tuple(values),
        severe=tuple(v > VIF_SEVERE_THRESHOLD for v in values),
        collinear=tuple(collinear),
    )


def classify_quantile(values: np.ndarray, k: int) -> QuantileClasses:
    """Quantile classification into k classes of near-equal counts.

    Equal values always share a class (assigned to the lower one); when
    there are fewer distinct values than classes the class count shrinks
    and the result is flagged.
    """
    if k < 2:
        raise RangeError(f"need k >= 2, got {k}")
    vals = np.asarray(values, dtype=float)
    if np.isnan(vals).any():
        raise RangeError("classification input contains missing values")
    n = vals.size
    order = np.argsort(vals, kind="stable")
    tentative = np.empty(n, dtype=int)
    tentative[order] = (np.arange(n) * k) // n
    # collapse ties downward: every occurrence of a value takes the minimum
    # tentative class over that value
    classes = tentative.copy()
    uniq, inverse = np.unique(vals, return_inverse=True)
    for u in range(uniq.size):
        members = inverse == u
        classes[members] = tentative[members].min()
    # dense remap so class indices are contiguous
    present = np.unique(classes)
    remap = {c: i for i, c in enumerate(present.tolist())}
    classes = np.array([remap[c] for c in classes], dtype=int)
    k_eff = len(present)
    boundaries = tuple(
        float(vals[classes == c].max()) for c in range(k_eff)
    )
    return QuantileClasses(
        classes=classes,
        boundaries=boundaries,
        k_requested=k,
        k_effective=k_eff,
        reduced=k_eff < k,
    )


def classify_bivariate(dep: np.ndarray, ind: np.ndarray, k: int) -> BivariateClasses:
    """Two-variable quantile grid with a diagonal/above/below zone per region.

    The zone is diagonal when both class indices agree, above when the
    dependent class exceeds the independent class, below otherwise.
    """
    if k < 3:
        raise RangeError(f"need k >= 3 for a bivariate grid, got {k}")
    dep = np.asarray(dep, dtype=float)
    ind = np.asarray(ind, dtype=float)
    if dep.shape != ind.shape:
        raise RangeError("dep and ind must have equal length")
    dq = classify_quantile(dep, k)
    iq = classify_quantile(ind, k)
    zones = []
    for a, b in zip(dq.classes.tolist(), iq.classes.tolist()):
        if a == b:
            zones.append("diagonal")
        elif a > b:
            zones.append("above")
        else:
            zones.append("below")
    return BivariateClasses(
        rows=dq.classes,
        cols=iq.classes,
        zones=tuple(zones),
        k=k,
        dep_boundaries=dq.boundaries,
        ind_boundaries=iq.boundaries,
    )
