"""Global and local model diagnostics plus the corrected significance mask.

Covers AICc / R^2 / adjusted R^2, kernel-weighted local R^2, Cook's
distance with its outlier mask, standardized residuals with over/under
labels, Moran's I on residuals with a seeded permutation test, and the
multiple-test-corrected local significance mask.

Residual convention: residuals are stored as observed - fitted; narrated
values and over/under labels default to the opposite sign (predicted -
observed), so over-predicted regions carry positive narrated values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dataset import GeoFeatureTable, SpatialWeights
from .errors import (
    OversaturatedModelError,
    RangeError,
    UndefinedStatisticError,
)
from .regression import (
    CalibratedModel,
    _weight_matrix,
    gaussian_aicc,
    pairwise_distances,
)

COOKS_THRESHOLD_FACTOR = 4.0
DEFAULT_XI = 0.05
DEFAULT_PERMUTATIONS = 999
RESIDUAL_CONVENTIONS = ("predicted-observed", "observed-predicted")


@dataclass(frozen=True)
class GlobalDiagnostics:
    aicc: float
    r2: float
    adj_r2: float


@dataclass(frozen=True, eq=False)
class LocalR2:
    values: np.ndarray  # raw, may be negative or NaN where undefined
    clamped: np.ndarray  # reported values limited to [0, 1]
    clamp_flags: np.ndarray  # True where raw fell outside [0, 1]
    undefined_flags: np.ndarray  # True where local weighted variance is zero
    bandwidth_used: float | None


@dataclass(frozen=True, eq=False)
class CooksD:
    values: np.ndarray
    mask: np.ndarray
    threshold: float
    infinite_flags: np.ndarray  # h_ii = 1 sentinel, always masked


@dataclass(frozen=True, eq=False)
class StdResiduals:
    values: np.ndarray  # on the narrated sign convention
    labels: tuple[str, ...]  # over | under | neutral
    convention: str


@dataclass(frozen=True)
class MoranResult:
    statistic: float
    pseudo_p: float
    permutations: int
    seed: int


@dataclass(frozen=True, eq=False)
class Significance:
    mask: np.ndarray  # n x (p+1) boolean
    t_values: np.ndarray
    adjusted_alpha: tuple[float, ...]
    critical_t: tuple[float, ...]
    se_zero_flags: np.ndarray  # sentinel entries forced significant
    xi: float


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    aicc: float
    r2: float
    adj_r2: float
    local_r2: LocalR2
    cooks_d: CooksD
    std_residuals: StdResiduals
    morans_i_residuals: MoranResult
    significance: Significance


def global_diagnostics(model: CalibratedModel) -> GlobalDiagnostics:
    """AICc, R^2, adjusted R^2 on the standardized scale.

    k is the hat trace, which for OLS equals p+1 exactly.
    """
    n = model.n
    y = model.fitted + model.residuals
    tss = float(((y - y.mean()) ** 2).sum())
    if tss == 0.0:
        raise UndefinedStatisticError("constant dependent variable")
    k = model.hat_trace
    if n - k - 1.0 <= 0.0:
        raise OversaturatedModelError(
            f"hat trace {k:.2f} leaves no error dof at n={n}", n=n, k=k
        )
    rss = model.rss
    r2 = 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1.0) / (n - k)
    aicc = gaussian_aicc(n, rss, k) if rss > 0.0 else -math.inf
    return GlobalDiagnostics(aicc=aicc, r2=r2, adj_r2=adj_r2)


def _local_weights(
    model: CalibratedModel, table: GeoFeatureTable
) -> tuple[np.ndarray, float | None]:
    n = model.n
    if model.bandwidths is None:
        return np.ones((n, n)), None
    rows = np.array(model.row_index)
    coords = table.centroids_xy[rows]
    D = pairwise_distances(coords)
    ids = tuple(table.region_ids[r] for r in rows)
    if isinstance(model.bandwidths, tuple):
        bandwidth = float(np.median(model.bandwidths))
    else:
        bandwidth = float(model.bandwidths)
    W = _weight_matrix(
        D, model.spec.kernel, model.spec.bandwidth_mode, bandwidth, ids
    )
    return W, bandwidth


def local_r2(model: CalibratedModel, table: GeoFeatureTable) -> LocalR2:
    """Kernel-weighted local R^2 of the calibrated fit around each region.

    GWR reuses the model bandwidth; MGWR uses the median of the per-surface
    bandwidths; a global model degenerates to the global R^2 everywhere.
    """
    W, bandwidth = _local_weights(model, table)
    y = model.fitted + model.residuals
    sw = W.sum(axis=1)
    wy = W @ y
    tss = W @ (y * y) - wy * wy / sw
    rss = W @ (model.residuals**2)
    undefined = tss <= 0.0
    values = np.full(model.n, np.nan)
    np.divide(rss, tss, out=values, where=~undefined)
    values = np.where(undefined, np.nan, 1.0 - values)
    clamped = np.clip(values, 0.0, 1.0)
    clamp_flags = ~undefined & ((values < 0.0) | (values > 1.0))
    return LocalR2(
        values=values,
        clamped=np.where(undefined, np.nan, clamped),
        clamp_flags=clamp_flags,
        undefined_flags=undefined,
        bandwidth_used=bandwidth,
    )


def cooks_d(model: CalibratedModel) -> CooksD:
    """Influence per region: D_i = (e_std^2 / k) * h_ii / (1 - h_ii)."""
    n = model.n
    h = model.hat_diagonal
    k = model.hat_trace
    sigma = math.sqrt(model.sigma2)
    at_limit = h >= 1.0 - 1e-12
    denom = np.where(at_limit, np.nan, 1.0 - h)
    e_std2 = (model.residuals / (sigma * np.sqrt(denom))) ** 2
    values = (e_std2 / k) * (h / denom)
    values = np.where(at_limit, np.inf, values)
    threshold = COOKS_THRESHOLD_FACTOR / n
    mask = values > threshold
    mask = mask | at_limit
    return CooksD(
        values=values,
        mask=mask,
        threshold=threshold,
        infinite_flags=at_limit,
    )


def std_residuals(
    model: CalibratedModel, convention: str = "predicted-observed"
) -> StdResiduals:
    """Standardized residuals e/(sigma sqrt(1-h)) on the narrated convention.

    With the default convention, positive values mark over-predicted
    regions; flipping the convention flips values and labels together.
    """
    if convention not in RESIDUAL_CONVENTIONS:
        raise RangeError(f"unknown residual convention {convention!r}")
    sigma = math.sqrt(model.sigma2)
    h = np.clip(model.hat_diagonal, None, 1.0)
    denom = sigma * np.sqrt(np.maximum(1.0 - h, 0.0))
    raw = model.residuals  # observed - fitted
    with np.errstate(divide="ignore", invalid="ignore"):
        e_std = np.where(
            denom > 0.0,
            raw / np.where(denom > 0.0, denom, 1.0),
            np.sign(raw) * np.inf,
        )
    e_std = np.where((denom == 0.0) & (raw == 0.0), 0.0, e_std)
    if convention == "predicted-observed":
        values = -e_std
    else:
        values = e_std
    labels = tuple(
        "over" if v > 0.0 else ("under" if v < 0.0 else "neutral") for v in values
    )
    return StdResiduals(values=values, labels=labels, convention=convention)


def _moran_statistic(z: np.ndarray, rows: tuple, w_sum: float, n: int) -> float:
    num = 0.0
    for i, (idx, wts) in enumerate(rows):
        if idx.size:
            num += z[i] * float(wts @ z[idx])
    return (n / w_sum) * num / float(z @ z)


def morans_i(
    values: np.ndarray,
    weights: SpatialWeights,
    permutations: int = DEFAULT_PERMUTATIONS,
    *,
    seed: int,
) -> MoranResult:
    """Moran's I with a seeded permutation pseudo p-value.

    Weights are row-standardized; the pseudo-p is the one-sided
    (smaller-tail) permutation rank (count + 1)/(permutations + 1).
    """
    vals = np.asarray(values, dtype=float)
    n = vals.size
    if n != len(weights.neighbors):
        raise RangeError("values and weights have different lengths")
    if np.ptp(vals) == 0.0:
        raise UndefinedStatisticError("Moran's I undefined for constant values")
    if permutations < 1:
        raise RangeError("permutations must be >= 1")
    std = weights.row_standardized()
    wrows = std.weight_rows()
    rows = []
    w_sum = 0.0
    for i, nbrs in enumerate(std.neighbors):
        idx = np.array(nbrs, dtype=int)
        wts = np.asarray(wrows[i], dtype=float)
        rows.append((idx, wts))
        w_sum += float(wts.sum())
    if w_sum == 0.0:
        raise UndefinedStatisticError("weights matrix has no links")
    z = vals - vals.mean()
    observed = _moran_statistic(z, rows, w_sum, n)
    rng = np.random.default_rng(seed)
    sims = np.empty(permutations)
    for p in range(permutations):
        zp = rng.permutation(z)
        sims[p] = _moran_statistic(zp, rows, w_sum, n)
    larger = int(np.count_nonzero(sims >= observed))
    if permutations - larger < larger:
        larger = permutations - larger
    pseudo_p = (larger + 1.0) / (permutations + 1.0)
    return MoranResult(
        statistic=observed,
        pseudo_p=pseudo_p,
        permutations=permutations,
        seed=seed,
    )


def significance_mask(model: CalibratedModel, xi: float = DEFAULT_XI) -> Significance:
    """Per-surface corrected local t-tests: alpha_j = xi / enp_j.

    Zero standard errors mark exact relations; those entries are flagged
    and forced significant rather than divided through.
    """
    if not 0.0 < xi < 1.0:
        raise RangeError(f"xi must be in (0, 1), got {xi}")
    n = model.n
    dof = n - model.hat_trace
    if dof <= 0.0:
        raise OversaturatedModelError(
            f"no residual dof for the t reference (n={n}, "
            f"hat trace={model.hat_trace:.2f})"
        )
    se = model.local_se
    se_zero = se == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se_zero, np.inf, model.coefficients / np.where(se_zero, 1.0, se))
    t = np.where(np.isnan(t), 0.0, t)  # inf se (vanishing covariate) -> no signal
    alphas = []
    crits = []
    for enp in model.enp_per_surface:
        alpha_j = min(xi / max(enp, 1e-12), 1.0 - 1e-12)
        alphas.append(alpha_j)
        crits.append(float(stats.t.ppf(1.0 - alpha_j / 2.0, df=dof)))
    crit = np.array(crits)
    mask = np.abs(t) >= crit[None, :]
    mask = mask | se_zero
    return Significance(
        mask=mask,
        t_values=t,
        adjusted_alpha=tuple(alphas),
        critical_t=tuple(crits),
        se_zero_flags=se_zero,
        xi=xi,
    )


def compute_diagnostics(
    model: CalibratedModel,
    table: GeoFeatureTable,
    weights: SpatialWeights,
    *,
    xi: float = DEFAULT_XI,
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int,
    convention: str = "predicted-observed",
) -> DiagnosticsReport:
    """Assemble the full indicator suite for one calibrated model.

    The spatial weights must cover the model's fitting rows (the subset is
    taken here when rows were excluded at ingestion).
    """
    glob = global_diagnostics(model)
    rows = model.row_index
    if len(weights.neighbors) != len(rows):
        weights = weights.subset(rows)
    resid = std_residuals(model, convention)
    return DiagnosticsReport(
        aicc=glob.aicc,
        r2=glob.r2,
        adj_r2=glob.adj_r2,
        local_r2=local_r2(model, table),
        cooks_d=cooks_d(model),
        std_residuals=resid,
        morans_i_residuals=morans_i(
            model.residuals, weights, permutations, seed=seed
        ),
        significance=significance_mask(model, xi),
    )
