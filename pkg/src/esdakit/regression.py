"""Local spatial regression: OLS, GWR, and multiscale GWR.

All models calibrate on z-scored variables (population std), with the
scaling parameters retained so narrative values can be reported on the
raw scale. GWR solves one weighted least-squares system per location
with a rank-revealing QR; MGWR backfits additive single-covariate
surfaces, each with its own golden-section bandwidth, while tracking
per-surface hat matrices so effective parameter counts stay consistent
(sum of per-surface traces equals the total hat trace by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .dataset import GeoFeatureTable
from .errors import (
    BandwidthSearchError,
    ConvergenceError,
    DegenerateVariableError,
    EsdaError,
    JobError,
    LocalSingularityError,
    OversaturatedModelError,
    RangeError,
    SingularDesignError,
    SpecValidationError,
    UndefinedStatisticError,
)

KERNELS = ("bisquare", "gaussian", "boxcar")
FAMILIES = ("ols", "gwr", "mgwr")
BANDWIDTH_MODES = ("adaptive", "fixed")

# expansion of the kth-neighbor distance so truncated kernels keep the
# boundary point at positive weight (makes bandwidth=n reduce to OLS)
ADAPTIVE_EPS = 1e-7

# relative pivot tolerance for rank checks in local solves
PIVOT_RTOL = 1e-10

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Convergence:
    tolerance: float = 1e-5
    max_iterations: int = 200


@dataclass(frozen=True)
class ModelSpec:
    dependent: str
    independents: tuple[str, ...]
    family: str = "gwr"
    kernel: str = "bisquare"
    bandwidth_mode: str = "adaptive"
    search_range: tuple[float, float] | None = None
    convergence: Convergence = field(default_factory=Convergence)

    def validate(self, table: GeoFeatureTable | None = None) -> None:
        if self.family not in FAMILIES:
            raise SpecValidationError(f"unknown family {self.family!r}")
        if self.kernel not in KERNELS:
            raise SpecValidationError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth_mode not in BANDWIDTH_MODES:
            raise SpecValidationError(
                f"unknown bandwidth mode {self.bandwidth_mode!r}"
            )
        if self.family in ("gwr", "mgwr") and not self.independents:
            raise SpecValidationError(
                f"{self.family} requires at least one independent variable"
            )
        if self.dependent in self.independents:
            raise SpecValidationError(
                f"dependent {self.dependent!r} also listed as independent"
            )
        if len(set(self.independents)) != len(self.independents):
            raise SpecValidationError("duplicate independent variables")
        if self.search_range is not None:
            lo, hi = self.search_range
            if not lo < hi:
                raise SpecValidationError(
                    f"search range must satisfy lo < hi, got [{lo}, {hi}]"
                )
            if self.bandwidth_mode == "adaptive" and lo < len(self.independents) + 2:
                raise SpecValidationError(
                    f"adaptive lower bound must be >= p+2 = "
                    f"{len(self.independents) + 2}, got {lo}"
                )
        if table is not None:
            for name in (self.dependent, *self.independents):
                if name not in table.columns:
                    raise SpecValidationError(
                        f"column {name!r} not in dataset", column=name
                    )
            n = len(table.fitting_rows())
            if self.search_range is not None and self.bandwidth_mode == "adaptive":
                if self.search_range[1] > n:
                    raise SpecValidationError(
                        f"adaptive upper bound {self.search_range[1]} exceeds n={n}"
                    )

    def surface_names(self) -> tuple[str, ...]:
        return ("intercept", *self.independents)


@dataclass(frozen=True, eq=False)
class CalibratedModel:
    spec: ModelSpec
    surfaces: tuple[str, ...]
    row_index: tuple[int, ...]  # table rows used for fitting
    coefficients: np.ndarray  # n x (p+1), intercept first
    bandwidths: float | tuple[float, ...] | None  # None OLS, scalar GWR, vector MGWR
    fitted: np.ndarray
    residuals: np.ndarray  # observed - fitted, standardized scale
    hat_trace: float
    hat_diagonal: np.ndarray
    enp_per_surface: tuple[float, ...]
    local_se: np.ndarray  # n x (p+1)
    sigma2: float
    rss: float
    standardization_params: dict[str, tuple[float, float]]  # name -> (mean, std)
    converged: bool = True
    iterations: int = 0
    soc_history: tuple[float, ...] = ()
    rss_history: tuple[float, ...] = ()
    search: tuple["BandwidthSearch", ...] = ()

    @property
    def n(self) -> int:
        return int(self.coefficients.shape[0])


@dataclass(frozen=True)
class BandwidthSearch:
    bandwidth: float
    score: float
    boundary: bool
    evaluations: int
    probes: tuple[tuple[float, float], ...]  # (bandwidth, score) in probe order


@dataclass(frozen=True, eq=False)
class OlsFit:
    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    hat_diagonal: np.ndarray


def standardize(
    table: GeoFeatureTable, spec: ModelSpec
) -> tuple[np.ndarray, np.ndarray, dict[str, tuple[float, float]], tuple[int, ...]]:
    """Design matrix (intercept first), target, scaling params, row index.

    Restricted to rows without missing values; z-scores use the population
    std so [2, 4, 6] maps to [-1.2247.., 0, 1.2247..].
    """
    spec.validate(table)
    rows = np.array(table.fitting_rows(), dtype=int)
    if rows.size == 0:
        raise RangeError("no complete rows available for fitting")
    params: dict[str, tuple[float, float]] = {}

    def zscore(name: str) -> np.ndarray:
        col = table.column(name)[rows]
        mean = float(col.mean())
        std = float(col.std())
        if std == 0.0:
            raise DegenerateVariableError(
                f"column {name!r} is constant over fitting rows", column=name
            )
        params[name] = (mean, std)
        return (col - mean) / std

    y = zscore(spec.dependent)
    cols = [np.ones(rows.size)]
    for name in spec.independents:
        cols.append(zscore(name))
    X = np.column_stack(cols)
    return X, y, params, tuple(int(r) for r in rows)


def unstandardize(values: np.ndarray, params: tuple[float, float]) -> np.ndarray:
    mean, std = params
    return np.asarray(values) * std + mean


def raw_scale_coefficients(model: CalibratedModel, surface: str) -> np.ndarray:
    """Coefficient surface expressed in raw units of the variables.

    Slopes rescale by sd(y)/sd(x); the intercept is reported as the
    expected raw dependent value at average covariates.
    """
    j = model.surfaces.index(surface)
    y_mean, y_std = model.standardization_params[model.spec.dependent]
    if surface == "intercept":
        return y_mean + y_std * model.coefficients[:, 0]
    _, x_std = model.standardization_params[surface]
    return model.coefficients[:, j] * y_std / x_std


def fit_ols(
    X: np.ndarray, y: np.ndarray, column_names: tuple[str, ...] | None = None
) -> OlsFit:
    """Least squares via pivoted QR with hat diagonal."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    if n <= m:
        raise RangeError(f"need n > p+1, got n={n}, p+1={m}")
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(diag >= PIVOT_RTOL * diag[0]))
    if rank < m:
        names = column_names or tuple(f"col{j}" for j in range(m))
        dependent_cols = [names[j] for j in sorted(piv[rank:].tolist())]
        raise SingularDesignError(
            "design matrix is rank deficient", columns=dependent_cols
        )
    beta = np.empty(m)
    beta[piv] = linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ beta
    return OlsFit(
        coefficients=beta,
        fitted=fitted,
        residuals=y - fitted,
        hat_diagonal=(Q**2).sum(axis=1),
    )


def kernel_weights(distances: np.ndarray, bandwidth: float, kernel: str) -> np.ndarray:
    """Weight vector for one location's distance profile."""
    if bandwidth <= 0.0:
        raise RangeError(f"bandwidth must be > 0, got {bandwidth}")
    if kernel not in KERNELS:
        raise RangeError(f"unknown kernel {kernel!r}")
    d = np.asarray(distances, dtype=float)
    u = d / bandwidth
    if kernel == "bisquare":
        return np.where(u < 1.0, (1.0 - u**2) ** 2, 0.0)
    if kernel == "gaussian":
        return np.exp(-0.5 * u**2)
    return (u < 1.0).astype(float)


def gaussian_aicc(n: int, rss: float, k: float) -> float:
    """Corrected AIC from the Gaussian log-likelihood at the MLE.

    AIC = 2k - 2 log l; AICc adds 2k(k+1)/(n-k-1). k is the effective
    parameter count (hat trace for local models, p+1 for OLS).
    """
    if n - k - 1.0 <= 0.0:
        raise OversaturatedModelError(
            f"effective parameters k={k:.2f} leave no error dof at n={n}",
            n=n,
            k=k,
        )
    if rss <= 0.0:
        raise UndefinedStatisticError("zero residual sum of squares")
    loglik = -0.5 * n * (math.log(2.0 * math.pi) + math.log(rss / n) + 1.0)
    aic = 2.0 * k - 2.0 * loglik
    return aic + 2.0 * k * (k + 1.0) / (n - k - 1.0)


def _aicc_or_inf(n: int, rss: float, k: float) -> float:
    # bandwidth probes near interpolation are inadmissible, not errors
    if n - k - 1.0 <= 0.0 or rss <= 0.0:
        return math.inf
    return gaussian_aicc(n, rss, k)


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    return cdist(coords, coords)


def _adaptive_cutoffs(D: np.ndarray, bandwidth: float) -> np.ndarray:
    n = D.shape[0]
    kth = int(math.ceil(bandwidth))
    kth = min(max(kth, 1), n)
    return np.partition(D, kth - 1, axis=1)[:, kth - 1] * (1.0 + ADAPTIVE_EPS)


def _weight_matrix(
    D: np.ndarray,
    kernel: str,
    mode: str,
    bandwidth: float,
    region_ids: tuple[str, ...],
) -> np.ndarray:
    if mode == "adaptive":
        b = _adaptive_cutoffs(D, bandwidth)
        zero = np.nonzero(b <= 0.0)[0]
        if zero.size:
            i = int(zero[0])
            raise LocalSingularityError(
                "duplicate centroids exhaust the adaptive bandwidth",
                region=region_ids[i],
                neighbor_count=int(math.ceil(bandwidth)),
            )
    else:
        if bandwidth <= 0.0:
            raise RangeError(f"bandwidth must be > 0, got {bandwidth}")
        b = np.full(D.shape[0], float(bandwidth))
    u = D / b[:, None]
    if kernel == "bisquare":
        return np.where(u < 1.0, (1.0 - u**2) ** 2, 0.0)
    if kernel == "gaussian":
        return np.exp(-0.5 * u**2)
    return (u < 1.0).astype(float)


def _gwr_solve(
    X: np.ndarray,
    y: np.ndarray,
    W: np.ndarray,
    region_ids: tuple[str, ...],
    need_se: bool,
    collect_surface_rows: bool = False,
):
    """Per-location WLS. Returns (beta, hat_diag, cct, surface_rows).

    cct[i, j] = sum_k C[j, k]^2 for C = (X'WX)^-1 X'W, the factor that
    scales sigma2 into squared standard errors. surface_rows[j] is the
    n x n map y -> x_j * beta_j, summing to the hat matrix over j.
    """
    n, m = X.shape
    beta = np.empty((n, m))
    hat_diag = np.empty(n)
    cct = np.empty((n, m)) if need_se else None
    surface_rows = (
        [np.zeros((n, n)) for _ in range(m)] if collect_surface_rows else None
    )
    for i in range(n):
        w = W[i]
        idx = np.nonzero(w > 0.0)[0]
        k = idx.size
        if k < m:
            raise LocalSingularityError(
                "too few in-bandwidth neighbors for the local solve",
                region=region_ids[i],
                neighbor_count=k,
            )
        sw = np.sqrt(w[idx])
        Xs = X[idx] * sw[:, None]
        Q, R, piv = linalg.qr(Xs, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        if diag[0] == 0.0 or (diag < PIVOT_RTOL * diag[0]).any():
            raise LocalSingularityError(
                "rank-deficient local design",
                region=region_ids[i],
                neighbor_count=k,
            )
        pos = int(np.searchsorted(idx, i))
        if need_se or collect_surface_rows:
            # C restricted to in-bandwidth columns, then unpivoted rows
            Mp = linalg.solve_triangular(R, Q.T * sw[None, :])
            M = np.empty_like(Mp)
            M[piv] = Mp
            beta[i] = M @ y[idx]
            hat_diag[i] = float(X[i] @ M[:, pos])
            if need_se:
                cct[i] = (M**2).sum(axis=1)
            if collect_surface_rows:
                for j in range(m):
                    surface_rows[j][i, idx] = X[i, j] * M[j]
        else:
            bp = linalg.solve_triangular(R, Q.T @ (y[idx] * sw))
            beta[i, piv] = bp
            t = linalg.solve_triangular(R, X[i, piv], trans="T")
            hat_diag[i] = float(w[i] * (t @ t))
    return beta, hat_diag, cct, surface_rows


def _effective_range(
    spec: ModelSpec, n: int, D: np.ndarray
) -> tuple[float, float]:
    if spec.search_range is not None:
        return spec.search_range
    if spec.bandwidth_mode == "adaptive":
        return (float(len(spec.independents) + 2), float(n))
    positive = D[D > 0.0]
    if positive.size == 0:
        raise RangeError("all centroids coincide; no usable distance scale")
    return (float(positive.min()) / 2.0, 2.0 * float(D.max()))


def golden_bandwidth(
    evaluator,
    lo: float,
    hi: float,
    mode: str = "adaptive",
    progress=None,
) -> BandwidthSearch:
    """Golden-section minimization of the evaluator over [lo, hi].

    Adaptive probes round to integers; the interval shrinks until its
    width is below one neighbor (adaptive) or 1e-3 of the range (fixed).
    The result is the best evaluated probe, ties toward the smaller
    bandwidth, flagged when it sits on a range boundary.
    """
    if not lo < hi:
        raise RangeError(f"search range must satisfy lo < hi, got [{lo}, {hi}]")
    adaptive = mode == "adaptive"
    if adaptive:
        lo, hi = float(int(round(lo))), float(int(round(hi)))
        if not lo < hi:
            raise RangeError("adaptive range collapses after integer rounding")
    scores: dict[float, float] = {}
    order: list[float] = []

    def probe(b: float) -> float:
        key = float(int(round(b))) if adaptive else float(b)
        if key not in scores:
            try:
                scores[key] = float(evaluator(key))
            except EsdaError as err:
                err.detail.setdefault("probe_bandwidth", key)
                raise
            order.append(key)
            if progress is not None:
                alive = progress(
                    {
                        "phase": "bandwidth_search",
                        "iteration": len(order),
                        "bandwidth": key,
                        "aicc": scores[key],
                    }
                )
                if alive is False:
                    raise JobError("cancelled during bandwidth search")
        return scores[key]

    probe(lo)
    probe(hi)
    a, b = float(lo), float(hi)
    tol = 1.0 if adaptive else 1e-3 * (hi - lo)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = probe(c), probe(d)
    while (b - a) >= tol:
        if fc <= fd:  # ties shrink toward the smaller bandwidth
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = probe(d)
    best_b, best_s = min(scores.items(), key=lambda kv: (kv[1], kv[0]))
    if not math.isfinite(best_s):
        raise BandwidthSearchError(
            "no admissible bandwidth in the search range", lo=lo, hi=hi
        )
    result = best_b if not adaptive else float(int(best_b))
    return BandwidthSearch(
        bandwidth=result,
        score=best_s,
        boundary=(result in (lo, hi)),
        evaluations=len(order),
        probes=tuple((k, scores[k]) for k in order),
    )


def gwr_fit(
    table: GeoFeatureTable,
    spec: ModelSpec,
    bandwidth: float,
    progress=None,
) -> CalibratedModel:
    X, y, params, rows = standardize(table, spec)
    ids = tuple(table.region_ids[r] for r in rows)
    D = pairwise_distances(table.centroids_xy[np.array(rows)])
    return _gwr_model(table, spec, X, y, params, rows, ids, D, bandwidth, search=())


def _gwr_model(
    table, spec, X, y, params, rows, ids, D, bandwidth, search
) -> CalibratedModel:
    n, m = X.shape
    W = _weight_matrix(D, spec.kernel, spec.bandwidth_mode, bandwidth, ids)
    beta, hat_diag, cct, _ = _gwr_solve(X, y, W, ids, need_se=True)
    fitted = (X * beta).sum(axis=1)
    residuals = y - fitted
    rss = float(residuals @ residuals)
    hat_trace = float(hat_diag.sum())
    sigma2 = rss / (n - hat_trace)
    local_se = np.sqrt(np.maximum(sigma2 * cct, 0.0))
    enp = hat_trace / m
    return CalibratedModel(
        spec=spec,
        surfaces=spec.surface_names(),
        row_index=rows,
        coefficients=beta,
        bandwidths=float(bandwidth),
        fitted=fitted,
        residuals=residuals,
        hat_trace=hat_trace,
        hat_diagonal=hat_diag,
        enp_per_surface=tuple([enp] * m),
        local_se=local_se,
        sigma2=sigma2,
        rss=rss,
        standardization_params=params,
        search=search,
    )


def _gwr_aicc(X, y, D, spec, ids, bandwidth) -> float:
    W = _weight_matrix(D, spec.kernel, spec.bandwidth_mode, bandwidth, ids)
    beta, hat_diag, _, _ = _gwr_solve(X, y, W, ids, need_se=False)
    fitted = (X * beta).sum(axis=1)
    rss = float(((y - fitted) ** 2).sum())
    return _aicc_or_inf(X.shape[0], rss, float(hat_diag.sum()))


def _single_fit(x, e, W, ids, need_matrix=False):
    """Single-covariate GWR of e on x: beta, fitted, hat diagonal, smoother."""
    den = W @ (x * x)
    bad = ~(den > 0.0)
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        raise LocalSingularityError(
            "covariate locally vanishes within the bandwidth",
            region=ids[i],
            neighbor_count=int(np.count_nonzero(W[i] > 0.0)),
        )
    beta = (W @ (x * e)) / den
    fitted = x * beta
    hat_diag = np.diag(W) * x * x / den
    A = None
    if need_matrix:
        A = (x[:, None] * W * x[None, :]) / den[:, None]
    return beta, fitted, hat_diag, A


def _single_aicc(x, e, D, spec, ids, bandwidth) -> float:
    W = _weight_matrix(D, spec.kernel, spec.bandwidth_mode, bandwidth, ids)
    _, fitted, hat_diag, _ = _single_fit(x, e, W, ids)
    rss = float(((e - fitted) ** 2).sum())
    return _aicc_or_inf(x.size, rss, float(hat_diag.sum()))


def mgwr_fit(
    table: GeoFeatureTable, spec: ModelSpec, progress=None
) -> CalibratedModel:
    """Backfitting calibration with one bandwidth per coefficient surface.

    Starts from a GWR fit at its optimal bandwidth and iterates partial
    single-covariate fits, re-selecting each surface's bandwidth by
    golden section every pass. Per-surface hat matrices follow the update
    R_j <- A_j (I - S + R_j) with S the running total.
    """
    X, y, params, rows = standardize(table, spec)
    ids = tuple(table.region_ids[r] for r in rows)
    D = pairwise_distances(table.centroids_xy[np.array(rows)])
    n, m = X.shape
    lo, hi = _effective_range(spec, n, D)

    init_search = golden_bandwidth(
        lambda b: _gwr_aicc(X, y, D, spec, ids, b),
        lo,
        hi,
        spec.bandwidth_mode,
        progress=progress,
    )
    W0 = _weight_matrix(
        D, spec.kernel, spec.bandwidth_mode, init_search.bandwidth, ids
    )
    beta, _, _, R = _gwr_solve(
        X, y, W0, ids, need_se=False, collect_surface_rows=True
    )
    S = np.zeros((n, n))
    for Rj in R:
        S += Rj
    F = X * beta
    err = y - F.sum(axis=1)

    tol = spec.convergence.tolerance
    max_iter = spec.convergence.max_iterations
    bandwidths = [float(init_search.bandwidth)] * m
    searches: list[BandwidthSearch | None] = [None] * m
    soc_history: list[float] = []
    rss_history: list[float] = []
    eye = np.diag_indices(n)
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        F_old = F.copy()
        for j in range(m):
            xj = X[:, j]
            ej = err + F[:, j]
            sub = golden_bandwidth(
                lambda b: _single_aicc(xj, ej, D, spec, ids, b),
                lo,
                hi,
                spec.bandwidth_mode,
            )
            searches[j] = sub
            bandwidths[j] = float(sub.bandwidth)
            Wj = _weight_matrix(
                D, spec.kernel, spec.bandwidth_mode, sub.bandwidth, ids
            )
            beta_j, fj, _, Aj = _single_fit(xj, ej, Wj, ids, need_matrix=True)
            B = R[j] - S
            B[eye] += 1.0
            Rj_new = Aj @ B
            S += Rj_new - R[j]
            R[j] = Rj_new
            err = ej - fj
            F[:, j] = fj
            beta[:, j] = beta_j
        rss = float(err @ err)
        rss_history.append(rss)
        num = float(((F - F_old) ** 2).sum()) / n
        den = float((F.sum(axis=1) ** 2).sum())
        soc = math.sqrt(num / den) if den > 0.0 else math.inf
        soc_history.append(soc)
        if progress is not None:
            alive = progress(
                {
                    "phase": "backfit",
                    "iteration": iteration,
                    "soc": soc,
                    "aicc": _aicc_or_inf(n, rss, float(np.trace(S))),
                    "bandwidths": tuple(bandwidths),
                }
            )
            if alive is False:
                raise JobError("cancelled during backfitting")
        if soc < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"backfitting did not converge in {max_iter} iterations",
            soc_history=soc_history[-20:],
            bandwidths=bandwidths,
        )

    hat_diag = S[eye].copy()
    hat_trace = float(hat_diag.sum())
    enp = tuple(float(np.trace(Rj)) for Rj in R)
    fitted = F.sum(axis=1)
    residuals = y - fitted
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - hat_trace)
    cct = np.empty((n, m))
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(m):
            scaled = R[j] / X[:, j][:, None]
            cct[:, j] = (scaled**2).sum(axis=1)
    local_se = np.sqrt(sigma2 * cct)
    return CalibratedModel(
        spec=spec,
        surfaces=spec.surface_names(),
        row_index=rows,
        coefficients=beta,
        bandwidths=tuple(bandwidths),
        fitted=fitted,
        residuals=residuals,
        hat_trace=hat_trace,
        hat_diagonal=hat_diag,
        enp_per_surface=enp,
        local_se=local_se,
        sigma2=sigma2,
        rss=rss,
        standardization_params=params,
        converged=True,
        iterations=iteration,
        soc_history=tuple(soc_history),
        rss_history=tuple(rss_history),
        search=tuple(s for s in searches if s is not None),
    )


def calibrate(
    table: GeoFeatureTable,
    spec: ModelSpec,
    bandwidth: float | None = None,
    progress=None,
) -> CalibratedModel:
    """Dispatch to the requested family; GWR searches its bandwidth when
    none is supplied."""
    spec.validate(table)
    if spec.family == "mgwr":
        return mgwr_fit(table, spec, progress=progress)

    X, y, params, rows = standardize(table, spec)
    n, m = X.shape
    if spec.family == "ols":
        names = spec.surface_names()
        fit = fit_ols(X, y, column_names=names)
        rss = float(fit.residuals @ fit.residuals)
        hat_trace = float(m)
        sigma2 = rss / (n - hat_trace)
        xtx_inv = np.linalg.inv(X.T @ X)
        se = np.sqrt(sigma2 * np.diag(xtx_inv))
        if progress is not None:
            progress({"phase": "finalize", "iteration": 1, "aicc": None})
        return CalibratedModel(
            spec=spec,
            surfaces=names,
            row_index=rows,
            coefficients=np.tile(fit.coefficients, (n, 1)),
            bandwidths=None,
            fitted=fit.fitted,
            residuals=fit.residuals,
            hat_trace=hat_trace,
            hat_diagonal=fit.hat_diagonal,
            enp_per_surface=tuple([1.0] * m),
            local_se=np.tile(se, (n, 1)),
            sigma2=sigma2,
            rss=rss,
            standardization_params=params,
        )

    ids = tuple(table.region_ids[r] for r in rows)
    D = pairwise_distances(table.centroids_xy[np.array(rows)])
    search: tuple[BandwidthSearch, ...] = ()
    if bandwidth is None:
        lo, hi = _effective_range(spec, n, D)
        found = golden_bandwidth(
            lambda b: _gwr_aicc(X, y, D, spec, ids, b),
            lo,
            hi,
            spec.bandwidth_mode,
            progress=progress,
        )
        bandwidth = found.bandwidth
        search = (found,)
    model = _gwr_model(
        table, spec, X, y, params, rows, ids, D, bandwidth, search=search
    )
    if progress is not None:
        progress(
            {
                "phase": "finalize",
                "iteration": max(1, len(search[0].probes) if search else 1),
                "bandwidth": bandwidth,
                "aicc": _aicc_or_inf(n, model.rss, model.hat_trace),
            }
        )
    return model
