import math

import numpy as np
import pytest
from scipy import stats

from esdakit.dataset import SpatialWeights, load_geojson
from esdakit.diagnostics import (
    compute_diagnostics,
    cooks_d,
    global_diagnostics,
    local_r2,
    morans_i,
    significance_mask,
    std_residuals,
)
from esdakit.errors import (
    OversaturatedModelError,
    RangeError,
    UndefinedStatisticError,
)
from esdakit.regression import CalibratedModel, ModelSpec, calibrate
from esdakit.synthetic import grid_geojson


def grid_table(rows, cols, columns):
    return load_geojson(grid_geojson(rows, cols, columns))


def rook_weights(rows, cols):
    def nbrs(r, c):
        out = []
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                out.append(rr * cols + cc)
        return tuple(sorted(out))

    return SpatialWeights(
        neighbors=tuple(nbrs(r, c) for r in range(rows) for c in range(cols))
    )


# independent oracle: naive double-sum Moran's I with row-standardized weights
def moran_oracle(values, weights):
    vals = np.asarray(values, dtype=float)
    n = vals.size
    z = vals - vals.mean()
    num = 0.0
    w_sum = 0.0
    for i, nbrs in enumerate(weights.neighbors):
        k = len(nbrs)
        for j in nbrs:
            num += (1.0 / k) * z[i] * z[j]
            w_sum += 1.0 / k
    return (n / w_sum) * num / (z @ z)


def fake_model(**overrides):
    n = 4
    base = dict(
        spec=ModelSpec(dependent="y", independents=("x",)),
        surfaces=("intercept", "x"),
        row_index=tuple(range(n)),
        coefficients=np.zeros((n, 2)),
        bandwidths=4.0,
        fitted=np.zeros(n),
        residuals=np.array([0.5, -0.5, 0.25, -0.25]),
        hat_trace=2.0,
        hat_diagonal=np.full(n, 0.5),
        enp_per_surface=(1.0, 1.0),
        local_se=np.ones((n, 2)),
        sigma2=1.0,
        rss=0.625,
        standardization_params={"y": (0.0, 1.0), "x": (0.0, 1.0)},
    )
    base.update(overrides)
    return CalibratedModel(**base)


def noisy_table(seed=0, rows=7, cols=7, slope=2.0, noise=0.4):
    rng = np.random.default_rng(seed)
    n = rows * cols
    x = rng.standard_normal(n)
    y = 1.0 + slope * x + rng.normal(0.0, noise, n)
    return grid_table(rows, cols, {"y": y, "x": x})


class TestGlobal:
    def test_aicc_formula_oracle(self):
        table = noisy_table(seed=1, rows=5, cols=10)
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        model = calibrate(table, spec)
        diag = global_diagnostics(model)
        n, k = 50, 2.0
        ll = -0.5 * n * (math.log(2 * math.pi) + math.log(model.rss / n) + 1.0)
        expect = 2 * k - 2 * ll + 2 * k * (k + 1) / (n - k - 1)
        assert diag.aicc == pytest.approx(expect, abs=1e-8)

    def test_near_perfect_fit(self):
        table = noisy_table(seed=2, rows=5, cols=6, noise=1e-9)
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        diag = global_diagnostics(calibrate(table, spec))
        assert diag.r2 == pytest.approx(1.0, abs=1e-12)

    def test_noise_target_low_r2(self):
        rng = np.random.default_rng(3)
        table = grid_table(
            8, 8, {"y": rng.standard_normal(64), "x": rng.standard_normal(64)}
        )
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        diag = global_diagnostics(calibrate(table, spec))
        assert diag.r2 < 0.1
        assert diag.adj_r2 <= diag.r2

    def test_adj_below_r2_for_local_model(self):
        table = noisy_table(seed=4)
        spec = ModelSpec(dependent="y", independents=("x",))
        diag = global_diagnostics(calibrate(table, spec, bandwidth=20))
        assert diag.adj_r2 < diag.r2

    def test_oversaturated(self):
        model = fake_model(hat_trace=3.5)
        with pytest.raises(OversaturatedModelError):
            global_diagnostics(model)


class TestLocalR2:
    def test_boxcar_full_bandwidth_matches_global(self):
        table = noisy_table(seed=5, rows=6, cols=6)
        spec = ModelSpec(dependent="y", independents=("x",), kernel="boxcar")
        model = calibrate(table, spec, bandwidth=36)
        glob = global_diagnostics(model)
        loc = local_r2(model, table)
        np.testing.assert_allclose(loc.values, glob.r2, atol=1e-8)
        assert not loc.undefined_flags.any()

    def test_locally_exact_fit_is_one(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(36)
        table = grid_table(6, 6, {"y": 2.0 * x + 1.0, "x": x})
        spec = ModelSpec(dependent="y", independents=("x",))
        model = calibrate(table, spec, bandwidth=12)
        loc = local_r2(model, table)
        ok = ~loc.undefined_flags
        np.testing.assert_allclose(loc.values[ok], 1.0, atol=1e-8)

    def test_noise_target_low_everywhere(self):
        rng = np.random.default_rng(7)
        table = grid_table(
            7, 7, {"y": rng.standard_normal(49), "x": rng.standard_normal(49)}
        )
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        model = calibrate(table, spec)
        loc = local_r2(model, table)
        assert np.nanmedian(loc.values) < 0.2

    def test_zero_local_variance_flagged(self):
        # westmost cell sees only constant y within the fixed boxcar window
        y = np.array([0.0, 0.0, 0.0, 1.0, 2.0, 3.0])
        x = np.array([0.3, -0.7, 1.2, 0.5, -0.2, 0.9])
        table = grid_table(1, 6, {"y": y, "x": x})
        spec = ModelSpec(
            dependent="y",
            independents=("x",),
            kernel="boxcar",
            bandwidth_mode="fixed",
        )
        model = calibrate(table, spec, bandwidth=6000.0)
        loc = local_r2(model, table)
        assert loc.undefined_flags[0]
        assert math.isnan(loc.values[0])

    def test_clamped_range(self):
        table = noisy_table(seed=8)
        spec = ModelSpec(dependent="y", independents=("x",))
        model = calibrate(table, spec, bandwidth=15)
        loc = local_r2(model, table)
        ok = ~np.isnan(loc.clamped)
        assert ((loc.clamped[ok] >= 0.0) & (loc.clamped[ok] <= 1.0)).all()
        # raw values below zero must be flagged, not silently moved
        low = loc.values < 0.0
        assert (loc.clamp_flags[low] == True).all()  # noqa: E712


class TestCooksD:
    def test_leave_one_out_oracle(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(20)
        y = 1.0 + 2.0 * x + rng.normal(0.0, 0.3, 20)
        table = grid_table(4, 5, {"y": y, "x": x})
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        model = calibrate(table, spec)
        res = cooks_d(model)
        X = np.column_stack([np.ones(20), (x - x.mean()) / x.std()])
        ys = (y - y.mean()) / y.std()
        beta = np.linalg.solve(X.T @ X, X.T @ ys)
        k = 2.0
        for i in range(20):
            keep = np.arange(20) != i
            bi = np.linalg.solve(
                X[keep].T @ X[keep], X[keep].T @ ys[keep]
            )
            d = beta - bi
            oracle = float(d @ (X.T @ X) @ d) / (k * model.sigma2)
            assert res.values[i] == pytest.approx(oracle, abs=1e-6)

    def test_gross_outlier_masked(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(30)
        y = 1.0 + 2.0 * x + rng.normal(0.0, 0.2, 30)
        y[7] += 25.0
        table = grid_table(5, 6, {"y": y, "x": x})
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        res = cooks_d(calibrate(table, spec))
        assert res.values.argmax() == 7
        assert res.mask[7]

    def test_balanced_design_unmasked(self):
        n = 24
        x = np.tile([1.0, -1.0], n // 2)
        pattern = np.tile([1.0, 1.0, -1.0, -1.0], n // 4)
        y = x + 0.1 * pattern
        table = grid_table(4, 6, {"y": y, "x": x})
        spec = ModelSpec(dependent="y", independents=("x",), family="ols")
        res = cooks_d(calibrate(table, spec))
        assert np.ptp(res.values) < 1e-10
        assert not res.mask.any()

    def test_leverage_one_sentinel(self):
        model = fake_model(hat_diagonal=np.array([1.0, 0.5, 0.5, 0.5]))
        res = cooks_d(model)
        assert math.isinf(res.values[0])
        assert res.mask[0]
        assert res.infinite_flags[0]

    def test_threshold_monotone(self):
        table = noisy_table(seed=11)
        res = cooks_d(calibrate(table, ModelSpec("y", ("x",), family="ols")))
        lower = res.values > res.threshold / 2.0
        assert (res.mask <= lower).all()  # masked set only grows


class TestStdResiduals:
    def test_hand_formula(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal(10)
        y = 1.0 + x + rng.normal(0.0, 0.5, 10)
        table = grid_table(2, 5, {"y": y, "x": x})
        model = calibrate(table, ModelSpec("y", ("x",), family="ols"))
        res = std_residuals(model, convention="observed-predicted")
        expect = model.residuals / (
            math.sqrt(model.sigma2) * np.sqrt(1.0 - model.hat_diagonal)
        )
        np.testing.assert_allclose(res.values, expect, atol=1e-12)

    def test_labels_partition(self):
        table = noisy_table(seed=13)
        model = calibrate(table, ModelSpec("y", ("x",), family="ols"))
        res = std_residuals(model)
        assert set(res.labels) <= {"over", "under", "neutral"}
        assert len(res.labels) == model.n
        for v, lab in zip(res.values, res.labels):
            assert lab == ("over" if v > 0 else "under" if v < 0 else "neutral")

    def test_exactly_zero_residual_neutral(self):
        model = fake_model(residuals=np.array([0.0, -0.5, 0.25, -0.25]))
        res = std_residuals(model)
        assert res.labels[0] == "neutral"
        assert res.values[0] == 0.0

    def test_convention_antisymmetry(self):
        table = noisy_table(seed=14)
        model = calibrate(table, ModelSpec("y", ("x",), family="ols"))
        a = std_residuals(model, "predicted-observed")
        b = std_residuals(model, "observed-predicted")
        np.testing.assert_allclose(a.values, -b.values)
        flip = {"over": "under", "under": "over", "neutral": "neutral"}
        assert tuple(flip[lab] for lab in a.labels) == b.labels

    def test_unknown_convention(self):
        with pytest.raises(RangeError):
            std_residuals(fake_model(), "signed")


class TestMoran:
    def test_checkerboard_strongly_negative(self):
        w = rook_weights(4, 4)
        vals = np.array([(r + c) % 2 for r in range(4) for c in range(4)], float)
        res = morans_i(vals, w, permutations=99, seed=42)
        assert res.statistic == pytest.approx(-1.0, abs=1e-12)
        assert res.statistic == pytest.approx(moran_oracle(vals, w), abs=1e-12)

    def test_homogeneous_halves_positive(self):
        w = rook_weights(4, 4)
        vals = np.array([0.0 if c < 2 else 1.0 for _ in range(4) for c in range(4)])
        res = morans_i(vals, w, permutations=99, seed=42)
        assert res.statistic > 0.0
        assert res.statistic == pytest.approx(moran_oracle(vals, w), abs=1e-12)

    def test_label_permutation_invariance(self):
        w = rook_weights(3, 3)
        rng = np.random.default_rng(15)
        vals = rng.standard_normal(9)
        perm = rng.permutation(9)
        inv = np.argsort(perm)
        permuted = SpatialWeights(
            neighbors=tuple(
                tuple(sorted(int(inv[j]) for j in w.neighbors[perm[i]]))
                for i in range(9)
            )
        )
        a = morans_i(vals[perm], permuted, permutations=9, seed=0)
        b = morans_i(vals, w, permutations=9, seed=0)
        assert a.statistic == pytest.approx(b.statistic, abs=1e-12)

    def test_seeded_p_bit_exact(self):
        w = rook_weights(4, 4)
        rng = np.random.default_rng(16)
        vals = rng.standard_normal(16)
        a = morans_i(vals, w, permutations=199, seed=7)
        b = morans_i(vals, w, permutations=199, seed=7)
        assert a.pseudo_p == b.pseudo_p
        assert 0.0 < a.pseudo_p <= 1.0

    def test_constant_rejected(self):
        with pytest.raises(UndefinedStatisticError):
            morans_i(np.ones(9), rook_weights(3, 3), permutations=9, seed=0)


class TestSignificance:
    def test_zero_surface_insignificant(self):
        model = fake_model(
            coefficients=np.column_stack([np.zeros(4), np.full(4, 5.0)]),
            local_se=np.full((4, 2), 0.5),
        )
        res = significance_mask(model, xi=0.05)
        assert not res.mask[:, 0].any()
        assert res.mask[:, 1].all()

    def test_enp_one_reduces_to_unadjusted(self):
        table = noisy_table(seed=17)
        model = calibrate(table, ModelSpec("y", ("x",), family="ols"))
        res = significance_mask(model, xi=0.05)
        assert res.adjusted_alpha == (0.05, 0.05)
        expect = stats.t.ppf(1 - 0.025, df=model.n - 2)
        assert res.critical_t[0] == pytest.approx(expect)

    def test_strong_covariate_fully_significant(self):
        table = noisy_table(seed=18, noise=0.05)
        model = calibrate(table, ModelSpec("y", ("x",)), bandwidth=30)
        res = significance_mask(model, xi=0.05)
        j = model.surfaces.index("x")
        assert res.mask[:, j].all()
        assert np.abs(res.t_values[:, j]).min() > 10.0

    def test_monotone_in_xi(self):
        table = noisy_table(seed=19, noise=1.0)
        model = calibrate(table, ModelSpec("y", ("x",)), bandwidth=25)
        tight = significance_mask(model, xi=0.01).mask
        loose = significance_mask(model, xi=0.10).mask
        assert (tight <= loose).all()

    def test_se_zero_sentinel(self):
        se = np.full((4, 2), 0.5)
        se[2, 1] = 0.0
        model = fake_model(local_se=se)
        res = significance_mask(model)
        assert res.se_zero_flags[2, 1]
        assert res.mask[2, 1]

    def test_xi_range(self):
        with pytest.raises(RangeError):
            significance_mask(fake_model(), xi=1.5)


class TestReport:
    def test_full_report_on_gwr(self):
        from esdakit.dataset import queen_adjacency

        table = noisy_table(seed=20, rows=6, cols=6)
        weights = queen_adjacency(table)
        model = calibrate(table, ModelSpec("y", ("x",)), bandwidth=18)
        report = compute_diagnostics(
            table=table, model=model, weights=weights, seed=3
        )
        assert report.r2 > 0.5
        assert report.significance.mask.shape == (36, 2)
        assert len(report.std_residuals.labels) == 36
        assert 0.0 < report.morans_i_residuals.pseudo_p <= 1.0

    def test_weights_subset_for_flagged_rows(self):
        from esdakit.dataset import queen_adjacency

        rng = np.random.default_rng(21)
        x = rng.standard_normal(16)
        y = 1.0 + 2.0 * x + rng.normal(0.0, 0.3, 16)
        cols = {"y": y, "x": x}
        cols["x"][5] = np.nan
        table = grid_table(4, 4, cols)
        weights = queen_adjacency(table)
        model = calibrate(table, ModelSpec("y", ("x",), family="ols"))
        report = compute_diagnostics(
            table=table, model=model, weights=weights, seed=3
        )
        assert report.significance.mask.shape == (15, 2)
