import numpy as np
import pytest

from oracles import brute_cluster_meat
from panelfe import (BootstrapError, DomainError, EstimateReport, Grouping, JackknifeError, LsConfig,
                     PanelData, PanelError, bootstrap_cluster_se, cluster_se, estimate_gfe_given_groups,
                     estimate_ls, hc_se, jackknife_combine, jackknife_correct)
from panelfe.inference import (cluster_index, cluster_meat, cluster_parts, hc_meat, hc_parts,
                               resample_units)


def grouping(labels):
    return Grouping.from_labels(labels)


class TestHc:
    def test_constant_residual(self):
        x = np.array([[1.0, -1.0], [1.0, -1.0]])  # sum 0, sum of squares 4
        c = 0.3
        p = PanelData(y=2.0 * x + c, x=(x,))
        est = estimate_ls(p, LsConfig(r=0))
        assert hc_se(est, p)[0] == pytest.approx(abs(c) / 2, rel=1e-12)

    def test_loop_oracle_3x3(self, rng):
        p = PanelData(y=rng.standard_normal((3, 3)), x=(rng.standard_normal((3, 3)),))
        est = estimate_ls(p, LsConfig(r=0))
        b = est.beta_hat[0]
        sxx = sum(p.x[0][i, t] ** 2 for i in range(3) for t in range(3))
        meat = sum((p.y[i, t] - b * p.x[0][i, t]) ** 2 * p.x[0][i, t] ** 2
                   for i in range(3) for t in range(3))
        assert hc_se(est, p)[0] == pytest.approx(np.sqrt(meat) / sxx, rel=1e-12)

    def test_dfc(self, rng):
        p = PanelData(y=rng.standard_normal((8, 6)), x=(rng.standard_normal((8, 6)),))
        parts = hc_parts(estimate_ls(p, LsConfig(r=2)), p)
        assert parts.dfc == pytest.approx(np.sqrt(48 / (6 * 4)))

    def test_sandwich_symmetric_psd(self, rng):
        p = PanelData(y=rng.standard_normal((8, 6)), x=(rng.standard_normal((8, 6)), rng.standard_normal((8, 6))))
        v = hc_parts(estimate_ls(p, LsConfig(r=1)), p).covariance()
        np.testing.assert_allclose(v, v.T)
        assert np.all(np.linalg.eigvalsh(v) >= -1e-14)


class TestCluster:
    G = [0, 0, 0, 1, 1, 1]
    C = [0, 1, 0, 1, 0, 1]

    def _fit(self, rng, k=1):
        p = PanelData(y=rng.standard_normal((6, 6)), x=tuple(rng.standard_normal((6, 6)) for _ in range(k)))
        return p, estimate_gfe_given_groups(p, grouping(self.G), grouping(self.C))

    def test_index(self):
        idx = cluster_index(grouping([0, 1, 0]), grouping([0, 0, 1, 1]))
        assert idx.m_total == 4
        # n(i,t) = i + t N
        assert idx.assignment[0 + 2 * 3] == 0 * 2 + 1
        assert idx.assignment[1 + 0 * 3] == 1 * 2 + 0

    def test_brute_double_sum(self, rng):
        _, est = self._fit(rng, k=2)
        assign = est.combination_clusters()
        got = cluster_meat(est.x_tilde, est.residuals, assign)
        np.testing.assert_allclose(got, brute_cluster_meat(est.x_tilde, est.residuals, assign), atol=1e-12)

    def test_singleton_clusters_reduce_to_hc(self, rng):
        _, est = self._fit(rng)
        single = np.arange(36)
        np.testing.assert_allclose(cluster_meat(est.x_tilde, est.residuals, single),
                                   hc_meat(est.x_tilde, est.residuals), atol=1e-12)

    def test_diagonal_mode(self, rng):
        _, est = self._fit(rng)
        np.testing.assert_allclose(cluster_meat(est.x_tilde, est.residuals, est.combination_clusters(), "diagonal"),
                                   hc_meat(est.x_tilde, est.residuals))

    def test_dfc(self, rng):
        p, est = self._fit(rng)
        assert cluster_parts(est, p).dfc == pytest.approx(np.sqrt(36 / ((6 - 2) * (6 - 2))))

    def test_scale_invariance(self, rng):
        p, est = self._fit(rng)
        q = PanelData(y=3.0 * p.y, x=(3.0 * p.x[0],))
        est_q = estimate_gfe_given_groups(q, grouping(self.G), grouping(self.C))
        assert est_q.beta_hat[0] == pytest.approx(est.beta_hat[0], rel=1e-10)
        assert cluster_se(est_q, q)[0] == pytest.approx(cluster_se(est, p)[0], rel=1e-10)
        lp, lq = estimate_ls(p, LsConfig(r=1)), estimate_ls(q, LsConfig(r=1))
        assert hc_se(lq, q)[0] == pytest.approx(hc_se(lp, p)[0], rel=1e-6)

    def test_unknown_mode(self, rng):
        _, est = self._fit(rng)
        with pytest.raises(DomainError):
            cluster_meat(est.x_tilde, est.residuals, est.combination_clusters(), "bogus")


class TestBootstrap:
    def _panel(self, rng, n=6, t=5):
        return PanelData(y=rng.standard_normal((n, t)), x=(rng.standard_normal((n, t)),))

    def test_constant_estimator(self, rng):
        p = self._panel(rng)
        se = bootstrap_cluster_se(lambda q: np.array([2.0]), p, grouping([0, 0, 1, 1, 2, 2]), n_boot=10)
        assert se[0] == 0.0

    def test_single_cluster(self, rng):
        p = self._panel(rng)
        est = lambda q: estimate_ls(q, LsConfig(r=0)).beta_hat
        assert bootstrap_cluster_se(est, p, grouping([0] * 6), n_boot=5)[0] == pytest.approx(0.0, abs=1e-14)

    def test_manual_replay(self, rng):
        p = self._panel(rng)
        on = grouping([0, 0, 1, 1, 2, 2])
        est = lambda q: estimate_ls(q, LsConfig(r=0)).beta_hat
        got = bootstrap_cluster_se(est, p, on, n_boot=2, seed=11)
        draws = [est(resample_units(p, on, np.random.default_rng(np.random.SeedSequence([11, b]))))[0]
                 for b in range(2)]
        assert got[0] == pytest.approx(np.std(draws, ddof=1), rel=1e-12)

    def test_failures(self, rng):
        p = self._panel(rng)

        def flaky(q):
            raise PanelError("nope")
        with pytest.raises(BootstrapError):
            bootstrap_cluster_se(flaky, p, grouping([0, 0, 1, 1, 2, 2]), n_boot=5)

    def test_needs_two(self, rng):
        with pytest.raises(DomainError):
            bootstrap_cluster_se(lambda q: [1.0], self._panel(rng), grouping([0] * 6), n_boot=1)


class TestJackknife:
    def test_arithmetic(self):
        assert jackknife_combine([1.0], [1.1], [1.1], [1.2], [1.2])[0] == 0.7

    def test_identity(self):
        assert jackknife_combine([2.5], [2.5], [2.5], [2.5], [2.5])[0] == 2.5

    def test_stubbed_halves_order(self, rng):
        p = PanelData(y=rng.standard_normal((6, 4)), x=(rng.standard_normal((6, 4)),))
        values = iter([1.0, 1.1, 1.1, 1.2, 1.2])
        seen = []

        def stub(q):
            seen.append(q.shape)
            return EstimateReport([next(values)], "GFE", se=[0.5])
        rep = jackknife_correct(stub, p)
        assert rep.beta_hat[0] == 0.7
        assert rep.estimator_tag == "GFE_JK"
        assert rep.se[0] == 0.5
        assert seen == [(6, 4), (3, 4), (3, 4), (6, 2), (6, 2)]

    def test_affine(self, rng):
        p = PanelData(y=rng.standard_normal((6, 4)), x=(rng.standard_normal((6, 4)),))
        vals = rng.standard_normal(5)
        it = iter(vals)
        rep = jackknife_correct(lambda q: np.array([next(it)]), p)
        assert rep.beta_hat[0] == pytest.approx(3 * vals[0] - 0.5 * (vals[1] + vals[2]) - 0.5 * (vals[3] + vals[4]))
        assert rep.estimator_tag == "LS_JK"

    def test_failure_names_half(self, rng):
        p = PanelData(y=rng.standard_normal((6, 4)), x=(rng.standard_normal((6, 4)),))

        def est(q):
            if q.shape == (6, 2):
                raise DomainError("too small")
            return np.array([1.0])
        with pytest.raises(JackknifeError) as exc:
            jackknife_correct(est, p)
        assert "periods-1" in str(exc.value)
