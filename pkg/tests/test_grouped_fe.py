import numpy as np
import pytest

from oracles import dummy_ols, explicit_projection
from panelfe import (DomainError, Grouping, LsConfig, PanelData, SingularDesignError, build_dummies,
                     cluster_points, estimate_gfe, estimate_gfe_given_groups, estimate_ls,
                     project_within)
from panelfe.grouped_fe import leading_proxies, within


def grouping(labels):
    return Grouping.from_labels(labels)


class TestDummies:
    def test_direct(self):
        np.testing.assert_array_equal(build_dummies(grouping([0, 0, 1])), [[1, 0], [1, 0], [0, 1]])

    def test_single_group(self):
        np.testing.assert_array_equal(build_dummies(grouping([0, 0, 0])), np.ones((3, 1)))

    def test_gram_is_sizes(self, rng):
        g = cluster_points(rng.standard_normal(11))
        d = build_dummies(g)
        np.testing.assert_array_equal(d.T @ d, np.diag(g.sizes))


class TestProjectWithin:
    G = [0, 0, 1, 1, 2, 2]
    C = [0, 1, 1, 2, 0, 2]

    def test_constant(self):
        d = build_dummies(grouping(self.G)), build_dummies(grouping(self.C))
        np.testing.assert_allclose(project_within(np.full((6, 6), 3.0), *d), 0, atol=1e-12)

    def test_unit_group_span(self, rng):
        dn = build_dummies(grouping(self.G))
        m = dn @ rng.standard_normal((3, 6))
        np.testing.assert_allclose(project_within(m, dn, build_dummies(grouping(self.C))), 0, atol=1e-12)

    def test_explicit_oracle(self, rng):
        m = rng.standard_normal((6, 6))
        got = project_within(m, build_dummies(grouping(self.G)), build_dummies(grouping(self.C)))
        np.testing.assert_allclose(got, explicit_projection(m, self.G, self.C), atol=1e-12)

    def test_idempotent(self, rng):
        m = rng.standard_normal((6, 6))
        once = within(m, self.G, self.C)
        np.testing.assert_allclose(within(once, self.G, self.C), once, atol=1e-10)

    def test_bad_dummies(self):
        with pytest.raises(DomainError):
            project_within(np.zeros((2, 2)), np.ones((2, 2)), np.eye(2))

    def test_single_groups_is_two_way_demeaning(self, rng):
        m = rng.standard_normal((5, 4))
        expected = m - m.mean(1, keepdims=True) - m.mean(0, keepdims=True) + m.mean()
        np.testing.assert_allclose(within(m, np.zeros(5, int), np.zeros(4, int)), expected, atol=1e-12)


class TestGivenGroups:
    def test_exact(self, rng):
        x = rng.standard_normal((6, 6))
        est = estimate_gfe_given_groups(PanelData(y=2 * x, x=(x,)), grouping([0, 0, 1, 1, 2, 2]),
                                        grouping([0, 0, 0, 1, 1, 1]))
        assert est.beta_hat[0] == pytest.approx(2.0, abs=1e-12)

    def test_dummy_oracle_6x6(self, rng):
        g, c = [0, 0, 1, 1, 2, 2], [0, 1, 2, 0, 1, 2]
        p = PanelData(y=rng.standard_normal((6, 6)), x=(rng.standard_normal((6, 6)),))
        est = estimate_gfe_given_groups(p, grouping(g), grouping(c))
        assert est.beta_hat[0] == pytest.approx(dummy_ols(p.y, p.x, g, c)[0], abs=1e-8)

    def test_orthogonal_to_dummies(self, rng):
        g, c = grouping([0, 0, 1, 1, 1]), grouping([0, 1, 0, 1])
        p = PanelData(y=rng.standard_normal((5, 4)), x=(rng.standard_normal((5, 4)),))
        est = estimate_gfe_given_groups(p, g, c)
        np.testing.assert_allclose(build_dummies(g).T @ est.x_tilde[0], 0, atol=1e-8)
        np.testing.assert_allclose(est.x_tilde[0] @ build_dummies(c), 0, atol=1e-8)

    def test_partitioned_formula(self, rng):
        p = PanelData(y=rng.standard_normal((6, 6)), x=(rng.standard_normal((6, 6)), rng.standard_normal((6, 6))))
        est = estimate_gfe_given_groups(p, grouping([0, 0, 1, 1, 2, 2]), grouping([0, 0, 1, 1, 2, 2]))
        xm = est.x_tilde.reshape(2, -1)
        np.testing.assert_allclose(est.beta_hat, np.linalg.solve(xm @ xm.T, xm @ est.y_tilde.ravel()), atol=1e-10)

    def test_nuisance_invariance(self, rng):
        gl, cl = [0, 0, 1, 1, 2, 2], [0, 1, 1, 0, 2, 2]
        g, c = grouping(gl), grouping(cl)
        p = PanelData(y=rng.standard_normal((6, 6)), x=(rng.standard_normal((6, 6)),))
        delta = rng.standard_normal((6, 3))
        nu = rng.standard_normal((6, 3))
        shifted = p.with_y(p.y + delta @ build_dummies(c).T + build_dummies(g) @ nu.T)
        a, b = estimate_gfe_given_groups(p, g, c), estimate_gfe_given_groups(shifted, g, c)
        assert b.beta_hat[0] == pytest.approx(a.beta_hat[0], abs=1e-8)

    def test_singular(self, rng):
        g, c = grouping([0, 0, 1, 1]), grouping([0, 0, 1, 1])
        x = build_dummies(g) @ rng.standard_normal((2, 4))
        with pytest.raises(SingularDesignError):
            estimate_gfe_given_groups(PanelData(y=rng.standard_normal((4, 4)), x=(x,)), g, c)

    def test_nuisance_count(self, rng):
        p = PanelData(y=rng.standard_normal((6, 5)), x=(rng.standard_normal((6, 5)),))
        est = estimate_gfe_given_groups(p, grouping([0, 0, 1, 1, 2, 2]), grouping([0, 0, 1, 1, 1]))
        n, t, g, c = 6, 5, 3, 2
        assert n * t - est.n_nuisance() == (n - g) * (t - c)


class TestEstimateGfe:
    def test_block_structure_grouping(self, rng):
        # loadings form well separated clouds {0,1} and {2,3,4}
        n, t = 5, 12
        lam = np.array([1.0, 1.0, -1.0, -1.0, -1.0]) * 5
        f = rng.standard_normal(t)
        x = rng.standard_normal((n, t))
        p = PanelData(y=x + np.outer(lam, f) + 0.01 * rng.standard_normal((n, t)), x=(x,))
        est = estimate_gfe(p, r_initial=1, r_star=1)
        assert est.unit_grouping.as_sets() == {frozenset({0, 1}), frozenset({2, 3, 4})}
        meta = est.metadata()
        assert sum(est.unit_grouping.sizes) == n and sum(est.time_grouping.sizes) == t
        assert meta["G"] == 2

    def test_full_truncation_matches_all_loadings(self, rng):
        p = PanelData(y=rng.standard_normal((10, 9)), x=(rng.standard_normal((10, 9)),))
        first = estimate_ls(p, LsConfig(r=3))
        est = estimate_gfe(p, r_initial=3, r_star=3, first_stage=first)
        assert est.unit_grouping.as_sets() == cluster_points(first.lambda_hat).as_sets()
        assert est.time_grouping.as_sets() == cluster_points(first.f_hat).as_sets()

    def test_leading_proxies_order(self, rng):
        first = estimate_ls(PanelData(y=rng.standard_normal((10, 9)), x=(rng.standard_normal((10, 9)),)),
                            LsConfig(r=3))
        lam, f = leading_proxies(first, 2)
        np.testing.assert_array_equal(lam, first.lambda_hat[:, :2])

    def test_bad_r_star(self, rng):
        p = PanelData(y=rng.standard_normal((10, 9)), x=(rng.standard_normal((10, 9)),))
        with pytest.raises(DomainError):
            estimate_gfe(p, r_initial=2, r_star=3)
