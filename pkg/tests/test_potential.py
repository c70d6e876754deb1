import numpy as np
import pytest

from radialsp import potential
from radialsp.errors import ConfigurationError, EvaluationError


class TestSmoothedCoulomb:
    def test_origin_limit(self):
        assert potential.smoothed_coulomb_V(0.0) == -0.5

    def test_value_at_one(self):
        # 0.5 e^-1 - (1 - e^-1)
        assert potential.smoothed_coulomb_V(1.0) == pytest.approx(
            -0.4481808382428365, abs=1e-15)

    def test_coulomb_tail(self):
        for r in (1e3, 1e4):
            assert r * potential.smoothed_coulomb_V(r) == pytest.approx(
                -1.0, rel=1e-3)

    def test_everywhere_negative_and_bounded(self):
        r = np.concatenate([[0.0], np.logspace(-8, 4, 4001)])
        v = potential.smoothed_coulomb_V(r)
        assert np.all(v < 0)
        assert np.all(np.abs(v) <= 0.5 + 1e-15)

    def test_negative_radius_rejected(self):
        with pytest.raises(ConfigurationError):
            potential.smoothed_coulomb_V(-0.1)

    def test_derivative_matches_finite_difference(self):
        r = np.logspace(-5, 2, 300)
        h = 1e-7 * np.maximum(r, 1.0)
        fd = (potential.smoothed_coulomb_V(r + h)
              - potential.smoothed_coulomb_V(r - h)) / (2 * h)
        assert np.allclose(potential.smoothed_coulomb_V_prime(r), fd,
                           rtol=1e-6, atol=1e-9)

    def test_laplacian_recovers_source_density(self):
        # Delta V = V'' + (2/r)V' = (1/2) e^{-r} to O(h^2)
        h = 1e-3
        r = np.arange(0.5, 20.0, h)
        v = potential.smoothed_coulomb_V(r)
        lap = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2 \
            + (v[2:] - v[:-2]) / h * (1.0 / r[1:-1])
        assert np.max(np.abs(lap - potential.smoothed_coulomb_rho(r[1:-1]))) \
            < 1e-5

    def test_charge_scaling(self):
        spec = potential.smoothed_potential(Z=2.5)
        assert spec(3.0) == pytest.approx(
            2.5 * potential.smoothed_coulomb_V(3.0))
        assert 1e4 * spec(1e4) == pytest.approx(-2.5, rel=1e-3)


class TestPotentialNorms:
    def test_smoothed_norms(self):
        sup_v, sup_rvp = potential.potential_norms(
            potential.smoothed_potential())
        assert sup_v == pytest.approx(0.5, abs=1e-8)   # attained at r = 0
        assert 0 < sup_rvp < 1.0
        # sup |r V'| attained at interior r (vanishes at both ends)
        assert sup_rvp == pytest.approx(0.1942, abs=2e-3)

    def test_zero_potential(self):
        assert potential.potential_norms(potential.zero_potential()) \
            == (0.0, 0.0)

    def test_non_finite_rejected(self):
        bad = potential.PotentialSpec(
            kind="tabulated", func=lambda r: np.where(r > 1, np.inf, -1.0))
        with pytest.raises(EvaluationError):
            potential.potential_norms(bad)


class TestHydrogenReference:
    def test_ground_state_convention(self):
        E, prof = potential.hydrogen_reference(1, 1.0)
        assert E == 0.25
        r = np.linspace(0, 10, 101)
        assert np.allclose(prof(r), np.exp(-r / 2))

    def test_known_eigenvalues(self):
        assert potential.hydrogen_reference(2, 1.0)[0] == 0.0625
        assert potential.hydrogen_reference(1, 2.0)[0] == 1.0

    def test_eigenvalues_strictly_decrease_to_zero(self):
        Es = [potential.hydrogen_reference(n, 1.0)[0] for n in range(1, 9)]
        assert all(a > b > 0 for a, b in zip(Es, Es[1:]))

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_ode_residual_pointwise(self, n):
        # -u'' - (2/r)u' - (Z/r)u + E u = 0 on r in [0.01, 30]
        E, p = potential.hydrogen_reference(n, 1.0)
        r = np.linspace(0.01, 30.0, 7001)
        res = -p.deriv2(r) - 2.0 / r * p.deriv(r) - p(r) / r + E * p(r)
        assert np.max(np.abs(res)) < 1e-10

    @pytest.mark.parametrize("n,crossings", [(1, 0), (2, 1), (3, 2)])
    def test_node_counts(self, n, crossings):
        from radialsp.fem import count_zero_crossings
        _, p = potential.hydrogen_reference(n, 1.0)
        r = np.linspace(0, 40, 4001)
        assert count_zero_crossings(p(r)) == crossings

    def test_domain_errors(self):
        with pytest.raises(ConfigurationError):
            potential.hydrogen_reference(0, 1.0)
        with pytest.raises(ConfigurationError):
            potential.hydrogen_reference(1, -1.0)
