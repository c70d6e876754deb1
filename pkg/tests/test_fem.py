import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radialsp import fem, potential
from radialsp.errors import ConfigurationError


class TestSinhMesh:
    def test_formula_and_endpoints(self):
        mesh = fem.build_sinh_mesh(4, 100.0)
        dxi = np.arcsinh(100.0) / 4
        assert dxi == pytest.approx(1.3245855, abs=1e-7)
        assert mesh.nodes[0] == 0.0
        assert mesh.nodes[-1] == 100.0
        assert np.allclose(mesh.nodes, np.sinh(dxi * np.arange(5)))
        assert mesh.nodes[1] == pytest.approx(1.7474, abs=1e-3)
        assert mesh.nodes[2] == pytest.approx(7.0358, abs=1e-3)

    def test_bit_for_bit_reproducible(self):
        a = fem.build_sinh_mesh(317, 73.5)
        b = fem.build_sinh_mesh(317, 73.5)
        assert np.array_equal(a.nodes, b.nodes)

    def test_exact_last_node_large_n(self):
        assert fem.build_sinh_mesh(4000, 100.0).nodes[-1] == 100.0

    def test_spacing_pattern(self):
        mesh = fem.build_sinh_mesh(1000, 100.0)
        w = mesh.widths
        dxi = np.arcsinh(100.0) / 1000
        assert w[0] == pytest.approx(dxi, rel=1e-5)  # linear near origin
        assert w[-1] > 20 * w[0]                     # stretched tail

    def test_rejects_bad_parameters(self):
        with pytest.raises(ConfigurationError):
            fem.build_sinh_mesh(1, 100.0)
        with pytest.raises(ConfigurationError):
            fem.build_sinh_mesh(10, -1.0)


class TestAssembly:
    def test_mass_reproduces_volume(self, ops4000):
        one = np.ones(ops4000.mesh.n + 1)
        assert one @ ops4000.M_full.matvec(one) == pytest.approx(
            100.0**3 / 3.0, rel=1e-15)

    def test_interior_hat_stiffness_two_elements(self):
        mesh = fem.RadialMesh(nodes=np.array([0.0, 1.0, 2.0]), n=2,
                              r_max=2.0)
        K = fem.stiffness_full(mesh)
        assert K.d[1] == pytest.approx(8.0 / 3.0, abs=1e-14)

    def test_zero_potential_matrix(self):
        mesh = fem.build_sinh_mesh(50, 10.0)
        ops = fem.assemble(mesh, potential.zero_potential())
        assert np.all(ops.V_full.d == 0) and np.all(ops.V_full.e == 0)

    def test_determinism(self, V):
        mesh = fem.build_sinh_mesh(200, 50.0)
        a = fem.assemble(mesh, V)
        b = fem.assemble(mesh, V)
        for x, y in ((a.K_full, b.K_full), (a.M_full, b.M_full),
                     (a.V_full, b.V_full), (a.K_rob, b.K_rob)):
            assert np.array_equal(x.d, y.d) and np.array_equal(x.e, y.e)

    def test_K_and_M_positive_definite(self, V):
        import scipy.linalg as sla
        mesh = fem.build_sinh_mesh(100, 20.0)
        ops = fem.assemble(mesh, V)
        sla.cholesky_banded(ops.K_dir.to_banded_upper())   # raises if not PD
        sla.cholesky_banded(ops.M_dir.to_banded_upper())
        sla.cholesky_banded(ops.K_rob.to_banded_upper())

    def test_robin_row_is_boundary_term(self, V):
        mesh = fem.build_sinh_mesh(100, 20.0)
        ops = fem.assemble(mesh, V)
        assert ops.K_rob.d[-1] - ops.K_full.d[-1] == pytest.approx(
            mesh.r_max, rel=1e-15)
        assert np.array_equal(ops.K_rob.d[:-1], ops.K_full.d[:-1])


class TestPoissonRobin:
    def test_zero_source(self, ops4000):
        w = fem.poisson_solve_robin(ops4000, np.zeros(ops4000.mesh.n + 1))
        assert np.all(w == 0)

    def test_closed_form_oracle(self, ops4000):
        # density of e^{-r}: m(r) = (1 - e^{-2r}(2r^2+2r+1))/4 and
        # w = m(r)/r + e^{-2r}(2r+1)/4
        r = ops4000.mesh.nodes
        w = fem.poisson_solve_robin(ops4000, np.exp(-2.0 * r))
        m = 0.25 * (1 - np.exp(-2 * r) * (2 * r * r + 2 * r + 1))
        exact = np.where(r == 0, 0.25,
                         m / np.maximum(r, 1e-300)
                         + np.exp(-2 * r) * (2 * r + 1) / 4)
        assert np.max(np.abs(w - exact)) < 1e-4

    def test_far_field_of_unit_mass_density(self, ops4000):
        r = ops4000.mesh.nodes
        u = np.exp(-r)
        m = fem.accumulated_mass(ops4000.mesh, u)
        w = fem.poisson_solve_robin(ops4000, u * u / m[-1])
        assert ops4000.mesh.r_max * w[-1] == pytest.approx(1.0, rel=1e-2)

    def test_linearity(self, ops4000):
        rng = np.random.default_rng(7)
        n1 = ops4000.mesh.n + 1
        a = rng.standard_normal(n1) * np.exp(-0.3 * ops4000.mesh.nodes)
        b = rng.standard_normal(n1) * np.exp(-0.5 * ops4000.mesh.nodes)
        wa = fem.poisson_solve_robin(ops4000, a)
        wb = fem.poisson_solve_robin(ops4000, b)
        wab = fem.poisson_solve_robin(ops4000, a + b)
        assert np.allclose(wab, wa + wb, rtol=1e-12, atol=1e-14)


class TestWeightedOverlap:
    def test_zero_and_constant(self, V):
        mesh = fem.build_sinh_mesh(80, 15.0)
        ops = fem.assemble(mesh, V)
        Uz = fem.weighted_overlap(mesh, np.zeros(mesh.n + 1))
        assert np.all(Uz.d == 0) and np.all(Uz.e == 0)
        Uc = fem.weighted_overlap(mesh, np.ones(mesh.n + 1))
        assert np.allclose(Uc.d, ops.M_full.d) \
            and np.allclose(Uc.e, ops.M_full.e)

    def test_hat_function_row_sums(self):
        # row sums of U_mat for u = phi_k reproduce int phi_k r^2 dr
        mesh = fem.build_sinh_mesh(30, 5.0)
        k = 11
        u = np.zeros(mesh.n + 1)
        u[k] = 1.0
        U = fem.weighted_overlap(mesh, u)
        rowsums = U.to_sparse().toarray() @ np.ones(mesh.n + 1)
        r0, r1, r2 = mesh.nodes[k - 1], mesh.nodes[k], mesh.nodes[k + 1]
        import sympy as sp
        x = sp.Symbol("x")
        exact = sp.integrate((x - r0) / (r1 - r0) * x**2, (x, r0, r1)) \
            + sp.integrate((r2 - x) / (r2 - r1) * x**2, (x, r1, r2))
        assert np.sum(rowsums) == pytest.approx(float(exact), rel=1e-12)

    def test_linear_u_matches_symbolic(self):
        # exactness for u of degree <= 1: integrands are degree-5 polynomials
        import sympy as sp
        mesh = fem.RadialMesh(nodes=np.array([0.0, 0.7, 1.9, 3.0]), n=3,
                              r_max=3.0)
        a, b = 0.35, -0.11
        u = a + b * mesh.nodes
        U = fem.weighted_overlap(mesh, u)
        x = sp.Symbol("x")
        nodes = [sp.Float(v) for v in mesh.nodes]

        def hat(i):
            pieces = []
            if i > 0:
                pieces.append(((x - nodes[i - 1])
                               / (nodes[i] - nodes[i - 1]),
                               sp.And(x >= nodes[i - 1], x <= nodes[i])))
            if i < 3:
                pieces.append(((nodes[i + 1] - x)
                               / (nodes[i + 1] - nodes[i]),
                               sp.And(x > nodes[i], x <= nodes[i + 1])))
            pieces.append((0, True))
            return sp.Piecewise(*pieces)

        for i, jj in [(0, 0), (1, 1), (0, 1), (2, 3)]:
            exact = sp.integrate((a + b * x) * hat(i) * hat(jj) * x**2,
                                 (x, 0, 3))
            got = U.d[i] if i == jj else U.e[min(i, jj)]
            assert got == pytest.approx(float(exact), abs=1e-12)


class TestMassEnergyCrossings:
    def test_zero_profile(self, ops4000):
        z = np.zeros(ops4000.mesh.n + 1)
        assert fem.discrete_mass(z, ops4000) == 0.0
        assert fem.discrete_energy(z, ops4000) == 0.0

    def test_normalized_linear_state_mass(self, ops4000, pairs4000):
        assert fem.discrete_mass(pairs4000[0].vector, ops4000) \
            == pytest.approx(1.0, abs=1e-10)

    def test_energy_without_hartree_is_rayleigh_quotient(self, ops4000,
                                                         pairs4000):
        p = pairs4000[0]
        h = fem.discrete_energy(p.vector, ops4000, include_hartree=False)
        assert h == pytest.approx(p.eigenvalue, rel=1e-12)

    def test_crossings_basic(self):
        r = np.linspace(0, 20, 2001)
        assert fem.count_zero_crossings(np.exp(-r)) == 0
        assert fem.count_zero_crossings((1 - r) * np.exp(-r)) == 1

    def test_crossings_hydrogen_oracle(self):
        _, p3 = potential.hydrogen_reference(3, 1.0)
        r = np.linspace(0, 60, 6001)
        assert fem.count_zero_crossings(p3(r)) == 2

    def test_crossings_noise_floor(self):
        r = np.linspace(0, 30, 3001)
        u = np.exp(-r)
        u[r > 20] = 1e-12 * np.cos(10 * r[r > 20])   # tail sign noise
        assert fem.count_zero_crossings(u) == 0

    def test_crossings_all_zero_rejected(self):
        with pytest.raises(ConfigurationError):
            fem.count_zero_crossings(np.zeros(10))

    @given(st.integers(min_value=0, max_value=6), st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_crossings_of_sign_patterns(self, k, seed):
        # roots separated by >> grid spacing so every crossing is resolved
        rng = np.random.default_rng(seed)
        r = np.linspace(0.0, 10.0, 400)
        lattice = np.linspace(1.0, 9.0, 17)
        roots = np.sort(rng.choice(lattice, size=k, replace=False)) \
            if k else np.array([])
        u = np.exp(-r) * np.prod([r - rt for rt in roots], axis=0) \
            if k else np.exp(-r)
        assert fem.count_zero_crossings(u) == k
