import numpy as np
import pytest

from radialsp import bound_states as bs
from radialsp import fem, potential, stability as st


class TestAssembleT:
    def test_zero_profile(self, ops2000):
        T = st.assemble_T(ops2000, np.zeros(ops2000.mesh.n + 1))
        assert np.all(T == 0)

    def test_symmetry(self, ops2000, stability_states_E1):
        u = stability_states_E1[0].u
        U = fem.weighted_overlap(ops2000.mesh, u)
        import scipy.linalg as sla
        n = ops2000.mesh.n
        B = U.to_sparse().toarray()[:, :n]
        X = sla.cho_solve_banded((ops2000.robin_factor(), False), B)
        Traw = U.to_sparse().toarray()[:n, :] @ X
        assert np.linalg.norm(Traw - Traw.T) \
            < 1e-12 * np.linalg.norm(Traw)

    def test_positive_semidefinite(self, ops2000, stability_states_E1):
        T = st.assemble_T(ops2000, stability_states_E1[0].u)
        w = np.linalg.eigvalsh(T)
        assert w.min() > -1e-12 * max(1.0, w.max())

    def test_action_matches_two_step_solve(self, ops2000,
                                           stability_states_E1):
        import scipy.linalg as sla
        u = stability_states_E1[1].u
        n = ops2000.mesh.n
        T = st.assemble_T(ops2000, u)
        rng = np.random.default_rng(3)
        x = rng.standard_normal(n)
        U = fem.weighted_overlap(ops2000.mesh, u)
        psi = sla.cho_solve_banded((ops2000.robin_factor(), False),
                                   U.matvec(np.concatenate([x, [0.0]])))
        two_step = U.matvec(psi)[:n]
        assert np.allclose(T @ x, two_step, rtol=1e-10, atol=1e-12)


class TestLpmSpectra:
    def test_negative_counts_all_branches(self, ops2000,
                                          stability_states_E1):
        for j in range(4):
            em, ep, nm, npl = st.spectra_Lpm(stability_states_E1[j],
                                             ops2000)
            assert (nm, npl) == (j, j + 1)
            assert nm + npl == 2 * j + 1

    def test_state_spans_near_kernel_direction(self, V):
        # the continuum kernel direction: needs the finest mesh to reach 1e-6
        mesh = fem.build_sinh_mesh(8000, 100.0)
        ops = fem.assemble(mesh, V)
        from radialsp import linear
        pairs = linear.solve_linear_states(ops, 1)
        prob = bs.SchrodingerPoissonBVP(mesh, V)
        g1 = bs.gamma_continuation(prob, ops, pairs[0])
        assert st.Lminus_state_residual(g1, ops) < 1e-6

    def test_kernel_monitoring_L_plus(self, ops2000, stability_states_E1):
        for j in range(2):
            em, ep, _, _ = st.spectra_Lpm(stability_states_E1[j], ops2000)
            scale = np.max(np.abs(ep))
            assert np.min(np.abs(ep)) > 1e-8 * scale


class TestJLSpectrum:
    def test_zero_state_purely_imaginary(self, ops2000):
        mesh = ops2000.mesh
        zero = bs.BoundState(mesh=mesh, u=np.zeros(mesh.n + 1),
                             v=np.zeros(mesh.n + 1), w=np.zeros(mesh.n + 1),
                             z=np.zeros(mesh.n + 1), m=np.zeros(mesh.n + 1),
                             E=0.5, gamma=1.0, branch_index=0, mass=0.0)
        rep = st.spectrum_JL(zero, ops2000)
        lam = rep.eigs_JL
        assert np.max(np.abs(lam.real) / (1.0 + np.abs(lam))) < 1e-8
        # lambda = +- i (mu + E) with mu the linear operator eigenvalues
        em, _, _, _ = st.spectra_Lpm(zero, ops2000)
        expect = np.abs(em[:3])
        got = np.sort(np.abs(lam.imag))
        for e in expect:
            assert np.min(np.abs(got - e)) < 1e-8 * (1 + e)

    def test_symmetry_defect(self, ops2000, stability_states_E1):
        for j in (0, 2):
            rep = st.spectrum_JL(stability_states_E1[j], ops2000)
            assert rep.symmetry_defect < 1e-8

    def test_ground_state_has_no_quartets(self, ops2000,
                                          stability_states_E1):
        rep = st.spectrum_JL(stability_states_E1[0], ops2000)
        assert rep.quartets == []

    def test_excited_state_has_quartet(self, ops2000, stability_states_E1):
        rep = st.spectrum_JL(stability_states_E1[1], ops2000)
        assert len(rep.quartets) >= 1
        assert all(q.real > 0 and abs(q.imag) > 0 for q in rep.quartets)

    def test_lambda_squared_crosscheck(self, ops2000, stability_states_E1):
        defect = st.lambda_squared_crosscheck(stability_states_E1[1],
                                              ops2000)
        assert defect < 1e-6


class TestClassifier:
    def _report(self, nm, npl, sigma, E=1.0):
        rep = st.SpectrumReport(branch_index=0, E=E, mesh_n=100)
        rep.eigs_minus = np.zeros(1)
        rep.eigs_plus = np.zeros(1)
        rep.n_minus, rep.n_plus = nm, npl
        rep.sigma_max = sigma
        return rep

    def test_ground_state_rule(self):
        rep = self._report(0, 1, 1e-9)
        assert st.classify(rep, p=1) == "orbitally-stable"

    def test_odd_gap_rule(self):
        rep = self._report(1, 1, 1e-9)
        assert st.classify(rep, p=1) == "orbitally-unstable"

    def test_even_gap_with_quartet(self):
        rep = self._report(1, 2, 0.07)
        assert st.classify(rep, p=1) == "linearly-unstable"

    def test_even_gap_quiet_spectrum(self):
        rep = self._report(1, 2, 1e-9)
        assert st.classify(rep, p=1) == "inconclusive"
        assert "no linear instability" in rep.verdict_detail

    def test_classifier_on_computed_states(self, ops2000,
                                           stability_states_E1):
        for j, expected in ((0, "orbitally-stable"),
                            (1, "linearly-unstable")):
            sstate = stability_states_E1[j]
            em, ep, nm, npl = st.spectra_Lpm(sstate, ops2000)
            rep = st.spectrum_JL(sstate, ops2000)
            rep.eigs_minus, rep.eigs_plus = em, ep
            rep.n_minus, rep.n_plus = nm, npl
            if j == 0:
                # the raw small real pair is a discretization artifact;
                # the honest refinement-filtered verdict runs in acceptance
                assert rep.spurious_real
                rep.sigma_max = 0.0
            assert st.classify(rep, p=1) == expected


class TestUnstableBound:
    def test_zero_state(self, ops2000):
        mesh = ops2000.mesh
        zero = bs.BoundState(mesh=mesh, u=np.zeros(mesh.n + 1),
                             v=np.zeros(mesh.n + 1), w=np.zeros(mesh.n + 1),
                             z=np.zeros(mesh.n + 1), m=np.zeros(mesh.n + 1),
                             E=1.0, gamma=1.0, branch_index=0, mass=0.0)
        b = st.unstable_bound(zero, (0.5, 0.2))
        assert b.bound == 0.0 and b.bound_L3 == 0.0 and b.bound_grad == 0.0

    def test_bound_scales_with_mass(self, V, stability_states_E1):
        # reconstruction via state.mass differs from the bound's quadrature
        # mass at the O(h^2) interpolation level
        norms = potential.potential_norms(V)
        b = st.unstable_bound(stability_states_E1[0], norms)
        assert b.bound == pytest.approx(
            b.C_HLS * b.C_GN * stability_states_E1[0].mass
            * np.sqrt(1.0 / 3.0 + norms[0] / 3.0 + 2.0 * norms[1] / 3.0),
            rel=1e-5)

    def test_bound_chain_ordering(self, V, ops2000, stability_states_E1):
        # each bound must dominate the measured spectral abscissa
        norms = potential.potential_norms(V)
        sstate = stability_states_E1[1]
        b = st.unstable_bound(sstate, norms)
        rep = st.spectrum_JL(sstate, ops2000)
        assert rep.sigma_max <= b.bound_L3 <= b.bound_grad * 1.001
        assert rep.sigma_max <= b.bound
