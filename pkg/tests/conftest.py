"""Shared fixtures: the expensive pipeline objects are computed once per
session and reused across unit and acceptance tests."""

import numpy as np
import pytest

from radialsp import bound_states as bs
from radialsp import fem, linear, potential

BOUND_N, BOUND_RMAX = 4000, 100.0
STAB_N, STAB_RMAX = 2000, 100.0
STATE_N, STATE_RMAX = 2000, 30.0   # compact box: resolved tails at E = 1


@pytest.fixture(scope="session")
def V():
    return potential.smoothed_potential()


@pytest.fixture(scope="session")
def ops4000(V):
    return fem.assemble(fem.build_sinh_mesh(BOUND_N, BOUND_RMAX), V)


@pytest.fixture(scope="session")
def pairs4000(ops4000):
    return linear.solve_linear_states(ops4000, 4)


@pytest.fixture(scope="session")
def prob4000(ops4000, V):
    return bs.SchrodingerPoissonBVP(ops4000.mesh, V)


@pytest.fixture(scope="session")
def gamma_one_states(prob4000, ops4000, pairs4000):
    """Mass-one gamma=1 states for branches 0..3 on the bound-state mesh."""
    return {j: bs.gamma_continuation(prob4000, ops4000, pairs4000[j])
            for j in range(4)}


@pytest.fixture(scope="session")
def ops2000(V):
    return fem.assemble(fem.build_sinh_mesh(STAB_N, STAB_RMAX), V)


@pytest.fixture(scope="session")
def stability_states_E1(ops2000, V):
    """E=1 states for branches 0..3 on the stability mesh."""
    pairs = linear.solve_linear_states(ops2000, 4)
    prob = bs.SchrodingerPoissonBVP(ops2000.mesh, V)
    out = {}
    for j in range(4):
        g1 = bs.gamma_continuation(prob, ops2000, pairs[j])
        curve = bs.sweep_E(prob, g1, bs.geometric_E_grid(g1.E, 1.0))
        assert abs(curve.states[-1].E - 1.0) < 1e-12, curve.stop_reason
        out[j] = curve.states[-1]
    return out


@pytest.fixture(scope="session")
def compact_states_E1(V):
    """E=1 states for branches 0..1 on the compact box (tails resolved at
    r_max, so far-field matching at r_max works by contract)."""
    ops = fem.assemble(fem.build_sinh_mesh(STATE_N, STATE_RMAX), V)
    pairs = linear.solve_linear_states(ops, 2)
    prob = bs.SchrodingerPoissonBVP(ops.mesh, V)
    out = {}
    for j in (0, 1):
        g1 = bs.gamma_continuation(prob, ops, pairs[j])
        curve = bs.sweep_E(prob, g1, bs.geometric_E_grid(g1.E, 1.0))
        out[j] = curve.states[-1]
    return out


@pytest.fixture(scope="session")
def branch0_curve(prob4000, ops4000, pairs4000, gamma_one_states):
    """Branch-0 curve from near the linear eigenvalue up to E = 40."""
    g1 = gamma_one_states[0]
    E_lin = pairs4000[0].E
    gaps = np.geomspace(g1.E - E_lin, 1e-3 * (g1.E - E_lin), 75)
    down = bs.sweep_E(prob4000, g1, E_lin + gaps)
    up = bs.sweep_E(prob4000, g1, bs.geometric_E_grid(g1.E, 40.0))
    return down.merged_with(up)
