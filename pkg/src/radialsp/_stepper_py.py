"""Pure-NumPy backend for the split-step time integrator.

One step applies a half nonlinear phase rotation, a Crank-Nicolson solve of
the linear part, and a second half rotation with the potential recomputed
from the advanced field.  All linear algebra is banded; the Robin-Poisson
Cholesky factor and the Crank-Nicolson matrices are prepared once and reused
read-only across steps.  The compiled backend in ``_stepper`` implements the
same arithmetic; this module is the always-available fallback.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

BACKEND_NAME = "python"


class StepperWorkspace:
    """Precomputed mesh operators for repeated split steps."""

    def __init__(self, ops, dt: float):
        self.dt = float(dt)
        self.n = ops.mesh.n
        mesh = ops.mesh
        self.M_full_d = ops.M_full.d.copy()
        self.M_full_e = ops.M_full.e.copy()
        self.chol_rob = sla.cholesky_banded(
            ops.K_rob.to_banded_upper(), lower=False)
        H = ops.K_dir + ops.V_dir
        Md, Me = ops.M_dir.d, ops.M_dir.e
        a = 0.5j * self.dt
        n = self.n
        self.A_ab = np.zeros((3, n), dtype=complex)
        self.A_ab[0, 1:] = Me + a * H.e
        self.A_ab[1, :] = Md + a * H.d
        self.A_ab[2, :-1] = Me + a * H.e
        self.B_d = Md - a * H.d
        self.B_e = Me - a * H.e
        self.Md, self.Me = Md, Me
        self.H = H

    def hartree(self, phi: np.ndarray) -> np.ndarray:
        """Nodal Hartree potential of |phi|^2 on interior nodes."""
        dens = np.empty(self.n + 1)
        dens[: self.n] = np.abs(phi) ** 2
        dens[self.n] = 0.0
        rhs = self.M_full_d * dens
        rhs[:-1] += self.M_full_e * dens[1:]
        rhs[1:] += self.M_full_e * dens[:-1]
        w = sla.cho_solve_banded((self.chol_rob, False), rhs,
                                 check_finite=False)
        return w[: self.n]

    def _cn_solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.solve_banded((1, 1), self.A_ab, rhs,
                                check_finite=False)

    def step(self, phi: np.ndarray) -> np.ndarray:
        half = 0.5j * self.dt
        phi1 = np.exp(half * self.hartree(phi)) * phi
        rhs = self.B_d * phi1
        rhs[:-1] += self.B_e * phi1[1:]
        rhs[1:] += self.B_e * phi1[:-1]
        phi2 = self._cn_solve(rhs)
        return np.exp(half * self.hartree(phi2)) * phi2

    def run(self, phi: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            phi = self.step(phi)
        return phi
