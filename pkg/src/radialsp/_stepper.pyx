# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the split-step integrator.

Same arithmetic as ``_stepper_py``: half phase rotation, Crank-Nicolson
tridiagonal solve, half phase rotation.  The Robin-Poisson matrix is
prefactored as LDL^T and the Crank-Nicolson matrix as a pivotless complex
LU, both reused across every step; each step is O(n) with no temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef class CyWorkspace:
    cdef Py_ssize_t n            # interior size
    cdef double dt
    # mass matrix, full (n+1) and interior (n)
    cdef double[::1] Mf_d, Mf_e, Md, Me
    # Robin stiffness LDL^T factors (full size)
    cdef double[::1] rob_d, rob_l
    # Crank-Nicolson: A = M + i dt/2 H prefactored (Thomas), B = M - i dt/2 H
    cdef double complex[::1] A_diag, A_low, A_up, B_d, B_e
    # work arrays
    cdef double[::1] dens, w
    cdef double complex[::1] rhs

    def __init__(self, Mf_d, Mf_e, Krob_d, Krob_e, Md, Me, Hd, He,
                 double dt):
        cdef Py_ssize_t i, n1, n
        self.dt = dt
        n1 = Mf_d.shape[0]
        n = n1 - 1
        self.n = n
        self.Mf_d = np.ascontiguousarray(Mf_d, dtype=np.float64)
        self.Mf_e = np.ascontiguousarray(Mf_e, dtype=np.float64)
        self.Md = np.ascontiguousarray(Md, dtype=np.float64)
        self.Me = np.ascontiguousarray(Me, dtype=np.float64)

        # LDL^T of the SPD Robin stiffness: d_i~ = d_i - l_{i-1}^2 d_{i-1}~
        rd = np.ascontiguousarray(Krob_d, dtype=np.float64).copy()
        re = np.ascontiguousarray(Krob_e, dtype=np.float64)
        rl = np.zeros(n1 - 1)
        for i in range(n1 - 1):
            rl[i] = re[i] / rd[i]
            rd[i + 1] -= rl[i] * re[i]
        self.rob_d = rd
        self.rob_l = rl

        a = 0.5j * dt
        Ad = np.asarray(Md) + a * np.asarray(Hd)
        Ae = np.asarray(Me) + a * np.asarray(He)
        # pivotless complex LU (Thomas): low_i = e_i / diag_i~
        Adiag = Ad.copy()
        Alow = np.zeros(n - 1, dtype=complex)
        for i in range(n - 1):
            Alow[i] = Ae[i] / Adiag[i]
            Adiag[i + 1] = Ad[i + 1] - Alow[i] * Ae[i]
        self.A_diag = Adiag
        self.A_low = Alow
        self.A_up = np.ascontiguousarray(Ae, dtype=complex)
        self.B_d = np.asarray(Md) - a * np.asarray(Hd)
        self.B_e = np.asarray(Me) - a * np.asarray(He)

        self.dens = np.zeros(n1)
        self.w = np.zeros(n1)
        self.rhs = np.zeros(n, dtype=complex)

    cdef void _hartree_phase(self, double complex[::1] phi) nogil:
        """phi <- exp(i dt/2 w[|phi|^2]) phi with w from the LDL^T solve."""
        cdef Py_ssize_t i, n = self.n
        cdef double c, s, th
        cdef double complex p
        for i in range(n):
            p = phi[i]
            self.dens[i] = p.real * p.real + p.imag * p.imag
        self.dens[n] = 0.0
        # rhs = M_full * dens, stored in w
        self.w[0] = self.Mf_d[0] * self.dens[0] + self.Mf_e[0] * self.dens[1]
        for i in range(1, n):
            self.w[i] = (self.Mf_e[i - 1] * self.dens[i - 1]
                         + self.Mf_d[i] * self.dens[i]
                         + self.Mf_e[i] * self.dens[i + 1])
        self.w[n] = self.Mf_e[n - 1] * self.dens[n - 1] \
            + self.Mf_d[n] * self.dens[n]
        # LDL^T solve in place
        for i in range(1, n + 1):
            self.w[i] -= self.rob_l[i - 1] * self.w[i - 1]
        for i in range(n + 1):
            self.w[i] /= self.rob_d[i]
        for i in range(n - 1, -1, -1):
            self.w[i] -= self.rob_l[i] * self.w[i + 1]
        for i in range(n):
            th = 0.5 * self.dt * self.w[i]
            c = cos(th)
            s = sin(th)
            p = phi[i]
            phi[i].real = c * p.real - s * p.imag
            phi[i].imag = c * p.imag + s * p.real

    cdef void _cn_step(self, double complex[::1] phi) nogil:
        cdef Py_ssize_t i, n = self.n
        self.rhs[0] = self.B_d[0] * phi[0] + self.B_e[0] * phi[1]
        for i in range(1, n - 1):
            self.rhs[i] = (self.B_e[i - 1] * phi[i - 1]
                           + self.B_d[i] * phi[i]
                           + self.B_e[i] * phi[i + 1])
        self.rhs[n - 1] = self.B_e[n - 2] * phi[n - 2] \
            + self.B_d[n - 1] * phi[n - 1]
        for i in range(1, n):
            self.rhs[i] -= self.A_low[i - 1] * self.rhs[i - 1]
        phi[n - 1] = self.rhs[n - 1] / self.A_diag[n - 1]
        for i in range(n - 2, -1, -1):
            phi[i] = (self.rhs[i] - self.A_up[i] * phi[i + 1]) \
                / self.A_diag[i]

    def run(self, cnp.ndarray[cnp.complex128_t, ndim=1] phi0,
            Py_ssize_t steps):
        """Advance steps of the splitting; returns the new field."""
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] phi = phi0.copy()
        cdef double complex[::1] ph = phi
        cdef Py_ssize_t k
        with nogil:
            for k in range(steps):
                self._hartree_phase(ph)
                self._cn_step(ph)
                self._hartree_phase(ph)
        return phi
