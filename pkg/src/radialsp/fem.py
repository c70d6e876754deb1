"""Radial finite elements on the sinh-stretched mesh.

Piecewise-linear hat functions on nodes r_j = sinh(j * arcsinh(r_max)/n),
all integrals carrying the radial weight r^2 dr.  Stiffness and mass
integrands are polynomials of degree <= 5 per element, so the fixed 3-point
Gauss rule used everywhere is exact for them; potential matrices use the same
rule as numerical quadrature.

Matrix layout: "full" operators act on all n+1 nodes (Neumann at the origin
is natural); "Dirichlet" operators are the leading n x n block, i.e. the
boundary node at r_max is dropped.  The Poisson solver uses the full-size
stiffness matrix with a Robin closure w' + w/r_max = 0, which adds r_max to
its last diagonal entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConfigurationError

# 3-point Gauss-Legendre on [0,1]: exact for polynomials of degree <= 5
_GX = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_GW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass(frozen=True)
class RadialMesh:
    """Nonuniform radial grid with n elements on [0, r_max]."""

    nodes: np.ndarray
    n: int
    r_max: float

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def gauss_points(self) -> np.ndarray:
        """Quadrature abscissae, shape (n, 3)."""
        return self.nodes[:-1, None] + self.widths[:, None] * _GX[None, :]

    def gauss_weights(self) -> np.ndarray:
        """Quadrature weights including element widths, shape (n, 3)."""
        return self.widths[:, None] * _GW[None, :]

    def interp_at_gauss(self, u: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolant of nodal u at the Gauss points."""
        u = np.asarray(u, dtype=float)
        return u[:-1, None] * (1.0 - _GX)[None, :] + u[1:, None] * _GX[None, :]


def build_sinh_mesh(n: int, r_max: float) -> RadialMesh:
    """Mesh r_j = sinh(j * dxi), dxi = arcsinh(r_max)/n; linear near the
    origin, exponentially stretched in the tail."""
    if n < 2:
        raise ConfigurationError(f"sinh mesh needs n >= 2, got {n}")
    if r_max <= 0:
        raise ConfigurationError(f"sinh mesh needs r_max > 0, got {r_max}")
    dxi = np.arcsinh(r_max) / n
    nodes = np.sinh(dxi * np.arange(n + 1))
    nodes[0] = 0.0
    nodes[-1] = float(r_max)
    return RadialMesh(nodes=nodes, n=n, r_max=float(r_max))


class SymTridiag:
    """Symmetric tridiagonal matrix stored as (diagonal, superdiagonal)."""

    __slots__ = ("d", "e")

    def __init__(self, d: np.ndarray, e: np.ndarray):
        self.d = np.asarray(d, dtype=float)
        self.e = np.asarray(e, dtype=float)
        if self.e.shape[0] != self.d.shape[0] - 1:
            raise ValueError("superdiagonal must have length len(d) - 1")

    @property
    def size(self) -> int:
        return self.d.shape[0]

    def matvec(self, x):
        x = np.asarray(x)
        y = self.d * x
        y[:-1] += self.e * x[1:]
        y[1:] += self.e * x[:-1]
        return y

    def restrict(self, m: int) -> "SymTridiag":
        """Leading m x m principal block."""
        return SymTridiag(self.d[:m].copy(), self.e[: m - 1].copy())

    def to_sparse(self) -> sp.csc_matrix:
        n = self.size
        return sp.diags([self.e, self.d, self.e], [-1, 0, 1], (n, n)).tocsc()

    def to_dense(self) -> np.ndarray:
        a = np.diag(self.d)
        idx = np.arange(self.size - 1)
        a[idx, idx + 1] = self.e
        a[idx + 1, idx] = self.e
        return a

    def to_banded_upper(self) -> np.ndarray:
        """(2, n) upper storage for scipy's *_banded solvers."""
        ab = np.zeros((2, self.size))
        ab[0, 1:] = self.e
        ab[1, :] = self.d
        return ab

    def copy(self) -> "SymTridiag":
        return SymTridiag(self.d.copy(), self.e.copy())

    def __add__(self, other):
        return SymTridiag(self.d + other.d, self.e + other.e)

    def __sub__(self, other):
        return SymTridiag(self.d - other.d, self.e - other.e)

    def scaled(self, c: float) -> "SymTridiag":
        return SymTridiag(c * self.d, c * self.e)


def _accumulate(mesh: RadialMesh, vals_at_gauss: np.ndarray) -> SymTridiag:
    """Assemble sum over elements of integral f * phi_a phi_b r^2 dr given f
    sampled at the Gauss points, shape (n, 3)."""
    x = mesh.gauss_points()
    wq = mesh.gauss_weights() * vals_at_gauss * x * x
    phiL = (1.0 - _GX)[None, :]
    phiR = _GX[None, :]
    ll = np.sum(wq * phiL * phiL, axis=1)
    lr = np.sum(wq * phiL * phiR, axis=1)
    rr = np.sum(wq * phiR * phiR, axis=1)
    d = np.zeros(mesh.n + 1)
    d[:-1] += ll
    d[1:] += rr
    return SymTridiag(d, lr)


def stiffness_full(mesh: RadialMesh) -> SymTridiag:
    """K_ij = integral phi_i' phi_j' r^2 dr, assembled exactly."""
    r = mesh.nodes
    h = mesh.widths
    cubes = np.diff(r**3) / 3.0
    elem = cubes / h**2
    d = np.zeros(mesh.n + 1)
    d[:-1] += elem
    d[1:] += elem
    return SymTridiag(d, -elem)


def mass_full(mesh: RadialMesh) -> SymTridiag:
    return _accumulate(mesh, np.ones((mesh.n, 3)))


def potential_full(mesh: RadialMesh, V: Callable) -> SymTridiag:
    return _accumulate(mesh, np.asarray(V(mesh.gauss_points()), dtype=float))


def weighted_overlap(mesh: RadialMesh, u: np.ndarray) -> SymTridiag:
    """U_ij = integral u phi_i phi_j r^2 dr with u piecewise linear on the mesh."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != mesh.n + 1:
        raise ConfigurationError("weighted_overlap needs u on all mesh nodes")
    return _accumulate(mesh, mesh.interp_at_gauss(u))


@dataclass
class AssembledOperators:
    """FEM matrices for one (mesh, potential) pair."""

    mesh: RadialMesh
    K_full: SymTridiag
    M_full: SymTridiag
    V_full: SymTridiag
    K_rob: SymTridiag
    _rob_factor: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def K_dir(self) -> SymTridiag:
        return self.K_full.restrict(self.mesh.n)

    @property
    def M_dir(self) -> SymTridiag:
        return self.M_full.restrict(self.mesh.n)

    @property
    def V_dir(self) -> SymTridiag:
        return self.V_full.restrict(self.mesh.n)

    def robin_factor(self) -> np.ndarray:
        """Cached banded Cholesky factor of K_rob (reused across solves)."""
        if self._rob_factor is None:
            self._rob_factor = sla.cholesky_banded(
                self.K_rob.to_banded_upper(), lower=False
            )
        return self._rob_factor


def assemble(mesh: RadialMesh, V) -> AssembledOperators:
    """Assemble stiffness, mass, and potential matrices plus the Robin variant.

    V may be a PotentialSpec, any radial callable, or None for V = 0.  The
    Robin closure w'(r_max) + w(r_max)/r_max = 0 contributes the boundary
    term (1/r_max) * r_max^2 to the last stiffness diagonal entry.
    """
    K = stiffness_full(mesh)
    M = mass_full(mesh)
    if V is None:
        Vm = SymTridiag(np.zeros(mesh.n + 1), np.zeros(mesh.n))
    else:
        Vm = potential_full(mesh, V)
    K_rob = K.copy()
    K_rob.d[-1] += mesh.r_max
    return AssembledOperators(mesh=mesh, K_full=K, M_full=M, V_full=Vm, K_rob=K_rob)


def poisson_solve_robin(ops: AssembledOperators, source: np.ndarray) -> np.ndarray:
    """Solve -Delta w = source with Neumann at 0 and Robin at r_max.

    source holds nodal values of the density; it is extended by zero to the
    boundary node when given on the interior only.  Returns w on all nodes.
    """
    n1 = ops.mesh.n + 1
    source = np.asarray(source, dtype=float)
    if source.shape[0] == n1 - 1:
        source = np.concatenate([source, [0.0]])
    elif source.shape[0] != n1:
        raise ConfigurationError("source must live on mesh nodes")
    rhs = ops.M_full.matvec(source)
    return sla.cho_solve_banded((ops.robin_factor(), False), rhs)


def radial_integral(mesh: RadialMesh, vals_at_gauss: np.ndarray) -> float:
    """Integral f r^2 dr with f sampled at the Gauss points, shape (n, 3)."""
    x = mesh.gauss_points()
    return float(np.sum(mesh.gauss_weights() * vals_at_gauss * x * x))


def accumulated_mass(mesh: RadialMesh, u: np.ndarray) -> np.ndarray:
    """m(r_j) = integral_0^{r_j} u^2 r^2 dr for piecewise-linear u."""
    ug = mesh.interp_at_gauss(np.asarray(u, dtype=float))
    x = mesh.gauss_points()
    per_elem = np.sum(mesh.gauss_weights() * ug * ug * x * x, axis=1)
    m = np.zeros(mesh.n + 1)
    np.cumsum(per_elem, out=m[1:])
    return m


def discrete_mass(u: np.ndarray, ops: AssembledOperators) -> float:
    """M(u) = u^T M u, matching u's size (interior or full)."""
    u = np.asarray(u)
    M = ops.M_full if u.shape[0] == ops.mesh.n + 1 else ops.M_dir
    return float(np.real(np.vdot(u, M.matvec(u))))


def discrete_energy(u: np.ndarray, ops: AssembledOperators,
                    include_hartree: bool = True) -> float:
    """H(u) = u^T (K + V) u - (1/2) (M|u|^2)^T K_rob^{-1} (M|u|^2).

    Works for real or complex nodal u (interior-sized vectors are extended
    by zero at r_max).
    """
    u = np.asarray(u)
    if u.shape[0] == ops.mesh.n:
        u = np.concatenate([u, [0.0]])
    quad = np.real(np.vdot(u, ops.K_full.matvec(u) + ops.V_full.matvec(u)))
    if not include_hartree:
        return float(quad)
    dens = np.abs(u) ** 2
    w = poisson_solve_robin(ops, dens)
    hart = 0.5 * float(np.dot(ops.M_full.matvec(dens), w))
    return float(quad - hart)


def count_zero_crossings(u: np.ndarray, noise_floor_rel: float = 1e-8) -> int:
    """Strict sign changes between consecutive nodes, ignoring values below
    noise_floor_rel * max|u| (suppresses flips in the exponential tail)."""
    u = np.asarray(u, dtype=float)
    umax = np.max(np.abs(u))
    if umax == 0.0:
        raise ConfigurationError("zero-crossing count of an all-zero profile")
    s = u[np.abs(u) > noise_floor_rel * umax]
    return int(np.sum(np.sign(s[1:]) * np.sign(s[:-1]) < 0))


def nodal_derivative(mesh: RadialMesh, u: np.ndarray) -> np.ndarray:
    """Second-order derivative estimate of nodal data on the nonuniform mesh."""
    r = mesh.nodes
    u = np.asarray(u, dtype=float)
    du = np.empty_like(u)
    hl = r[1:-1] - r[:-2]
    hr = r[2:] - r[1:-1]
    du[1:-1] = (
        -hr / (hl * (hl + hr)) * u[:-2]
        + (hr - hl) / (hl * hr) * u[1:-1]
        + hl / (hr * (hl + hr)) * u[2:]
    )
    h0, h1 = r[1] - r[0], r[2] - r[1]
    du[0] = -(2 * h0 + h1) / (h0 * (h0 + h1)) * u[0] \
        + (h0 + h1) / (h0 * h1) * u[1] - h0 / (h1 * (h0 + h1)) * u[2]
    hm, hn = r[-2] - r[-3], r[-1] - r[-2]
    du[-1] = hn / (hm * (hm + hn)) * u[-3] \
        - (hm + hn) / (hm * hn) * u[-2] + (2 * hn + hm) / (hn * (hm + hn)) * u[-1]
    return du
