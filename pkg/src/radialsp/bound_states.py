"""Nonlinear bound states: homotopy continuation and branch sweeps.

The stationary Schrodinger-Poisson problem is solved as the first-order
system in (u, v, w, z, m):

    u' = v
    v' = -(2/r) v + V(r) u - gamma w u + E u
    w' = z
    z' = -(2/r) z - u^2
    m' = u^2 r^2

with v(0) = z(0) = m(0) = 0 and far-field closures at r_max: a Robin
condition on the Hartree potential, z + w/r_max = 0, and a Robin condition
on the profile built from the matched asymptotics,

    v + [1/r_max + sqrt(E) - (1 + m(r_max)) / (2 r_max sqrt(E))] u = 0.

In fixed-mass mode m(r_max) = mass is enforced and E joins the unknowns; in
fixed-E mode the mass condition is dropped and m(r_max) is solved for.  The
homotopy parameter gamma in [0, 1] connects the linear eigenproblem to the
full nonlinearity; zero-crossing counts are invariant along admissible paths
and are checked at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import fem
from .collocation import solve_collocation
from .errors import (BranchIntegrityError, ConfigurationError,
                     ConvergenceError, MatchingError)
from .fem import AssembledOperators, RadialMesh
from .linear import LinearEigenpair

FIXED_MASS = "fixed-mass"
FIXED_E = "fixed-E"

# sweep stops once the profile tail carries this fraction of the peak
TAIL_CONTAMINATION = 1e-4


def first_order_rhs(state, r: float, gamma: float, E: float, V) -> np.ndarray:
    """Derivative of (u, v, w, z, m) at a single radius r > 0.

    The raw right side is singular at the origin; the collocation solver
    substitutes the regularized limits there, so r = 0 is rejected here.
    """
    if r <= 0:
        raise ConfigurationError(
            "first_order_rhs is singular at r = 0; use the regularized form")
    u, v, w, z, m = state
    vv = float(V(r))
    return np.array([
        v,
        -2.0 / r * v + vv * u - gamma * w * u + E * u,
        z,
        -2.0 / r * z - u * u,
        u * u * r * r,
    ])


def _rhs_vec(r, Y, gamma, E, Vvals):
    """Vectorized RHS with the regularized origin rows (v' and z' limits /3)."""
    u, v, w, z = Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3]
    g = (Vvals - gamma * w + E) * u
    origin = r == 0.0
    rr = np.where(origin, 1.0, r)
    two_r = np.where(origin, 0.0, 2.0 / rr)
    out = np.empty_like(Y)
    out[:, 0] = v
    out[:, 1] = np.where(origin, g / 3.0, -two_r * v + g)
    out[:, 2] = z
    out[:, 3] = np.where(origin, -u * u / 3.0, -two_r * z - u * u)
    out[:, 4] = u * u * r * r
    return out


def _jac_vec(r, Y, gamma, E, Vvals):
    u, w = Y[:, 0], Y[:, 2]
    origin = r == 0.0
    rr = np.where(origin, 1.0, r)
    two_r = np.where(origin, 0.0, 2.0 / rr)
    reg = np.where(origin, 1.0 / 3.0, 1.0)
    A = np.zeros(Y.shape[:1] + (5, 5))
    A[:, 0, 1] = 1.0
    A[:, 1, 0] = reg * (Vvals - gamma * w + E)
    A[:, 1, 1] = -two_r
    A[:, 1, 2] = -reg * gamma * u
    A[:, 2, 3] = 1.0
    A[:, 3, 0] = -2.0 * reg * u
    A[:, 3, 3] = -two_r
    A[:, 4, 0] = 2.0 * u * r * r
    return A


def _rhs_dE_vec(r, Y, Vvals_unused):
    out = np.zeros_like(Y)
    out[:, 1] = np.where(r == 0.0, Y[:, 0] / 3.0, Y[:, 0])
    return out


def robin_coefficient(E: float, m_R: float, r_max: float) -> float:
    """1/r_max + sqrt(E) - (1 + m(r_max)) / (2 r_max sqrt(E))."""
    if E <= 0:
        raise ConfigurationError("far-field Robin coefficient needs E > 0")
    sE = np.sqrt(E)
    return 1.0 / r_max + sE - (1.0 + m_R) / (2.0 * r_max * sE)


def boundary_residuals(ya, yb, mode: str, E: float, r_max: float,
                       target_mass: float = 1.0) -> np.ndarray:
    """Boundary residual vector; fixed-mass mode appends m(r_max) - mass."""
    kap = robin_coefficient(E, yb[4], r_max)
    res = [ya[1], ya[3], ya[4]]
    if mode == FIXED_MASS:
        res.append(yb[4] - target_mass)
    elif mode != FIXED_E:
        raise ConfigurationError(f"unknown BVP mode {mode!r}")
    res.append(yb[3] + yb[2] / r_max)
    res.append(yb[1] + kap * yb[0])
    return np.array(res)


def _bc_jacobians(ya, yb, mode, E, r_max):
    nbc = 6 if mode == FIXED_MASS else 5
    dya = np.zeros((nbc, 5))
    dyb = np.zeros((nbc, 5))
    dp = np.zeros(nbc)
    dya[0, 1] = 1.0
    dya[1, 3] = 1.0
    dya[2, 4] = 1.0
    k = 3
    if mode == FIXED_MASS:
        dyb[3, 4] = 1.0
        k = 4
    dyb[k, 3] = 1.0
    dyb[k, 2] = 1.0 / r_max
    sE = np.sqrt(E)
    kap = robin_coefficient(E, yb[4], r_max)
    dyb[k + 1, 1] = 1.0
    dyb[k + 1, 0] = kap
    dyb[k + 1, 4] = -yb[0] / (2.0 * r_max * sE)
    if mode == FIXED_MASS:
        dp[k + 1] = yb[0] * (0.5 / sE + (1.0 + yb[4]) / (4.0 * r_max * E * sE))
    return dya, dyb, dp


@dataclass
class BoundState:
    """Converged profile of the first-order system on one mesh."""

    mesh: RadialMesh
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray
    m: np.ndarray
    E: float
    gamma: float
    branch_index: int
    mass: float
    colloc_resid: float = 0.0

    @property
    def Y(self) -> np.ndarray:
        return np.column_stack([self.u, self.v, self.w, self.z, self.m])

    @classmethod
    def from_Y(cls, mesh, Y, E, gamma, branch_index, resid=0.0):
        return cls(mesh=mesh, u=Y[:, 0].copy(), v=Y[:, 1].copy(),
                   w=Y[:, 2].copy(), z=Y[:, 3].copy(), m=Y[:, 4].copy(),
                   E=float(E), gamma=float(gamma), branch_index=branch_index,
                   mass=float(Y[-1, 4]), colloc_resid=float(resid))

    def zero_crossings(self) -> int:
        return fem.count_zero_crossings(self.u)

    def interp(self, r) -> np.ndarray:
        return np.interp(r, self.mesh.nodes, self.u)


class SchrodingerPoissonBVP:
    """Caches potential samples for one (mesh, V) pair and runs BVP solves."""

    def __init__(self, mesh: RadialMesh, V):
        self.mesh = mesh
        self.V = V
        self._cache = {}

    def _Vvals(self, r):
        key = (r.shape[0], float(r[0]), float(r[-1]))
        got = self._cache.get(key)
        if got is None or got[0] is not r:
            got = (r, np.asarray(self.V(r), dtype=float))
            self._cache[key] = got
        return got[1]

    def solve(self, guess: BoundState, mode: str, gamma: float,
              E: Optional[float] = None, target_mass: float = 1.0,
              tol: float = 1e-10, max_iter: int = 40) -> BoundState:
        """Collocation solve from a structured guess.

        fixed-mass mode solves for E (seeded from guess.E or the E argument);
        fixed-E mode holds the given E and solves for the profile and its
        mass.  The converged state keeps the guess's branch index; callers
        that care about branch integrity must verify zero crossings.
        """
        mesh = self.mesh
        r = mesh.nodes

        def rhs(rr, Y, p):
            e = p if mode == FIXED_MASS else E
            return _rhs_vec(rr, Y, gamma, e, self._Vvals(rr))

        def jacf(rr, Y, p):
            e = p if mode == FIXED_MASS else E
            return _jac_vec(rr, Y, gamma, e, self._Vvals(rr))

        def bcf(ya, yb, p):
            e = p if mode == FIXED_MASS else E
            return boundary_residuals(ya, yb, mode, e, mesh.r_max, target_mass)

        def bcjf(ya, yb, p):
            e = p if mode == FIXED_MASS else E
            return _bc_jacobians(ya, yb, mode, e, mesh.r_max)

        if mode == FIXED_MASS:
            p0 = guess.E if E is None else E
            res = solve_collocation(
                r, guess.Y, rhs, jacf, bcf, bcjf, param0=p0,
                rhs_dparam=lambda rr, Y, p: _rhs_dE_vec(rr, Y, None),
                tol=tol, max_iter=max_iter)
            e_out = res.param
        elif mode == FIXED_E:
            if E is None or E <= 0:
                raise ConfigurationError("fixed-E solve needs E > 0")
            res = solve_collocation(
                r, guess.Y, rhs, jacf, bcf, bcjf, tol=tol, max_iter=max_iter)
            e_out = E
        else:
            raise ConfigurationError(f"unknown BVP mode {mode!r}")
        return BoundState.from_Y(mesh, res.Y, e_out, gamma,
                                 guess.branch_index, res.colloc_resid)


def seed_from_linear(mesh: RadialMesh, ops: AssembledOperators,
                     pair: LinearEigenpair) -> BoundState:
    """Structured gamma = 0 guess built from a linear eigenpair."""
    u = np.concatenate([pair.vector, [0.0]])
    v = fem.nodal_derivative(mesh, u)
    v[0] = 0.0
    m = fem.accumulated_mass(mesh, u)
    w = fem.poisson_solve_robin(ops, u * u)
    r = mesh.nodes
    z = np.zeros_like(w)
    z[1:] = -m[1:] / r[1:] ** 2
    Y = np.column_stack([u, v, w, z, m])
    return BoundState.from_Y(mesh, Y, pair.E, 0.0, pair.node_count)


def solve_bvp(problem: SchrodingerPoissonBVP, guess: BoundState, mode: str,
              **kw) -> BoundState:
    """Convenience wrapper mirroring the module-level operation."""
    return problem.solve(guess, mode, gamma=kw.pop("gamma", guess.gamma), **kw)


def gamma_continuation(problem: SchrodingerPoissonBVP,
                       ops: AssembledOperators,
                       pair: LinearEigenpair,
                       dgamma: float = 0.05,
                       target_mass: float = 1.0,
                       tol: float = 1e-10,
                       min_dgamma: float = 0.0125,
                       keep_path: bool = False):
    """Continue the linear eigenstate to gamma = 1 at fixed mass.

    Fixed-mass solves walk gamma from 0 to 1 with warm starts; the step is
    halved (down to min_dgamma) when Newton fails.  A zero-crossing change
    between consecutive steps raises BranchIntegrityError.  Returns the
    gamma = 1 state, or (state, path) when keep_path is set.
    """
    if not (0.0 < dgamma <= 0.2):
        raise ConfigurationError("dgamma must lie in (0, 0.2]")
    state = seed_from_linear(problem.mesh, ops, pair)
    j = pair.node_count
    path: List[BoundState] = []
    gamma, step = 0.0, dgamma
    cur = problem.solve(state, FIXED_MASS, gamma=0.0, target_mass=target_mass,
                        tol=tol)
    if cur.zero_crossings() != j:
        raise BranchIntegrityError(
            f"gamma=0 solve has {cur.zero_crossings()} crossings, "
            f"expected {j}")
    if keep_path:
        path.append(cur)
    while gamma < 1.0 - 1e-12:
        g_next = min(1.0, gamma + step)
        try:
            nxt = problem.solve(cur, FIXED_MASS, gamma=g_next,
                                target_mass=target_mass, tol=tol)
        except ConvergenceError:
            if step / 2.0 < min_dgamma - 1e-15:
                raise
            step /= 2.0
            continue
        nj = nxt.zero_crossings()
        if nj != j:
            raise BranchIntegrityError(
                f"zero crossings changed {j} -> {nj} at gamma={g_next:.4f}")
        gamma, cur = g_next, nxt
        if keep_path:
            path.append(cur)
    return (cur, path) if keep_path else cur


@dataclass
class BranchCurve:
    """Ordered (E, mass) samples along one branch."""

    branch_index: int
    states: List[BoundState] = field(default_factory=list)
    provenance: str = ""
    stop_reason: str = ""
    warnings: List[str] = field(default_factory=list)

    @property
    def E(self) -> np.ndarray:
        return np.array([s.E for s in self.states])

    @property
    def mass(self) -> np.ndarray:
        return np.array([s.mass for s in self.states])

    def sorted(self) -> "BranchCurve":
        order = np.argsort(self.E)
        return BranchCurve(self.branch_index,
                           [self.states[i] for i in order],
                           self.provenance, self.stop_reason)

    def merged_with(self, other: "BranchCurve") -> "BranchCurve":
        allst = {round(s.E, 14): s for s in self.states}
        for s in other.states:
            allst.setdefault(round(s.E, 14), s)
        cur = BranchCurve(self.branch_index, list(allst.values()),
                          f"{self.provenance}+{other.provenance}",
                          self.stop_reason or other.stop_reason,
                          self.warnings + other.warnings)
        return cur.sorted()


def sweep_E(problem: SchrodingerPoissonBVP, start: BoundState,
            E_values: Sequence[float], tol: float = 1e-10) -> BranchCurve:
    """Fixed-E solves warm-started along E_values (gamma = 1 branch sweeps).

    Stops early when Newton fails, when a solve loses the zero-crossing
    count, or -- on downward sweeps, where states widen -- when the profile
    tail reaches the box boundary (|u(r_max)| > 1e-4 max|u|); the partial
    curve records the reason.  On upward sweeps, where states narrow as E
    grows, boundary contamination is recorded as a warning instead.
    """
    j = start.branch_index
    curve = BranchCurve(branch_index=j, provenance="sweep-E")
    cur = start
    for Ev in E_values:
        going_down = Ev < cur.E
        if abs(Ev - cur.E) < 1e-14 * max(1.0, abs(Ev)):
            curve.states.append(cur)
            continue
        try:
            nxt = problem.solve(cur, FIXED_E, gamma=start.gamma, E=float(Ev),
                                tol=tol)
        except ConvergenceError as exc:
            curve.stop_reason = f"convergence failure at E={Ev:.6g}: {exc}"
            break
        if nxt.zero_crossings() != j:
            curve.stop_reason = (
                f"zero-crossing count changed at E={Ev:.6g}")
            break
        contaminated = (abs(nxt.u[-1])
                        > TAIL_CONTAMINATION * np.max(np.abs(nxt.u)))
        if contaminated and going_down:
            curve.stop_reason = (
                f"tail reached the box boundary at E={Ev:.6g} "
                f"(|u(r_max)|/max|u| > {TAIL_CONTAMINATION:g})")
            break
        if contaminated:
            curve.warnings.append(
                f"boundary contamination at E={Ev:.6g}")
        curve.states.append(nxt)
        cur = nxt
    return curve


def geometric_E_grid(E_from: float, E_to: float,
                     per_decade: int = 25) -> np.ndarray:
    """Geometrically spaced E values from E_from to E_to inclusive."""
    if E_from <= 0 or E_to <= 0:
        raise ConfigurationError("E grid endpoints must be positive")
    decades = abs(np.log10(E_to / E_from))
    npts = max(2, int(np.ceil(per_decade * decades)) + 1)
    return np.geomspace(E_from, E_to, npts)


def hamiltonian_value(state: BoundState, ops: AssembledOperators) -> float:
    """Discrete H(u) used in the d(E) = H + E M stability scalar."""
    return fem.discrete_energy(state.u, ops)


@dataclass
class SlopeReport:
    p: int                      # 1 iff mass strictly increases with E
    E_mid: np.ndarray
    dprime_fd: np.ndarray       # finite-difference d'(E)
    mass_mid: np.ndarray        # midpoint discrete masses
    max_rel_err: float
    warning: str = ""


def d_second_sign(curve: BranchCurve, ops: AssembledOperators) -> SlopeReport:
    """Monotonicity indicator p(d'') plus the d'(E) = M consistency table.

    d(E) = H + E*M is finite-differenced between consecutive samples and
    compared against the midpoint mass; disagreement or non-monotone mass
    produces a warning rather than an exception.
    """
    if len(curve.states) < 3:
        raise ConfigurationError("d_second_sign needs at least 3 samples")
    srt = curve.sorted()
    E = srt.E
    masses = np.array([fem.discrete_mass(s.u, ops) for s in srt.states])
    d_vals = np.array([hamiltonian_value(s, ops) for s in srt.states]) \
        + E * masses
    dp_fd = np.diff(d_vals) / np.diff(E)
    m_mid = 0.5 * (masses[1:] + masses[:-1])
    rel = np.abs(dp_fd - m_mid) / m_mid
    increasing = bool(np.all(np.diff(masses) > 0))
    warn = ""
    if not increasing:
        warn = "mixed monotonicity: mass(E) is not strictly increasing"
    return SlopeReport(p=1 if increasing else 0,
                       E_mid=0.5 * (E[1:] + E[:-1]),
                       dprime_fd=dp_fd, mass_mid=m_mid,
                       max_rel_err=float(np.max(rel)), warning=warn)


def rescale_profile(state: BoundState, y: np.ndarray) -> np.ndarray:
    """u_tilde(y) = u(y / sqrt(E)) / E on the reference grid y."""
    sE = np.sqrt(state.E)
    return state.interp(y / sE) / state.E


@dataclass
class RescaleReport:
    slope: float
    E_tail: np.ndarray
    mass_tail: np.ndarray
    y: np.ndarray
    profiles: np.ndarray        # rescaled profiles along the tail
    cauchy_sup: np.ndarray      # sup differences of consecutive profiles


def rescale_check(curve: BranchCurve, y_max: float = 12.0,
                  n_y: int = 1200) -> RescaleReport:
    """Large-E scaling diagnostics over the largest computed decade.

    Fits the log-log slope of mass against E (asymptotically 1/2) and
    tabulates sup-norm differences of successive rescaled profiles, which
    should decrease as the branch approaches the potential-free soliton.
    """
    srt = curve.sorted()
    E = srt.E
    if E[-1] / E[0] < 10.0:
        raise ConfigurationError(
            "rescale_check needs a branch spanning at least one decade in E")
    sel = E >= E[-1] / 10.0
    Et, Mt = E[sel], srt.mass[sel]
    slope = float(np.polyfit(np.log(Et), np.log(Mt), 1)[0])
    y = np.linspace(0.0, y_max, n_y)
    profs = np.array([rescale_profile(s, y)
                      for s, keep in zip(srt.states, sel) if keep])
    sups = np.max(np.abs(np.diff(profs, axis=0)), axis=1) if len(profs) > 1 \
        else np.array([])
    return RescaleReport(slope=slope, E_tail=Et, mass_tail=Mt, y=y,
                         profiles=profs, cauchy_sup=sups)


class FarFieldExtension:
    """Profile continued beyond its mesh by the matched asymptotic tail

        u(r) ~ K exp(-sqrt(E) r) r^{-1 + (1 + m(r_max)) / (2 sqrt(E))}.

    With the u(0) > 0 convention the outermost lobe of a branch-j profile
    carries sign (-1)^j; a value of the opposite sign (or zero) at the
    matching radius means the stored tail is below the solver's accuracy
    and cannot be matched.
    """

    def __init__(self, state: BoundState, r_max_new: float,
                 match_at: Optional[float] = None):
        if r_max_new <= state.mesh.r_max:
            raise ConfigurationError("extension radius must exceed r_max")
        if state.E <= 0:
            raise ConfigurationError("far-field extension needs E > 0")
        self.state = state
        self.r_max_new = float(r_max_new)
        self.r_match = float(match_at) if match_at is not None \
            else state.mesh.r_max
        self.tail_sign = -1.0 if state.branch_index % 2 else 1.0
        # the state carries u' as well, so the inner interpolant can be
        # C^1 cubic Hermite: transplanting onto evolution meshes keeps the
        # solver's own accuracy instead of degrading to piecewise linear
        from scipy.interpolate import CubicHermiteSpline
        self._inner = CubicHermiteSpline(state.mesh.nodes, state.u, state.v)
        u_match = float(self._inner(self.r_match)) * self.tail_sign
        if u_match <= 0.0:
            raise MatchingError(
                f"profile value {u_match:.3e} (after sign fixing) at "
                f"matching radius {self.r_match:g} is not positive")
        sE = np.sqrt(state.E)
        self.exponent = -1.0 + (1.0 + state.mass) / (2.0 * sE)
        self.decay = sE
        # amplitude via logs so deep tails cannot overflow the match factor
        self.logK = (np.log(u_match) + sE * self.r_match
                     - self.exponent * np.log(self.r_match))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inner = self._inner(np.clip(r, 0.0, self.state.mesh.r_max))
        rs = np.maximum(r, 1e-300)
        logtail = self.logK - self.decay * r + self.exponent * np.log(rs)
        with np.errstate(over="ignore", under="ignore"):
            tail = self.tail_sign * np.exp(np.minimum(logtail, 700.0))
        out = np.where(r <= self.r_match, inner, tail)
        return out if out.ndim else float(out)


def farfield_extend(state: BoundState, r_max_new: float,
                    match_at: Optional[float] = None) -> FarFieldExtension:
    """Extend a bound state to a larger domain by asymptotic matching.

    By default the tail is matched in value at the state's own r_max.  An
    interior match_at may be supplied when the stored tail is below the
    solver's absolute accuracy (time-evolution initial data does this).
    """
    return FarFieldExtension(state, r_max_new, match_at)


def reliable_match_radius(state: BoundState,
                          floor_rel: float = 1e-12) -> float:
    """Largest node where |u| still exceeds floor_rel * max|u| (tail values
    below that are linear-solver noise, not solution)."""
    absu = np.abs(state.u)
    good = np.nonzero(absu > floor_rel * absu.max())[0]
    return float(state.mesh.nodes[good[-1]])


def pohozaev_residual(state: BoundState, Vspec) -> float:
    """Relative defect of the virial identity for converged states:

        KE = (E/3) M + (1/3) int V u^2 + (2/3) int (r V') u^2,

    all integrals carrying r^2 dr.  The identity follows from the
    energy-momentum tensor of the stationary system; the sign of the V term
    is fixed by direct multiplier derivation (and verified numerically by
    mesh refinement).
    """
    mesh = state.mesh
    x = mesh.gauss_points()
    ug = mesh.interp_at_gauss(state.u)
    vg = mesh.interp_at_gauss(state.v)
    ke = fem.radial_integral(mesh, vg * vg)
    mm = fem.radial_integral(mesh, ug * ug)
    iv = fem.radial_integral(mesh, np.asarray(Vspec(x)) * ug * ug)
    irv = fem.radial_integral(mesh, x * np.asarray(Vspec.derivative(x)) * ug * ug)
    rhs = state.E / 3.0 * mm + iv / 3.0 + 2.0 / 3.0 * irv
    return float(abs(ke - rhs) / abs(ke))
