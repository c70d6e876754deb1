"""Independent shooting oracle for the linear radial eigenproblem.

Validates the FEM eigensolver against a second-order finite-difference march
of the transformed equation -phi'' + V phi = -E phi with phi = r psi, which
removes the first-derivative term.  Eigenvalues of the boxed problem
(phi(0) = phi(R) = 0) are located by bisecting on the interior node count of
the marched solution; a Richardson step over two grid spacings removes the
leading O(h^2) error.

This module deliberately shares no discretization machinery with the FEM
path.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def _march_batch(Vg: np.ndarray, h: float, E: np.ndarray) -> np.ndarray:
    """March phi'' = (V + E) phi from phi(0)=0, phi'(0)=1 for a batch of E.

    Returns the interior node count of each trajectory.  Values are rescaled
    when they grow large so the recurrence cannot overflow.
    """
    nE = E.shape[0]
    prev = np.zeros(nE)
    cur = np.full(nE, h)
    count = np.zeros(nE, dtype=int)
    h2 = h * h
    for Vk in Vg[1:-1]:
        nxt = 2.0 * cur - prev + h2 * (Vk + E) * cur
        count += (np.sign(nxt) * np.sign(cur)) < 0
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            cur = cur * scale
            prev = prev * scale
    return count


def shoot_spectrum(V, js, R: float, h: float = 2e-3,
                   E_hi: float | None = None, batch: int = 32,
                   passes: int = 24) -> np.ndarray:
    """E values of the j-node bound states of -Delta + V on [0, R], Dirichlet.

    V is a radial callable; js a sequence of node counts.  Returned E > 0 are
    the magnitudes of the (negative) eigenvalues.  All targets are refined
    together: per pass one batched march resolves every open bracket by
    bisection on the node count N(E), which counts box eigenvalues below -E,
    so the j-th eigenvalue sits at the N = j -> j+1 transition.
    """
    nsteps = int(round(R / h))
    r = np.linspace(0.0, R, nsteps + 1)
    Vg = np.asarray(V(np.where(r == 0, 1e-12, r)), dtype=float)

    if E_hi is None:
        # ignore the singular head of the sampled potential when sizing
        # the bracket: depth beyond 1/h^2 is unresolvable anyway
        E_hi = min(float(np.max(-Vg)), 1.0 / (h * h)) + 1.0
    js = list(js)
    lo = {j: 1e-12 for j in js}   # node count > j here (shallow side)
    hi = {j: E_hi for j in js}    # node count <= j here (deep side)

    c = _march_batch(Vg, h, np.array([1e-12, E_hi]))
    if c[0] <= max(js):
        raise ConvergenceError(
            f"shooting resolves only {c[0]} states on R={R:g}")
    if c[1] > min(js):
        raise ConvergenceError("shooting bracket: E_hi not deep enough")

    for _ in range(passes):
        open_js = [j for j in js
                   if hi[j] - lo[j] > 1e-14 * max(lo[j], 1e-10)]
        if not open_js:
            break
        grids = {j: np.linspace(lo[j], hi[j], batch) for j in open_js}
        cs = _march_batch(Vg, h, np.concatenate(
            [grids[j] for j in open_js]))
        for idx, j in enumerate(open_js):
            cj = cs[idx * batch:(idx + 1) * batch]
            above = cj > j
            if np.any(above):
                lo[j] = grids[j][above][-1]
            if np.any(~above):
                hi[j] = grids[j][~above][0]
    return np.array([0.5 * (lo[j] + hi[j]) for j in js])


def shoot_eigenvalue(V, j: int, R: float, h: float = 2e-3, **kw) -> float:
    return float(shoot_spectrum(V, [j], R, h=h, **kw)[0])


def shoot_spectrum_richardson(V, js, R: float, h: float = 2e-3,
                              **kw) -> np.ndarray:
    """Richardson-extrapolated shooting spectrum: (4 E(h/2) - E(h)) / 3."""
    e1 = shoot_spectrum(V, js, R, h=h, **kw)
    e2 = shoot_spectrum(V, js, R, h=0.5 * h, **kw)
    return (4.0 * e2 - e1) / 3.0
