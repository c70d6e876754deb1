"""Bound states of the linear operator -Delta + V via the FEM eigenproblem.

Solves (K_dir + V_dir) x = -lambda M_dir x by shift-invert Lanczos targeting
the most-negative end; only eigenvalues below the continuum threshold are
reported as bound states.  The Sturm structure (node counts increasing with
the eigenvalue order, simple eigenvalues) is checked explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import InsufficientDomainError, SpectralStructureError
from .fem import AssembledOperators, count_zero_crossings

# eigenvalues in [-CONTINUUM_EPS, 0) are unresolved continuum artifacts
CONTINUUM_EPS = 1e-8


@dataclass
class LinearEigenpair:
    """One bound state of the linear problem.

    eigenvalue -- the (negative) operator eigenvalue, i.e. -E
    vector     -- nodal values on interior nodes, mass-normalized, u(0) > 0
    node_count -- zero crossings of the profile (branch index)
    """

    eigenvalue: float
    vector: np.ndarray
    node_count: int

    @property
    def E(self) -> float:
        return -self.eigenvalue


def solve_linear_states(ops: AssembledOperators, k: int) -> list[LinearEigenpair]:
    """The k most-negative eigenpairs, mass-normalized and sign-fixed.

    Raises InsufficientDomainError when fewer than k bound states are
    resolvable on this mesh (the error carries how many were found).
    """
    if k < 1:
        raise ValueError("need k >= 1")
    A = (ops.K_dir + ops.V_dir).to_sparse()
    M = ops.M_dir.to_sparse()
    n = A.shape[0]

    # x'(K+V)x >= min(V) x'Mx since K is PSD and V_dir shares M's quadrature,
    # so any sigma below min(V) undershoots the whole spectrum
    vmin = float(np.min(ops.V_full.d / np.maximum(ops.M_full.d, 1e-300)))
    sigma = min(vmin, 0.0) - 0.1
    v0 = np.cos(np.arange(n))  # deterministic start: reproducible runs

    kk = min(k + 2, n - 2)  # small buffer against near-threshold artifacts
    vals, vecs = spla.eigsh(A, k=kk, M=M, sigma=sigma, which="LM", v0=v0)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]

    pairs = []
    for lam, x in zip(vals, vecs.T):
        if lam >= -CONTINUUM_EPS:
            continue
        nrm = np.sqrt(x @ ops.M_dir.matvec(x))
        x = x / nrm
        if x[0] < 0:
            x = -x
        pairs.append(LinearEigenpair(float(lam), x, count_zero_crossings(x)))
        if len(pairs) == k:
            break
    if len(pairs) < k:
        raise InsufficientDomainError(
            f"only {len(pairs)} bound states resolvable (requested {k}); "
            "increase r_max or mesh resolution",
            found=len(pairs),
        )
    return pairs


def sturm_check(pairs: list[LinearEigenpair],
                rel_gap: float = 1e-10) -> bool:
    """Assert node counts strictly increase and eigenvalues are simple."""
    if len(pairs) < 1:
        raise SpectralStructureError("sturm_check needs at least one pair")
    for a, b in zip(pairs, pairs[1:]):
        if b.eigenvalue - a.eigenvalue <= rel_gap * abs(a.eigenvalue):
            raise SpectralStructureError(
                f"numerically repeated eigenvalues {a.eigenvalue:.12g} and "
                f"{b.eigenvalue:.12g}")
        if b.node_count <= a.node_count:
            raise SpectralStructureError(
                f"node count {b.node_count} at eigenvalue {b.eigenvalue:.6g} "
                f"does not exceed {a.node_count} at {a.eigenvalue:.6g}")
    return True


def rayleigh_defect(pair: LinearEigenpair, ops: AssembledOperators) -> float:
    """|x'(K+V)x - lambda x'Mx| normalized by |lambda| x'Mx."""
    x = pair.vector
    ax = ops.K_dir.matvec(x) + ops.V_dir.matvec(x)
    mx = ops.M_dir.matvec(x)
    return float(abs(x @ ax - pair.eigenvalue * (x @ mx))
                 / (abs(pair.eigenvalue) * (x @ mx)))
