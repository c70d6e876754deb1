"""Collocation solver for first-order two-point boundary value problems.

Three-stage Lobatto IIIA collocation (fourth order) on the given mesh: the
collocating cubic interpolates endpoint values and slopes and is collocated
at interval midpoints, which condenses to the Simpson-form algebraic system

    y_{i+1} - y_i - h/6 (f_i + 4 f_mid + f_{i+1}) = 0,
    y_mid = (y_i + y_{i+1})/2 - h/8 (f_{i+1} - f_i).

A scalar parameter (e.g. an eigenvalue) may be appended to the unknowns when
the boundary conditions overdetermine the trajectory by one.  Newton steps
are damped by Armijo backtracking on the residual norm; analytic Jacobians
are assembled sparse and factorized with SuperLU.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SingularJacobianError

_ARMIJO_C = 1e-4
_MAX_BACKTRACK = 25


@dataclass
class CollocationResult:
    Y: np.ndarray                # (N, d) nodal solution
    param: Optional[float]      # solved scalar unknown, if any
    iterations: int
    colloc_resid: float          # scaled max midpoint collocation residual


def midpoint_states(r, Y, f, h):
    return 0.5 * (Y[:-1] + Y[1:]) - (h[:, None] / 8.0) * (f[1:] - f[:-1])


def _interval_residual(Y, f, fm, h):
    return Y[1:] - Y[:-1] - (h[:, None] / 6.0) * (f[:-1] + 4.0 * fm + f[1:])


def collocation_residual_norm(Rint, Rbc, h):
    """Max ODE residual of the collocating polynomial at interval midpoints.

    The Simpson defect relates to the midpoint collocation residual through
    S'(mid) - f(mid) = (3 / 2h) * defect; boundary rows enter unscaled.
    """
    scaled = (1.5 / h)[:, None] * np.abs(Rint)
    m = float(scaled.max()) if Rint.size else 0.0
    if Rbc.size:
        m = max(m, float(np.max(np.abs(Rbc))))
    return m


def solve_collocation(
    r: np.ndarray,
    Y0: np.ndarray,
    rhs: Callable,
    jac: Callable,
    bc: Callable,
    bc_jac: Callable,
    param0: Optional[float] = None,
    rhs_dparam: Optional[Callable] = None,
    tol: float = 1e-10,
    max_iter: int = 40,
) -> CollocationResult:
    """Damped-Newton solve of the collocation system.

    rhs(r, Y, p) -> (m, d); jac(r, Y, p) -> (m, d, d);
    bc(ya, yb, p) -> (nbc,); bc_jac(ya, yb, p) -> (dya, dyb, dp or None);
    rhs_dparam(r, Y, p) -> (m, d) when a scalar parameter is solved for.
    Convergence is declared when the scaled midpoint collocation residual
    drops below tol * max(1, |Y|_inf).
    """
    r = np.asarray(r, dtype=float)
    Y = np.array(Y0, dtype=float)
    N, d = Y.shape
    h = np.diff(r)
    rm = 0.5 * (r[:-1] + r[1:])
    has_p = param0 is not None
    p = float(param0) if has_p else None

    nbc = bc(Y[0], Y[-1], p).shape[0]
    nuk = N * d + (1 if has_p else 0)
    neq = (N - 1) * d + nbc
    if neq != nuk:
        raise ValueError(f"system not square: {neq} equations, {nuk} unknowns")

    rows_blk, colsL_blk, colsR_blk = _block_indices(N, d)

    def residual(Yc, pc):
        f = rhs(r, Yc, pc)
        Ym = midpoint_states(r, Yc, f, h)
        fm = rhs(rm, Ym, pc)
        Rint = _interval_residual(Yc, f, fm, h)
        Rbc = bc(Yc[0], Yc[-1], pc)
        return f, Ym, fm, Rint, Rbc

    f, Ym, fm, Rint, Rbc = residual(Y, p)
    F = np.concatenate([Rint.ravel(), Rbc])
    fnorm = np.linalg.norm(F)

    it = 0
    while True:
        cres = collocation_residual_norm(Rint, Rbc, h)
        if cres <= tol * max(1.0, float(np.max(np.abs(Y)))):
            return CollocationResult(Y, p, it, cres)
        if it >= max_iter:
            raise ConvergenceError(
                f"no convergence after {max_iter} Newton iterations "
                f"(residual {cres:.3e})", residual=cres)
        it += 1

        A = jac(r, Y, p)
        Am = jac(rm, Ym, p)
        eye = np.eye(d)
        h8 = h[:, None, None] / 8.0
        h6 = h[:, None, None] / 6.0
        dmL = 0.5 * eye + h8 * A[:-1]
        dmR = 0.5 * eye - h8 * A[1:]
        JL = -eye - h6 * (A[:-1] + 4.0 * np.einsum("nij,njk->nik", Am, dmL))
        JR = eye - h6 * (A[1:] + 4.0 * np.einsum("nij,njk->nik", Am, dmR))

        data = [JL.ravel(), JR.ravel()]
        rows = [rows_blk, rows_blk]
        cols = [colsL_blk, colsR_blk]

        dya, dyb, dbc_dp = bc_jac(Y[0], Y[-1], p)
        bc_rows = (N - 1) * d + np.arange(nbc)
        rows.append(np.repeat(bc_rows, d))
        cols.append(np.tile(np.arange(d), nbc))
        data.append(np.asarray(dya, dtype=float).ravel())
        rows.append(np.repeat(bc_rows, d))
        cols.append(np.tile((N - 1) * d + np.arange(d), nbc))
        data.append(np.asarray(dyb, dtype=float).ravel())

        if has_p:
            fp = rhs_dparam(r, Y, p)
            dYm_dp = -(h[:, None] / 8.0) * (fp[1:] - fp[:-1])
            fpm = rhs_dparam(rm, Ym, p) + np.einsum(
                "nij,nj->ni", Am, dYm_dp)
            Jp = -(h[:, None] / 6.0) * (fp[:-1] + 4.0 * fpm + fp[1:])
            rows.append(np.arange((N - 1) * d))
            cols.append(np.full((N - 1) * d, N * d))
            data.append(Jp.ravel())
            rows.append(bc_rows)
            cols.append(np.full(nbc, N * d))
            data.append(np.asarray(dbc_dp, dtype=float))

        J = sp.coo_matrix(
            (np.concatenate(data),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(neq, nuk)).tocsc()
        try:
            lu = spla.splu(J)
        except RuntimeError as exc:
            raise SingularJacobianError(
                f"singular collocation Jacobian: {exc}", residual=cres)
        step = lu.solve(-F)
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError(
                "non-finite Newton step", residual=cres)

        dY = step[: N * d].reshape(N, d)
        dp = step[N * d] if has_p else 0.0

        alpha = 1.0
        for _ in range(_MAX_BACKTRACK):
            Yn = Y + alpha * dY
            pn = p + alpha * dp if has_p else None
            fn, Ymn, fmn, Rintn, Rbcn = residual(Yn, pn)
            Fn = np.concatenate([Rintn.ravel(), Rbcn])
            fnn = np.linalg.norm(Fn)
            if np.isfinite(fnn) and fnn <= (1.0 - _ARMIJO_C * alpha) * fnorm:
                break
            alpha *= 0.5
        else:
            raise ConvergenceError(
                f"line search stalled at residual {fnorm:.3e}",
                residual=cres)
        Y, p = Yn, pn
        f, Ym, fm, Rint, Rbc, F, fnorm = fn, Ymn, fmn, Rintn, Rbcn, Fn, fnn


def _block_indices(N: int, d: int):
    """COO indices for the two d x d blocks of every interval row group."""
    i = np.arange(N - 1)
    rr = (d * i)[:, None, None] + np.arange(d)[None, :, None]
    rr = np.broadcast_to(rr, (N - 1, d, d)).ravel()
    ccL = (d * i)[:, None, None] + np.arange(d)[None, None, :]
    ccL = np.broadcast_to(ccL, (N - 1, d, d)).ravel()
    ccR = (d * (i + 1))[:, None, None] + np.arange(d)[None, None, :]
    ccR = np.broadcast_to(ccR, (N - 1, d, d)).ravel()
    return rr, ccL, ccR
