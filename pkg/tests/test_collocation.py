"""Engine-level checks on problems with closed-form solutions."""

import numpy as np
import pytest

from radialsp.collocation import solve_collocation
from radialsp.errors import ConvergenceError


def _linear_oscillator(r, Y, p):
    # y'' = -y as a first-order system
    out = np.empty_like(Y)
    out[:, 0] = Y[:, 1]
    out[:, 1] = -Y[:, 0]
    return out


def _linear_oscillator_jac(r, Y, p):
    A = np.zeros(Y.shape[:1] + (2, 2))
    A[:, 0, 1] = 1.0
    A[:, 1, 0] = -1.0
    return A


class TestEngineOnOscillator:
    def test_fourth_order_accuracy(self):
        # y(0) = 0, y(pi/2) = 1 -> y = sin(r)
        errs = []
        for N in (20, 40):
            r = np.linspace(0, np.pi / 2, N + 1)
            Y0 = np.column_stack([r / r[-1], np.ones_like(r)])
            res = solve_collocation(
                r, Y0, _linear_oscillator, _linear_oscillator_jac,
                lambda ya, yb, p: np.array([ya[0], yb[0] - 1.0]),
                lambda ya, yb, p: (np.array([[1.0, 0], [0, 0]]),
                                   np.array([[0, 0], [1.0, 0]]), None),
                tol=1e-14, max_iter=10)
            errs.append(np.max(np.abs(res.Y[:, 0] - np.sin(r))))
        order = np.log2(errs[0] / errs[1])
        assert errs[1] < 1e-8
        assert 3.5 < order < 4.5

    def test_eigenvalue_parameter_mode(self):
        # y'' = -p^2 y, y(0)=y(1)=0, normalization y'(0)=pi -> p = pi
        def rhs(r, Y, p):
            out = np.empty_like(Y)
            out[:, 0] = Y[:, 1]
            out[:, 1] = -p * p * Y[:, 0]
            return out

        def jac(r, Y, p):
            A = np.zeros(Y.shape[:1] + (2, 2))
            A[:, 0, 1] = 1.0
            A[:, 1, 0] = -p * p
            return A

        def rhs_dp(r, Y, p):
            out = np.zeros_like(Y)
            out[:, 1] = -2.0 * p * Y[:, 0]
            return out

        r = np.linspace(0, 1, 161)
        Y0 = np.column_stack([np.sin(3.0 * r), 3.0 * np.cos(3.0 * r)])
        res = solve_collocation(
            r, Y0, rhs, jac,
            lambda ya, yb, p: np.array([ya[0], yb[0], ya[1] - np.pi]),
            lambda ya, yb, p: (np.array([[1.0, 0], [0, 0], [0, 1.0]]),
                               np.array([[0, 0], [1.0, 0], [0, 0]]),
                               np.zeros(3)),
            param0=3.0, rhs_dparam=rhs_dp, tol=1e-13)
        # discrete eigenvalue carries the scheme's O(h^4) defect
        assert res.param == pytest.approx(np.pi, abs=2e-9)
        assert np.max(np.abs(res.Y[:, 0] - np.sin(np.pi * r))) < 1e-8

    def test_degenerate_seed_fails_cleanly(self):
        r = np.linspace(0, np.pi / 2, 21)
        Y0 = np.zeros((21, 2))
        with pytest.raises(ConvergenceError):
            solve_collocation(
                r, Y0, _linear_oscillator, _linear_oscillator_jac,
                # contradictory conditions from the zero seed
                lambda ya, yb, p: np.array([ya[0] * ya[0],
                                            yb[0] * yb[0] - 1.0]),
                lambda ya, yb, p: (np.array([[2 * ya[0], 0], [0, 0]]),
                                   np.array([[0, 0], [2 * yb[0], 0]]), None),
                tol=1e-12, max_iter=8)

    def test_converged_seed_returns_immediately(self):
        r = np.linspace(0, np.pi / 2, 201)
        Y0 = np.column_stack([np.sin(r), np.cos(r)])
        res = solve_collocation(
            r, Y0, _linear_oscillator, _linear_oscillator_jac,
            lambda ya, yb, p: np.array([ya[0], yb[0] - 1.0]),
            lambda ya, yb, p: (np.array([[1.0, 0], [0, 0]]),
                               np.array([[0, 0], [1.0, 0]]), None),
            tol=1e-6)
        # the exact solution satisfies the discrete system to scheme accuracy
        assert res.iterations == 0
        assert np.array_equal(res.Y, np.column_stack([np.sin(r), np.cos(r)]))
