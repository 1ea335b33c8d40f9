"""Finite-n three-variable auxiliary loss and its minimizers.

For a Gaussian design A = [z1 | z2 | g] (n x 3), a response vector omega and
v = (0, 0, ||P g_d|| / sqrt(n)) the loss is

    L(xi) = ||A xi - omega|| / sqrt(n) - <v, xi>,   xi = (alpha, mu, nu), nu >= 0.

Its minimizer is a second finite-sample predictor of the expanded state,
independent of both the closed forms and the Monte-Carlo oracle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .models import WeightFunction, link
from .state_evolution import ExpandedState, StatePoint


class DegenerateInstanceError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass
class AOInstance:
    A: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    n: int
    d: int
    perp_norm: float  # ||P g_d||, norm of a (d - 2)-dimensional Gaussian

    @property
    def z1(self):
        return self.A[:, 0]

    @property
    def z2(self):
        return self.A[:, 1]

    @property
    def gamma(self):
        return self.A[:, 2]


def sample_instance(weight: WeightFunction, model, state: StatePoint, sigma: float,
                    n: int, d: int, rng: np.random.Generator) -> AOInstance:
    if d < 2 or n < 3:
        raise ValueError(f"need d >= 2 and n >= 3, got d={d}, n={n}")
    A = rng.standard_normal((n, 3))
    z1, z2 = A[:, 0], A[:, 1]
    q = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y = link(model, z1, q) + sigma * rng.standard_normal(n)
    omega = weight(state.alpha * z1 + state.beta * z2, y)
    perp = math.sqrt(rng.chisquare(d - 2)) if d > 2 else 0.0
    return AOInstance(A, omega, np.array([0.0, 0.0, perp / math.sqrt(n)]), n, d, perp)


def instance_from_arrays(A, omega, v, d: int = 0) -> AOInstance:
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float)
    n = A.shape[0]
    return AOInstance(A, np.asarray(omega, dtype=float), v, n, d, float(v[2]) * math.sqrt(n))


def loss(inst: AOInstance, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    return float(np.linalg.norm(inst.A @ xi - inst.omega) / math.sqrt(inst.n) - inst.v @ xi)


@dataclass(frozen=True)
class HOMinimizer:
    xi: ExpandedState
    tau: float
    loss_value: float


def ho_minimizer(inst: AOInstance) -> HOMinimizer:
    n = inst.n
    gram = inst.A.T @ inst.A
    ls = np.linalg.solve(gram, inst.A.T @ inst.omega)
    gv = np.linalg.solve(gram, inst.v)
    resid = inst.omega - inst.A @ ls
    rnorm = float(np.linalg.norm(resid))
    if rnorm < 1e-12 * max(1.0, float(np.linalg.norm(inst.omega))):
        raise DegenerateInstanceError("omega lies in the column span of A")
    radicand = 1.0 - n * float(inst.v @ gv)
    if radicand <= 0:
        raise DegenerateInstanceError(
            f"1 - n v'(A'A)^-1 v = {radicand:.3e} is not positive; kappa too small")
    tau = rnorm / math.sqrt(n) / math.sqrt(radicand)
    xi = ls + tau * n * gv
    value = float(np.linalg.norm(inst.A @ xi - inst.omega) / math.sqrt(n) - inst.v @ xi)
    if value < 0:
        warnings.warn(f"unclipped auxiliary loss value is negative ({value:.3e})",
                      RuntimeWarning, stacklevel=2)
    return HOMinimizer(ExpandedState(*map(float, xi)), tau, value)


def fo_minimizer(inst: AOInstance, state_sharp: StatePoint, eta: float) -> ExpandedState:
    c = 2.0 * eta / inst.n
    w = inst.omega
    return ExpandedState(
        state_sharp.alpha - c * float(inst.z1 @ w),
        state_sharp.beta - c * float(inst.z2 @ w),
        c * (float(inst.gamma @ w) + inst.perp_norm * float(np.linalg.norm(w))))


def _grad_hess(inst: AOInstance, xi):
    r = inst.A @ xi - inst.omega
    rn = float(np.linalg.norm(r))
    sn = math.sqrt(inst.n)
    Ar = inst.A.T @ r
    grad = Ar / (sn * rn) - inst.v
    hess = (inst.A.T @ inst.A) / (sn * rn) - np.outer(Ar, Ar) / (sn * rn ** 3)
    return grad, hess


def _newton(inst: AOInstance, xi, free, tol, max_iter):
    """Damped Newton on the coordinates in ``free``; the others stay fixed."""
    xi = xi.copy()
    f = loss(inst, xi)
    for _ in range(max_iter):
        g, H = _grad_hess(inst, xi)
        gf = g[free]
        if np.linalg.norm(gf) <= tol:
            return xi, True
        step = np.linalg.solve(H[np.ix_(free, free)], -gf)
        t = 1.0
        while t > 1e-12:
            cand = xi.copy()
            cand[free] += t * step
            fc = loss(inst, cand)
            if fc <= f + 1e-4 * t * float(gf @ step):
                break
            t *= 0.5
        else:
            # no decrease representable in floating point: accept current point
            return xi, np.linalg.norm(gf) <= 10 * tol
        xi, f = cand, fc
    g, _ = _grad_hess(inst, xi)
    return xi, np.linalg.norm(g[free]) <= tol


def numeric_3var_check(inst: AOInstance, tol: float = 1e-9, max_iter: int = 200) -> ExpandedState:
    """Minimize the loss numerically over R^2 x [0, inf) without the closed form."""
    gram = inst.A.T @ inst.A
    start = np.linalg.solve(gram, inst.A.T @ inst.omega)
    start[2] = max(start[2], 0.0) + 1e-3
    xi, ok = _newton(inst, start, np.array([0, 1, 2]), tol, max_iter)
    if ok and xi[2] >= 0:
        return ExpandedState(*map(float, xi))
    # constraint active: optimise (alpha, mu) with nu pinned at zero, then check KKT
    start[2] = 0.0
    xi, ok = _newton(inst, start, np.array([0, 1]), tol, max_iter)
    if not ok:
        raise NonConvergenceError("Newton iteration did not reach the gradient tolerance")
    g, _ = _grad_hess(inst, xi)
    if g[2] < -tol:
        raise NonConvergenceError("boundary point violates the sign condition on d/dnu")
    return ExpandedState(float(xi[0]), float(xi[1]), 0.0)


def min_hessian_eigenvalue(inst: AOInstance, xi, h: float = 1e-5) -> float:
    """Smallest eigenvalue of the central-difference Hessian of the loss at xi."""
    xi = np.asarray(xi, dtype=float)
    H = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        H[:, j] = (_grad_hess(inst, xi + e)[0] - _grad_hess(inst, xi - e)[0]) / (2 * h)
    return float(np.linalg.eigvalsh(0.5 * (H + H.T)).min())


def tau_gordon(e_omega2: float, e_z1: float, e_z2: float, kappa: float) -> float:
    return math.sqrt(kappa / (kappa - 1.0) * (e_omega2 - e_z1 ** 2 - e_z2 ** 2))
