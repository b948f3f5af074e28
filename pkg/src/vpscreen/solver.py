"""Fixed-point construction of the self-consistent potential.

The potential is split as ``Q = R + S`` with ``S = Phi_sigma * mu`` explicit.
The correction solves ``R = K(R) = (sigma - Delta)^{-1} (B[R + S] ^ H)``, which
is iterated by damped Picard steps from ``R = 0``.  At the fixed point the cap
``H`` is inactive and ``Q`` solves ``-Delta Q = g(Q) - 1 + mu``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ConvergenceError, ParameterError, TableRangeError
from .grids import Grid, RadialField, RadialMesh, ScalarField
from .sources import build_H1_H, build_S, build_S_radial

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-12
COMPARISON_TOL = 1e-8
RESOLUTION_SLACK = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    tol_fixed_point: float = 1e-9
    max_iter: int = 500
    damping: float = 1.0
    damping_floor: float = 0.125
    cap_active_policy: str = "warn"
    check_resolution: bool = True

    def __post_init__(self):
        if not self.tol_fixed_point > 0:
            raise ParameterError("tol_fixed_point must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError("damping must lie in (0, 1]")
        if self.cap_active_policy not in ("warn", "error"):
            raise ParameterError("cap_active_policy must be 'warn' or 'error'")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")


@dataclass
class Solution:
    """Converged potential and its certificates.

    Arrays live on ``mesh`` (a :class:`Grid` or :class:`RadialMesh`).
    """

    mesh: object
    Q: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    S: object = field(repr=False)
    H1: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    gtransform: object = field(repr=False)
    theta: float
    iterations: int
    final_update_norm: float
    history: list = field(repr=False)
    cap_was_active: bool = False
    comparison_violation: float = 0.0
    pde_residual: float = float("nan")
    monopole: float = 0.0
    tol: float = 1e-9

    @property
    def sigma(self):
        return self.gtransform.sigma

    @property
    def weights(self):
        return self.mesh.weights

    @property
    def S_values(self):
        return getattr(self.S, "values", self.S)

    @property
    def is_radial(self):
        return isinstance(self.mesh, RadialMesh)

    def field(self, name):
        values = getattr(self, name)
        if self.is_radial:
            return RadialField(self.mesh, values)
        return ScalarField(self.mesh, values)

    def summary(self):
        return {
            "iterations": self.iterations,
            "final_update_norm": self.final_update_norm,
            "pde_residual": self.pde_residual,
            "min_Q": float(self.Q.min()),
            "max_Q": float(self.Q.max()),
            "min_R": float(self.R.min()),
            "cap_was_active": self.cap_was_active,
            "comparison_violation": self.comparison_violation,
            "theta": self.theta,
            "sigma": self.sigma,
            "B_S_monopole": self.monopole,
        }


def check_resolution(grid, sigma):
    """Box must hold 20 screening lengths and the spacing resolve one fifth of one."""
    ls = 1.0 / np.sqrt(sigma)
    # slack absorbs the rounding in sigma = -g'(0)
    if grid.L < 20.0 * ls * (1.0 - RESOLUTION_SLACK):
        raise ParameterError(f"box L={grid.L:g} shorter than 20 screening lengths ({20 * ls:g})")
    if grid.h > 0.2 * ls * (1.0 + RESOLUTION_SLACK):
        raise ParameterError(f"spacing h={grid.h:g} exceeds 0.2 screening lengths ({0.2 * ls:g})")


def apply_K(gt, S, H, R, mesh):
    """One application of ``K``: ``(sigma - Delta_h)^{-1} min(B[R + S], H)``."""
    P = R + S
    if P.min() < gt.r_min:
        raise TableRangeError(float(P.min()), gt.r_min)
    W = np.minimum(gt.b(P), H)
    G = mesh.solve_screened(W, gt.sigma)
    low = G.min()
    if low < -CLAMP_TOL * max(1.0, float(np.abs(G).max())):
        raise ConsistencyError(f"K(R) has negative value {low:.3e}")
    return np.maximum(G, 0.0)


def _picard(cfg, gt, S, H, mesh):
    R = np.zeros_like(S)
    omega = cfg.damping
    history = []
    for it in range(1, cfg.max_iter + 1):
        KR = apply_K(gt, S, H, R, mesh)
        upd = float(np.max(np.abs(KR - R)))
        history.append(upd)
        if upd <= cfg.tol_fixed_point:
            # accept K(R): its residual (sigma - Delta)R - W is then not amplified by Delta
            R = KR
            cert = float(np.max(np.abs(apply_K(gt, S, H, R, mesh) - R)))
            if cert <= cfg.tol_fixed_point:
                return R, it, cert, history
            continue
        if len(history) > 1 and upd > history[-2] and omega > cfg.damping_floor:
            omega = max(0.5 * omega, cfg.damping_floor)
            log.debug("update grew at iteration %d; damping -> %g", it, omega)
        R = (1.0 - omega) * R + omega * KR
    raise ConvergenceError(
        f"no convergence after {cfg.max_iter} iterations (last update {history[-1]:.3e}, damping {omega:g})",
        history,
    )


def solve_fixed_point(cfg, gt, S, aux, mesh, theta=0.0):
    """Iterate ``R <- (1-w) R + w K(R)`` from 0 and check the cap and comparison bounds at the limit."""
    S_vals = getattr(S, "values", S)
    if isinstance(mesh, Grid) and cfg.check_resolution:
        check_resolution(mesh, gt.sigma)
    R, iterations, cert, history = _picard(cfg, gt, S_vals, aux.H, mesh)
    Q = R + S_vals
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        BQ = gt.b(Q)
    excess = BQ - aux.H
    cap_active = bool(np.any(excess > 1e-12 * np.maximum(1.0, aux.H)))
    if cap_active:
        msg = f"cap H binds at convergence (max excess {excess.max():.3e})"
        if cfg.cap_active_policy == "error":
            raise ConsistencyError(msg)
        warnings.warn(msg, stacklevel=2)
    violation = float(np.max(R - aux.H1))
    if violation > COMPARISON_TOL:
        warnings.warn(f"comparison R <= H1 violated by {violation:.3e}", stacklevel=2)
    sol = Solution(
        mesh=mesh,
        Q=Q,
        R=R,
        S=S,
        H1=aux.H1,
        H=aux.H,
        gtransform=gt,
        theta=float(theta),
        iterations=iterations,
        final_update_norm=cert,
        history=history,
        cap_was_active=cap_active,
        comparison_violation=violation,
        monopole=aux.monopole,
        tol=cfg.tol_fixed_point,
    )
    sol.pde_residual = assemble_and_verify(sol)
    if sol.pde_residual > 100.0 * cfg.tol_fixed_point:
        warnings.warn(f"PDE residual {sol.pde_residual:.3e} inconsistent with the solve", stacklevel=2)
    return sol


def pde_residual_field(sol, Q=None):
    """``(sigma - Delta_h) R - min(B[Q], H)`` on the mesh; equals ``-Delta Q - (g(Q) - 1 + mu)``."""
    Q = sol.Q if Q is None else Q
    R = Q - sol.S_values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        W = np.minimum(sol.gtransform.b(Q), sol.H)
    return sol.mesh.apply_screened(R, sol.sigma) - W, W


def assemble_and_verify(sol, Q=None):
    """Relative L2 residual of the semilinear equation, point charges moved into S."""
    res, W = pde_residual_field(sol, Q)
    w = sol.weights
    num = float(np.sqrt(np.sum(w * res ** 2)))
    den = float(np.sqrt(np.sum(w * W ** 2)))
    if den == 0.0:
        return num
    return num / den


def solve(mu, gt, grid, cfg=None):
    """Full 3D pipeline: S, auxiliary fields, fixed point."""
    cfg = cfg or SolverConfig()
    if cfg.check_resolution:
        check_resolution(grid, gt.sigma)
    S = build_S(mu, gt.sigma, grid)
    aux = build_H1_H(gt, S.values, grid, mu.total_variation)
    return solve_fixed_point(cfg, gt, S, aux, grid, theta=mu.theta)


def radial_solve(cfg, gt, theta, r_max, n):
    """Radial problem for a point charge ``theta`` at the origin."""
    if theta == 0:
        raise ParameterError("radial solve needs a non-zero point charge")
    mesh = RadialMesh(float(r_max), int(n))
    S = build_S_radial(theta, gt.sigma, mesh).values
    aux = build_H1_H(gt, S, mesh, abs(theta))
    return solve_fixed_point(cfg, gt, S, aux, mesh, theta=theta)
