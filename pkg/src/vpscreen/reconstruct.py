"""Phase-space density rebuilt from a converged potential.

``f(x, v) = F(|v|^2 / 2 + Q(x))`` is never stored; it is evaluated on demand
from the potential and the extension profile.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline

from ._quad import tail_start
from .errors import ConsistencyError, QuadratureError, TableRangeError
from .sources import periodic_interp, yukawa_radial

DENSITY_TOL = 1e-8


class PhaseSpaceSampler:
    """Evaluate ``f``, its velocity moment and its residuals for a solution."""

    def __init__(self, sol, profile=None, tail_tol=1e-10):
        self.sol = sol
        self.F = profile if profile is not None else sol.gtransform.profile
        self.gt = sol.gtransform
        base = self.F.base
        depth = max(0.0, -float(sol.Q.min()))
        self.tail_energy = max(tail_start(base.decay_constant, tail_tol), base.tail_cutoff) + depth
        self.v_max = float(np.sqrt(2.0 * self.tail_energy))
        if sol.is_radial:
            self._R_spline = CubicSpline(sol.mesh.centers, sol.R)

    # potential ---------------------------------------------------------
    def Q_at(self, x):
        """Potential at positions ``x`` (m, 3): interpolated R plus analytic S."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sol = self.sol
        if sol.is_radial:
            r = np.linalg.norm(x, axis=-1)
            r_in = np.clip(r, sol.mesh.centers[0], sol.mesh.r_max)
            R = np.where(r <= sol.mesh.r_max, self._R_spline(r_in), 0.0)
            return R + sol.theta * yukawa_radial(sol.sigma, r)
        return periodic_interp(sol.mesh, sol.R, x) + sol.S.at(x)

    def _energy(self, v, Q):
        v = np.asarray(v, dtype=float)
        e = 0.5 * np.sum(v * v, axis=-1) + Q
        if np.min(e) < self.gt.r_min:
            raise TableRangeError(float(np.min(e)), self.gt.r_min)
        return e

    def eval_f(self, x, v):
        return self.F.eval(self._energy(v, self.Q_at(x)))

    def eval_f_nodes(self, index, v):
        """``f`` at grid nodes given by an (m, 3) or (m,) index array."""
        return self.F.eval(self._energy(v, self.node_Q(index)))

    def node_Q(self, index):
        index = np.asarray(index)
        if self.sol.is_radial:
            return self.sol.Q[index]
        return self.sol.Q[tuple(index.T)]

    # velocity moment -------------------------------------------------------
    def velocity_moment(self, q):
        """``int f dv = 4 pi int_0^inf w^2 F(w^2/2 + q) dw`` by adaptive quadrature."""
        q = float(q)
        F = self.F

        def f(w):
            return w * w * float(F.eval(0.5 * w * w + q))

        knots = [0.0]
        if q < 0:
            knots.append(np.sqrt(-2.0 * q))
        knots.append(np.sqrt(2.0 * (F.base.tail_cutoff + max(0.0, -q))))
        knots.append(np.sqrt(2.0 * (self.tail_energy + max(0.0, -q))))
        total = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                for lo, hi in zip(knots[:-1], knots[1:]):
                    val, _ = quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)
                    total += val
            except IntegrationWarning as exc:
                raise QuadratureError(f"velocity quadrature failed at Q={q}: {exc}") from exc
        return 4.0 * np.pi * total

    def density_from_Q(self, Q, tol=DENSITY_TOL):
        """Velocity moment for each potential value, checked against the g-table."""
        Q = np.atleast_1d(np.asarray(Q, dtype=float))
        rho = np.array([self.velocity_moment(q) for q in Q])
        table = self.gt(Q)
        err = float(np.max(np.abs(rho - table))) if Q.size else 0.0
        if err > tol:
            raise ConsistencyError(f"velocity moment and g-table disagree by {err:.3e}")
        return rho, table

    def density(self, x, tol=DENSITY_TOL):
        rho, _ = self.density_from_Q(self.Q_at(x), tol)
        return rho

    # Vlasov residual -----------------------------------------------------------
    def vlasov_residual(self, index, velocities):
        """Analytic chain-rule residual at grid nodes.

        ``grad_x f = F'(e) grad Q`` and ``grad_v f = F'(e) v``, so both terms are
        sums of ``v_a dQ_a F'(e)``; they are accumulated in the same order and
        cancel exactly.
        """
        grad = self._node_gradient(index)
        worst = 0.0
        for v in np.atleast_2d(velocities):
            fp = self.F.eval_deriv(self._energy(v, self.node_Q(index)))
            transport = np.zeros_like(fp)
            force = np.zeros_like(fp)
            for a in range(3):
                transport += v[a] * grad[:, a] * fp
                force += grad[:, a] * v[a] * fp
            worst = max(worst, float(np.max(np.abs(transport - force))))
        return worst

    def vlasov_residual_fd(self, index, velocities, dv=None):
        """Finite-difference residual ``v.grad_x f - grad_x Q . grad_v f`` at grid nodes.

        Spatial differences use the grid spacing; velocity differences use
        ``dv`` (defaults to the spacing as well).  Returns the max |residual|.
        """
        sol = self.sol
        if sol.is_radial:
            raise NotImplementedError("finite-difference residual needs a 3D grid")
        grid = sol.mesh
        h = grid.h
        dv = h if dv is None else dv
        index = np.atleast_2d(np.asarray(index))
        n = grid.n
        Q = sol.Q
        worst = 0.0
        for v in np.atleast_2d(velocities):
            v = np.asarray(v, dtype=float)
            e_v = 0.5 * float(v @ v)
            transport = np.zeros(len(index))
            force = np.zeros(len(index))
            q0 = Q[tuple(index.T)]
            for a in range(3):
                up, dn = index.copy(), index.copy()
                up[:, a] = (up[:, a] + 1) % n
                dn[:, a] = (dn[:, a] - 1) % n
                q_up, q_dn = Q[tuple(up.T)], Q[tuple(dn.T)]
                df_dx = (self.F.eval(e_v + q_up) - self.F.eval(e_v + q_dn)) / (2.0 * h)
                dq_dx = (q_up - q_dn) / (2.0 * h)
                vp, vm = v.copy(), v.copy()
                vp[a] += dv
                vm[a] -= dv
                df_dv = (self.F.eval(0.5 * vp @ vp + q0) - self.F.eval(0.5 * vm @ vm + q0)) / (2.0 * dv)
                transport += v[a] * df_dx
                force += dq_dx * df_dv
            worst = max(worst, float(np.max(np.abs(transport - force))))
        return worst

    def _node_gradient(self, index):
        sol = self.sol
        grads = sol.mesh.gradient(sol.Q)
        index = np.atleast_2d(np.asarray(index))
        return np.stack([g[tuple(index.T)] for g in grads], axis=1)

    # boundary condition --------------------------------------------------------
    def boundary_deviation(self, v):
        """Return (||f(., v) - f0(v)||_L2(box), sup|F'| ||Q||_L2(box)) and check the order."""
        sol = self.sol
        e_v = 0.5 * float(np.dot(v, v))
        Q = sol.Q
        diff = self.F.eval(self._energy(np.asarray(v, dtype=float), Q).ravel()) - self.F.eval(e_v)
        w = np.broadcast_to(sol.weights, Q.shape).ravel()
        dev = float(np.sqrt(np.sum(w * diff ** 2)))
        lip = self.F.sup_abs_deriv(r_min=min(self.gt.r_min, float(Q.min())))
        bound = lip * float(np.sqrt(np.sum(w * Q.ravel() ** 2)))
        if not dev <= bound * (1.0 + 1e-12):
            raise ConsistencyError(f"boundary deviation {dev:.3e} exceeds Lipschitz bound {bound:.3e}")
        return dev, bound
