"""Far-field velocity profiles and their extensions to negative energies.

A :class:`BoundaryProfile` holds ``F0`` on ``[0, inf)``; the plasma far from
the background charge has ``f0(v) = F0(|v|^2 / 2)``.  :func:`extend` continues
it to the whole line as

    F(r) = c_beta * r^2 / <r>^(beta+2) + exp(-r^2) * (F0(0) + F0'(0) r),  r < 0,

with ``<r> = sqrt(1 + r^2)``.  The negative branch is the trapped-particle
population; its freedom is what makes solutions non-unique.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from ._quad import PREFACTOR, g_parts, tail_bound, tail_start
from .errors import ParameterError, QuadratureError

MAXWELLIAN_AMPLITUDE = (2.0 * np.pi) ** -1.5


def japanese_bracket(r):
    r = np.asarray(r, dtype=float)
    return np.sqrt(1.0 + r * r)


def fit_decay_constant(eval, eval_deriv, r_max=1e6, n=4000):
    """Smallest C with (|F|+|F'|)(1+r^3) <= C on a log-spaced sample of [0, r_max]."""
    r = np.concatenate([[0.0], np.geomspace(1e-6, r_max, n)])
    with np.errstate(over="ignore"):
        prod = (np.abs(eval(r)) + np.abs(eval_deriv(r))) * (1.0 + r ** 3)
    return float(np.max(prod)), r, prod


@dataclass(frozen=True)
class BoundaryProfile:
    """Velocity profile at infinity, ``F0(r)`` for ``r >= 0``.

    Attributes
    ----------
    eval, eval_deriv : callable
        Vectorized ``F0`` and ``F0'``.
    decay_constant : float
        ``C`` with ``|F0| + |F0'| <= C / (1 + r^3)``.
    tail_cutoff : float
        Energy beyond which ``F0`` is only handled through its decay bound.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    eval_deriv: Callable[[np.ndarray], np.ndarray]
    decay_constant: float
    tail_cutoff: float
    name: str = "custom"


def make_maxwellian():
    """Normalized Maxwellian ``F0(r) = (2 pi)^(-3/2) exp(-r)``."""
    amp = MAXWELLIAN_AMPLITUDE

    def eval(r):
        return amp * np.exp(-np.asarray(r, dtype=float))

    def eval_deriv(r):
        return -amp * np.exp(-np.asarray(r, dtype=float))

    c, _, _ = fit_decay_constant(eval, eval_deriv)
    return BoundaryProfile(eval, eval_deriv, decay_constant=c, tail_cutoff=60.0, name="maxwellian")


def scaled_profile(p, factor, name=None):
    """Profile ``factor * F0``; used to build deliberately invalid inputs."""
    return BoundaryProfile(
        lambda r: factor * p.eval(r),
        lambda r: factor * p.eval_deriv(r),
        decay_constant=abs(factor) * p.decay_constant,
        tail_cutoff=p.tail_cutoff,
        name=name or f"{factor}*{p.name}",
    )


PROFILES = {"maxwellian": make_maxwellian}


def profile_by_name(name):
    try:
        return PROFILES[name]()
    except KeyError:
        raise ParameterError(f"unknown profile {name!r}; known: {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class ValidationReport:
    normalization: float
    normalization_ok: bool
    decay_constant: float
    decay_ok: bool
    monotone_ok: bool
    positive_ok: bool

    @property
    def passed(self):
        return self.normalization_ok and self.decay_ok and self.monotone_ok and self.positive_ok

    def to_dict(self):
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def normalization(p):
    """``4 pi sqrt(2) * int_0^inf sqrt(r) F0(r) dr`` (equals g(0))."""
    s_tail = max(tail_start(p.decay_constant), p.tail_cutoff)
    w_mid, w_end = np.sqrt(p.tail_cutoff), np.sqrt(s_tail)

    def f(t):
        return 2.0 * t * t * float(p.eval(t * t))

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            for lo, hi in ((0.0, w_mid), (w_mid, w_end)):
                val, _ = quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
                total += val
        except IntegrationWarning as exc:
            raise QuadratureError(f"normalization integral did not converge: {exc}") from exc
    if tail_bound(p.decay_constant, s_tail) > 1e-10:
        raise QuadratureError("decay bound leaves an unresolved tail")
    return PREFACTOR * total


def validate_profile(p, tol=1e-8):
    """Sampled check of normalization, decay and strict monotonicity of ``F0``."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    norm = normalization(p)
    c, r_log, prod = fit_decay_constant(p.eval, p.eval_deriv)
    # the product (|F|+|F'|)(1+r^3) must stop growing: compare last decade to the rest
    last = r_log >= r_log[-1] / 10.0
    decay_ok = bool(np.isfinite(c) and prod[last].max() <= (1.0 + 1e-6) * prod[~last].max())
    r = np.linspace(0.0, p.tail_cutoff, 6001)
    return ValidationReport(
        normalization=norm,
        normalization_ok=bool(abs(norm - 1.0) <= tol),
        decay_constant=c,
        decay_ok=decay_ok,
        monotone_ok=bool(np.all(p.eval_deriv(r) < 0)),
        positive_ok=bool(np.all(p.eval(r) > 0)),
    )


@dataclass(frozen=True)
class ExtensionProfile:
    """``F0`` continued to r < 0 by an algebraic branch plus a Gaussian patch."""

    base: BoundaryProfile
    beta: float
    c_beta: float

    @property
    def _p0(self):
        return float(self.base.eval(0.0))

    @property
    def _p1(self):
        return float(self.base.eval_deriv(0.0))

    def algebraic(self, r):
        r = np.asarray(r, dtype=float)
        return r * r * (1.0 + r * r) ** (-(self.beta + 2.0) / 2.0)

    def algebraic_deriv(self, r):
        r = np.asarray(r, dtype=float)
        return r * (1.0 + r * r) ** (-(self.beta + 4.0) / 2.0) * (2.0 - self.beta * r * r)

    def patch(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-r * r) * (self._p0 + self._p1 * r)

    def patch_deriv(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-r * r) * (self._p1 - 2.0 * r * (self._p0 + self._p1 * r))

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        pos = r >= 0
        out[pos] = self.base.eval(r[pos])
        rn = r[~pos]
        out[~pos] = self.c_beta * self.algebraic(rn) + self.patch(rn)
        return out if out.ndim else float(out)

    def eval_deriv(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        pos = r >= 0
        out[pos] = self.base.eval_deriv(r[pos])
        rn = r[~pos]
        out[~pos] = self.c_beta * self.algebraic_deriv(rn) + self.patch_deriv(rn)
        return out if out.ndim else float(out)

    def sup_abs_deriv(self, r_min=-50.0, n=200001):
        """Sampled ``sup |F'|`` over ``[r_min, tail_cutoff]``."""
        r = np.linspace(r_min, self.base.tail_cutoff, n)
        return float(np.max(np.abs(self.eval_deriv(r))))


def check_beta(beta):
    if not 0.0 < beta < 0.5:
        raise ParameterError(f"beta must lie in (0, 1/2), got {beta}")


def extend(p, beta, c_beta):
    """Extension ``F_{beta, c_beta}`` of ``p`` to the whole real line."""
    check_beta(beta)
    if not c_beta > 0:
        raise ParameterError(f"c_beta must be positive, got {c_beta}")
    return ExtensionProfile(p, float(beta), float(c_beta))


def subdifferential_gap(parts, c_beta):
    """``g(r) - g(0) - g'(0) r`` on the nodes of ``parts`` (node 0 must be present)."""
    i0 = int(np.flatnonzero(parts.r == 0.0)[0])
    g = parts.g(c_beta)
    dg0 = parts.dg(c_beta)[i0]
    return g - g[i0] - dg0 * parts.r


def calibrate_c_beta(p, beta, r_probe=-50.0, margin=0.1, n_probe=2001, c_cap=1e6, atol=1e-11):
    """Smallest ``c_beta`` making ``g(r) >= g(0) + g'(0) r`` on ``[r_probe, 0]``.

    Bisection to relative width 1e-3 on a dense probe grid, then inflated by
    ``1 + margin``.  The probe grid is clustered towards 0 where the gap is
    quadratically small.
    """
    check_beta(beta)
    if not r_probe < 0:
        raise ParameterError("r_probe must be negative")
    if margin < 0:
        raise ParameterError("margin must be non-negative")
    r = np.concatenate([r_probe * np.geomspace(1.0, 1e-4, n_probe - 1), [0.0]])
    parts = g_parts(p, beta, r)

    def ok(c):
        return bool(np.all(subdifferential_gap(parts, c) >= -atol))

    hi = 1e-6
    while not ok(hi):
        hi *= 2.0
        if hi > c_cap:
            raise ParameterError(
                f"no c_beta below {c_cap:g} satisfies the sub-differential condition on "
                f"[{r_probe}, 0]; profile unsound or probe interval too small"
            )
    lo = hi / 2.0 if hi > 1e-6 else 0.0
    while (hi - lo) / hi > 1e-3:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi * (1.0 + margin)
