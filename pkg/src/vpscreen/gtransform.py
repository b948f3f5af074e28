"""The velocity transform g of a profile, its table, and the operator B.

``g(r) = 4 pi sqrt(2) * int_0^inf sqrt(s) F(r + s) ds`` is the spatial density
produced by a potential value r.  The solver never integrates on the fly: it
evaluates a monotone cubic Hermite table built once per extension.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicHermiteSpline
from scipy.special import beta as beta_fn

from ._quad import PREFACTOR, g_parts, tail_start
from .errors import ConsistencyError, ParameterError, QuadratureError, TableRangeError

NEGATIVITY_TOL = 1e-12
SUBDIFF_TOL = 1e-11
NORMALIZATION_TOL = 1e-9
C0_SAFETY = 1.1


class TableClampWarning(UserWarning):
    """Argument above the table's r_max was clamped to g = 0."""


def _direct(integrand, r, s_break, s_tail):
    pts = sorted({0.0, *(np.sqrt(s) for s in s_break if s > 0), np.sqrt(s_tail)})
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            for lo, hi in zip(pts[:-1], pts[1:]):
                val, _ = quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=500)
                total += val
        except IntegrationWarning as exc:
            raise QuadratureError(f"transform quadrature failed at r={r}: {exc}") from exc
    return total


def g_value(F, r):
    """g(r) by direct adaptive quadrature in t = sqrt(s)."""
    r = float(r)
    a = max(-r, 0.0)
    cut = F.base.tail_cutoff
    s_tail = max(tail_start(F.base.decay_constant), a + cut)

    def f(t):
        return 2.0 * t * t * float(F.eval(r + t * t))

    return PREFACTOR * _direct(f, r, (a, a + cut), s_tail)


def g_deriv(F, y):
    """g'(y) = -2 pi sqrt(2) * int_0^inf F(y + s) / sqrt(s) ds, computed in t = sqrt(s)."""
    y = float(y)
    a = max(-y, 0.0)
    cut = F.base.tail_cutoff
    s_tail = max(tail_start(F.base.decay_constant), a + cut)

    def f(t):
        return 2.0 * float(F.eval(y + t * t))

    return -0.5 * PREFACTOR * _direct(f, y, (a, a + cut), s_tail)


def g_second(F, y):
    """g''(y) = -2 pi sqrt(2) * int_0^inf F'(y + s) / sqrt(s) ds."""
    y = float(y)
    a = max(-y, 0.0)
    cut = F.base.tail_cutoff
    s_tail = max(tail_start(F.base.decay_constant), a + cut)

    def f(t):
        return 2.0 * float(F.eval_deriv(y + t * t))

    return -0.5 * PREFACTOR * _direct(f, y, (a, a + cut), s_tail)


def table_nodes(r_min, r_max, n, scale=0.5):
    """Nodes on [r_min, r_max] including 0: uniform near 0, geometric further out."""
    um, up = np.arcsinh(-r_min / scale), np.arcsinh(r_max / scale)
    n_neg = max(int(round((n - 1) * um / (um + up))), 2)
    n_pos = max(n - 1 - n_neg, 2)
    neg = -scale * np.sinh(np.linspace(um, 0.0, n_neg + 1))[:-1]
    pos = scale * np.sinh(np.linspace(0.0, up, n_pos + 1))
    neg[0], pos[-1] = r_min, r_max
    return np.concatenate([neg, pos])


def monotone_slopes(x, y, d):
    """Fritsch-Carlson limiting of Hermite slopes ``d``; returns (slopes, n_limited)."""
    d = d.copy()
    delta = np.diff(y) / np.diff(x)
    limited = 0
    for k, dk in enumerate(delta):
        if dk == 0.0:
            if d[k] != 0.0 or d[k + 1] != 0.0:
                limited += 1
            d[k] = d[k + 1] = 0.0
            continue
        a, b = d[k] / dk, d[k + 1] / dk
        if a < 0.0 or b < 0.0:
            limited += 1
            d[k] = 0.0 if a < 0.0 else d[k]
            d[k + 1] = 0.0 if b < 0.0 else d[k + 1]
            continue
        s = a * a + b * b
        if s > 9.0:
            tau = 3.0 / np.sqrt(s)
            d[k], d[k + 1] = tau * a * dk, tau * b * dk
            limited += 1
    return d, limited


@dataclass
class GTransform:
    """Tabulated g and g' for one extension, with the fitted constants.

    ``sigma = -g'(0)``; ``alpha = 3/2 - beta``; ``growth_constants`` are
    (C1, C2) of the growth condition; ``b_constant`` is C0 in
    ``0 <= B[P] <= C0 min(|P|^alpha, P^2)``.
    """

    profile: object
    r: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    sigma: float
    alpha: float
    g0: float
    growth_constants: tuple
    local_constants: tuple
    b_constant: float
    lipschitz_constant: float
    spot_r: np.ndarray
    spot_g: np.ndarray
    spot_dg: np.ndarray
    n_limited: int
    interp: CubicHermiteSpline = field(repr=False)

    @property
    def r_min(self):
        return float(self.r[0])

    @property
    def r_max(self):
        return float(self.r[-1])

    def _check(self, P):
        P = np.asarray(P, dtype=float)
        lo = P.min() if P.size else 0.0
        if lo < self.r_min:
            raise TableRangeError(float(lo), self.r_min)
        return P

    def __call__(self, P):
        P = self._check(P)
        above = P > self.r_max
        out = self.interp(np.minimum(P, self.r_max))
        if np.any(above):
            warnings.warn(
                f"{int(above.sum())} arguments above r_max={self.r_max:g} clamped to g=0",
                TableClampWarning,
                stacklevel=2,
            )
            out = np.where(above, 0.0, out)
        return out

    def deriv(self, P):
        P = self._check(P)
        out = self.interp(np.minimum(P, self.r_max), 1)
        return np.where(P > self.r_max, 0.0, out)

    def b(self, P):
        """Pointwise ``g(P) - 1 + sigma P`` on arrays; the constant 1 is the tabulated g(0)."""
        P = np.asarray(P, dtype=float)
        return self(P) - self.g0 + self.sigma * P

    def b_bound(self, P):
        a = np.abs(np.asarray(P, dtype=float))
        return self.b_constant * np.minimum(a ** self.alpha, a * a)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "g", "gprime"])
            for row in zip(self.r, self.g, self.dg):
                w.writerow([repr(float(v)) for v in row])


def _growth(r, gap, ddg, alpha):
    far = np.abs(r) >= 1.0
    c1 = float(np.max(gap[far] / np.abs(r[far]) ** alpha))
    c2 = float(np.max(np.abs(ddg[far]) / np.abs(r[far]) ** (alpha - 1.0)))
    return c1, c2


def asymptotic_growth(beta, c_beta):
    """Limits of the two growth ratios as r -> -inf for the extension family.

    The algebraic branch behaves like c |r|^-beta, so the gap grows like
    c * 4 pi sqrt(2) * B(3/2, 1-beta) |r|^alpha and g' like
    c * 2 pi sqrt(2) * B(1/2, 1-beta) |r|^(alpha-1).
    """
    return (
        c_beta * PREFACTOR * beta_fn(1.5, 1.0 - beta),
        c_beta * 0.5 * PREFACTOR * beta_fn(0.5, 1.0 - beta),
    )


def build_gtransform(F, r_min=-50.0, r_max=50.0, n=1025, spot=(-100.0, -1000.0)):
    """Tabulate g, g' of extension ``F`` on a grid clustered near 0."""
    if not (r_min < 0.0 < r_max):
        raise ParameterError("need r_min < 0 < r_max")
    if n < 64:
        raise ParameterError("need at least 64 table nodes")
    r = table_nodes(r_min, r_max, n)
    spot = np.asarray(sorted(s for s in spot if s < r_min), dtype=float)
    parts = g_parts(F.base, F.beta, np.concatenate([r, spot]))
    c = F.c_beta
    g_all, dg_all = parts.g(c), parts.dg(c)
    g, dg = g_all[: r.size], dg_all[: r.size]
    i0 = int(np.flatnonzero(r == 0.0)[0])
    g0, sigma = float(g[i0]), float(-dg[i0])
    alpha = 1.5 - F.beta

    slopes, n_limited = monotone_slopes(r, g, dg)
    interp = CubicHermiteSpline(r, g, slopes)

    rr, gg, dd = np.concatenate([r, spot]), g_all, dg_all
    gap = gg - g0 + sigma * rr
    ddg = dd + sigma
    c1, c2 = _growth(rr, gap, ddg, alpha)
    lim1, lim2 = asymptotic_growth(F.beta, c)
    c1, c2 = max(c1, lim1), max(c2, lim2)
    near = (np.abs(r) < 1.0) & (r != 0.0)
    loc1 = float(np.max(gap[: r.size][near] / r[near] ** 2))
    loc2 = float(np.max(np.abs(ddg[: r.size][near]) / np.abs(r[near])))

    nz = r != 0.0
    bmin = np.minimum(np.abs(r[nz]) ** alpha, r[nz] ** 2)
    c0 = C0_SAFETY * float(np.max(gap[: r.size][nz] / bmin))
    lip = float(np.max(np.abs(ddg[: r.size][nz]) / np.abs(r[nz]) ** (alpha - 1.0)))
    # clamp region P > r_max has B' = sigma, decreasing ratio; r_max node covers it
    lip = max(lip, sigma / r_max ** (alpha - 1.0))

    return GTransform(
        profile=F,
        r=r,
        g=g,
        dg=dg,
        sigma=sigma,
        alpha=alpha,
        g0=g0,
        growth_constants=(c1, c2),
        local_constants=(loc1, loc2),
        b_constant=c0,
        lipschitz_constant=lip,
        spot_r=spot,
        spot_g=g_all[r.size:],
        spot_dg=dg_all[r.size:],
        n_limited=n_limited,
        interp=interp,
    )


@dataclass
class ConditionResult:
    name: str
    passed: bool
    worst_r: float
    worst_value: float
    detail: str = ""


@dataclass
class ConditionReport:
    beta: float
    c_beta: float
    sigma: float
    alpha: float
    results: list

    @property
    def passed(self):
        return all(res.passed for res in self.results)

    def __getitem__(self, name):
        for res in self.results:
            if res.name == name:
                return res
        raise KeyError(name)

    def to_dict(self):
        return {
            "beta": self.beta,
            "c_beta": self.c_beta,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "passed": self.passed,
            "conditions": [asdict(res) for res in self.results],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def verify_conditions(gt):
    """Check normalization, monotonicity, sub-differential and growth conditions on the table."""
    r = np.concatenate([gt.r, gt.spot_r])
    g = np.concatenate([gt.g, gt.spot_g])
    dg = np.concatenate([gt.dg, gt.spot_dg])
    results = []

    err = abs(gt.g0 - 1.0)
    results.append(ConditionResult("normalization", err <= NORMALIZATION_TOL, 0.0, err, "|g(0) - 1|"))

    k = int(np.argmax(dg))
    results.append(
        ConditionResult("monotonicity", bool(dg[k] < 0.0), float(r[k]), float(dg[k]), "max g'(r)")
    )

    gap = g - gt.g0 + gt.sigma * r
    k = int(np.argmin(gap))
    results.append(
        ConditionResult(
            "subdifferential",
            bool(gap[k] >= -SUBDIFF_TOL),
            float(r[k]),
            float(gap[k]),
            "min g(r) - g(0) - g'(0) r",
        )
    )

    c1, c2 = gt.growth_constants
    finite = np.isfinite(c1) and np.isfinite(c2) and np.all(np.isfinite(gt.local_constants))
    # spot checks beyond the table must respect the constants fitted on it
    worst_r, worst = float(r[0]), 0.0
    ok = bool(finite)
    if gt.spot_r.size:
        a = np.abs(gt.spot_r)
        q1 = (gt.spot_g - gt.g0 + gt.sigma * gt.spot_r) / a ** gt.alpha / c1
        q2 = np.abs(gt.spot_dg + gt.sigma) / a ** (gt.alpha - 1.0) / c2
        q = np.maximum(q1, q2)
        k = int(np.argmax(q))
        worst_r, worst = float(gt.spot_r[k]), float(q[k])
        ok = ok and worst <= 1.0 + 1e-9
    detail = f"C1={c1:.6g} C2={c2:.6g} local={gt.local_constants}; worst spot ratio/C"
    results.append(ConditionResult("growth", ok, worst_r, worst, detail))
    return ConditionReport(gt.profile.beta, gt.profile.c_beta, gt.sigma, gt.alpha, results)


def b_apply(gt, P):
    """``B[P] = g(P) - 1 + sigma P`` for a field or array ``P``.

    Raises :class:`ConsistencyError` if any value is below ``-1e-12``, which
    can only happen when the table violates the sub-differential condition.
    """
    values = getattr(P, "values", P)
    out = gt.b(values)
    if out.size and out.min() < -NEGATIVITY_TOL:
        k = int(np.argmin(out))
        raise ConsistencyError(
            f"B[P] = {out.flat[k]:.3e} < 0 at P = {np.asarray(values).flat[k]:.6g}"
        )
    if hasattr(P, "values"):
        return P.with_values(out)
    return out


def continuity_bound(gt, P, R, weights):
    """Return (||B[P]-B[R]||_2, L * ||P-R||_{2 alpha}) with the Hoelder-type modulus.

    ``L = lipschitz_constant * || |P| + |R| ||_{2 alpha}^(alpha - 1)``.
    """
    a = gt.alpha
    lhs = np.sqrt(np.sum(weights * (gt.b(P) - gt.b(R)) ** 2))

    def norm(u, p):
        return np.sum(weights * np.abs(u) ** p) ** (1.0 / p)

    rhs = gt.lipschitz_constant * norm(np.abs(P) + np.abs(R), 2 * a) ** (a - 1.0) * norm(P - R, 2 * a)
    return float(lhs), float(rhs)
