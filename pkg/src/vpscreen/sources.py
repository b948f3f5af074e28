"""Background charge, screened and bare Coulomb kernels, and the auxiliary fields.

``S = Phi_sigma * mu`` solves ``(sigma - Delta) S = mu``.  Point charges enter
``S`` through the closed-form Yukawa kernel (summed over the nearest periodic
images); a smooth density on the grid is inverted with the discrete operator.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import ConsistencyError, ParameterError
from .grids import Grid, RadialField, RadialMesh, ScalarField

log = logging.getLogger(__name__)

GAUGE_FRACTION = 0.05


@dataclass(frozen=True)
class PointCharge:
    pos: tuple
    q: float


@dataclass(frozen=True)
class ChargeMeasure:
    """Background measure: point charges plus an optional density on a grid."""

    points: tuple = ()
    smooth: ScalarField | None = None

    @property
    def theta(self):
        total = sum(p.q for p in self.points)
        if self.smooth is not None:
            total += self.smooth.integral()
        return float(total)

    @property
    def total_variation(self):
        total = sum(abs(p.q) for p in self.points)
        if self.smooth is not None:
            total += float(self.smooth.grid.cell_volume * np.sum(np.abs(self.smooth.values)))
        return float(total)

    @property
    def is_zero(self):
        return self.total_variation == 0.0


def point_charge(q, pos=(0.0, 0.0, 0.0)):
    return ChargeMeasure(points=(PointCharge(tuple(float(c) for c in pos), float(q)),))


def gaussian_density(grid, q, width, center=(0.0, 0.0, 0.0)):
    """Gaussian blob sampled on the grid nodes, rescaled so its node sum is exactly ``q``."""
    if not width > 0:
        raise ParameterError("width must be positive")
    x, y, z = grid.axes()
    cx, cy, cz = center
    r2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
    shape = np.exp(-0.5 * r2 / width ** 2)
    return ScalarField(grid, q * shape / (grid.cell_volume * shape.sum()))


def yukawa(sigma, x):
    """Screened Coulomb kernel ``exp(-sqrt(sigma)|x|) / (4 pi |x|)``."""
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0):
        raise ParameterError("Yukawa kernel is singular at x = 0")
    return np.exp(-np.sqrt(sigma) * r) / (4.0 * np.pi * r)


def yukawa_radial(sigma, r):
    r = np.asarray(r, dtype=float)
    return np.exp(-np.sqrt(sigma) * r) / (4.0 * np.pi * r)


@dataclass(frozen=True)
class SourcePotential:
    """``S`` on a grid: analytic point-charge part plus a gridded smooth part."""

    grid: Grid
    sigma: float
    points: tuple
    smooth: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def point_part(self, x):
        """Point-charge contribution at arbitrary positions ``x`` of shape (..., 3)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for p in self.points:
            for shift in _image_shifts(self.grid.L):
                out += p.q * yukawa(self.sigma, x - np.asarray(p.pos) - shift)
        return out

    def at(self, x):
        """S at arbitrary positions (smooth part by periodic cubic-spline interpolation)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self.point_part(x)
        if np.any(self.smooth):
            out = out + periodic_interp(self.grid, self.smooth, x)
        return out


def _image_shifts(L):
    return [np.array(s, dtype=float) * L for s in itertools.product((-1, 0, 1), repeat=3)]


def periodic_interp(grid, values, x):
    """Cubic-spline interpolation of periodic grid data at points ``x`` (m, 3)."""
    idx = (np.asarray(x, dtype=float) + 0.5 * grid.L) / grid.h - 0.5
    return map_coordinates(values, idx.T, order=3, mode="grid-wrap")


def build_S(mu, sigma, grid):
    """Screened potential of ``mu`` on ``grid``."""
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    x, y, z = grid.axes()
    point_vals = np.zeros(grid.shape)
    for p in mu.points:
        for shift in _image_shifts(grid.L):
            px, py, pz = np.asarray(p.pos) + shift
            r = np.sqrt((x - px) ** 2 + (y - py) ** 2 + (z - pz) ** 2)
            if r.min() < 1e-12 * grid.h:
                raise ParameterError(f"point charge at {p.pos} coincides with a grid node")
            point_vals += p.q * np.exp(-np.sqrt(sigma) * r) / (4.0 * np.pi * r)
    if mu.smooth is not None:
        if mu.smooth.grid != grid:
            raise ParameterError("smooth density lives on a different grid")
        smooth = grid.solve_screened(mu.smooth.values, sigma)
    else:
        smooth = np.zeros(grid.shape)
    return SourcePotential(grid, float(sigma), tuple(mu.points), smooth, point_vals + smooth)


def build_S_radial(theta, sigma, mesh):
    """``S(r) = theta exp(-sqrt(sigma) r) / (4 pi r)`` on the radial mesh."""
    return RadialField(mesh, theta * yukawa_radial(sigma, mesh.centers))


@dataclass(frozen=True)
class AuxFields:
    """``H1 = phi * B[S]`` and the cap ``H`` with diagnostics."""

    H1: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    BS: np.ndarray = field(repr=False)
    monopole: float
    gauge_ratio: float


def build_H1_H(gt, S, mesh, total_variation=None):
    """Riesz potential of ``B[S]`` (free space) and ``H = C0 min(u^alpha, u^2)``, ``u = |S|+|H1|``.

    ``S`` is an array of node values on ``mesh`` (Grid or RadialMesh).
    """
    S = np.asarray(S, dtype=float)
    bs = gt.b(S)
    w = mesh.weights
    cell_mass = bs * w
    monopole = float(np.sum(cell_mass))
    if monopole > 0 and float(np.max(cell_mass)) > 0.5 * monopole:
        k = np.unravel_index(int(np.argmax(cell_mass)), bs.shape)
        raise ConsistencyError(
            f"B[S] concentrated in a single cell {tuple(int(i) for i in k)}; grid too coarse for the charge"
        )
    if isinstance(mesh, Grid):
        h1 = mesh.coulomb_free_space(bs)
    elif isinstance(mesh, RadialMesh):
        h1 = mesh.coulomb(bs)
    else:
        raise TypeError(f"unsupported mesh {type(mesh).__name__}")
    tv = total_variation if total_variation else 0.0
    gauge_ratio = monopole / (GAUGE_FRACTION * tv) if tv > 0 else 0.0
    if gauge_ratio > 1.0:
        log.info("B[S] carries monopole %.4g (%.2f of the periodic-gauge budget)", monopole, gauge_ratio)
    u = np.abs(S) + np.abs(h1)
    H = gt.b_constant * np.minimum(u ** gt.alpha, u * u)
    return AuxFields(h1, H, bs, monopole, gauge_ratio)
