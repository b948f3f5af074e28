"""Discretization carriers: a periodic cubic grid and a spherical radial mesh.

Both expose the same small surface used by the fixed-point solver:
``weights`` (cell volumes), ``solve_screened`` for ``(sigma - Laplacian) u = f``
and ``apply_screened`` for its forward operator.  The discrete operators are
M-matrices, so ``solve_screened`` maps non-negative data to non-negative
solutions.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

# integral of 1/|u| over the unit cube centred at the origin
UNIT_CUBE_INVERSE_DISTANCE = 2.380077363979553


@dataclass(frozen=True)
class Grid:
    """Cell-centred periodic grid on ``[-L/2, L/2)^3`` with ``n`` points per axis.

    Nodes sit at ``-L/2 + (j + 1/2) h``, so a charge at the origin is never a node.
    """

    L: float
    n: int

    @property
    def h(self):
        return self.L / self.n

    @property
    def cell_volume(self):
        return self.h ** 3

    @property
    def volume(self):
        return self.L ** 3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @cached_property
    def coords(self):
        return -0.5 * self.L + (np.arange(self.n) + 0.5) * self.h

    def axes(self):
        """Broadcastable coordinate arrays (x, y, z)."""
        c = self.coords
        return c[:, None, None], c[None, :, None], c[None, None, :]

    def points(self, index):
        """Coordinates of nodes given as an (m, 3) integer index array."""
        return self.coords[np.asarray(index)]

    @property
    def weights(self):
        return self.cell_volume

    @cached_property
    def _laplacian_symbol(self):
        # symbol of the 7-point stencil, -Delta_h
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kz = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        s = (2.0 / self.h) ** 2
        sx = s * np.sin(0.5 * k * self.h) ** 2
        sz = s * np.sin(0.5 * kz * self.h) ** 2
        return sx[:, None, None] + sx[None, :, None] + sz[None, None, :]

    def solve_screened(self, rhs, sigma):
        f = np.fft.rfftn(rhs)
        f /= sigma + self._laplacian_symbol
        return np.fft.irfftn(f, s=self.shape, axes=(0, 1, 2))

    def apply_screened(self, u, sigma):
        f = np.fft.rfftn(u)
        f *= sigma + self._laplacian_symbol
        return np.fft.irfftn(f, s=self.shape, axes=(0, 1, 2))

    def apply_laplacian(self, u):
        """Discrete Laplacian (negative semi-definite)."""
        return -self.apply_screened(u, 0.0)

    def gradient(self, u):
        """Central-difference gradient, periodic."""
        h2 = 2.0 * self.h
        return tuple((np.roll(u, -1, axis=a) - np.roll(u, 1, axis=a)) / h2 for a in range(3))

    def coulomb_free_space(self, src):
        """Free-space ``phi * src`` with ``phi = 1/(4 pi |x|)``, zero-padded convolution.

        The kernel at zero offset is the cell average of ``1/(4 pi |x|)``.
        """
        n, h = self.n, self.h
        m = np.arange(2 * n)
        m = np.where(m < n, m, m - 2 * n) * h
        d = np.sqrt(m[:, None, None] ** 2 + m[None, :, None] ** 2 + m[None, None, :] ** 2)
        with np.errstate(divide="ignore"):
            ker = 1.0 / (4.0 * np.pi * d)
        ker[0, 0, 0] = UNIT_CUBE_INVERSE_DISTANCE / (4.0 * np.pi * h)
        kf = np.fft.rfftn(ker)
        del ker, d
        padded = np.zeros((2 * n,) * 3)
        padded[:n, :n, :n] = src
        out = np.fft.irfftn(np.fft.rfftn(padded) * kf, s=padded.shape, axes=(0, 1, 2))
        return self.cell_volume * out[:n, :n, :n]


@dataclass(frozen=True)
class RadialMesh:
    """Cell-centred mesh on ``(0, r_max]`` for radially symmetric fields.

    Cell i spans ``[i h, (i+1) h]`` with centre ``(i + 1/2) h``; the face at 0
    has zero area (regularity), the outer face carries ``u(r_max) = 0``.
    """

    r_max: float
    n: int

    @property
    def h(self):
        return self.r_max / self.n

    @cached_property
    def centers(self):
        return (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def faces(self):
        return np.arange(self.n + 1) * self.h

    @cached_property
    def weights(self):
        f = self.faces
        return 4.0 * np.pi / 3.0 * (f[1:] ** 3 - f[:-1] ** 3)

    @property
    def volume(self):
        return 4.0 * np.pi / 3.0 * self.r_max ** 3

    @cached_property
    def _stiffness(self):
        """Bands of -Delta_h in (upper, diag, lower) form, per unit volume."""
        h, f, v = self.h, self.faces, self.weights
        area = 4.0 * np.pi * f ** 2
        inner = area[:-1] / (h * v)
        outer = area[1:] / (h * v)
        diag = inner + outer
        diag[-1] = inner[-1] + 2.0 * outer[-1]  # Dirichlet at the half-cell distance
        upper = -outer[:-1]
        lower = -inner[1:]
        return upper, diag, lower

    def _banded(self, sigma):
        upper, diag, lower = self._stiffness
        ab = np.zeros((3, self.n))
        ab[0, 1:] = upper
        ab[1] = diag + sigma
        ab[2, :-1] = lower
        return ab

    def solve_screened(self, rhs, sigma):
        return solve_banded((1, 1), self._banded(sigma), rhs)

    def apply_screened(self, u, sigma):
        upper, diag, lower = self._stiffness
        out = (diag + sigma) * u
        out[:-1] += upper * u[1:]
        out[1:] += lower * u[:-1]
        return out

    def coulomb(self, src):
        """``phi * src`` for a radial source truncated at r_max."""
        c = self.centers
        q = src * self.weights / (4.0 * np.pi)
        inside = np.concatenate([[0.0], np.cumsum(q)[:-1]])
        outside = np.cumsum((q / c)[::-1])[::-1]
        return inside / c + outside


@dataclass(frozen=True)
class ScalarField:
    """Values of a field on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def with_values(self, values):
        return replace(self, values=values)

    def l2(self):
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.values ** 2)))

    def integral(self):
        return float(self.grid.cell_volume * np.sum(self.values))

    def to_csv(self, path):
        write_grid_csv(path, self.grid, self.values)


@dataclass(frozen=True)
class RadialField:
    """Values of a radially symmetric field on a :class:`RadialMesh`."""

    mesh: RadialMesh
    values: np.ndarray = field(repr=False)

    def with_values(self, values):
        return replace(self, values=values)

    def l2(self):
        return float(np.sqrt(np.sum(self.mesh.weights * self.values ** 2)))

    def integral(self):
        return float(np.sum(self.mesh.weights * self.values))

    def to_csv(self, path):
        write_radial_csv(path, self.mesh, self.values)


def write_grid_csv(path, grid, values):
    x = grid.coords
    ix, iy, iz = np.meshgrid(x, x, x, indexing="ij")
    data = np.column_stack([ix.ravel(), iy.ravel(), iz.ravel(), np.asarray(values).ravel()])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=f"L={grid.L!r},n={grid.n}\nx,y,z,value")


def write_radial_csv(path, mesh, values):
    data = np.column_stack([mesh.centers, values])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=f"r_max={mesh.r_max!r},n={mesh.n}\nr,value")


def read_grid_csv(path):
    """Inverse of :func:`write_grid_csv`; returns (grid, values)."""
    with open(path) as fh:
        head = fh.readline().lstrip("# ").strip()
    meta = dict(item.split("=") for item in head.split(","))
    grid = Grid(float(meta["L"]), int(meta["n"]))
    data = np.loadtxt(path, delimiter=",", comments="#")
    return grid, data[:, 3].reshape(grid.shape)
