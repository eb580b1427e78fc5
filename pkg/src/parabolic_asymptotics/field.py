"""Sampled functions on a uniform truncated grid of [-L, L]^N.

Quadrature is the trapezoid rule, which on a uniform periodic grid is just
``h^N * sum``; for smooth, decaying integrands it is spectrally accurate. The
heat semigroup and derivatives are applied in Fourier space.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, GuardError
from .kernel import MultiIndex

BOUNDARY_TOL = 1e-9
# Tail allowance for x^alpha-weighted quadrature: max|f| on the boundary * L^K.
MOMENT_TAIL_TOL = 1e-6

DEFAULT_GRIDS = {1: (160.0, 4096), 2: (48.0, 256)}


@dataclass(frozen=True)
class Grid:
    dim: int
    half_extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"grids support N in {{1, 2}}, got {self.dim}")
        if self.half_extent <= 0:
            raise DomainError("half_extent must be positive")
        n = self.points
        if n < 64 or n & (n - 1):
            raise DomainError(f"points per axis must be a power of two >= 64, got {n}")

    @classmethod
    def default(cls, dim=1):
        L, n = DEFAULT_GRIDS[dim]
        return cls(dim, L, n)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.points

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def cell(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def axis(self):
        return -self.half_extent + self.spacing * np.arange(self.points)

    @cached_property
    def coords(self):
        """Node coordinates, shape (N, n, ..., n)."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self):
        return np.sqrt(np.sum(self.coords**2, axis=0))

    @cached_property
    def wavenumbers(self):
        """Angular wavenumbers on the rfftn layout, shape (N, n, ..., n//2+1)."""
        full = 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        half = 2.0 * np.pi * np.fft.rfftfreq(self.points, d=self.spacing)
        axes = [full] * (self.dim - 1) + [half]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def derivative_wavenumbers(self):
        # Nyquist mode has no odd derivative on an even grid.
        k = self.wavenumbers.copy()
        nyq = np.pi / self.spacing
        k[np.isclose(np.abs(k), nyq)] = 0.0
        return k

    @cached_property
    def wavenumber_sq(self):
        return np.sum(self.wavenumbers**2, axis=0)

    def sample(self, func):
        """Field of ``func(coords)``, coords shaped (N, n, ..., n)."""
        return Field(self, func(self.coords))

    def zeros(self):
        return Field(self, np.zeros(self.shape))

    def boundary_max(self, values) -> float:
        values = np.abs(np.asarray(values))
        edge = 0.0
        for ax in range(-self.dim, 0):
            first = np.take(values, 0, axis=ax)
            last = np.take(values, -1, axis=ax)
            edge = max(edge, float(first.max()), float(last.max()))
        return edge


class Field:
    """Real samples on a Grid, with an optional time of validity.

    Value-semantic: arithmetic returns new Fields and never mutates inputs.
    """

    __slots__ = ("grid", "values", "time")

    def __init__(self, grid: Grid, values, time=None):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise DomainError(f"samples have shape {values.shape}, grid expects {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GuardError("field samples contain NaN or Inf")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.time = time

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise DomainError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other), self.time)

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other), self.time)

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values, self.time)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other), self.time)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other), self.time)

    def __neg__(self):
        return Field(self.grid, -self.values, self.time)

    def with_time(self, time):
        return Field(self.grid, self.values, time)

    def boundary_max(self) -> float:
        return self.grid.boundary_max(self.values)

    def check_boundary(self, tol=BOUNDARY_TOL):
        edge = self.boundary_max()
        if edge > tol:
            raise GuardError(
                f"field is not small on the domain boundary: max |f| = {edge:.3e} > {tol:.1e}"
            )
        return edge

    def __repr__(self):
        return f"Field(N={self.grid.dim}, n={self.grid.points}, L={self.grid.half_extent}, t={self.time})"


def integrate(grid: Grid, values) -> float:
    return float(np.sum(values) * grid.cell)


def lq_norm(f: Field, q=2) -> float:
    if q < 1:
        raise DomainError(f"L^q norm needs q >= 1, got {q}")
    a = np.abs(f.values)
    if np.isinf(q):
        return float(a.max())
    if q == 1:
        return integrate(f.grid, a)
    return integrate(f.grid, a**q) ** (1.0 / q)


def weighted_l1_norm(f: Field, weight: float) -> float:
    """int (1 + |x|)^weight |f(x)| dx."""
    if weight < 0:
        raise DomainError(f"weight exponent must be >= 0, got {weight}")
    return integrate(f.grid, (1.0 + f.grid.radius) ** weight * np.abs(f.values))


def moment_of_field(f: Field, alpha) -> float:
    alpha = MultiIndex(alpha)
    if alpha.dim != f.grid.dim:
        raise DomainError("multi-index dimension does not match the grid")
    return integrate(f.grid, alpha.power(f.grid.coords) * f.values)


def check_moment_tail(f: Field, max_order: int) -> float:
    """Guard the truncated-domain moment quadrature; returns the tail estimate."""
    tail = f.boundary_max() * f.grid.half_extent**max_order
    if tail > MOMENT_TAIL_TOL:
        raise GuardError(
            f"moment quadrature up to order {max_order} is unreliable: "
            f"boundary max * L^K = {tail:.3e} > {MOMENT_TAIL_TOL:.0e}"
        )
    return tail


def heat_spectrum(grid: Grid, tau):
    return np.exp(-grid.wavenumber_sq * tau)


def heat_apply_array(grid: Grid, values, tau):
    """e^{tau Delta} on raw arrays; trailing axes must match ``grid.shape``."""
    if tau < 0:
        raise DomainError(f"heat flow duration must be >= 0, got {tau}")
    if tau == 0:
        return np.array(values, dtype=float)
    axes = tuple(range(-grid.dim, 0))
    spec = np.fft.rfftn(values, axes=axes)
    return np.fft.irfftn(spec * heat_spectrum(grid, tau), s=grid.shape, axes=axes)


def heat_apply(f: Field, tau) -> Field:
    """Exact heat semigroup e^{tau Delta} f (convolution with G(., tau))."""
    t_new = None if f.time is None else f.time + tau
    if tau == 0:
        return Field(f.grid, f.values, f.time)
    return Field(f.grid, heat_apply_array(f.grid, f.values, tau), t_new)


def gradient_array(grid: Grid, values):
    """Spectral gradient; output has a new axis of length N just before the grid axes."""
    axes = tuple(range(-grid.dim, 0))
    spec = np.fft.rfftn(values, axes=axes)
    k = grid.derivative_wavenumbers
    parts = [np.fft.irfftn(1j * k[i] * spec, s=grid.shape, axes=axes) for i in range(grid.dim)]
    return np.stack(parts, axis=-grid.dim - 1)


def divergence_array(grid: Grid, vector):
    """Spectral divergence of an array with the component axis just before the grid axes."""
    axes = tuple(range(-grid.dim, 0))
    k = grid.derivative_wavenumbers
    total = 0.0
    for i in range(grid.dim):
        comp = np.take(vector, i, axis=-grid.dim - 1)
        total = total + 1j * k[i] * np.fft.rfftn(comp, axes=axes)
    return np.fft.irfftn(total, s=grid.shape, axes=axes)


def laplacian_array(grid: Grid, values):
    axes = tuple(range(-grid.dim, 0))
    spec = np.fft.rfftn(values, axes=axes)
    return np.fft.irfftn(-grid.wavenumber_sq * spec, s=grid.shape, axes=axes)


def gradient(f: Field):
    """Per-axis spectral derivatives of ``f`` as a list of Fields."""
    g = gradient_array(f.grid, f.values)
    return [Field(f.grid, g[i], f.time) for i in range(f.grid.dim)]


def gradient_magnitude(f: Field) -> Field:
    g = gradient_array(f.grid, f.values)
    return Field(f.grid, np.sqrt(np.sum(g**2, axis=0)), f.time)


def gauss_field(grid: Grid, t, mass=1.0, shift=None) -> Field:
    from .kernel import gauss

    x = grid.coords
    if shift is not None:
        x = x - np.asarray(shift, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    return Field(grid, mass * gauss(x, t))


def g_alpha_field(grid: Grid, alpha, t) -> Field:
    from .kernel import g_alpha

    return Field(grid, g_alpha(alpha, grid.coords, t), t)


def save_field(f: Field, path):
    """Write a snapshot: ``.csv`` gives (x[, y], value) rows, ``.npz`` is binary.

    Both carry N, L, n and time_tag.
    """
    path = str(path)
    g = f.grid
    tag = "" if f.time is None else repr(float(f.time))
    if path.endswith(".npz"):
        np.savez(path, values=f.values, dim=g.dim, half_extent=g.half_extent,
                 points=g.points, time_tag=tag)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# N={g.dim}\n# L={g.half_extent!r}\n# n={g.points}\n# time_tag={tag}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y"][: g.dim] + ["value"])
        coords = g.coords.reshape(g.dim, -1)
        vals = f.values.reshape(-1)
        for j in range(vals.size):
            w.writerow([format_number(c) for c in coords[:, j]] + [format_number(vals[j])])


def load_field(path) -> Field:
    path = str(path)
    if path.endswith(".npz"):
        data = np.load(path)
        grid = Grid(int(data["dim"]), float(data["half_extent"]), int(data["points"]))
        tag = str(data["time_tag"])
        return Field(grid, data["values"], float(tag) if tag else None)
    header = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key] = val
        else:
            body.append(line)
    grid = Grid(int(header["N"]), float(header["L"]), int(header["n"]))
    rows = list(csv.reader(body[1:]))
    vals = np.array([float(r[-1]) for r in rows]).reshape(grid.shape)
    tag = header.get("time_tag", "")
    return Field(grid, vals, float(tag) if tag else None)


def format_number(x) -> str:
    return format(float(x), ".17g")
