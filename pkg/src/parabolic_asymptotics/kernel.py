"""Closed-form calculus for the Gauss kernel and its normalized derivatives.

``g_alpha(alpha, x, t)`` is ``(-1)^|alpha| / alpha! * d^alpha G(x, 1 + t)``,
evaluated through the physicists' Hermite recurrence. All moment integrals
``int x^beta g_alpha(x, t) dx`` are available in closed form, so nothing in
this module touches quadrature.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DomainError

MAX_ORDER = 8
# exp(-700) is ~1e-304; anything beyond is clamped to an exact zero.
UNDERFLOW_EXPONENT = 700.0


class MultiIndex(tuple):
    """Tuple of nonnegative integers (alpha_1, ..., alpha_N)."""

    def __new__(cls, entries):
        if isinstance(entries, (int, np.integer)):
            entries = (int(entries),)
        entries = tuple(int(a) for a in entries)
        if not entries:
            raise DomainError("multi-index needs at least one entry")
        if any(a < 0 for a in entries):
            raise DomainError(f"negative multi-index entry in {entries}")
        return super().__new__(cls, entries)

    @property
    def dim(self) -> int:
        return len(self)

    @property
    def order(self) -> int:
        return sum(self)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(a) for a in self)

    def __le__(self, other):
        return len(self) == len(other) and all(a <= b for a, b in zip(self, other))

    def __lt__(self, other):
        return self <= other and tuple(self) != tuple(other)

    def __ge__(self, other):
        return MultiIndex(other) <= self

    def __gt__(self, other):
        return MultiIndex(other) < self

    def __sub__(self, other):
        return MultiIndex(a - b for a, b in zip(self, other))

    def __add__(self, other):
        return MultiIndex(a + b for a, b in zip(self, other))

    def below(self):
        """J(alpha): every rho <= alpha other than alpha itself."""
        ranges = [range(a + 1) for a in self]
        return [MultiIndex(r) for r in itertools.product(*ranges) if r != tuple(self)]

    def power(self, x):
        """x^alpha for points ``x`` with the coordinate axis first."""
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[1:] if x.ndim > 1 else (), dtype=float)
        for i, a in enumerate(self):
            if a:
                out = out * x[i] ** a
        return out

    def label(self) -> str:
        return "-".join(str(a) for a in self)

    def __repr__(self):
        return f"MultiIndex({tuple(self)})"


def multi_indices(dim: int, max_order: int):
    """All multi-indices with |alpha| <= max_order, by order then lexicographic."""
    if dim < 1:
        raise DomainError("dimension must be >= 1")
    out = []
    for order in range(max_order + 1):
        level = [
            MultiIndex(c)
            for c in itertools.product(range(order + 1), repeat=dim)
            if sum(c) == order
        ]
        out.extend(sorted(level, key=tuple))
    return out


def _as_points(x, dim=None):
    """Coerce ``x`` to shape (N, ...) with the axis index leading."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or (dim == 1 and x.shape[0] != 1):
        x = x[None]
    if dim is not None and x.shape[0] != dim:
        raise DomainError(f"point has {x.shape[0]} coordinates, expected {dim}")
    return x


def gauss(x, t, dim=None):
    """(4 pi t)^(-N/2) exp(-|x|^2 / 4t).

    ``x`` has the coordinate axis first, shape (N, ...). Pass ``dim=1`` to
    evaluate a plain array of 1-D points.
    """
    if not np.all(np.asarray(t) > 0):
        raise DomainError(f"gauss requires t > 0, got {t}")
    x = _as_points(x, dim)
    dim = x.shape[0]
    r2 = np.sum(x * x, axis=0)
    expo = r2 / (4.0 * t)
    val = (4.0 * np.pi * t) ** (-dim / 2.0) * np.exp(-np.minimum(expo, UNDERFLOW_EXPONENT))
    return np.where(expo > UNDERFLOW_EXPONENT, 0.0, val)


def hermite(n: int, z):
    """Physicists' Hermite polynomial H_n(z) by three-term recurrence."""
    z = np.asarray(z, dtype=float)
    h_prev = np.ones_like(z)
    if n == 0:
        return h_prev
    h = 2.0 * z
    for k in range(1, n):
        h_prev, h = h, 2.0 * z * h - 2.0 * k * h_prev
    return h


def _check_alpha(alpha, dim=None):
    alpha = MultiIndex(alpha)
    if alpha.order > MAX_ORDER:
        raise DomainError(f"|alpha| = {alpha.order} exceeds the supported maximum {MAX_ORDER}")
    if dim is not None and alpha.dim != dim:
        raise DomainError(f"multi-index {tuple(alpha)} does not match dimension {dim}")
    return alpha


def g_alpha(alpha, x, t):
    """Normalized derivative g_alpha(x, t) of the Gauss kernel at time 1 + t.

    Factorizes over axes: for each axis, with s = 1 + t and z = x / (2 sqrt s),
    the 1-D factor is H_a(z) / (a! (2 sqrt s)^a) times the 1-D Gaussian.
    """
    if np.any(np.asarray(t) < 0):
        raise DomainError(f"g_alpha requires t >= 0, got {t}")
    alpha = _check_alpha(alpha)
    x = _as_points(x, alpha.dim)
    s = 1.0 + np.asarray(t, dtype=float)
    out = gauss(x, s)
    scale = 2.0 * np.sqrt(s)
    for i, a in enumerate(alpha):
        if a:
            out = out * hermite(a, x[i] / scale) / (math.factorial(a) * scale**a)
    return out


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def gaussian_moment(beta, t) -> float:
    """int x^beta G(x, 1 + t) dx; each axis has variance 2(1 + t)."""
    if t < 0:
        raise DomainError(f"gaussian_moment requires t >= 0, got {t}")
    beta = MultiIndex(beta)
    var = 2.0 * (1.0 + t)
    out = 1.0
    for b in beta:
        if b % 2:
            return 0.0
        out *= _double_factorial(b - 1) * var ** (b // 2)
    return out


def g_alpha_moment(alpha, beta, t) -> float:
    """int x^beta g_alpha(x, t) dx, by integration by parts.

    Equals beta! / (alpha! (beta - alpha)!) * gaussian_moment(beta - alpha, t)
    when alpha <= beta, and zero otherwise.
    """
    alpha, beta = MultiIndex(alpha), MultiIndex(beta)
    if alpha.dim != beta.dim:
        raise DomainError("alpha and beta have different dimensions")
    if not alpha <= beta:
        return 0.0
    diff = beta - alpha
    binom = math.prod(math.comb(b, a) for a, b in zip(alpha, beta))
    return binom * gaussian_moment(diff, t)
