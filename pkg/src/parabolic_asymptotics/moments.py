"""Inductively corrected moments M_alpha(f, t) and the projection P_i(t).

P_i(t) f removes the g_alpha(t) components of f for |alpha| <= i, leaving a
field whose polynomial moments up to order i vanish.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernel
from .errors import DomainError, GuardError
from .field import MOMENT_TAIL_TOL, Field, check_moment_tail, format_number, heat_apply, lq_norm, moment_of_field
from .kernel import MultiIndex, g_alpha, multi_indices

MAX_MOMENT_ORDER = 6


def bracket(k: float) -> int:
    """The integer [k] with k - 1 < [k] <= k."""
    if k < 0:
        raise DomainError(f"[k] is defined for k >= 0, got {k}")
    return int(math.floor(k))


@dataclass(frozen=True)
class MomentTable:
    """Coefficients M_alpha(f, t) for every |alpha| <= k_cap, in induction order."""

    k_cap: int
    time: float
    entries: dict = dc_field(default_factory=dict)

    def __getitem__(self, alpha):
        return self.entries[MultiIndex(alpha)]

    def __iter__(self):
        return iter(self.entries.items())

    def __len__(self):
        return len(self.entries)

    @property
    def dim(self) -> int:
        return next(iter(self.entries)).dim

    def max_abs(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "value", "t"])
            for alpha, val in self.entries.items():
                w.writerow([alpha.label(), format_number(val), format_number(self.time)])


def coefficients_from_raw(raw: dict, t: float, k_cap: int, dim: int) -> MomentTable:
    """Run the recursion on precomputed raw moments int x^alpha f dx.

    The inner integrals int x^alpha g_rho dx are taken in closed form.
    """
    g_moment = kernel.g_alpha_moment
    entries = {}
    for alpha in multi_indices(dim, k_cap):
        val = raw[alpha]
        if alpha.order >= 2:
            for rho in alpha.below():
                val -= entries[rho] * g_moment(rho, alpha, t)
        entries[alpha] = val
    return MomentTable(k_cap, t, entries)


def moment_coefficients(f: Field, t: float, k_cap: int) -> MomentTable:
    if not 0 <= k_cap <= MAX_MOMENT_ORDER:
        raise DomainError(f"moment order cap must lie in [0, {MAX_MOMENT_ORDER}], got {k_cap}")
    check_moment_tail(f, k_cap)
    dim = f.grid.dim
    raw = {alpha: moment_of_field(f, alpha) for alpha in multi_indices(dim, k_cap)}
    return coefficients_from_raw(raw, t, k_cap, dim)


def raw_moment_series(grid, values, k_cap: int) -> dict:
    """int x^alpha f dx for a stack of arrays (leading batch axes allowed)."""
    batch = np.asarray(values, dtype=float)
    tail = np.max(np.abs([grid.boundary_max(v) for v in batch.reshape((-1,) + grid.shape)]))
    if tail * grid.half_extent**k_cap > MOMENT_TAIL_TOL:
        raise GuardError(
            f"moment quadrature up to order {k_cap} is unreliable: "
            f"boundary max * L^K = {tail * grid.half_extent**k_cap:.3e}"
        )
    axes = tuple(range(-grid.dim, 0))
    return {
        alpha: np.sum(alpha.power(grid.coords) * batch, axis=axes) * grid.cell
        for alpha in multi_indices(grid.dim, k_cap)
    }


def moment_series(grid, values, times, k_cap: int) -> dict:
    """M_alpha(f(t_k), t_k) for a stack of arrays f(t_k); dict alpha -> array over k."""
    if not 0 <= k_cap <= MAX_MOMENT_ORDER:
        raise DomainError(f"moment order cap must lie in [0, {MAX_MOMENT_ORDER}], got {k_cap}")
    raw = raw_moment_series(grid, values, k_cap)
    times = np.asarray(times, dtype=float)
    g_moment = kernel.g_alpha_moment
    entries = {}
    for alpha in multi_indices(grid.dim, k_cap):
        val = raw[alpha].copy()
        if alpha.order >= 2:
            for rho in alpha.below():
                inner = np.array([g_moment(rho, alpha, t) for t in times])
                val -= entries[rho] * inner
        entries[alpha] = val
    return entries


def tables_from_series(series: dict, times, k_cap: int):
    return [
        MomentTable(k_cap, float(t), {a: float(v[k]) for a, v in series.items()})
        for k, t in enumerate(times)
    ]


def expansion_field(table: MomentTable, grid, order=None) -> Field:
    """sum_{|alpha| <= order} M_alpha g_alpha(., t) on ``grid``."""
    order = table.k_cap if order is None else order
    out = np.zeros(grid.shape)
    for alpha, val in table:
        if alpha.order <= order and val != 0.0:
            out += val * g_alpha(alpha, grid.coords, table.time)
    return Field(grid, out, table.time)


def project_P(f: Field, t: float, i: int, table: MomentTable | None = None) -> Field:
    """[P_i(t) f] = f - sum_{|alpha| <= i} M_alpha(f, t) g_alpha(t)."""
    if table is None:
        table = moment_coefficients(f, t, i)
    elif table.time != t:
        raise DomainError(f"moment table was computed at t={table.time}, not t={t}")
    if i > table.k_cap:
        raise DomainError(f"P_{i} needs moments up to order {i}, table stops at {table.k_cap}")
    if i < 0:
        raise DomainError("projection order must be >= 0")
    return Field(f.grid, f.values - expansion_field(table, f.grid, i).values, t)


def commute_check(phi: Field, t: float, k_cap: int) -> float:
    """L1 norm of P(t) e^{t Delta} phi - e^{t Delta} P(0) phi."""
    left = project_P(heat_apply(phi, t), t, k_cap)
    right = heat_apply(project_P(phi, 0.0, k_cap), t)
    return lq_norm(left - right, 1)
