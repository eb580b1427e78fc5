"""Nonlinearities F(x, t, u, grad u) with their decay metadata.

Evaluators work on raw arrays shaped ``(m, *grid.shape)`` (one slab per
component) so the solver and the expansion builders can call them without
wrapping every intermediate in a Field.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import DomainError
from .field import Field, Grid, divergence_array, gradient_array, heat_spectrum

SUPPORTED_LAWS = ("semilinear", "convection", "keller-segel", "system", "zero")


@dataclass
class ChemotaxisState:
    """Chemical concentration v and its initial profile psi."""

    v: Field
    psi: Field


@dataclass
class Nonlinearity:
    name: str
    dim: int
    system_size: int
    decay_exponent: float
    divergence_form: bool
    evaluator: Callable
    params: dict = dc_field(default_factory=dict)
    supported: bool = True
    reason: str = ""
    chemotaxis: bool = False

    @property
    def A(self) -> float:
        return self.decay_exponent

    def evaluate(self, grid: Grid, t, u, aux=None):
        """F on an array ``u`` of shape (m, *grid.shape); returns the same shape."""
        u = np.asarray(u, dtype=float)
        if u.ndim == grid.dim:
            u = u[None]
        if self.chemotaxis:
            if aux is None:
                raise ValueError("Keller-Segel nonlinearity evaluated without a chemotaxis state")
            if isinstance(aux, ChemotaxisState):
                aux = aux.v.values
            elif isinstance(aux, Field):
                aux = aux.values
        return self.evaluator(grid, t, u, aux)

    def __call__(self, t, u_fields, aux=None):
        """Field-level evaluation: a Field or list of component Fields in, same out."""
        single = isinstance(u_fields, Field)
        comps = [u_fields] if single else list(u_fields)
        grid = comps[0].grid
        out = self.evaluate(grid, t, np.stack([c.values for c in comps]), aux)
        fields = [Field(grid, out[i], t) for i in range(out.shape[0])]
        return fields[0] if single else fields

    def require_supported(self):
        if not self.supported:
            raise DomainError(f"{self.name}: {self.reason}")

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, **self.params}


def _signed_power(u, p):
    # |u|^(p-1) u, continuously extended by 0 at u = 0
    return np.abs(u) ** (p - 1.0) * u


def make_zero(dim=1, system_size=1) -> Nonlinearity:
    """F = 0: pure heat flow. Carries a nominal A so rate code can run on it."""
    return Nonlinearity(
        "zero", dim, system_size, float("inf"), True,
        lambda grid, t, u, aux: np.zeros_like(u),
    )


def make_semilinear(lam: float, p: float, dim: int = 1) -> Nonlinearity:
    """lam |u|^(p-1) u, with A = N(p - 1)/2."""
    if p <= 1:
        raise DomainError(f"semilinear exponent must exceed 1, got p={p}")
    A = dim * (p - 1.0) / 2.0
    supported = p > 1.0 + 2.0 / dim
    return Nonlinearity(
        "semilinear", dim, 1, A, False,
        lambda grid, t, u, aux: lam * _signed_power(u, p),
        params={"lam": lam, "p": p},
        supported=supported,
        reason="" if supported else f"p={p} <= 1 + 2/N: A <= 1, no Gauss-kernel asymptotics",
    )


def make_convection(a, p: float, dim: int = 1) -> Nonlinearity:
    """a . grad(|u|^(p-1) u), divergence form, with A = N(p - 1)/2 + 1/2."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.size != dim:
        raise DomainError(f"drift vector has {a.size} entries, expected {dim}")
    if p <= 1:
        raise DomainError(f"convection exponent must exceed 1, got p={p}")
    A = dim * (p - 1.0) / 2.0 + 0.5
    supported = p > 1.0 + 1.0 / dim

    def evaluate(grid, t, u, aux):
        w = _signed_power(u, p)
        flux = a.reshape((1, dim) + (1,) * dim) * w[:, None]
        return divergence_array(grid, flux)

    return Nonlinearity(
        "convection", dim, 1, A, True, evaluate,
        params={"a": a.tolist(), "p": p},
        supported=supported,
        reason="" if supported else f"p={p} <= 1 + 1/N: the solution is not Gauss-like",
    )


def make_keller_segel(dim: int = 1) -> Nonlinearity:
    """-div(u grad v) with v supplied by the chemotaxis state; A = N/2 + 1."""
    if dim not in (1, 2):
        raise DomainError(f"Keller-Segel plug-in supports N in {{1, 2}}, got {dim}")

    def evaluate(grid, t, u, v):
        grad_v = gradient_array(grid, v)
        return -divergence_array(grid, u[:, None] * grad_v[None])

    return Nonlinearity(
        "keller-segel", dim, 1, dim / 2.0 + 1.0, True, evaluate, chemotaxis=True,
    )


def make_system(component_laws, a: float, dim: int = 1) -> Nonlinearity:
    """Vector nonlinearity F(u) = (law_1(u), ..., law_m(u)) with |F(v)| <= C|v|^a.

    Each law maps the stacked components (m, *grid.shape) to one component.
    """
    laws = list(component_laws)
    if not laws:
        raise DomainError("a system needs at least one component law")
    A = dim * (a - 1.0) / 2.0
    supported = a > 1.0 + 2.0 / dim

    def evaluate(grid, t, u, aux):
        return np.stack([np.asarray(law(u), dtype=float) * np.ones(grid.shape) for law in laws])

    return Nonlinearity(
        "system", dim, len(laws), A, False, evaluate,
        params={"a": a, "m": len(laws)},
        supported=supported,
        reason="" if supported else f"growth exponent a={a} <= 1 + 2/N",
    )


def damped_heat_weights(grid: Grid, delays):
    """e^{-d} e^{d Delta} multipliers for each delay d, stacked on axis 0."""
    delays = np.asarray(delays, dtype=float)
    return np.stack([np.exp(-d) * heat_spectrum(grid, d) for d in delays])


def update_chemotaxis(state: ChemotaxisState, u_history, t: float, times=None) -> ChemotaxisState:
    """Recompute v(t) = e^{-t} e^{t Delta} psi + int_0^t e^{-(t-s)} e^{(t-s) Delta} u(s) ds.

    ``u_history`` is a Trajectory (first component is used) or a list of
    Fields with matching ``times``; it must cover [0, t]. The s-integral is the
    trapezoid rule on the history nodes.
    """
    if hasattr(u_history, "states"):
        times = u_history.times
        arrays = u_history.states[:, 0]
    else:
        if times is None:
            times = [f.time for f in u_history]
        arrays = np.stack([f.values for f in u_history])
    times = np.asarray(times, dtype=float)
    keep = times <= t + 1e-12
    times, arrays = times[keep], arrays[keep]
    if times.size == 0 or abs(times[0]) > 1e-12 or abs(times[-1] - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"u history does not cover [0, {t}]")
    grid = state.psi.grid
    axes = tuple(range(-grid.dim, 0))
    out_spec = np.exp(-t) * heat_spectrum(grid, t) * np.fft.rfftn(state.psi.values, axes=axes)
    if times.size > 1:
        dt = np.diff(times)
        w = np.zeros_like(times)
        w[:-1] += dt / 2.0
        w[1:] += dt / 2.0
        kernels = damped_heat_weights(grid, t - times)
        spec = np.fft.rfftn(arrays, axes=axes)
        out_spec = out_spec + np.tensordot(w, kernels * spec, axes=(0, 0))
    v = np.fft.irfftn(out_spec, s=grid.shape, axes=axes)
    return ChemotaxisState(Field(grid, v, t), state.psi)


def build(name: str, dim: int = 1, **params) -> Nonlinearity:
    """Construct a shipped plug-in from its registry name and parameters."""
    if name == "zero":
        return make_zero(dim)
    if name == "semilinear":
        return make_semilinear(float(params.get("lam", 1.0)), float(params["p"]), dim)
    if name == "convection":
        a = params.get("a", [1.0] * dim)
        return make_convection(a, float(params["p"]), dim)
    if name == "keller-segel":
        return make_keller_segel(dim)
    if name == "system":
        a = float(params.get("a", 4.0))
        # F = (u2^a, u1^a) style coupling, the shipped two-component example
        return make_system(
            [lambda u: np.abs(u[1]) ** a, lambda u: np.abs(u[0]) ** a], a, dim
        )
    raise DomainError(f"unknown nonlinearity {name!r}; choose from {SUPPORTED_LAWS}")
