"""Asymptotic profiles built on a solved trajectory.

U_0 is the moment part sum M_alpha(u(t), t) g_alpha(t). U_n adds the Duhamel
correction int_0^t e^{(t-s)Delta} P_[K](s) F(U_{n-1})(s) ds. The tilde variant
drives the same correction with a frozen profile, and the hat variant uses the
unprojected flux of F_M = F(Mg) together with time-dependent coefficients
c_alpha(t).

Every s-integral is the trapezoid rule on the trajectory's own time grid,
accumulated step by step through the exact heat semigroup:

    W_{k+1} = e^{d Delta}(W_k + d/2 H_k) + d/2 H_{k+1}.

For the Keller-Segel law, F is always evaluated with the trajectory's
chemical field v.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError
from .field import Field, format_number, heat_spectrum, integrate, lq_norm
from .kernel import MultiIndex, g_alpha, multi_indices
from .moments import MAX_MOMENT_ORDER, bracket, coefficients_from_raw, moment_coefficients, moment_series, project_P
from .rates import RateVerdict, judge

MAX_EXPANSION_ORDER = 4
DRIFT_WINDOW_START = 10.0
# relative size below which a coefficient drift or mass flux counts as rounding noise
ROUNDING_FLOOR = 1e-12


@dataclass
class ExpansionProfile:
    """Profile values on the trajectory times; arrays have shape (n_t, m, *grid)."""

    variant: str
    order: int
    K: float
    grid: object
    times: np.ndarray
    values: np.ndarray
    correction: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict)

    def index(self, t) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"profile has no value at t={t}")
        return k

    def field(self, t, component=0) -> Field:
        k = self.index(t)
        return Field(self.grid, self.values[k, component], float(self.times[k]))

    def correction_field(self, t, component=0) -> Field:
        k = self.index(t)
        if self.correction is None:
            return Field(self.grid, np.zeros(self.grid.shape), float(self.times[k]))
        return Field(self.grid, self.correction[k, component], float(self.times[k]))

    def sup_scaled_norm(self, t_min=1.0) -> float:
        """sup over t >= t_min of t^{N/2} ||profile(t)||_inf."""
        N = self.grid.dim
        sel = self.times >= t_min
        peaks = np.abs(self.values[sel]).reshape(int(sel.sum()), -1).max(axis=1)
        return float(np.max(self.times[sel] ** (N / 2.0) * peaks))


def _k_cap(K):
    kb = bracket(K)
    if kb > MAX_MOMENT_ORDER:
        raise DomainError(f"[K]={kb} exceeds the supported moment order {MAX_MOMENT_ORDER}")
    return kb


def combination(grid, times, coeffs: dict):
    """sum_alpha c_alpha(t_k) g_alpha(., t_k) for every k; coeffs map alpha -> array."""
    out = np.zeros((len(times),) + grid.shape)
    for alpha, c in coeffs.items():
        c = np.broadcast_to(np.asarray(c, dtype=float), (len(times),))
        for k, t in enumerate(times):
            if c[k] != 0.0:
                out[k] += c[k] * g_alpha(alpha, grid.coords, t)
    return out


def duhamel_accumulate(grid, times, H):
    """int_0^{t_k} e^{(t_k - s) Delta} H(s) ds for every k (trapezoid in s)."""
    H = np.asarray(H, dtype=float)
    axes = tuple(range(-grid.dim, 0))
    W = np.zeros_like(H)
    for k in range(len(times) - 1):
        d = times[k + 1] - times[k]
        spec = np.fft.rfftn(W[k] + 0.5 * d * H[k], axes=axes)
        W[k + 1] = np.fft.irfftn(heat_spectrum(grid, d) * spec, s=grid.shape, axes=axes) + 0.5 * d * H[k + 1]
    return W


def project_series(grid, times, H, k_cap):
    """P_{k_cap}(t_k) H(t_k) with a fresh moment table at each node."""
    mu = moment_series(grid, H, times, k_cap)
    return H - combination(grid, times, mu), mu


def forcing_on(traj, nl, stack):
    """F evaluated on a profile stack (n_t, m, *grid) at the trajectory times."""
    out = np.empty_like(stack)
    for k, t in enumerate(traj.times):
        aux = None if traj.aux is None else traj.aux[k]
        out[k] = nl.evaluate(traj.grid, t, stack[k], aux)
    return out


def moment_part(traj, k_cap):
    """U_0 on every recorded time, plus the per-component moment series."""
    grid, times = traj.grid, traj.times
    out = np.empty_like(traj.states)
    series = []
    for c in range(traj.system_size):
        mu = moment_series(grid, traj.states[:, c], times, k_cap)
        out[:, c] = combination(grid, times, mu)
        series.append(mu)
    return out, series


def build_U0(traj, K, t) -> Field:
    """sum_{|alpha| <= [K]} M_alpha(u(t), t) g_alpha(t) for the first component."""
    k_cap = _k_cap(K)
    u = traj.field(t)
    table = moment_coefficients(u, u.time, k_cap)
    out = np.zeros(traj.grid.shape)
    for alpha, val in table:
        out += val * g_alpha(alpha, traj.grid.coords, u.time)
    return Field(traj.grid, out, u.time)


def _projected_correction(traj, nl, stack, k_cap):
    grid, times = traj.grid, traj.times
    F = forcing_on(traj, nl, stack)
    H = np.empty_like(F)
    for c in range(F.shape[1]):
        H[:, c], _ = project_series(grid, times, F[:, c], k_cap)
    return duhamel_accumulate(grid, times, H), H


def build_Un(traj, nl, K, n) -> ExpansionProfile:
    """U_n by the recursion U_i = U_0 + int e^{(t-s)Delta} P_[K](s) F(U_{i-1})(s) ds."""
    if n < 0:
        raise DomainError("expansion order must be >= 0")
    if n > MAX_EXPANSION_ORDER:
        raise DomainError(f"expansion order n={n} exceeds the cost guard {MAX_EXPANSION_ORDER}")
    k_cap = _k_cap(K)
    if n >= 1:
        nl.require_supported()
    U0, series = moment_part(traj, k_cap)
    current, W, H = U0, np.zeros_like(U0), None
    for _ in range(n):
        W, H = _projected_correction(traj, nl, current, k_cap)
        current = U0 + W
    return ExpansionProfile(
        "Un", n, K, traj.grid, traj.times.copy(), current, W,
        {"moments": series, "integrand": H, "k_cap": k_cap},
    )


def limit_coefficients(traj, nl, k_cap, component=0):
    """Estimates of the limits M_alpha = lim M_alpha(u(t), t) for |alpha| <= k_cap.

    Each is the horizon value plus the power-law tail of int_T^inf M_alpha(F(s), s) ds
    fitted on the last decade; divergence-form laws use the exact initial mass
    for alpha = 0. Returns (values, tail info) keyed by alpha.
    """
    grid, times = traj.grid, traj.times
    mu = moment_series(grid, traj.states[:, component], times, k_cap)
    F = traj.forcing(nl)[:, component]
    mf = moment_series(grid, F, times, k_cap)
    scale = max(integrate(grid, np.abs(f)) for f in F)
    values, infos = {}, {}
    for alpha in mu:
        tail, info = power_tail(times, mf[alpha], scale=scale)
        values[alpha] = float(mu[alpha][-1] + tail)
        infos[alpha] = info | {"tail": tail}
    zero = MultiIndex((0,) * grid.dim)
    if nl.divergence_form:
        values[zero] = integrate(grid, traj.states[0, component])
    return values, infos


def limit_mass(traj, nl):
    """M per component: exact initial mass for divergence-form laws, else horizon value plus tail."""
    if nl.divergence_form:
        return np.array([integrate(traj.grid, c) for c in traj.states[0]])
    zero = MultiIndex((0,) * traj.grid.dim)
    return np.array([limit_coefficients(traj, nl, 0, c)[0][zero] for c in range(traj.system_size)])


def frozen_coefficients(traj, nl, K, J):
    """The constants of the frozen profile and the order cutoff J_A."""
    k_cap = _k_cap(K)
    if not 0 <= J <= k_cap:
        raise DomainError(f"J must lie in [0, [K]] = [0, {k_cap}], got {J}")
    dim = traj.grid.dim
    zero = MultiIndex((0,) * dim)
    if J == 0:
        return {zero: limit_mass(traj, nl)}, 0.0
    A = nl.A
    J_A = min(float(J), 2.0 * (A - 1.0))
    alphas = [a for a in multi_indices(dim, J) if a.order < J_A]
    for a in alphas:
        if not A > 1.0 + a.order / 2.0:
            raise DomainError(
                f"M_alpha for |alpha|={a.order} has no limit when A={A}: the moment grows like "
                f"t^(|alpha|/2 - (A - 1)) instead"
            )
    top = max((a.order for a in alphas), default=0)
    coeffs = {a: np.zeros(traj.system_size) for a in alphas}
    for c in range(traj.system_size):
        limits, _ = limit_coefficients(traj, nl, top, c)
        for a in alphas:
            coeffs[a][c] = limits[a]
    return coeffs, J_A


def build_tilde_u(traj, nl, K, J) -> ExpansionProfile:
    """U_0 plus the projected Duhamel flux of F on the frozen profile."""
    nl.require_supported()
    k_cap = _k_cap(K)
    coeffs, J_A = frozen_coefficients(traj, nl, K, J)
    grid, times = traj.grid, traj.times
    frozen = np.empty_like(traj.states)
    for c in range(traj.system_size):
        frozen[:, c] = combination(grid, times, {a: np.full(times.size, v[c]) for a, v in coeffs.items()})
    U0, series = moment_part(traj, k_cap)
    W, H = _projected_correction(traj, nl, frozen, k_cap)
    meta = {"J": J, "J_A": J_A, "frozen": {a: v.copy() for a, v in coeffs.items()},
            "moments": series, "integrand": H, "k_cap": k_cap}
    return ExpansionProfile("tilde", 1, K, grid, times.copy(), U0 + W, W, meta)


def mass_profile(traj, nl=None) -> ExpansionProfile:
    """The leading term M g(t) alone, with M as in ``limit_mass``."""
    grid, times = traj.grid, traj.times
    if nl is None or nl.divergence_form:
        M = np.array([integrate(grid, c) for c in traj.states[0]])
    else:
        M = limit_mass(traj, nl)
    g0 = combination(grid, times, {MultiIndex((0,) * grid.dim): np.ones(times.size)})
    values = M.reshape((1, -1) + (1,) * grid.dim) * g0[:, None]
    return ExpansionProfile("Mg", 0, 0.0, grid, times.copy(), values, None, {"M": M})


def power_tail(times, y, horizon=None, scale=None):
    """Estimate int_T^inf y(s) ds from a power law fitted on the last decade.

    Returns (tail, info). A series at rounding level gives a zero tail; a
    non-integrable or sign-changing tail is flagged and contributes nothing.
    """
    times, y = np.asarray(times, dtype=float), np.asarray(y, dtype=float)
    T = float(times[-1]) if horizon is None else float(horizon)
    sel = times >= T / 10.0
    ref = scale if scale is not None else float(np.max(np.abs(y))) if y.size else 0.0
    info = {"exponent": None, "flagged": False, "note": ""}
    if ref == 0.0 or np.max(np.abs(y[sel])) <= ROUNDING_FLOOR * ref:
        info["note"] = "flux at rounding level; tail taken as 0"
        return 0.0, info
    ys = y[sel]
    if not (np.all(ys > 0) or np.all(ys < 0)) or np.sum(sel) < 3:
        info.update(flagged=True, note="tail changes sign or has too few points; not extrapolated")
        return 0.0, info
    slope, icept = np.polyfit(np.log(times[sel]), np.log(np.abs(ys)), 1)
    gamma = -slope
    info["exponent"] = float(gamma)
    if gamma <= 1.0:
        info.update(flagged=True, note=f"fitted decay t^-{gamma:.3f} is not integrable")
        return 0.0, info
    amp = math.copysign(math.exp(icept), ys[-1])
    return float(amp * T ** (1.0 - gamma) / (gamma - 1.0)), info


def _hat_parts(traj, nl, k_cap):
    """M, the F_M flux integral and the c_alpha(t) series for every component.

    The tails int_T^inf of int F and int F_M are extrapolated once each and
    reused: M is the horizon mass plus the F tail (exact initial mass for
    divergence-form laws), and the c_0 tail is their difference, so the
    extrapolation error cancels in the mass of the hat profile.
    """
    grid, times = traj.grid, traj.times
    dim = grid.dim
    zero = MultiIndex((0,) * dim)
    g0 = combination(grid, times, {zero: np.ones(times.size)})
    F = traj.forcing(nl)
    parts = []
    masses = []
    for c in range(traj.system_size):
        u_mu = moment_series(grid, traj.states[:, c], times, k_cap)
        f0 = np.array([integrate(grid, F[k, c]) for k in range(times.size)])
        scale = max(integrate(grid, np.abs(F[k, c])) for k in range(times.size))
        tail_f, info_f = power_tail(times, f0, scale=scale)
        if nl.divergence_form:
            masses.append(integrate(grid, traj.states[0, c]))
        else:
            masses.append(float(u_mu[zero][-1] + tail_f))
        parts.append({"u_mu": u_mu, "f0": f0, "tail_F": info_f | {"tail": tail_f}, "scale": scale})
    M = np.array(masses)
    Mg = M.reshape((1, -1) + (1,) * dim) * g0[:, None]
    F_M = forcing_on(traj, nl, Mg)
    for c, part in enumerate(parts):
        fm_mu = moment_series(grid, F_M[:, c], times, k_cap)
        fm0 = fm_mu[zero]
        scale = max(part["scale"], max(integrate(grid, np.abs(F_M[k, c])) for k in range(times.size)))
        tail_fm, info_fm = power_tail(times, fm0, scale=scale)
        tail_f = part["tail_F"]["tail"]
        running = cumulative_trapezoid(fm0 - part["f0"], times, initial=0.0)
        c_alpha = {zero: (running[-1] - running) + (tail_fm - tail_f)}
        for a in multi_indices(dim, k_cap):
            if a.order >= 1:
                c_alpha[a] = part["u_mu"][a] - cumulative_trapezoid(fm_mu[a], times, initial=0.0)
        part.update({
            "M": float(M[c]),
            "total_FM": float(np.trapezoid(fm0, times)) + tail_fm,
            "tail_FM": info_fm | {"tail": tail_fm},
            "c": c_alpha,
        })
        for key in ("u_mu", "f0", "scale"):
            part.pop(key)
    return parts, F_M


def c_alpha_series(traj, nl, alpha):
    """(times, c_alpha(t)) for the hat profile coefficients."""
    alpha = MultiIndex(alpha)
    if alpha.dim != traj.grid.dim:
        raise DomainError("multi-index dimension does not match the grid")
    parts, _ = _hat_parts(traj, nl, alpha.order)
    return traj.times.copy(), np.stack([p["c"][alpha] for p in parts]) if traj.system_size > 1 else parts[0]["c"][alpha]


def build_hat_u(traj, nl, K) -> ExpansionProfile:
    """[M - int int F_M] g + sum c_alpha(t) g_alpha + int e^{(t-s)Delta} F_M(s) ds."""
    nl.require_supported()
    k_cap = _k_cap(K)
    grid, times = traj.grid, traj.times
    zero = MultiIndex((0,) * grid.dim)
    parts, F_M = _hat_parts(traj, nl, k_cap)
    W = duhamel_accumulate(grid, times, F_M)
    values = np.empty_like(traj.states)
    flagged = False
    for c, part in enumerate(parts):
        coeffs = dict(part["c"])
        coeffs[zero] = coeffs[zero] + (part["M"] - part["total_FM"])
        values[:, c] = combination(grid, times, coeffs) + W[:, c]
        flagged = flagged or part["tail_FM"]["flagged"] or part["tail_F"]["flagged"]
    meta = {"parts": parts, "k_cap": k_cap, "tail_flagged": flagged}
    return ExpansionProfile("hat", 1, K, grid, times.copy(), values, W, meta)


def _gauss_raw_moment(beta, tau):
    # int x^beta G(x, tau) dx for any tau > 0
    out = 1.0
    for b in beta:
        if b % 2:
            return 0.0
        out *= math.prod(range(b - 1, 0, -2)) * (2.0 * tau) ** (b // 2)
    return out


def convection_profile(traj, nl, K) -> ExpansionProfile:
    """Mg + |M|^{p-1} M int_0^t a . grad e^{(t-s)Delta} g(s)^p ds + sum_{|alpha|>=1} c_alpha g_alpha.

    Assembled from closed forms: g(s)^p is a Gaussian of time (1+s)/p with
    mass (4 pi (1+s))^{-N(p-1)/2} p^{-N/2}, so its heat flow and gradient are
    explicit, and so are the moments of F_M that drive c_alpha. Only the
    s-integral is numerical (trapezoid on the trajectory times).
    """
    if nl.name != "convection":
        raise DomainError("the explicit profile applies to the convection-diffusion law only")
    k_cap = _k_cap(K)
    grid, times = traj.grid, traj.times
    N = grid.dim
    p = float(nl.params["p"])
    a = np.asarray(nl.params["a"], dtype=float)
    M = integrate(grid, traj.states[0, 0])
    amp = abs(M) ** (p - 1.0) * M
    mass = (4.0 * np.pi * (1.0 + times)) ** (-N * (p - 1.0) / 2.0) * p ** (-N / 2.0)
    tau0 = (1.0 + times) / p
    x = grid.coords
    r2 = np.sum(x * x, axis=0)
    drift = np.tensordot(a, x, axes=(0, 0))
    flux = np.zeros((times.size,) + grid.shape)
    for k in range(1, times.size):
        s = times[: k + 1]
        w = np.zeros(k + 1)
        d = np.diff(s)
        w[:-1] += d / 2.0
        w[1:] += d / 2.0
        tau = tau0[: k + 1] + times[k] - s
        # a . grad G(x, tau) = -(a . x) / (2 tau) G(x, tau)
        shape = (k + 1,) + (1,) * N
        G = (4.0 * np.pi * tau.reshape(shape)) ** (-N / 2.0) * np.exp(-r2[None] / (4.0 * tau.reshape(shape)))
        terms = (w * mass[: k + 1] / (2.0 * tau)).reshape(shape) * G
        flux[k] = -drift * terms.sum(axis=0)
    flux *= amp
    # closed-form moments of F_M(s) = amp a . grad(g(s)^p)
    fm_mu = {alpha: np.zeros(times.size) for alpha in multi_indices(N, k_cap)}
    for k, s in enumerate(times):
        raw = {}
        for beta in multi_indices(N, k_cap):
            val = 0.0
            for i in range(N):
                if beta[i]:
                    lower = list(beta)
                    lower[i] -= 1
                    val -= a[i] * beta[i] * _gauss_raw_moment(lower, tau0[k])
            raw[beta] = amp * mass[k] * val
        table = coefficients_from_raw(raw, s, k_cap, N)
        for alpha, v in table:
            fm_mu[alpha][k] = v
    u_mu = moment_series(grid, traj.states[:, 0], times, k_cap)
    coeffs = {MultiIndex((0,) * N): np.full(times.size, M)}
    for alpha in multi_indices(N, k_cap):
        if alpha.order >= 1:
            coeffs[alpha] = u_mu[alpha] - cumulative_trapezoid(fm_mu[alpha], times, initial=0.0)
    values = (combination(grid, times, coeffs) + flux)[:, None]
    meta = {"M": M, "c": coeffs, "fm_moments": fm_mu}
    return ExpansionProfile("explicit", 1, K, grid, times.copy(), values, flux[:, None], meta)


def coefficient_drift_check(traj, nl, alpha, window=None, tol=0.1, component=0) -> RateVerdict:
    """Fit the decay of |M_alpha(u(t), t) - M_alpha(u(T), T)| against t^{-(A-1) + |alpha|/2}.

    When A <= 1 + |alpha|/2 the coefficient need not converge; the growth
    envelope of |M_alpha(u(t), t)| itself is checked instead.
    """
    alpha = MultiIndex(alpha)
    T = traj.horizon
    window = window or (DRIFT_WINDOW_START, T / 2.0)
    mu = moment_series(traj.grid, traj.states[:, component], traj.times, alpha.order)[alpha]
    A = nl.A
    label = f"drift alpha={alpha.label()}"
    drift = np.abs(mu - mu[-1])
    if np.isinf(A) or drift.max() <= ROUNDING_FLOOR * max(1.0, float(np.max(np.abs(mu)))):
        return RateVerdict(float("-inf"), math.inf if np.isinf(A) else (A - 1.0) - alpha.order / 2.0,
                           False, tol, tuple(window), True, label, False,
                           "drift identically zero to rounding")
    if A > 1.0 + alpha.order / 2.0:
        return judge((traj.times, drift), (A - 1.0) - alpha.order / 2.0, False, tol, window, label)
    growth = abs(A - 1.0 - alpha.order / 2.0) <= 1e-12
    exponent = 0.0 if growth else (A - 1.0) - alpha.order / 2.0
    return judge((traj.times, np.abs(mu)), exponent, growth, tol, window, label,
                 "growth envelope: coefficient has no limit")


def projection_identity_residual(traj, profile, times=None) -> float:
    """max L1 gap between u - U_n and P_[K](t) u(t) - (correction)(t)."""
    k_cap = _k_cap(profile.K)
    times = profile.times[profile.times > 0] if times is None else times
    worst = 0.0
    for t in times:
        u = traj.field(t)
        z1 = u - profile.field(t).values
        z2 = project_P(u, u.time, k_cap) - profile.correction_field(t).values
        worst = max(worst, lq_norm(z1 - z2, 1))
    return worst


def write_coefficients(path, times, coeffs: dict):
    """CSV with a t column and one column per alpha."""
    keys = list(coeffs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"c_{MultiIndex(a).label()}" for a in keys])
        for k, t in enumerate(times):
            w.writerow([format_number(t)] + [format_number(np.asarray(coeffs[a])[k]) for a in keys])


__all__ = [
    "ExpansionProfile", "mass_profile", "build_U0", "build_Un", "build_tilde_u", "build_hat_u",
    "c_alpha_series", "coefficient_drift_check", "convection_profile", "duhamel_accumulate",
    "projection_identity_residual", "power_tail",
]
