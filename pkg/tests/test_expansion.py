import numpy as np
import pytest

from parabolic_asymptotics import (
    DomainError, Grid, MultiIndex, SolveConfig, build_hat_u, build_tilde_u, build_U0, build_Un,
    c_alpha_series, coefficient_drift_check, convection_profile, gauss_field, make_keller_segel,
    make_semilinear, make_zero, mass_profile, solve,
)
from parabolic_asymptotics.expansion import (
    MAX_EXPANSION_ORDER, frozen_coefficients, power_tail, projection_identity_residual,
    write_coefficients,
)
from parabolic_asymptotics.field import integrate, lq_norm, moment_of_field
from parabolic_asymptotics.kernel import multi_indices
from parabolic_asymptotics.moments import moment_coefficients, project_P
from parabolic_asymptotics.rates import fit_slope, measure_error_series


def nearest(traj, t):
    return float(traj.times[np.argmin(np.abs(traj.times - t))])


@pytest.fixture(scope="module")
def heat_run(grid1):
    phi = gauss_field(grid1, 1.0, shift=[1.0]) + gauss_field(grid1, 0.5, mass=-0.2, shift=[-1.0])
    return make_zero(), solve(make_zero(), phi, SolveConfig(horizon=50.0))


@pytest.fixture(scope="module")
def shifted_ks_run(grid1):
    nl = make_keller_segel(1)
    traj = solve(nl, gauss_field(grid1, 1.0, mass=0.05, shift=[1.0]), SolveConfig(horizon=100.0, dt_max=0.25))
    return nl, traj


@pytest.fixture(scope="module")
def convection_profiles(convection_run):
    nl, traj = convection_run
    return {
        "U0": build_Un(traj, nl, 2.0, 0), "U1": build_Un(traj, nl, 2.0, 1),
        "tilde": build_tilde_u(traj, nl, 2.0, 0), "hat": build_hat_u(traj, nl, 2.0),
        "explicit": convection_profile(traj, nl, 2.0),
    }


# -- U_0 ------------------------------------------------------------------------------------------

@pytest.mark.parametrize("t", [1.0, 10.0])
def test_U0_identities(convection_run, t):
    _, traj = convection_run
    t = nearest(traj, t)
    u = traj.field(t)
    U0 = build_U0(traj, 2.0, t)
    assert np.max(np.abs((u - U0).values - project_P(u, t, 2).values)) <= 1e-15
    assert integrate(traj.grid, U0.values) == pytest.approx(integrate(traj.grid, u.values), abs=1e-10)


def test_U0_heat_flow_gaussian(grid1):
    traj = solve(make_zero(), gauss_field(grid1, 1.0, mass=0.7), SolveConfig(horizon=10.0))
    U0 = build_U0(traj, 3.0, 10.0)
    assert np.max(np.abs(U0.values - gauss_field(grid1, 11.0, mass=0.7).values)) <= 1e-10
    with pytest.raises(DomainError):
        build_U0(traj, 3.0, 3.14159)


def test_U0_two_dimensions():
    grid = Grid.default(2)
    phi = gauss_field(grid, 1.0, shift=[1.0, -0.5])
    traj = solve(make_zero(), phi, SolveConfig(horizon=2.0, dt_max=0.5))
    U0 = build_U0(traj, 2.0, 2.0)
    u = traj.field(2.0)
    for alpha in multi_indices(2, 2):
        assert moment_of_field(U0, alpha) == pytest.approx(moment_of_field(u, alpha), abs=1e-9)


# -- U_n ------------------------------------------------------------------------------------------

def test_Un_zero_law(heat_run):
    nl, traj = heat_run
    base = build_Un(traj, nl, 2.0, 0).values
    for n in (1, 2):
        assert np.max(np.abs(build_Un(traj, nl, 2.0, n).values - base)) == 0.0


def test_Un_order_guards(convection_run):
    nl, traj = convection_run
    with pytest.raises(DomainError):
        build_Un(traj, nl, 2.0, MAX_EXPANSION_ORDER + 1)
    with pytest.raises(DomainError):
        build_Un(traj, nl, 2.0, -1)
    weak = make_semilinear(1.0, 2.5)
    build_Un(traj, weak, 2.0, 0)
    with pytest.raises(DomainError):
        build_Un(traj, weak, 2.0, 1)


def test_correction_integrand_moments_vanish(convection_profiles):
    prof = convection_profiles["U1"]
    H = prof.meta["integrand"][:, 0]
    grid = prof.grid
    worst = 0.0
    for k in range(0, len(prof.times), 5):
        for alpha in multi_indices(1, 2):
            worst = max(worst, abs(integrate(grid, alpha.power(grid.coords) * H[k])))
    assert worst <= 1e-7


def test_U1_beats_U0(convection_run, convection_profiles):
    _, traj = convection_run
    t = nearest(traj, 100.0)
    u = traj.field(t)
    e0 = lq_norm(u - convection_profiles["U0"].field(t), 1)
    e1 = lq_norm(u - convection_profiles["U1"].field(t), 1)
    assert e1 < e0


def test_projection_identity(convection_run, convection_profiles):
    _, traj = convection_run
    for name in ("U0", "U1"):
        assert projection_identity_residual(traj, convection_profiles[name]) <= 1e-7


@pytest.mark.parametrize("run", ["convection_run", "semilinear_run"])
def test_monotone_refinement(run, request):
    nl, traj = request.getfixturevalue(run)
    slopes = []
    for n in (0, 1):
        series = measure_error_series(traj, build_Un(traj, nl, 2.0, n), q=1)
        slopes.append(fit_slope(series, (20, 100)))
    assert slopes[1] < slopes[0]


def test_profile_norms_bounded(convection_profiles):
    for prof in convection_profiles.values():
        sup = prof.sup_scaled_norm()
        assert np.isfinite(sup) and sup <= 0.1 * (4 * np.pi) ** -0.5 * 1.5


# -- tilde --------------------------------------------------------------------------------------------

def test_tilde_zero_law(heat_run):
    nl, traj = heat_run
    U0 = build_Un(traj, nl, 2.0, 0).values
    assert np.max(np.abs(build_tilde_u(traj, nl, 2.0, 0).values - U0)) == 0.0


def test_tilde_matches_explicit_profile(convection_profiles):
    tilde, explicit = convection_profiles["tilde"], convection_profiles["explicit"]
    sel = tilde.times >= 1.0
    assert np.max(np.abs(tilde.values[sel] - explicit.values[sel])) <= 1e-10


def test_frozen_coefficients(semilinear_run, convection_run):
    nl, traj = semilinear_run
    coeffs, J_A = frozen_coefficients(traj, nl, 2.0, 0)
    assert J_A == 0.0 and list(coeffs) == [MultiIndex((0,))]
    # J_A = min{J, 2(A - 1)} = 1 for A = 3/2; the boundary order |alpha| = 1 is excluded
    for J in (1, 2):
        coeffs, J_A = frozen_coefficients(traj, nl, 2.0, J)
        assert J_A == 1.0 and list(coeffs) == [MultiIndex((0,))]
    with pytest.raises(DomainError):
        frozen_coefficients(traj, nl, 2.0, 3)
    cnl, ctraj = convection_run
    coeffs, _ = frozen_coefficients(ctraj, cnl, 2.0, 0)
    assert coeffs[MultiIndex((0,))][0] == pytest.approx(0.1, abs=1e-15)


def test_limit_mass_close_to_horizon_mass(semilinear_run):
    nl, traj = semilinear_run
    M = frozen_coefficients(traj, nl, 2.0, 0)[0][MultiIndex((0,))][0]
    horizon = integrate(traj.grid, traj.states[-1, 0])
    # the source adds mass; the extrapolated tail is positive and small
    assert 0 < M - horizon < 1e-3 * horizon


# -- hat ------------------------------------------------------------------------------------------------

def test_hat_zero_law(heat_run):
    nl, traj = heat_run
    U0 = build_Un(traj, nl, 2.0, 0).values
    assert np.max(np.abs(build_hat_u(traj, nl, 2.0).values - U0)) <= 1e-15


def test_hat_matches_explicit_profile(convection_profiles):
    hat, explicit = convection_profiles["hat"], convection_profiles["explicit"]
    assert not hat.meta["tail_flagged"]
    assert np.max(np.abs(hat.values - explicit.values)) <= 1e-6


def test_hat_mass_matches_solution(semilinear_run):
    nl, traj = semilinear_run
    hat = build_hat_u(traj, nl, 2.0)
    for t in (10.0, 50.0):
        t = nearest(traj, t)
        assert integrate(traj.grid, hat.field(t).values) == pytest.approx(
            integrate(traj.grid, traj.field(t).values), abs=1e-10)


def test_explicit_profile_refuses_other_laws(semilinear_run):
    nl, traj = semilinear_run
    with pytest.raises(DomainError):
        convection_profile(traj, nl, 2.0)


# -- c_alpha ---------------------------------------------------------------------------------------------

def test_c0_vanishes_for_divergence_laws(convection_run, keller_segel_run, shifted_ks_run):
    for nl, traj in (convection_run, keller_segel_run, shifted_ks_run):
        _, c0 = c_alpha_series(traj, nl, (0,))
        assert np.max(np.abs(c0)) <= 1e-9


def test_c1_bounded_keller_segel(shifted_ks_run):
    nl, traj = shifted_ks_run
    t, c1 = c_alpha_series(traj, nl, (1,))
    late = t >= 10
    # the first moment settles to a constant: no log growth
    assert abs(fit_slope((t[late], np.abs(c1[late])), (10, 100))) <= 0.01
    assert np.max(np.abs(c1)) <= 2 * abs(c1[-1])
    assert c1[-1] == pytest.approx(0.0498, abs=5e-4)


def test_c_alpha_heat_flow_constant(heat_run):
    nl, traj = heat_run
    phi = traj.field(0.0)
    for alpha in [(1,), (2,)]:
        _, c = c_alpha_series(traj, nl, alpha)
        expected = moment_coefficients(phi, 0.0, 2)[alpha]
        assert np.max(np.abs(c - expected)) <= 1e-9
    with pytest.raises(DomainError):
        c_alpha_series(traj, nl, (1, 0))


# -- drift ----------------------------------------------------------------------------------------------------

def test_drift_zero_law(heat_run):
    nl, traj = heat_run
    v = coefficient_drift_check(traj, nl, (1,))
    assert v.passed and "zero" in v.note


def test_drift_convection(convection_run):
    nl, traj = convection_run
    mass = coefficient_drift_check(traj, nl, (0,))
    assert mass.passed and "zero" in mass.note  # mass is conserved exactly
    growth = coefficient_drift_check(traj, nl, (1,))
    assert growth.passed and growth.log_correction
    second = coefficient_drift_check(traj, nl, (2,))
    assert second.passed and second.predicted_exponent == -0.5


def test_drift_semilinear(semilinear_run):
    nl, traj = semilinear_run
    v = coefficient_drift_check(traj, nl, (0,))
    assert v.passed and v.predicted_exponent == 0.5
    assert v.fitted_slope <= -(nl.A - 1) + 0.1
    assert v.fitted_slope == pytest.approx(-0.886, abs=0.02)


# -- power-law tails ------------------------------------------------------------------------------------

def test_power_tail_exact():
    t = np.geomspace(1, 200, 80)
    tail, info = power_tail(t, 3 * t**-2.0)
    assert tail == pytest.approx(3 / 200, rel=1e-10)
    assert info["exponent"] == pytest.approx(2.0, abs=1e-10) and not info["flagged"]
    tail, _ = power_tail(t, -0.5 * t**-1.5)
    assert tail == pytest.approx(-0.5 * 200**-0.5 / 0.5, rel=1e-10)


def test_power_tail_flags():
    t = np.geomspace(1, 200, 80)
    assert power_tail(t, np.zeros_like(t))[0] == 0.0
    assert power_tail(t, 1e-20 * t**-2, scale=1.0)[1]["note"].startswith("flux at rounding")
    tail, info = power_tail(t, t**-0.8)
    assert tail == 0.0 and info["flagged"]
    tail, info = power_tail(t, np.cos(t) * t**-2)
    assert tail == 0.0 and info["flagged"]


def test_write_coefficients(tmp_path):
    t = np.array([0.0, 1.0])
    write_coefficients(tmp_path / "c.csv", t, {(0,): [1.0, 2.0], (1,): [0.5, 0.25]})
    assert (tmp_path / "c.csv").read_text().splitlines() == ["t,c_0,c_1", "0,1,0.5", "1,2,0.25"]


def test_mass_profile(convection_run):
    nl, traj = convection_run
    prof = mass_profile(traj, nl)
    assert prof.meta["M"][0] == pytest.approx(0.1, abs=1e-15)
    assert np.max(np.abs(prof.field(10.0 if 10.0 in traj.times else nearest(traj, 10.0)).values)) > 0
