import numpy as np
import pytest

from parabolic_asymptotics import (
    ConvergenceError, DomainError, GuardError, Grid, SolveConfig, duhamel_residual, gauss_field,
    heat_apply, load_trajectory, make_convection, make_keller_segel, make_semilinear, make_zero,
    mass_and_moment_audit, save_trajectory, solve,
)
from parabolic_asymptotics.dynamics import build
from parabolic_asymptotics.field import heat_spectrum, integrate, lq_norm
from parabolic_asymptotics.rates import fit_slope
from parabolic_asymptotics.solver import picard_step, time_grid


def l1(grid, a):
    return integrate(grid, np.abs(a))


# -- time grid and config --------------------------------------------------------------------

def test_time_grid_shape():
    t = time_grid(SolveConfig())
    assert t[0] == 0.0 and t[-1] == 200.0 and np.all(np.diff(t) > 0)
    ramp = t[t <= 1.0 + 1e-12]
    assert np.allclose(np.diff(ramp), 0.02)
    start = len(ramp) - 1
    steps, left = np.diff(t)[start:-1], t[start:-2]
    # geometric growth by 1.05, capped at dt_max = 2 (the last step may absorb a sliver)
    assert np.all(steps <= np.minimum(0.05 * left, 2.0) + 1e-12)
    assert np.diff(t)[-1] <= 1.25 * 2.0


def test_refined_grid_contains_coarse_nodes():
    cfg = SolveConfig(horizon=50.0)
    coarse, fine = time_grid(cfg), time_grid(cfg.refined())
    assert fine.size == 2 * (coarse.size - 1) + 1
    assert np.array_equal(fine[::2], coarse)


@pytest.mark.parametrize("kw", [{"horizon": 0.0}, {"picard_tol": 0.0}, {"refine": 0},
                                {"duhamel_rule": "simpson"}])
def test_config_rejects(kw):
    with pytest.raises(DomainError):
        SolveConfig(**kw)


# -- solve ------------------------------------------------------------------------------------

def test_zero_law_is_heat_flow(grid1):
    phi = gauss_field(grid1, 1.0, shift=[1.0]) - gauss_field(grid1, 0.5, mass=0.3)
    traj = solve(make_zero(), phi, SolveConfig(horizon=50.0))
    for k in range(0, traj.times.size, 7):
        exact = heat_apply(phi, traj.times[k])
        assert lq_norm(traj.field(traj.times[k]) - exact, 2) <= 1e-9


def test_trajectory_invariants(convection_run):
    _, traj = convection_run
    assert traj.times[0] == 0.0 and traj.horizon == 200.0
    assert np.all(np.diff(traj.times) > 0)
    assert max(traj.grid.boundary_max(s) for s in traj.states) <= 1e-9
    with pytest.raises(DomainError):
        traj.index(0.123456)


def test_convection_mass(convection_run):
    _, traj = convection_run
    masses = np.array([integrate(traj.grid, s[0]) for s in traj.states])
    assert np.max(np.abs(masses - 0.1)) <= 1e-8


def test_semilinear_sup_decay(semilinear_run):
    _, traj = semilinear_run
    t = traj.times
    sup = np.abs(traj.states[:, 0]).reshape(t.size, -1).max(axis=1)
    assert np.max(np.sqrt(t) * sup) < 1.0
    assert abs(fit_slope((t, sup), (10, 100)) + 0.5) <= 0.05


def test_limit_profile_tail_decreasing(convection_run):
    _, traj = convection_run
    grid = traj.grid
    errs = [l1(grid, traj.states[k, 0] - gauss_field(grid, 1 + t, mass=0.1).values)
            for k, t in enumerate(traj.times) if t >= 10]
    assert np.all(np.diff(errs) < 0)


def test_duhamel_consistency(convection_run, semilinear_run, keller_segel_run):
    for _, traj in (convection_run, semilinear_run, keller_segel_run):
        assert duhamel_residual(traj) <= 5e-4


@pytest.mark.parametrize("law,mass,dt_max", [("convection", 0.1, 2.0), ("semilinear", 0.5, 2.0),
                                             ("keller-segel", 0.05, 0.25)])
def test_step_halving_convergence(law, mass, dt_max):
    grid = Grid.default(1)
    nl = build(law, 1, p=3.0 if law == "convection" else 4.0)
    finals = [solve(nl, gauss_field(grid, 1.0, mass=mass),
                    SolveConfig(horizon=20.0, dt_max=dt_max, refine=r)).states[-1, 0] for r in (1, 2, 4)]
    d1, d2 = l1(grid, finals[0] - finals[1]), l1(grid, finals[1] - finals[2])
    assert d1 / d2 >= 3.0


def test_system_solve():
    grid = Grid.default(1)
    nl = build("system", 1, a=4.0)
    phi = [gauss_field(grid, 1.0, mass=0.5), gauss_field(grid, 1.0, mass=0.3, shift=[1.0])]
    traj = solve(nl, phi, SolveConfig(horizon=20.0))
    assert traj.system_size == 2
    assert duhamel_residual(traj) <= 5e-4
    # both sources are positive, so both masses grow
    masses = [integrate(grid, traj.states[-1, c]) for c in (0, 1)]
    assert masses[0] > 0.5 and masses[1] > 0.3


def test_solve_guards():
    small = Grid(1, 10.0, 64)
    with pytest.raises(GuardError):
        solve(make_zero(), gauss_field(small, 1.0), SolveConfig(horizon=50.0))
    with pytest.raises(GuardError):
        solve(make_zero(), gauss_field(small, 30.0), SolveConfig(horizon=1.0))
    with pytest.raises(DomainError):
        solve(build("system", 1, a=4.0), gauss_field(small, 1.0), SolveConfig(horizon=1.0))
    with pytest.raises(ConvergenceError):
        solve(make_semilinear(1.0, 4.0), gauss_field(Grid.default(1), 1.0, mass=0.5),
              SolveConfig(horizon=5.0, picard_max_iters=1))


# -- Picard sweeps ---------------------------------------------------------------------------------

def _base(nl, grid, u, d, aux=None):
    F = nl.evaluate(grid, 0.0, u, aux)
    spec = heat_spectrum(grid, d) * np.fft.rfftn(u + 0.5 * d * F, axes=(-1,))
    return np.fft.irfftn(spec, s=grid.shape, axes=(-1,))


def test_picard_zero_law(grid1):
    u = gauss_field(grid1, 1.0).values[None]
    base = _base(make_zero(), grid1, u, 0.1)
    assert np.array_equal(picard_step(make_zero(), u, (0.0, 0.1), base, grid=grid1), base)
    fields = picard_step(make_zero(), gauss_field(grid1, 1.0), (0.0, 0.1), gauss_field(grid1, 1.1))
    assert np.array_equal(fields.values, gauss_field(grid1, 1.1).values)


@pytest.mark.parametrize("d", [0.02, 0.1])
def test_picard_contraction(grid1, d):
    nl = make_convection([1.0], 3.0)
    u = gauss_field(grid1, 1.0, mass=0.1).values[None]
    base = _base(nl, grid1, u, d)
    it, dists = u, []
    for _ in range(4):
        nxt = picard_step(nl, it, (0.0, d), base, grid=grid1)
        dists.append(l1(grid1, nxt - it))
        it = nxt
    assert all(a / b >= 2 for a, b in zip(dists, dists[1:]))


def test_fixed_point_satisfies_segment_identity(convection_run):
    nl, traj = convection_run
    grid, cfg = traj.grid, traj.config
    for k in (3, 60, traj.times.size - 2):
        d = traj.times[k + 1] - traj.times[k]
        base = _base(nl, grid, traj.states[k], d)
        u1 = traj.states[k + 1]
        again = picard_step(nl, u1, (traj.times[k], traj.times[k + 1]), base, grid=grid)
        assert l1(grid, again - u1) <= 10 * cfg.picard_tol * l1(grid, u1)


# -- audit ------------------------------------------------------------------------------------------

def test_audit_heat_flow(grid1):
    phi = gauss_field(grid1, 1.0, shift=[1.0])
    traj = solve(make_zero(), phi, SolveConfig(horizon=100.0))
    report = mass_and_moment_audit(traj, 2)
    for e in report["entries"]:
        assert e["max_abs"] <= 1e-7
    assert report["max_relative"] <= 1e-7


def test_audit_divergence_mass(convection_run, keller_segel_run):
    for nl, traj in (convection_run, keller_segel_run):
        report = mass_and_moment_audit(traj, 2, nl)
        mass = [e for e in report["entries"] if e["alpha"].order == 0][0]
        assert mass["max_abs"] <= 1e-8
        assert report["max_relative"] <= 1e-3


@pytest.fixture(scope="module")
def semilinear_pair(semilinear_run):
    nl, traj = semilinear_run
    return nl, traj, solve(nl, gauss_field(traj.grid, 1.0, mass=0.5), traj.config.refined())


def test_audit_semilinear_trapezoid(semilinear_pair):
    """The trapezoid audit mirrors the stepping quadrature, so it sits at the Picard floor."""
    nl, coarse, fine = semilinear_pair
    for traj in (coarse, fine):
        assert mass_and_moment_audit(traj, 2, nl)["max_relative"] <= 1e-6


def test_audit_semilinear_spline_under_halving(semilinear_pair):
    nl, coarse, fine = semilinear_pair
    coarse_rel = mass_and_moment_audit(coarse, 2, nl, "spline")["max_relative"]
    fine_rel = mass_and_moment_audit(fine, 2, nl, "spline")["max_relative"]
    assert coarse_rel <= 1e-3 and fine_rel <= 1e-3
    assert coarse_rel / fine_rel >= 2


def test_audit_rejects_unknown_rule(convection_run):
    nl, traj = convection_run
    with pytest.raises(DomainError):
        mass_and_moment_audit(traj, 1, nl, "simpson")


# -- persistence ------------------------------------------------------------------------------------

def test_trajectory_round_trip(tmp_path, keller_segel_run):
    nl, traj = keller_segel_run
    save_trajectory(traj, tmp_path / "traj")
    back = load_trajectory(tmp_path / "traj")
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.aux, traj.aux)
    assert back.grid == traj.grid and back.config == traj.config
    assert back.nonlinearity == traj.nonlinearity
