"""Rate-independent lane: weight conventions, the functional value, the
subgradient certificate, energetic residuals, and ordered pairs."""

from dataclasses import replace

import numpy as np
import pytest

from wedflow import (ConfigurationError, RIProblem, RITrajectory, build_grid,
                     energetic_residuals, minimize_wed_ri,
                     ordered_ri_minimizers, ri_continuation, sign_condition,
                     wed_ri_value)
from wedflow.rateind import _ri_weights, psi_value, ri_energy

from conftest import line_grid, point_grid


def ramp_problem(steps, eps=0.2):
    # single node pulled by a piecewise-linear load; quadratic potential
    t = np.linspace(0.0, 1.0, steps + 1)
    h = np.interp(t, [0.0, 0.5, 0.75, 1.0], [0.0, 1.5, 0.5, 0.5])
    return RIProblem(grid=point_grid(), phi_coeffs=(0.0, 0.0, 0.5), a=0.0,
                     forcing=h[:, None], T=1.0, epsilon=eps,
                     initial=np.zeros(1))


def coupled_problem(n=3, steps=5, eps=0.3, a=0.7):
    g = line_grid(n)
    rng = np.random.default_rng(5)
    forcing = rng.standard_normal((steps + 1, n))
    return RIProblem(grid=g, phi_coeffs=(0.0, 0.1, 0.5, 0.0, 0.25), a=a,
                     forcing=forcing, T=1.0, epsilon=eps,
                     initial=rng.standard_normal(n))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def test_step_weights_telescope():
    eps, T, N = 0.07, 1.0, 9
    jw, pw, tw = _ri_weights(eps, T, N)
    # consuming one interval of weight lands exactly on the next jump
    assert np.allclose(jw[:-1] - pw[:-1], jw[1:], rtol=1e-13)
    assert np.isclose(jw[-1] - pw[-1], eps * tw, rtol=1e-13)
    # pw is the exact integral of the weight over each interval
    t = np.linspace(0.0, T, N + 1)
    exact = eps * (np.exp(-t[:-1] / eps) - np.exp(-t[1:] / eps))
    assert np.allclose(pw, exact, rtol=1e-13)


def test_step_weights_right_knot_convention():
    eps, T, N = 0.1, 1.0, 4
    jw, pw, tw = _ri_weights(eps, T, N, convention="right_knot")
    t = np.linspace(0.0, T, N + 1)
    assert np.allclose(jw, eps * np.exp(-t[1:] / eps), rtol=1e-14)
    assert np.allclose(pw, np.exp(-t[1:] / eps) * (T / N), rtol=1e-14)
    assert tw == pytest.approx(np.exp(-T / eps))
    with pytest.raises(ConfigurationError):
        _ri_weights(eps, T, N, convention="midpoint")


# ---------------------------------------------------------------------------
# problem validation
# ---------------------------------------------------------------------------

def test_problem_rejects_concave_potential():
    t = np.zeros((3, 1))
    with pytest.raises(ConfigurationError):
        RIProblem(grid=point_grid(), phi_coeffs=(0.0, 0.0, -1.0), a=0.0,
                  forcing=t, T=1.0, epsilon=0.2, initial=np.zeros(1))


def test_problem_validation():
    g = point_grid()
    ok = dict(grid=g, phi_coeffs=(0.0, 0.0, 0.5), a=0.0,
              forcing=np.zeros((3, 1)), T=1.0, epsilon=0.2,
              initial=np.zeros(1))
    RIProblem(**ok)
    with pytest.raises(ConfigurationError):
        RIProblem(**{**ok, "forcing": np.zeros(3)})
    with pytest.raises(ConfigurationError):
        RIProblem(**{**ok, "forcing": np.zeros((1, 1))})
    with pytest.raises(ConfigurationError):
        RIProblem(**{**ok, "a": -0.1})
    with pytest.raises(ConfigurationError):
        RIProblem(**{**ok, "epsilon": 1.5})
    with pytest.raises(ConfigurationError):
        RIProblem(**{**ok, "initial": np.zeros(2)})
    with pytest.raises(ConfigurationError):
        RIProblem(**{**ok, "T": 0.0})


def test_trajectory_container():
    g = point_grid()
    vals = np.array([[0.0], [0.4], [0.4], [1.0]])
    traj = RITrajectory(g, 1.0, vals, pinned_initial=np.zeros(1))
    jm = traj.jump_magnitudes()
    assert jm[0] == 0.0
    assert np.allclose(jm, [0.0, 0.4, 0.0, 0.6])
    assert traj.variation() == pytest.approx(1.0)
    csv = traj.to_csv()
    assert csv.splitlines()[0] == "t,node_index,value,jump_magnitude"
    assert len(csv.splitlines()) == 1 + 4
    with pytest.raises(ConfigurationError):
        RITrajectory(g, 1.0, vals, pinned_initial=np.full(1, 0.1))


# ---------------------------------------------------------------------------
# functional value
# ---------------------------------------------------------------------------

def direct_ri_value(problem, traj):
    # hand-rolled: quartic node potential, explicit edge coupling, loads
    eps, T, N = problem.epsilon, problem.T, traj.steps
    t = np.linspace(0.0, T, N + 1)
    beta = np.exp(-t / eps)
    hd = problem.grid.cell_measure
    h = problem.grid.spacing[0]

    def phi(u, n):
        c = problem.phi_coeffs
        val = sum(ci * float(np.sum(u ** k)) for k, ci in enumerate(c)) * hd
        val += 0.5 * problem.a * float(np.sum(np.diff(u) ** 2)) * hd / h ** 2
        return val - hd * float(problem.forcing[n] @ u)

    U = traj.values
    value = beta[-1] * phi(U[N], N)
    for n in range(1, N + 1):
        jump = hd * float(np.sum(np.abs(U[n] - U[n - 1])))
        value += eps * beta[n - 1] * jump
        value += eps * (beta[n - 1] - beta[n]) * phi(U[n], n)
    return value


def test_ri_value_matches_direct_sum():
    problem = coupled_problem()
    rng = np.random.default_rng(1)
    vals = np.cumsum(rng.standard_normal((problem.steps + 1, 3)) * 0.5,
                     axis=0)
    vals[0] = problem.initial
    traj = RITrajectory(problem.grid, problem.T, vals,
                        pinned_initial=problem.initial)
    lib = wed_ri_value(problem, traj)
    ref = direct_ri_value(problem, traj)
    assert abs(lib - ref) <= 1e-12 * (1.0 + abs(ref))


def test_ri_value_uncoupled_case():
    problem = replace(coupled_problem(), a=0.0)
    rng = np.random.default_rng(2)
    vals = np.cumsum(rng.standard_normal((problem.steps + 1, 3)) * 0.5,
                     axis=0)
    vals[0] = problem.initial
    traj = RITrajectory(problem.grid, problem.T, vals,
                        pinned_initial=problem.initial)
    assert abs(wed_ri_value(problem, traj) - direct_ri_value(problem, traj)) \
        <= 1e-12


def test_ri_value_checks_knot_count():
    problem = coupled_problem(steps=5)
    vals = np.tile(problem.initial, (4, 1))
    traj = RITrajectory(problem.grid, problem.T, vals,
                        pinned_initial=problem.initial)
    with pytest.raises(ConfigurationError):
        wed_ri_value(problem, traj)


def test_psi_value_scales_with_cell_measure():
    g = line_grid(4, spacing=0.5)
    assert psi_value(g, np.array([1.0, -2.0, 0.0, 3.0])) \
        == pytest.approx(6.0 * 0.5)


def test_ri_energy_is_polyval_plus_coupling():
    problem = coupled_problem()
    u = np.array([0.3, -0.2, 0.5])
    got = ri_energy(problem, u, 2)
    c = problem.phi_coeffs
    hd = problem.grid.cell_measure
    h = problem.grid.spacing[0]
    want = sum(ci * float(np.sum(u ** k)) for k, ci in enumerate(c)) * hd \
        + 0.5 * problem.a * float(np.sum(np.diff(u) ** 2)) * hd / h ** 2 \
        - hd * float(problem.forcing[2] @ u)
    assert got == pytest.approx(want, rel=1e-13)


# ---------------------------------------------------------------------------
# minimization and certificates
# ---------------------------------------------------------------------------

def test_minimizer_never_leaves_load_corridor():
    problem = ramp_problem(60, eps=0.05)
    traj, report = minimize_wed_ri(problem)
    assert report.converged
    # the node either rests or trails the load at distance one
    h = problem.forcing[:, 0]
    assert np.all(traj.values[:, 0] <= np.maximum.accumulate(h) + 1e-6)
    assert np.all(np.diff(traj.values[:, 0]) >= -0.35)


def test_sign_condition_certificate_small():
    problem = ramp_problem(60, eps=0.05)
    traj, _ = minimize_wed_ri(problem)
    cert = sign_condition(problem, traj)
    assert set(cert) == {"worst_violation", "rest_excess",
                         "complementarity", "sigma"}
    assert cert["sigma"].shape == (60, 1)
    assert cert["worst_violation"] <= 1e-6  # measured 3.0e-7
    assert cert["rest_excess"] <= 1e-6


def test_sign_condition_flags_wrong_trajectory():
    problem = ramp_problem(40, eps=0.05)
    # lagging the load by 1.4 instead of 1.0 breaks the certificate
    h = problem.forcing[:, 0]
    vals = np.maximum.accumulate(np.maximum(h - 1.4, 0.0))[:, None]
    traj = RITrajectory(problem.grid, problem.T, vals,
                        pinned_initial=np.zeros(1))
    cert = sign_condition(problem, traj)
    assert cert["worst_violation"] > 1e-2


def test_reduced_resolution_tracks_incremental_oracle():
    from wedflow.runner import incremental_oracle, ri_eps_schedule
    steps = 80
    problem = ramp_problem(steps)
    schedule = ri_eps_schedule(steps)
    assert schedule == [0.2, 0.1, 0.05, 0.025]
    family = ri_continuation(problem, schedule)
    eps_last, traj, report = family[-1]
    assert report.converged
    err = float(np.max(np.abs(traj.values[:, 0]
                              - incremental_oracle(problem))))
    assert err <= 8e-2  # measured 0.0615 at this resolution
    cert = sign_condition(replace(problem, epsilon=eps_last), traj)
    assert cert["worst_violation"] <= 1e-6


def test_ri_continuation_requires_decreasing_schedule():
    problem = ramp_problem(20)
    with pytest.raises(ConfigurationError):
        ri_continuation(problem, [0.1, 0.2])


# ---------------------------------------------------------------------------
# energetic residuals
# ---------------------------------------------------------------------------

def test_energetic_residuals_shrink_with_eps():
    steps = 100
    problem = ramp_problem(steps)
    family = ri_continuation(problem, [0.1, 0.05, 0.025])
    balances = []
    stabilities = []
    for _, traj, _ in family:
        rep = energetic_residuals(traj, problem, probe_count=10)
        balances.append(rep.balance)
        stabilities.append(rep.stability)
        assert rep.per_knot_balance.shape == (steps + 1,)
        assert rep.probes == 20
    # halving the weight cuts both residuals well below 3/4
    assert balances[1] <= 0.75 * balances[0]  # measured ratio 0.56
    assert balances[2] <= 0.75 * balances[1]  # measured ratio 0.42
    assert stabilities[2] <= 0.5 * stabilities[0]


def test_energetic_report_json():
    import json
    problem = ramp_problem(30, eps=0.05)
    traj, _ = minimize_wed_ri(problem)
    rep = energetic_residuals(traj, problem, probe_count=5)
    payload = json.loads(rep.to_json())
    assert payload["probes"] == 10
    float(payload["stability"])
    float(payload["balance"])
    float(payload["stability_left"])


def test_stationary_forcing_balances_exactly():
    # constant load, adapted start: nothing moves and no work is done.
    # The load must clear the terminal-weight threshold too, which is
    # stricter than the interior unit threshold at moderate eps; 0.25
    # rests everywhere at eps = 0.2, while 0.4 would drag the last knot.
    g = point_grid()
    forcing = np.full((9, 1), 0.25)
    problem = RIProblem(grid=g, phi_coeffs=(0.0, 0.0, 0.5), a=0.0,
                        forcing=forcing, T=1.0, epsilon=0.2,
                        initial=np.zeros(1))
    traj, report = minimize_wed_ri(problem)
    assert report.converged
    # resting up to the smoothing creep of the variation term
    assert np.max(np.abs(traj.values)) <= 1e-4
    rep = energetic_residuals(traj, problem, probe_count=8)
    assert rep.balance <= 1e-4


# ---------------------------------------------------------------------------
# ordered pairs
# ---------------------------------------------------------------------------

def test_ordered_ri_minimizers_ramp():
    problem = ramp_problem(60)
    pair = ordered_ri_minimizers(problem, np.zeros(1), np.full(1, 0.5),
                                 schedule=(0.2, 0.1))
    assert pair.ordering_margin >= -1e-10
    assert len(pair.audits) == 2
    for audit in pair.audits:
        assert audit["meet_excess"] <= 1e-9 * (1 + abs(audit["value_u"]))
        assert audit["join_excess"] <= 1e-9 * (1 + abs(audit["value_v"]))
    assert np.array_equal(pair.u.values[0], [0.0])
    assert np.array_equal(pair.v.values[0], [0.5])


def test_ordered_ri_minimizers_rejects_unordered():
    problem = ramp_problem(20)
    with pytest.raises(ConfigurationError):
        ordered_ri_minimizers(problem, np.full(1, 0.5), np.zeros(1))
