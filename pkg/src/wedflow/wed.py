"""Trajectory functional for gradient-flow type evolutions: assembly,
minimization over pinned trajectories, the fixed-point loop closing the
nonpotential terms, continuation in the weight parameter, and residual
diagnostics against the limiting evolution system.

Discretization. Time derivative: backward difference. Writing
beta_n = e^{-t_n/eps} and q = e^{-dt/eps}, slice n of the functional value

    a_n * sum_i A(rate_n) h^d  +  b_n * [phi1(u_n) - h^d <w_n, u_n>]

uses b_n = beta_n dt for the potential terms and, for the dissipation,
a_n = eps * W_n / dt with W_n the EXACT integral of the weight over
(t_{n-1}, t_n], i.e. a_n = c0 * eps * beta_n * dt, c0 = eps(e^{dt/eps}-1)/dt.
A common factor across both terms cancels from stationarity, so the ratio
c0 is the entire scheme: with c0 = 1 (pure knot weight everywhere) the
discrete minimizer carries a first-order defect O(dt/eps)(w - dphi1) that a
sup-norm comparison with the limiting evolution can see; the exact-integral
ratio removes it (effective rate factor [sinh(x)/x]^2, x = dt/2eps).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize as scipy_minimize

from ._newton import newton_solve
from .energies import (DissipationSpec, EnergySpec, GrowthCertificate,
                       ReactionSpec, A_eval, alpha_eval, alpha_prime,
                       energy1_hessian, energy1_value_grad,
                       energy2_value_grad, p_conjugate, reaction_eval)
from .grids import ConfigurationError, Grid, Trajectory


@dataclass(frozen=True, eq=False)
class WedProblem:
    """Everything defining one evolution: rate potential, convex energy,
    concave perturbation + forcing, reaction, horizon, weight, initial state.

    initial is the flat dof vector (length n_nodes, or 2*n_nodes for the
    two-species reaction kind).
    """

    grid: Grid
    dissipation: DissipationSpec
    energy1: EnergySpec
    energy2: EnergySpec
    reaction: ReactionSpec
    T: float
    epsilon: float
    initial: np.ndarray
    certificate: Optional[GrowthCertificate] = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < self.T:
            raise ConfigurationError("need 0 < epsilon < T")
        init = np.asarray(self.initial, dtype=float).ravel()
        if not np.all(np.isfinite(init)):
            raise ConfigurationError("initial state must be finite")
        n = self.grid.n_nodes
        expect = 2 * n if self.energy1.kind == "lv_quadratic" else n
        if init.size != expect:
            raise ConfigurationError(
                f"initial state has {init.size} dofs, expected {expect}")
        object.__setattr__(self, "initial", init)

    @property
    def n_dof(self) -> int:
        return self.initial.size


@dataclass
class MinimizeReport:
    iterations: int
    value: float
    gradient_norm: float
    converged: bool
    wall_time: float
    notes: tuple = ()


@dataclass
class FixedPointReport:
    outer_iterations: int
    residual_history: list
    damping: float
    converged: bool
    inner_reports: list


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def _weights(eps: float, T: float, N: int):
    """(a, b): dissipation and potential weights per slice n = 1..N."""
    dt = T / N
    t = np.linspace(0.0, T, N + 1)
    beta = np.exp(-t / eps)
    b = beta[1:] * dt
    c0 = eps * np.expm1(dt / eps) / dt
    a = c0 * eps * b
    return a, b


def default_eps_schedule(T: float, N: int) -> list:
    """Geometric schedule, ratio 1/2, from min(T/5, 0.2) down to the floor
    max(2*dt, 1e-3, T/700); the floor is appended as the final entry."""
    dt = T / N
    floor = max(2.0 * dt, 1e-3, T / 700.0)
    out = []
    e = min(T / 5.0, 0.2)
    while e > floor * (1.0 + 1e-12):
        out.append(e)
        e *= 0.5
    out.append(floor)
    return out


# ---------------------------------------------------------------------------
# Functional value / gradient
# ---------------------------------------------------------------------------

def _check_w(w: np.ndarray, N: int, n_dof: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = np.tile(w, (N + 1, 1))
    if w.shape != (N + 1, n_dof):
        raise ConfigurationError(
            f"dual field shape {w.shape} != {(N + 1, n_dof)}")
    return w


def wed_value_grad(problem: WedProblem, w: np.ndarray,
                   traj: Trajectory) -> tuple[float, np.ndarray]:
    """Value and euclidean gradient (trajectory-shaped, zero in the pinned
    slot 0) of the weighted trajectory functional for a fixed dual field w.
    w is a nodal density table of shape (N+1, n_dof); row 0 is unused."""
    U = traj.values
    if traj.pinned_initial is None:
        raise ConfigurationError("trajectory must be pinned at the start")
    N = traj.steps
    n_dof = U.shape[1]
    w = _check_w(w, N, n_dof)
    dt = traj.dt
    hd = problem.grid.cell_measure
    a, b = _weights(problem.epsilon, problem.T, N)
    rates = np.diff(U, axis=0) / dt
    alph = alpha_eval(problem.dissipation, rates)
    value = 0.0
    grad = np.zeros_like(U)
    value += float(np.sum(a[:, None] * A_eval(problem.dissipation, rates)) * hd)
    for n in range(1, N + 1):
        v1, g1 = energy1_value_grad(problem.energy1, problem.grid, U[n])
        value += b[n - 1] * (v1 - hd * float(w[n] @ U[n]))
        grad[n] += b[n - 1] * (g1 - hd * w[n])
        grad[n] += (a[n - 1] / dt) * alph[n - 1] * hd
        if n < N:
            grad[n] -= (a[n] / dt) * alph[n] * hd
    grad[0] = 0.0
    return value, grad


# ---------------------------------------------------------------------------
# Inner minimization
# ---------------------------------------------------------------------------

def _assemble(problem: WedProblem, w, N: int):
    """Closures (grad, hess, scale, unpack) over the unknown X = slices 1..N."""
    n_dof = problem.n_dof
    dt = problem.T / N
    hd = problem.grid.cell_measure
    a, b = _weights(problem.epsilon, problem.T, N)
    u0 = problem.initial
    spec_d = problem.dissipation
    spec_e = problem.energy1
    grid = problem.grid

    def full(X):
        return np.vstack([u0[None, :], X.reshape(N, n_dof)])

    def grad_fn(X):
        U = full(X)
        rates = np.diff(U, axis=0) / dt
        alph = alpha_eval(spec_d, rates)
        g = np.empty((N, n_dof))
        for n in range(1, N + 1):
            _, g1 = energy1_value_grad(spec_e, grid, U[n])
            g[n - 1] = b[n - 1] * (g1 - hd * w[n]) \
                + (a[n - 1] / dt) * alph[n - 1] * hd
            if n < N:
                g[n - 1] -= (a[n] / dt) * alph[n] * hd
        return g.ravel()

    def hess_fn(X):
        U = full(X)
        rates = np.diff(U, axis=0) / dt
        ap = alpha_prime(spec_d, rates) * hd / dt ** 2
        blocks = [[None] * N for _ in range(N)]
        for n in range(1, N + 1):
            Hphi = energy1_hessian(spec_e, grid, U[n]) * b[n - 1]
            diag = a[n - 1] * ap[n - 1]
            if n < N:
                diag = diag + a[n] * ap[n]
                off = sp.diags(-a[n] * ap[n])
                blocks[n - 1][n] = off
                blocks[n][n - 1] = off
            blocks[n - 1][n - 1] = Hphi + sp.diags(diag)
        return sp.bmat(blocks, format="csc")

    scale = np.repeat(b * max(hd, 1e-300), n_dof)
    return grad_fn, hess_fn, scale, full


def minimize_wed(problem: WedProblem, w, init: Trajectory,
                 gtol: float = 1e-10, max_iter: int = 120
                 ) -> tuple[Trajectory, MinimizeReport]:
    """Minimize the functional at fixed dual field w over trajectories
    pinned at problem.initial. Newton with exact sparse Hessian, globalized
    by scaled-residual backtracking; termination on the row-scaled gradient
    max-norm (rows weighted by b_n so the tolerance is uniform in time)."""
    t0 = time.perf_counter()
    if init.pinned_initial is None or not np.array_equal(
            init.values[0], problem.initial):
        raise ConfigurationError("init must be pinned at the problem initial")
    N = init.steps
    w = _check_w(w, N, problem.n_dof)
    grad_fn, hess_fn, scale, full = _assemble(problem, w, N)
    X0 = init.values[1:].ravel()
    X, res, iters, conv = newton_solve(X0, grad_fn, hess_fn, scale,
                                       tol=gtol, max_iter=max_iter)
    out = Trajectory(problem.grid, problem.T, full(X),
                     pinned_initial=problem.initial,
                     ncomp=problem.n_dof // problem.grid.n_nodes)
    value, _ = wed_value_grad(problem, w, out)
    report = MinimizeReport(iters, value, res, conv,
                            time.perf_counter() - t0)
    return out, report


# ---------------------------------------------------------------------------
# Fixed point loop, continuation
# ---------------------------------------------------------------------------

def dual_field(problem: WedProblem, traj: Trajectory) -> np.ndarray:
    """w = (gradient of the concave part)/h^d + reaction, evaluated slice
    by slice: the nodal-density dual closing the nonpotential terms."""
    N = traj.steps
    n_dof = problem.n_dof
    hd = problem.grid.cell_measure
    n_nodes = problem.grid.n_nodes
    w = np.zeros((N + 1, n_dof))
    for n in range(N + 1):
        x = traj.values[n]
        _, g2 = energy2_value_grad(problem.energy2, problem.grid, x, n)
        w[n] = g2 / hd
        if problem.reaction.kind == "lotka_volterra":
            fu, fv = reaction_eval(problem.reaction, (x[:n_nodes], x[n_nodes:]))
            w[n] += np.concatenate([fu, fv])
        elif problem.reaction.kind != "none":
            w[n] += reaction_eval(problem.reaction, x, n)
    return w


def _dual_is_constant(problem: WedProblem) -> bool:
    return (problem.reaction.kind in ("none", "constant_g")
            and problem.energy2.concave_q is None)


def _traj_norm(problem: WedProblem, diff: np.ndarray, dt: float) -> float:
    p = problem.dissipation.p
    hd = problem.grid.cell_measure
    return float((np.sum(np.abs(diff) ** p) * hd * dt) ** (1.0 / p))


def fixed_point_solve(problem: WedProblem, steps: int,
                      theta: float = 0.5, tol: float = 1e-10,
                      max_outer: int = 200,
                      init: Optional[Trajectory] = None,
                      project: Optional[Callable] = None,
                      gtol: float = 1e-10
                      ) -> tuple[Trajectory, FixedPointReport]:
    """Damped iteration u <- (1-theta) u + theta S(u), where S minimizes
    the functional with the dual field frozen at u. The damping doubles
    after every monotone residual decrease. `project` (when given) maps
    each outer iterate before the dual field is evaluated; it is how
    solution classes closed under a map are enforced."""
    from .grids import Trajectory as _T
    ncomp = problem.n_dof // problem.grid.n_nodes
    if init is None:
        vals = np.tile(problem.initial, (steps + 1, 1))
        init = _T(problem.grid, problem.T, vals,
                  pinned_initial=problem.initial, ncomp=ncomp)
    u = init
    dt = problem.T / steps
    inner_reports = []
    history = []
    if _dual_is_constant(problem) and project is None:
        w = dual_field(problem, u)
        out, rep = minimize_wed(problem, w, u, gtol=gtol)
        inner_reports.append(rep)
        return out, FixedPointReport(1, [0.0], theta, rep.converged,
                                     inner_reports)
    converged = False
    for k in range(max_outer):
        u_eval = project(u) if project is not None else u
        w = dual_field(problem, u_eval)
        s, rep = minimize_wed(problem, w, u_eval, gtol=gtol)
        inner_reports.append(rep)
        new_vals = (1.0 - theta) * u_eval.values + theta * s.values
        res = _traj_norm(problem, new_vals - u.values, dt)
        history.append(res)
        u = _T(problem.grid, problem.T, new_vals,
               pinned_initial=problem.initial, ncomp=ncomp)
        if res <= tol:
            converged = True
            break
        if len(history) >= 2 and history[-1] < history[-2]:
            theta = min(1.0, 2.0 * theta)
    if project is not None:
        u_final = project(u)
        u = _T(problem.grid, problem.T, u_final.values,
               pinned_initial=problem.initial, ncomp=ncomp)
    return u, FixedPointReport(len(history) if history else 1, history,
                               theta, converged, inner_reports)


@dataclass
class ContinuationResult:
    family: list           # (eps, Trajectory) per schedule entry
    final: Trajectory
    reports: list
    aborted: bool = False


def eps_continuation(problem: WedProblem, schedule, steps: int,
                     project: Optional[Callable] = None,
                     tol: float = 1e-10, gtol: float = 1e-10
                     ) -> ContinuationResult:
    """Solve along a strictly decreasing weight schedule with warm starts;
    the last trajectory is the causal-limit candidate."""
    schedule = list(schedule)
    if not schedule:
        raise ConfigurationError("empty continuation schedule")
    if any(e2 >= e1 for e1, e2 in zip(schedule, schedule[1:])):
        raise ConfigurationError("schedule must be strictly decreasing")
    if any(not 0.0 < e < problem.T for e in schedule):
        raise ConfigurationError("schedule entries must lie in (0, T)")
    family = []
    reports = []
    warm = None
    for eps in schedule:
        prob = replace(problem, epsilon=eps)
        traj, rep = fixed_point_solve(prob, steps, init=warm, tol=tol,
                                      project=project, gtol=gtol)
        reports.append(rep)
        if not rep.converged:
            return ContinuationResult(family, warm if warm is not None
                                      else traj, reports, aborted=True)
        family.append((eps, traj))
        warm = traj
    return ContinuationResult(family, family[-1][1], reports)


# ---------------------------------------------------------------------------
# Residual diagnostics
# ---------------------------------------------------------------------------

def euler_lagrange_residual(problem: WedProblem, traj: Trajectory) -> dict:
    """Weight-eliminated stationarity residual per slice.

    Interior rows: c0 (eps/dt)(xi_n - q xi_{n+1}) + dphi1(u_n)/h^d - w_n,
    terminal row: c0 (eps/dt) xi_N + dphi1(u_N)/h^d - w_N, where xi is
    the rate-potential gradient alpha(rate) and w the self-consistent dual
    field. All rows are nodal densities, so the norms are O(1) numbers."""
    N = traj.steps
    dt = traj.dt
    eps = problem.epsilon
    hd = problem.grid.cell_measure
    q = np.exp(-dt / eps)
    c0 = eps * np.expm1(dt / eps) / dt
    w = dual_field(problem, traj)
    rates = np.diff(traj.values, axis=0) / dt
    xi = alpha_eval(problem.dissipation, rates)
    rows = np.empty((N, problem.n_dof))
    for n in range(1, N + 1):
        _, g1 = energy1_value_grad(problem.energy1, problem.grid,
                                   traj.values[n])
        r = c0 * (eps / dt) * xi[n - 1] + g1 / hd - w[n]
        if n < N:
            r -= c0 * (eps / dt) * q * xi[n]
        rows[n - 1] = r
    per_time = np.max(np.abs(rows), axis=1)
    return {"per_time": per_time,
            "interior_max": float(per_time[:-1].max()) if N > 1 else 0.0,
            "terminal": float(np.max(np.abs(xi[-1]))),
            "max": float(per_time.max())}


def strong_solution_residual(traj: Trajectory, problem: WedProblem) -> float:
    """Residual of the unweighted evolution system, alpha(rate) + dphi1/h^d
    - w, in the dual-exponent space-time norm. The causal-limit metric."""
    N = traj.steps
    dt = traj.dt
    hd = problem.grid.cell_measure
    pc = p_conjugate(problem.dissipation.p)
    w = dual_field(problem, traj)
    rates = np.diff(traj.values, axis=0) / dt
    xi = alpha_eval(problem.dissipation, rates)
    total = 0.0
    for n in range(1, N + 1):
        _, g1 = energy1_value_grad(problem.energy1, problem.grid,
                                   traj.values[n])
        r = xi[n - 1] + g1 / hd - w[n]
        total += dt * hd * float(np.sum(np.abs(r) ** pc))
    return float(total ** (1.0 / pc))


def reference_solve(problem: WedProblem, steps: int) -> Trajectory:
    """Independent implicit-Euler oracle: each step minimizes
    dt psi((v-u)/dt) + phi1(v) - phi2(v) - h^d <f(u), v> with a
    quasi-Newton library call, sharing no code path with minimize_wed."""
    N = steps
    dt = problem.T / N
    hd = problem.grid.cell_measure
    n_nodes = problem.grid.n_nodes
    vals = np.empty((N + 1, problem.n_dof))
    vals[0] = problem.initial
    for n in range(1, N + 1):
        prev = vals[n - 1]
        if problem.reaction.kind == "lotka_volterra":
            fu, fv = reaction_eval(problem.reaction,
                                   (prev[:n_nodes], prev[n_nodes:]))
            f = np.concatenate([fu, fv])
        elif problem.reaction.kind == "none":
            f = np.zeros(problem.n_dof)
        else:
            f = reaction_eval(problem.reaction, prev, n)

        def objective(v):
            rate = (v - prev) / dt
            val = dt * float(np.sum(A_eval(problem.dissipation, rate))) * hd
            g = alpha_eval(problem.dissipation, rate) * hd
            v1, g1 = energy1_value_grad(problem.energy1, problem.grid, v)
            v2, g2 = energy2_value_grad(problem.energy2, problem.grid, v, n)
            val += v1 - v2 - hd * float(f @ v)
            g = g + g1 - g2 - hd * f
            return val, g

        res = scipy_minimize(objective, prev, jac=True, method="L-BFGS-B",
                             options={"maxiter": 500, "ftol": 1e-16,
                                      "gtol": 1e-12})
        vals[n] = res.x
    return Trajectory(problem.grid, problem.T, vals,
                      pinned_initial=problem.initial,
                      ncomp=problem.n_dof // problem.grid.n_nodes)
