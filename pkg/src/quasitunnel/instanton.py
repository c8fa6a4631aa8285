"""Euclidean boundary-value solver for tunneling trajectories.

Solves ``m xddot = grad V(x)`` on ``tau in [-T, T]`` with ``x(-T) = xi_a``
and ``x(T) = xi_b`` by damped Newton relaxation of the Numerov (fourth-order
central) discretization. Shooting is avoided on purpose: the unstable
direction grows like ``exp(omega tau)`` and ruins any forward integration.

The translation zero mode is removed by freezing the coordinate with the
largest end-to-end change where the initial path crosses its midpoint
value (``tau = 0`` for the default guess).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import simpson

from .fields import (
    CriticalPoint,
    PotentialFromSuperpotential,
    ScalarField,
    flat_metric,
    warn_if_low_barrier,
)
from .flow import (
    ActionReport,
    FlowError,
    FlowOptions,
    FlowProblem,
    FlowStatus,
    Trajectory,
    action_closed_form,
    action_from_trajectory,
    solve_flow,
    verify_second_order,
)
from .numerics import grid_derivative

__all__ = [
    "BvpProblem",
    "InstantonResult",
    "InstantonError",
    "CrossCheckError",
    "ShortHorizonWarning",
    "solve_instanton",
    "compare_routes",
]


class InstantonError(RuntimeError):
    """Relaxation diverged or collapsed onto a trivial path."""


class CrossCheckError(AssertionError):
    """Two routes to the tunneling action disagree beyond tolerance."""


class ShortHorizonWarning(UserWarning):
    """``omega * T < 10``: the exponential approach to the endpoints is cut short."""


GuessType = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class BvpProblem:
    """Second-order Euclidean problem for potential ``V`` and mass ``m``.

    ``half_time`` defaults to ``omega_target_T / omega`` with ``omega``
    the slowest endpoint curvature frequency ``sqrt(min eig(Hess V) / m)``.
    ``n_grid`` is the number of intervals on ``[-T, T]``.
    """

    potential: ScalarField
    start: np.ndarray
    end: np.ndarray
    mass: float = 1.0
    half_time: Optional[float] = None
    n_grid: int = 2048
    initial_guess: GuessType = None
    guess_center: float = 0.0
    damping: bool = True
    pseudo_step: float = 1.0
    max_iters: int = 200
    residual_tol: float = 1e-10
    omega_target_T: float = 20.0

    def __post_init__(self):
        n = self.potential.dimension
        object.__setattr__(self, "start", np.array(self.start, dtype=float).reshape(n))
        object.__setattr__(self, "end", np.array(self.end, dtype=float).reshape(n))
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.n_grid < 8 or self.n_grid % 2:
            raise ValueError("n_grid must be an even number >= 8")
        T = self.half_time
        omega = self.omega
        if T is None:
            T = self.omega_target_T / omega if omega > 0 else 50.0
            object.__setattr__(self, "half_time", T)
        if omega > 0 and omega * T < 10.0:
            warnings.warn(f"omega*T = {omega * T:.3g} < 10; enlarge half_time", ShortHorizonWarning, stacklevel=2)

    @classmethod
    def from_superpotential(cls, pfs: PotentialFromSuperpotential, a, b, **kwargs) -> "BvpProblem":
        mass = pfs.mass
        if mass is None:
            raise ValueError("relaxation needs a flat metric of the form m * I")
        a = a.location if isinstance(a, CriticalPoint) else a
        b = b.location if isinstance(b, CriticalPoint) else b
        return cls(pfs.as_scalar_field(), a, b, mass=mass, **kwargs)

    @property
    def omega(self) -> float:
        eigs = []
        for x in (self.start, self.end):
            eigs.extend(np.linalg.eigvalsh(self.potential.hessian(x)))
        low = min(eigs)
        return math.sqrt(low / self.mass) if low > 0 else 0.0

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(-self.half_time, self.half_time, self.n_grid + 1)


@dataclass(frozen=True)
class InstantonResult:
    trajectory: Trajectory
    action: float
    energy_drift: float
    residual: float
    iterations: int


def _default_guess(problem: BvpProblem, tau: np.ndarray) -> np.ndarray:
    omega = problem.omega if problem.omega > 0 else 1.0
    profile = 0.5 * (1.0 + np.tanh(0.5 * omega * (tau - problem.guess_center)))
    return problem.start[None, :] + profile[:, None] * (problem.end - problem.start)[None, :]


def _initial_path(problem: BvpProblem, tau: np.ndarray) -> np.ndarray:
    g = problem.initial_guess
    n = problem.potential.dimension
    if g is None:
        x = _default_guess(problem, tau)
    elif callable(g):
        x = np.asarray(g(tau - problem.guess_center), dtype=float).reshape(tau.size, n)
    else:
        x = np.array(g, dtype=float).reshape(tau.size, n)
    x = x.copy()
    x[0], x[-1] = problem.start, problem.end
    return x


def _pin(problem: BvpProblem, guess: np.ndarray):
    """Node, coordinate and value fixing the zero mode.

    The coordinate with the largest end-to-end change is frozen on the
    interior node where the initial path comes closest to its midpoint
    value, at the value the path has there. A shifted guess keeps its
    position and the pin starts out satisfied, so damped steps stay
    consistent with it.
    """
    delta = problem.end - problem.start
    coord = int(np.argmax(np.abs(delta)))
    value = 0.5 * (problem.start[coord] + problem.end[coord])
    if not np.any(delta):
        return problem.n_grid // 2, coord, value
    gap = np.abs(guess[1:-1, coord] - value)
    best = np.flatnonzero(gap == gap.min()) + 1
    node = int(best[np.argmin(np.abs(best - problem.n_grid // 2))])
    return node, coord, float(guess[node, coord])


def _residual(problem: BvpProblem, x: np.ndarray, h: float, force: np.ndarray) -> np.ndarray:
    """Numerov residual at interior nodes, shape (N-1, n)."""
    m = problem.mass
    second = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / h**2
    avg = (force[2:] + 10.0 * force[1:-1] + force[:-2]) / 12.0
    return m * second - avg


def _jacobian(problem: BvpProblem, hess: np.ndarray, h: float, pin) -> sp.csc_matrix:
    m = problem.mass
    n = problem.potential.dimension
    K = problem.n_grid - 1  # interior nodes
    eye = np.eye(n)
    rows, cols, vals = [], [], []
    node = np.arange(K)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    # diagonal blocks: -2m/h^2 I - 10/12 H_k  (interior node k is grid node k+1)
    diag_blocks = -2.0 * m / h**2 * eye[None] - (10.0 / 12.0) * hess[1:-1]
    lower = m / h**2 * eye[None] - hess[1:-2] / 12.0  # d R_k / d x_{k-1}, k = 1..K-1
    upper = m / h**2 * eye[None] - hess[2:-1] / 12.0  # d R_k / d x_{k+1}, k = 0..K-2
    for blocks, r_nodes, c_nodes in (
        (diag_blocks, node, node),
        (lower, node[1:], node[:-1]),
        (upper, node[:-1], node[1:]),
    ):
        rows.append((r_nodes[:, None, None] * n + ii[None]).ravel())
        cols.append((c_nodes[:, None, None] * n + jj[None]).ravel())
        vals.append(blocks.ravel())
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    mid, coord, _ = pin
    pinned_row = (mid - 1) * n + coord
    keep = rows != pinned_row
    rows = np.append(rows[keep], pinned_row)
    cols = np.append(cols[keep], pinned_row)
    vals = np.append(vals[keep], 1.0)
    size = K * n
    return sp.csc_matrix((vals, (rows, cols)), shape=(size, size))


def _pinned_residual(problem, x, h, force, pin) -> np.ndarray:
    r = _residual(problem, x, h, force)
    mid, coord, value = pin
    r[mid - 1, coord] = x[mid, coord] - value
    return r


def solve_instanton(problem: BvpProblem) -> InstantonResult:
    """Relax the Euclidean boundary-value problem and evaluate its action.

    Returns the converged :class:`InstantonResult` with the Simpson action
    of ``1/2 m xdot^2 + V``, the spread of the Euclidean energy
    ``1/2 m xdot^2 - V`` along the path, and the final residual relative to
    the force scale.

    Raises
    ------
    InstantonError
        If Newton fails to reduce the residual, or the solution collapses
        to a constant path although the endpoints differ.
    """
    V = problem.potential
    tau = problem.tau
    h = tau[1] - tau[0]
    x = _initial_path(problem, tau)
    pin = _pin(problem, x)
    same_ends = np.allclose(problem.start, problem.end, rtol=0.0, atol=1e-14)
    if same_ends:
        x[:] = problem.start

    def evaluate(path):
        f = V.gradients(path)
        r = _pinned_residual(problem, path, h, f, pin)
        return f, r

    force, res = evaluate(x)
    mid, coord, _ = pin
    iterations = 0

    def measure(r, f):
        rr = r.copy()
        rr[mid - 1, coord] = 0.0
        return float(np.max(np.abs(rr))), max(float(np.max(np.linalg.norm(f, axis=1))), 1e-300)

    def tolerance(f_scale, path):
        # rounding floor of the second difference at this grid spacing
        floor = 64.0 * np.finfo(float).eps * problem.mass * max(1.0, float(np.max(np.abs(path)))) / h**2
        return max(problem.residual_tol * max(f_scale, 1.0), floor)

    err, f_scale = measure(res, force)
    pin_err = abs(res[mid - 1, coord])
    # pseudo-transient continuation: implicit descent steps on the action
    # whose step length grows with residual reduction until they are Newton
    omega = problem.omega if problem.omega > 0 else 1.0
    dt = problem.pseudo_step / omega**2 if problem.damping else math.inf
    shift = np.ones(res.size)
    shift[(mid - 1) * res.shape[1] + coord] = 0.0
    norm = float(np.linalg.norm(res))
    while not same_ends and (err > tolerance(f_scale, x) or pin_err > 1e-13):
        if iterations >= problem.max_iters:
            raise InstantonError(f"relaxation did not converge in {iterations} iterations; last residual {err:.3e}")
        iterations += 1
        J = _jacobian(problem, V.hessians(x), h, pin)
        if math.isfinite(dt):
            J = J - sp.diags(shift / dt, format="csc")
        step = spla.spsolve(J, -res.ravel()).reshape(res.shape)
        if not np.all(np.isfinite(step)):
            raise InstantonError(f"singular relaxation system; last residual {err:.3e}")
        trial = x.copy()
        trial[1:-1] += step
        f_trial, r_trial = evaluate(trial)
        new_norm = float(np.linalg.norm(r_trial))
        if not np.isfinite(new_norm) or (math.isfinite(dt) and new_norm > 10.0 * norm):
            dt = (dt if math.isfinite(dt) else 1.0 / omega**2) * 0.25
            continue
        x, force, res = trial, f_trial, r_trial
        if math.isfinite(dt):
            dt *= max(norm / max(new_norm, 1e-300), 1.5)
            if dt > 1e14:
                dt = math.inf
        norm = new_norm
        err, f_scale = measure(res, force)
        pin_err = abs(res[mid - 1, coord])
        if not math.isfinite(dt) and np.max(np.abs(step)) < 1e-14 * max(1.0, float(np.max(np.abs(x)))):
            break

    xdot = grid_derivative(tau, x, order=1)
    kinetic = 0.5 * problem.mass * np.sum(xdot**2, axis=1)
    pot = V.values(x)
    action = float(simpson(kinetic + pot, x=tau))
    interior = slice(2, tau.size - 2)
    energy = kinetic[interior] - pot[interior]
    drift = float(np.max(energy) - np.min(energy))
    if not same_ends and action <= 1e-10 * max(1.0, float(np.max(np.abs(pot)))):
        raise InstantonError("collapsed to trivial solution, enlarge T or improve guess")
    traj = Trajectory(tau, x, meta={"iterations": iterations, "pin": pin})
    return InstantonResult(traj, action, drift, err / max(f_scale, 1.0), iterations)


def _guess_from_flow(traj: Trajectory, a: np.ndarray, b: np.ndarray, coord: int):
    """Time-shift a flow path from ``a`` to ``b`` so its midpoint crossing sits at tau = 0."""
    c = traj.x[:, coord] - 0.5 * (a[coord] + b[coord])
    flips = np.nonzero(np.sign(c[:-1]) != np.sign(c[1:]))[0]
    k = int(flips[0]) if flips.size else traj.n_samples // 2 - 1
    t0, t1, c0, c1 = traj.tau[k], traj.tau[k + 1], c[k], c[k + 1]
    tc = t0 if c1 == c0 else t0 - c0 * (t1 - t0) / (c1 - c0)
    ts = traj.tau - tc

    def guess(tau):
        out = np.empty((tau.size, a.size))
        for i in range(a.size):
            out[:, i] = np.interp(tau, ts, traj.x[:, i], left=a[i], right=b[i])
        return out

    return guess


def compare_routes(
    W: ScalarField,
    a: CriticalPoint,
    b: CriticalPoint,
    *,
    mass: float = 1.0,
    flow_options: Optional[FlowOptions] = None,
    critical_points=(),
    n_grid: int = 2048,
    check: bool = True,
) -> tuple[ActionReport, dict]:
    """Compute the tunneling action between ``a`` and ``b`` by every route.

    The flow runs downhill from the higher of the two points. When it
    converges its path seeds the relaxation (selecting the BPS branch);
    otherwise the relaxation starts from the straight tanh profile.
    Returns the report and a dict with the underlying trajectories.

    Raises
    ------
    CrossCheckError
        If ``check`` and the relaxed action falls below ``|dW|`` by more
        than ``1e-4`` relative, or (flow converged) differs from it by more
        than ``1e-3`` relative.
    """
    metric = flat_metric(W.dimension, mass)
    pfs = PotentialFromSuperpotential(W, metric)
    s_closed = action_closed_form(W, a, b)
    warn_if_low_barrier(s_closed)
    sign = 1 if W.value(a.location) >= W.value(b.location) else -1
    details: dict = {}
    flow_outcome = None
    try:
        problem = FlowProblem(W, a, b, direction_sign=sign, metric=metric,
                              critical_points=critical_points, options=flow_options or FlowOptions())
        flow_outcome = solve_flow(problem)
        details["flow"] = flow_outcome
    except FlowError as exc:
        details["flow_error"] = str(exc)

    converged = flow_outcome is not None and flow_outcome.converged
    s_quad = action_from_trajectory(flow_outcome.trajectory, pfs) if converged else None

    bvp_kwargs = {"n_grid": n_grid}
    if converged:
        coord = int(np.argmax(np.abs(b.location - a.location)))
        bvp_kwargs["initial_guess"] = _guess_from_flow(flow_outcome.trajectory, a.location, b.location, coord)
    bvp = BvpProblem.from_superpotential(pfs, a, b, **bvp_kwargs)
    inst = solve_instanton(bvp)
    details["instanton"] = inst

    residual = verify_second_order(flow_outcome.trajectory if converged else inst.trajectory, pfs)
    report = ActionReport(
        s_quadrature=s_quad,
        s_closed_form=s_closed,
        s_second_order=inst.action,
        residual_second_order=residual,
        bound_amplitude=math.exp(-s_closed),
        flow_status=(flow_outcome.status.value if flow_outcome is not None else "no-flow"),
        energy_drift=inst.energy_drift,
    )
    if check:
        if inst.action < s_closed - 1e-4 * s_closed:
            raise CrossCheckError(f"relaxed action {inst.action!r} below |dW| = {s_closed!r}")
        if converged and abs(inst.action - s_closed) > 1e-3 * s_closed:
            raise CrossCheckError(f"relaxed action {inst.action!r} differs from |dW| = {s_closed!r}")
    return report, details
