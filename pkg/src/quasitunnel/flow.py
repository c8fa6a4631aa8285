"""First-order (BPS) gradient flow between critical points of a superpotential.

The flow ``dx/dtau = -g^{-1} grad W`` is integrated with an adaptive
Dormand-Prince 8(5,3) stepper, starting from an infinitesimal kick off the
source along an unstable eigendirection. Along a solution the Euclidean
action equals ``|W(a) - W(b)|``; the routines here compute both sides so that
the identity can be checked numerically.
"""

from __future__ import annotations

import collections
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import DOP853, simpson

from .fields import (
    CriticalPoint,
    Metric,
    PotentialFromSuperpotential,
    ScalarField,
    classify_point,
    flat_metric,
)
from .numerics import Log10Number, grid_derivative, monitor_grid

__all__ = [
    "FlowError",
    "FlowStatus",
    "FlowOptions",
    "Trajectory",
    "FlowProblem",
    "FlowOutcome",
    "ActionReport",
    "unstable_directions",
    "solve_flow",
    "action_from_trajectory",
    "action_closed_form",
    "verify_second_order",
    "upper_bound_amplitude",
    "write_trajectory_csv",
    "is_descending",
]


_STALL_WINDOW = 200


class FlowError(ValueError):
    """A flow problem cannot be set up (e.g. the source has no unstable direction)."""


class FlowStatus(enum.Enum):
    CONVERGED = "converged"
    TRAPPED = "trapped"
    ESCAPED = "escaped"
    STEP_BUDGET = "step-budget"


@dataclass(frozen=True)
class FlowOptions:
    """Integrator controls. Lengths scale with ``box_scale``, gradients with ``field_scale``."""

    initial_offset: float = 1e-6
    rtol: float = 1e-9
    atol: float = 1e-13
    capture_radius: float = 1e-5
    grad_tol: float = 1e-7
    escape_radius: float = 1e3
    max_steps: int = 1_000_000
    n_samples: int = 1024
    box_scale: float = 1.0
    field_scale: float = 1.0

    @property
    def epsilon(self) -> float:
        return self.initial_offset * self.box_scale

    @property
    def delta(self) -> float:
        return self.capture_radius * self.box_scale

    @property
    def gradient_threshold(self) -> float:
        return self.grad_tol * self.field_scale

    @property
    def escape(self) -> float:
        return self.escape_radius * self.box_scale


@dataclass(frozen=True)
class Trajectory:
    """Samples ``(tau_k, x_k)`` of a path, ``tau`` strictly increasing.

    ``start``/``end`` are the critical points the sampled path was truncated
    from; they let action quadratures add the missing tails analytically.
    """

    tau: np.ndarray
    x: np.ndarray
    start: Optional[np.ndarray] = None
    end: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float).reshape(-1)
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != tau.size:
            raise ValueError(f"{tau.size} times but {x.shape[0]} points")
        if tau.size > 1 and not np.all(np.diff(tau) > 0):
            raise ValueError("tau must be strictly increasing")
        tau.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "x", x)
        for name in ("start", "end"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.array(v, dtype=float).reshape(x.shape[1]))

    @property
    def n_samples(self) -> int:
        return self.tau.size

    @property
    def dimension(self) -> int:
        return self.x.shape[1]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``tau,x1,...,xn`` rows with 17 significant digits."""
    header = ",".join(["tau"] + [f"x{i + 1}" for i in range(traj.dimension)])
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for t, row in zip(traj.tau, traj.x):
            fh.write(",".join(f"{v:.17g}" for v in (t, *row)) + "\n")


def unstable_directions(W: ScalarField, metric: Metric, x, rel_tol: float = 1e-8):
    """Eigenpairs ``(mu, v)`` of ``g^{-1} H`` with ``mu < 0`` at ``x``.

    These are the directions along which ``-g^{-1} grad W`` pushes away
    from the critical point. ``v`` is normalized in the Euclidean norm.
    """
    h = W.hessian(x)
    g = metric.components(x)
    mu, vecs = scipy.linalg.eigh(h, g)
    top = np.max(np.abs(mu)) if mu.size else 0.0
    out = []
    for k in np.argsort(mu):
        if mu[k] < -rel_tol * top:
            v = vecs[:, k] / np.linalg.norm(vecs[:, k])
            # fix the sign so orientation order is deterministic
            i = int(np.argmax(np.abs(v)))
            out.append((float(mu[k]), v if v[i] > 0 else -v))
    return out


@dataclass(frozen=True)
class FlowProblem:
    """Flow of ``direction_sign * W`` from ``source`` toward ``target``.

    ``direction_sign = -1`` integrates the reversed flow ``W -> -W``.
    ``metric`` defaults to the identity; ``flat_metric(n, m)`` models mass ``m``.
    Extra ``critical_points`` are used to recognize trapping.
    """

    superpotential: ScalarField
    source: CriticalPoint
    target: CriticalPoint
    direction_sign: int = 1
    metric: Optional[Metric] = None
    critical_points: Sequence[CriticalPoint] = ()
    options: FlowOptions = field(default_factory=FlowOptions)

    def __post_init__(self):
        if self.direction_sign not in (1, -1):
            raise FlowError(f"direction_sign must be +1 or -1, got {self.direction_sign}")
        if self.metric is None:
            object.__setattr__(self, "metric", flat_metric(self.superpotential.dimension))
        dirs = unstable_directions(self.effective_field, self.metric, self.source.location)
        if not dirs:
            raise FlowError(
                f"no unstable direction at source {self.source.location.tolist()} "
                f"for direction_sign={self.direction_sign} (it is a sink of the flow)"
            )
        object.__setattr__(self, "_unstable", dirs)

    @property
    def effective_field(self) -> ScalarField:
        return self.superpotential if self.direction_sign == 1 else self.superpotential.negated()

    @property
    def potential(self) -> PotentialFromSuperpotential:
        return PotentialFromSuperpotential(self.superpotential, self.metric)


@dataclass(frozen=True)
class FlowOutcome:
    status: FlowStatus
    trajectory: Trajectory
    trapped_at: Optional[CriticalPoint] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def converged(self) -> bool:
        return self.status is FlowStatus.CONVERGED


@dataclass
class _RawPath:
    t: np.ndarray
    x: np.ndarray
    dense: list

    def __call__(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        seg = np.clip(np.searchsorted(self.t, tau, side="right") - 1, 0, len(self.dense) - 1)
        out = np.empty((tau.size, self.x.shape[1]))
        for k in np.unique(seg):
            mask = seg == k
            out[mask] = np.asarray(self.dense[k](tau[mask])).T
        return out


def integrate_flow(
    velocity: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    classify: Callable[[np.ndarray], Optional[tuple]],
    options: FlowOptions,
):
    """Step the ODE until ``classify`` returns ``(status, point)`` or the budget runs out."""
    x0 = np.asarray(x0, dtype=float)
    solver = DOP853(
        lambda t, y: velocity(y), 0.0, x0, np.inf,
        rtol=options.rtol, atol=options.atol * options.box_scale,
    )
    ts, xs, dense = [0.0], [x0.copy()], []
    verdict = (FlowStatus.STEP_BUDGET, None)
    for _ in range(options.max_steps):
        solver.step()
        if solver.status == "failed":
            verdict = (FlowStatus.ESCAPED, None)
            break
        dense.append(solver.dense_output())
        ts.append(solver.t)
        xs.append(solver.y.copy())
        found = classify(solver.y)
        if found is not None:
            verdict = found
            break
    return _RawPath(np.array(ts), np.array(xs), dense), verdict[0], verdict[1]


def resample(raw: _RawPath, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Reporting grid: equidistribute path length plus elapsed time."""
    if len(raw.dense) == 0:
        return raw.t, raw.x
    sub = 8
    fine_t = np.concatenate(
        [np.linspace(raw.t[k], raw.t[k + 1], sub, endpoint=False) for k in range(len(raw.dense))] + [raw.t[-1:]]
    )
    fine_x = raw(fine_t)
    fine_x[0], fine_x[-1] = raw.x[0], raw.x[-1]
    tau = monitor_grid(fine_t, fine_x, n_samples)
    x = raw(tau)
    x[0], x[-1] = raw.x[0], raw.x[-1]
    return tau, x


def solve_flow(problem: FlowProblem) -> FlowOutcome:
    """Integrate the BPS flow from ``problem.source`` and report how it ends.

    Every unstable eigendirection is tried in both orientations. A run that
    is captured by the target wins; otherwise the first trapped run is
    reported (with all runs in ``diagnostics``), then escapes, then
    exhausted step budgets.
    """
    opts = problem.options
    W = problem.effective_field
    metric = problem.metric
    src = problem.source
    known = [src, problem.target] + [
        cp for cp in problem.critical_points
        if not any(np.allclose(cp.location, k.location, atol=opts.delta) for k in (src, problem.target))
    ]

    if metric.constant:
        ginv = metric.inverse(src.location)

        def velocity(x):
            return -ginv @ W.gradient(x)
    else:
        def velocity(x):
            return -metric.inverse(x) @ W.gradient(x)

    runs = []
    for mu, vec in problem._unstable:
        for orient in (1.0, -1.0):
            x0 = src.location + orient * opts.epsilon * vec
            left = [False]
            history = collections.deque(maxlen=_STALL_WINDOW)

            def match(y):
                for cp in known:
                    if cp is src and not left[0]:
                        continue
                    if np.linalg.norm(y - cp.location) <= opts.delta:
                        status = FlowStatus.CONVERGED if cp is problem.target else FlowStatus.TRAPPED
                        return status, cp
                return None

            def classify(y):
                if not np.all(np.isfinite(y)) or np.linalg.norm(y) > opts.escape:
                    return FlowStatus.ESCAPED, None
                if not left[0] and np.linalg.norm(y - src.location) > 100.0 * opts.epsilon:
                    left[0] = True
                history.append(y.copy())
                gn = np.linalg.norm(problem.superpotential.gradient(y))
                if gn <= opts.gradient_threshold:
                    found = match(y)
                    if found is not None:
                        return found
                    if left[0]:
                        return FlowStatus.TRAPPED, classify_point(problem.superpotential, y)
                    return None
                # rounding can hold |grad W| above the threshold near a point
                # with large coordinates; a stalled path is treated as arrived
                if left[0] and len(history) == _STALL_WINDOW:
                    if np.linalg.norm(history[-1] - history[0]) < 0.1 * opts.delta:
                        cp = classify_point(problem.superpotential, y)
                        return match(cp.location) or (FlowStatus.TRAPPED, cp)
                return None

            raw, status, at = integrate_flow(velocity, x0, classify, opts)
            tau, x = resample(raw, opts.n_samples)
            end = at.location if at is not None else None
            traj = Trajectory(
                tau, x, start=src.location, end=end,
                meta={"steps": len(raw.dense), "mu": mu, "orientation": orient, "status": status.value},
            )
            outcome = FlowOutcome(status, traj, at if status is FlowStatus.TRAPPED else None,
                                  {"unstable_eigenvalue": mu, "orientation": orient})
            if status is FlowStatus.CONVERGED:
                return outcome
            runs.append(outcome)

    for status in (FlowStatus.TRAPPED, FlowStatus.ESCAPED, FlowStatus.STEP_BUDGET):
        for o in runs:
            if o.status is status:
                diag = dict(o.diagnostics)
                diag["runs"] = [
                    (r.status.value, None if r.trapped_at is None else r.trapped_at.location.tolist())
                    for r in runs
                ]
                return FlowOutcome(o.status, o.trajectory, o.trapped_at, diag)
    raise AssertionError("unreachable: no flow runs recorded")


def _kinetic(traj: Trajectory, metric: Metric, xdot: np.ndarray) -> np.ndarray:
    if metric.constant:
        g = metric.components(traj.x[0])
        return 0.5 * np.einsum("ki,ij,kj->k", xdot, g, xdot)
    return np.array([0.5 * v @ metric.components(x) @ v for x, v in zip(traj.x, xdot)])


def action_from_trajectory(traj: Trajectory, pfs: PotentialFromSuperpotential) -> float:
    """Euclidean action ``int (1/2 g xdot xdot + V) dtau`` by Simpson's rule.

    Velocities are finite differences on the sample grid. When the path
    records the critical points it was truncated from, the unresolved tails
    ``|W(x_end) - W(xi)|`` are added (exact along a flow).
    """
    if traj.n_samples < 8:
        raise ValueError(f"need at least 8 samples, got {traj.n_samples}")
    xdot = grid_derivative(traj.tau, traj.x, order=1)
    kinetic = _kinetic(traj, pfs.metric, xdot)
    potential = np.array([pfs.value(x) for x in traj.x])
    action = float(simpson(kinetic + potential, x=traj.tau))
    W = pfs.superpotential
    if traj.start is not None:
        action += abs(W.value(traj.x[0]) - W.value(traj.start))
    if traj.end is not None:
        action += abs(W.value(traj.x[-1]) - W.value(traj.end))
    return action


def action_closed_form(W: ScalarField, a: CriticalPoint, b: CriticalPoint) -> float:
    """``|W(xi_a) - W(xi_b)|``."""
    return abs(W.value(a.location) - W.value(b.location))


def verify_second_order(traj: Trajectory, pfs: PotentialFromSuperpotential) -> float:
    """Relative residual of ``g xddot = grad V`` on interior samples.

    Returns ``max_k |g xddot_k - grad V(x_k)|`` over samples away from the
    ends, divided by ``max |grad V|`` along the path. Only constant metrics
    (flat space with a mass) are supported.
    """
    if traj.n_samples < 3:
        raise ValueError("need at least 3 samples")
    if not pfs.metric.constant:
        raise NotImplementedError("second-order check needs a constant metric")
    g = pfs.metric.components(traj.x[0])
    xddot = grid_derivative(traj.tau, traj.x, order=2)
    force = np.array([pfs.gradient(x) for x in traj.x])
    interior = slice(2, traj.n_samples - 2) if traj.n_samples > 4 else slice(1, traj.n_samples - 1)
    diff = np.linalg.norm(xddot[interior] @ g.T - force[interior], axis=1)
    scale = float(np.max(np.linalg.norm(force, axis=1)))
    if diff.size == 0:
        return 0.0
    return float(np.max(diff) / (scale if scale > 0.0 else 1.0))


def is_descending(values, rounding: float = 8.0) -> bool:
    """True if ``values`` never increase and only stall at rounding level.

    Next to a critical point ``W`` changes quadratically in the distance,
    so consecutive samples there can agree to the last bit; differences
    within ``rounding`` ulps of ``max |W|`` are accepted.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return True
    floor = rounding * np.finfo(float).eps * max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    return bool(np.all(np.diff(values) <= floor))


def upper_bound_amplitude(W: ScalarField, a: CriticalPoint, b: CriticalPoint) -> Log10Number:
    """``exp(-|W(xi_a) - W(xi_b)|)`` as a (mantissa, power-of-ten) pair."""
    return Log10Number.from_ln(-action_closed_form(W, a, b))


@dataclass(frozen=True)
class ActionReport:
    """Actions from each route plus cross-check diagnostics."""

    s_quadrature: Optional[float]
    s_closed_form: float
    s_second_order: Optional[float]
    residual_second_order: float
    bound_amplitude: float
    flow_status: str = ""
    energy_drift: Optional[float] = None

    def as_text(self) -> str:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, float):
                return f"{v:.17g}"
            return str(v)

        lines = [
            f"s_quadrature = {fmt(self.s_quadrature)}",
            f"s_closed_form = {fmt(self.s_closed_form)}",
            f"s_second_order = {fmt(self.s_second_order)}",
            f"residual_second_order = {fmt(self.residual_second_order)}",
            f"bound_amplitude = {fmt(self.bound_amplitude)}",
            f"flow_status = {fmt(self.flow_status)}",
        ]
        if self.energy_drift is not None:
            lines.append(f"euclidean_energy_drift = {fmt(self.energy_drift)}")
        return "\n".join(lines) + "\n"
