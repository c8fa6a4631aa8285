"""Gradient flow on sphere-like surfaces in a single (theta, phi) chart.

The chart metric degenerates at the poles, which are handled through the
local Cartesian coordinates ``(u, v) = (theta cos phi, theta sin phi)``
(and ``pi - theta`` at the south pole). Flows starting at a pole are kicked
to ``theta = theta_min``; flows ending at a pole stop there and the action
receives the exact tail ``|W(x_end) - W(pole)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .fields import (
    CriticalPoint,
    DegenerateFieldError,
    Metric,
    MetricError,
    PotentialFromSuperpotential,
    ScalarField,
    _classify,
    diagonal_metric,
    find_critical_points,
)
from .flow import (
    FlowError,
    FlowOptions,
    FlowOutcome,
    FlowStatus,
    Trajectory,
    action_from_trajectory,
    integrate_flow,
    resample,
)

__all__ = [
    "ChartedSurface",
    "MorseCell",
    "MorseDecomposition",
    "surface_critical_points",
    "manifold_flow",
    "manifold_action",
    "classify_seed",
    "morse_cells",
    "seed_grid_points",
    "write_cells_csv",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ChartedSurface:
    """A surface of revolution charted by ``theta in (0, pi)``, ``phi in [0, 2 pi)``."""

    name: str
    metric: Metric
    theta_min: float = 1e-4
    params: dict = field(default_factory=dict, compare=False)

    @classmethod
    def sphere(cls, theta_min: float = 1e-4) -> "ChartedSurface":
        return cls.spheroid(1.0, 1.0, theta_min=theta_min, name="sphere")

    @classmethod
    def spheroid(cls, a: float = 1.0, c: float = 2.0, *, theta_min: float = 1e-4, name: str = "spheroid"):
        """Embedding ``(a sin t cos p, a sin t sin p, c cos t)``.

        ``g = diag(a^2 cos^2 t + c^2 sin^2 t, a^2 sin^2 t)``.
        """
        if not (a > 0.0 and c > 0.0 and math.isfinite(a) and math.isfinite(c)):
            raise MetricError(f"spheroid semi-axes must be positive and finite, got a={a}, c={c}")

        def diag(x):
            s2 = math.sin(x[0]) ** 2
            return np.array([a * a * (1.0 - s2) + c * c * s2, a * a * s2])

        return cls(name, diagonal_metric(diag, 2, name=name), theta_min, {"a": a, "c": c})

    @property
    def pole_scale(self) -> float:
        """The metric near either pole is ``pole_scale**2 * I`` in ``(u, v)``."""
        return float(self.params.get("a", 1.0))

    def is_pole(self, x) -> Optional[str]:
        t = float(np.asarray(x, dtype=float)[0])
        if t < self.theta_min:
            return "north"
        if t > math.pi - self.theta_min:
            return "south"
        return None

    def distance(self, x, y) -> float:
        """Chart distance with ``phi`` taken modulo ``2 pi``; pole-aware."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        for pole, t0 in (("north", 0.0), ("south", math.pi)):
            if self.is_pole(y) == pole:
                return abs(x[0] - t0)
            if self.is_pole(x) == pole:
                return abs(y[0] - t0)
        dphi = (x[1] - y[1] + math.pi) % TWO_PI - math.pi
        return math.hypot(x[0] - y[0], dphi)


def _pole_field(W: ScalarField, pole: str) -> ScalarField:
    sign = 1.0 if pole == "north" else -1.0
    t0 = 0.0 if pole == "north" else math.pi

    def w(p):
        r = math.hypot(p[0], p[1])
        return W.value(np.array([t0 + sign * r, math.atan2(p[1], p[0])]))

    return ScalarField(2, w, name=f"{W.name}@{pole}")


def _pole_hessian(w: ScalarField, h: float = 1e-4) -> np.ndarray:
    """Second differences of the value around the origin."""
    f0 = w.value(np.zeros(2))
    e = np.eye(2) * h
    hess = np.empty((2, 2))
    for i in range(2):
        hess[i, i] = (w.value(e[i]) - 2.0 * f0 + w.value(-e[i])) / h**2
    hess[0, 1] = hess[1, 0] = (
        w.value(e[0] + e[1]) - w.value(e[0] - e[1]) - w.value(-e[0] + e[1]) + w.value(-e[0] - e[1])
    ) / (4.0 * h**2)
    return hess


def _pole_point(surface: ChartedSurface, W: ScalarField, pole: str, degeneracy_rel: float):
    """Critical point at ``pole`` or ``None`` if the gradient there is nonzero."""
    w = _pole_field(W, pole)
    h = 1e-6
    grad = np.array([(w.value(h * e) - w.value(-h * e)) / (2.0 * h) for e in np.eye(2)])
    hess = _pole_hessian(w)
    scale = max(1.0, abs(w.value(np.zeros(2))), float(np.max(np.abs(hess))))
    if np.linalg.norm(grad) > 1e-6 * scale:
        return None
    vals, vecs, index, degenerate = _classify(hess, degeneracy_rel)
    loc = np.array([0.0 if pole == "north" else math.pi, 0.0])
    return CriticalPoint(loc, W.value(loc), index, vals, vecs, degenerate, label=pole)


def surface_critical_points(
    surface: ChartedSurface, W: ScalarField, *, n_seeds: int = 13, degeneracy_rel: float = 1e-6
) -> list[CriticalPoint]:
    """Critical points on the whole surface, poles included, sorted by ``W`` descending.

    Pole points carry chart coordinates ``(0, 0)`` or ``(pi, 0)`` and the
    Hessian of the local Cartesian chart.
    """
    if W.dimension != 2:
        raise ValueError("surface fields take (theta, phi)")
    margin = 10.0 * surface.theta_min
    interior = find_critical_points(
        W, [(margin, math.pi - margin), (0.0, TWO_PI)], n_seeds,
        periodic=[None, TWO_PI], degeneracy_rel=degeneracy_rel,
    )
    interior = [cp for cp in interior if surface.is_pole(cp.location) is None]
    poles = [p for p in (_pole_point(surface, W, s, degeneracy_rel) for s in ("north", "south")) if p is not None]
    points = poles + interior
    points.sort(key=lambda c: (-c.w_value, tuple(c.location)))
    return points


def _velocity(surface: ChartedSurface, W: ScalarField, sign: float):
    def velocity(x):
        return -sign * (surface.metric.inverse(x) @ W.gradient(x))

    return velocity


def _pole_kick(surface: ChartedSurface, cp: CriticalPoint, sign: float, phi0: Optional[float]) -> np.ndarray:
    """Chart point at ``theta_min`` off a pole, along the steepest unstable direction."""
    vals = sign * cp.eigenvalues
    k = int(np.argmin(vals))
    if vals[k] >= 0.0:
        raise FlowError(f"{cp.label} pole is a sink of the flow; no unstable direction")
    if phi0 is None:
        v = cp.eigenvectors[:, k]
        phi0 = math.atan2(v[1], v[0]) % TWO_PI
    t = surface.theta_min if cp.label == "north" else math.pi - surface.theta_min
    return np.array([t, float(phi0)])


def manifold_flow(
    surface: ChartedSurface,
    W: ScalarField,
    source: CriticalPoint,
    target: CriticalPoint,
    options: Optional[FlowOptions] = None,
    *,
    critical_points: Sequence[CriticalPoint] = (),
    direction_sign: int = 1,
    phi0: Optional[float] = None,
) -> FlowOutcome:
    """Integrate ``dX/dtau = -g^{-1} grad W`` on the chart from ``source`` to ``target``.

    A pole source is left at ``theta_min`` along ``phi0`` (default: its
    steepest-descent direction); an interior source is kicked by
    ``options.epsilon`` along each unstable eigendirection in turn. A pole
    target captures the path once ``theta`` is within ``theta_min`` of it;
    reaching a pole that is not a critical point counts as an escape.

    Raises
    ------
    FlowError
        If the source is a sink of the requested flow.
    MetricError
        If the metric is singular at an interior source.
    """
    opts = options or FlowOptions()
    sign = float(direction_sign)
    if sign not in (1.0, -1.0):
        raise FlowError(f"direction_sign must be +1 or -1, got {direction_sign}")
    known = [source, target] + [
        cp for cp in critical_points
        if surface.distance(cp.location, source.location) > opts.delta
        and surface.distance(cp.location, target.location) > opts.delta
    ]
    velocity = _velocity(surface, W, sign)

    starts = []
    if surface.is_pole(source.location):
        starts.append((_pole_kick(surface, source, sign, phi0), phi0))
    else:
        g = surface.metric.check(source.location)
        mu, vecs = scipy.linalg.eigh(sign * W.hessian(source.location), g)
        for k in np.argsort(mu):
            if mu[k] < -1e-8 * np.max(np.abs(mu)):
                v = vecs[:, k] / np.linalg.norm(vecs[:, k])
                starts += [(source.location + opts.epsilon * v, None), (source.location - opts.epsilon * v, None)]
        if not starts:
            raise FlowError(f"no unstable direction at source {source.location.tolist()}")

    runs = []
    for x0, _ in starts:
        classify = _surface_classifier(surface, W, source, target, known, opts)
        raw, status, at = integrate_flow(velocity, x0, classify, opts)
        tau, x = resample(raw, opts.n_samples)
        end = _pole_anchor(at, x[-1]) if at is not None else None
        start = _pole_anchor(source, x[0])
        traj = Trajectory(tau, x, start=start, end=end, meta={"steps": len(raw.dense), "status": status.value})
        outcome = FlowOutcome(status, traj, at if status is FlowStatus.TRAPPED else None)
        if status is FlowStatus.CONVERGED:
            return outcome
        runs.append(outcome)
    order = (FlowStatus.TRAPPED, FlowStatus.ESCAPED, FlowStatus.STEP_BUDGET)
    return min(runs, key=lambda o: order.index(o.status))


def _pole_anchor(cp: CriticalPoint, near: np.ndarray) -> np.ndarray:
    """Chart coordinates of ``cp``; a pole takes the ``phi`` of the adjacent sample."""
    if cp.label in ("north", "south"):
        return np.array([cp.location[0], near[1]])
    return cp.location


def _surface_classifier(surface, W, source, target, known, opts, *, saddle_radius=None):
    left = [False]
    src_pole = surface.is_pole(source.location) is not None

    def classify(y):
        if not np.all(np.isfinite(y)):
            return FlowStatus.ESCAPED, None
        if not left[0] and surface.distance(y, source.location) > max(100.0 * opts.epsilon, 2.0 * surface.theta_min):
            left[0] = True
        pole = surface.is_pole(y)
        if pole is not None:
            for cp in known:
                if cp.label == pole and (left[0] or cp is not source or not src_pole):
                    status = FlowStatus.CONVERGED if cp is target else FlowStatus.TRAPPED
                    return status, cp
            if left[0]:
                return FlowStatus.ESCAPED, None
            return None
        if saddle_radius is not None:
            for cp in known:
                if cp.label not in ("north", "south") and surface.distance(y, cp.location) <= saddle_radius:
                    status = FlowStatus.CONVERGED if cp is target else FlowStatus.TRAPPED
                    return status, cp
            return None
        if np.linalg.norm(W.gradient(y)) > opts.gradient_threshold:
            return None
        for cp in known:
            if cp is source and not left[0]:
                continue
            if cp.label not in ("north", "south") and surface.distance(y, cp.location) <= opts.delta:
                status = FlowStatus.CONVERGED if cp is target else FlowStatus.TRAPPED
                return status, cp
        return None

    return classify


def manifold_action(traj: Trajectory, surface: ChartedSurface, W: ScalarField) -> float:
    """Action ``int (1/2 g xdot xdot + 1/2 g^{-1} dW dW) dtau`` plus pole/endpoint tails."""
    if traj.n_samples >= 2 and np.allclose(traj.x, traj.x[0], rtol=0.0, atol=0.0):
        return 0.0
    return action_from_trajectory(traj, PotentialFromSuperpotential(W, surface.metric))


@dataclass(frozen=True)
class MorseCell:
    """Seeds whose forward flow ends at ``sink`` and reversed flow at ``source``."""

    source: CriticalPoint
    sink: CriticalPoint
    members: np.ndarray
    source_id: int = -1
    sink_id: int = -1


@dataclass(frozen=True)
class MorseDecomposition:
    cells: list
    unclassified: np.ndarray
    critical_points: list
    seeds: np.ndarray
    labels: np.ndarray  # (n_seeds, 2) source_id, sink_id; -1 when unclassified

    @property
    def classified_fraction(self) -> float:
        return float(np.mean(self.labels[:, 0] >= 0)) if len(self.labels) else 0.0


def seed_grid_points(shape: tuple[int, int] = (32, 32)) -> np.ndarray:
    """Cell-centred ``(theta, phi)`` grid, row-major in ``theta``."""
    nt, nphi = shape
    theta = (np.arange(nt) + 0.5) * math.pi / nt
    phi = (np.arange(nphi) + 0.5) * TWO_PI / nphi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return np.column_stack([tt.ravel(), pp.ravel()])


def _morse_options(opts: Optional[FlowOptions]) -> FlowOptions:
    return opts or FlowOptions(rtol=1e-7, atol=1e-10, max_steps=20_000, n_samples=16)


def classify_seed(
    surface: ChartedSurface,
    W: ScalarField,
    critical_points: Sequence[CriticalPoint],
    seed,
    *,
    separatrix_tol: float = 1e-3,
    options: Optional[FlowOptions] = None,
) -> Optional[tuple[int, int]]:
    """``(source_id, sink_id)`` indices into ``critical_points`` or ``None``.

    The forward and reversed flows stop once they come within
    ``separatrix_tol`` of a critical point (or ``theta_min`` of a critical
    pole). Seeds caught by a saddle, or whose flows escape or run out of
    steps, are unclassified.
    """
    opts = _morse_options(options)
    seed = np.asarray(seed, dtype=float)
    ids = []
    for sign in (1.0, -1.0):
        probe = CriticalPoint(seed, W.value(seed), None, np.zeros(2), np.eye(2), label="seed")
        classify = _surface_classifier(
            surface, W, probe, probe, list(critical_points), opts, saddle_radius=separatrix_tol
        )
        _, status, at = integrate_flow(_velocity(surface, W, sign), seed, classify, opts)
        if at is None or status not in (FlowStatus.TRAPPED, FlowStatus.CONVERGED):
            return None
        want = 0 if sign > 0 else 2
        if at.morse_index != want:
            return None
        ids.append(next(i for i, cp in enumerate(critical_points) if cp is at))
    return ids[1], ids[0]


def morse_cells(
    surface: ChartedSurface,
    W: ScalarField,
    seed_grid: tuple[int, int] = (32, 32),
    *,
    separatrix_tol: float = 1e-3,
    critical_points: Optional[Sequence[CriticalPoint]] = None,
    options: Optional[FlowOptions] = None,
) -> MorseDecomposition:
    """Group seeds by the (source, sink) pair of their flow lines.

    Raises
    ------
    DegenerateFieldError
        If any critical point of ``W`` is degenerate (e.g. ``W`` constant).
    """
    cps = list(critical_points) if critical_points is not None else surface_critical_points(surface, W)
    bad = [cp for cp in cps if cp.degenerate]
    if bad or not cps:
        raise DegenerateFieldError(
            f"field {W.name or '?'} has degenerate critical points (no isolated extrema): {bad[:3]}"
        )
    seeds = seed_grid_points(seed_grid)
    labels = np.full((len(seeds), 2), -1, dtype=int)
    for k, s in enumerate(seeds):
        pair = classify_seed(surface, W, cps, s, separatrix_tol=separatrix_tol, options=options)
        if pair is not None:
            labels[k] = pair
    cells = []
    for pair in sorted({tuple(p) for p in labels.tolist() if p[0] >= 0}):
        mask = (labels[:, 0] == pair[0]) & (labels[:, 1] == pair[1])
        cells.append(MorseCell(cps[pair[0]], cps[pair[1]], seeds[mask], pair[0], pair[1]))
    return MorseDecomposition(cells, seeds[labels[:, 0] < 0], cps, seeds, labels)


def write_cells_csv(decomp: MorseDecomposition, path) -> None:
    """``theta,phi,source_id,sink_id`` per seed; unclassified seeds carry -1."""
    with open(path, "w", newline="") as fh:
        fh.write("theta,phi,source_id,sink_id\n")
        for (t, p), (a, b) in zip(decomp.seeds, decomp.labels):
            fh.write(f"{t:.17g},{p:.17g},{a:d},{b:d}\n")
