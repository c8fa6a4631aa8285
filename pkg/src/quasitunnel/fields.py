"""Scalar fields, metrics and critical points.

Everything here is immutable after construction. Field callables receive a
coordinate array whose first axis indexes the ``n`` coordinates; fields built
with ``vectorized=True`` also accept ``(n, M)`` batches, which the relaxation
solver uses to evaluate a whole grid at once.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ScalarField",
    "Metric",
    "CriticalPoint",
    "PotentialFromSuperpotential",
    "MetricError",
    "DegenerateFieldError",
    "LowBarrierWarning",
    "flat_metric",
    "diagonal_metric",
    "find_critical_points",
    "classify_point",
    "potential_value",
]

FD_STEP = 1e-5


class MetricError(ValueError):
    """The metric is not positive definite at an evaluated point."""


class DegenerateFieldError(ValueError):
    """A field has degenerate (non-isolated or non-Morse) critical points."""


class LowBarrierWarning(UserWarning):
    """Tunneling action below 3; the quasiclassical picture is unreliable."""


def _fd_steps(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(x))


@dataclass(frozen=True)
class ScalarField:
    """A twice-differentiable function of ``dimension`` real variables.

    Missing derivatives are replaced by central differences with step
    ``fd_step * max(1, |x_i|)``.
    """

    dimension: int
    func: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    vectorized: bool = False
    fd_step: float = FD_STEP
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 1 <= self.dimension <= 16:
            raise ValueError(f"dimension must be in [1, 16], got {self.dimension}")

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dimension)
        return x

    def value(self, x) -> float:
        return float(self.func(self._point(x)))

    def gradient(self, x) -> np.ndarray:
        x = self._point(x)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float).reshape(self.dimension)
        steps = _fd_steps(x, self.fd_step)
        out = np.empty(self.dimension)
        for i in range(self.dimension):
            e = np.zeros(self.dimension)
            e[i] = steps[i]
            out[i] = (self.func(x + e) - self.func(x - e)) / (2.0 * steps[i])
        return out

    def hessian(self, x) -> np.ndarray:
        x = self._point(x)
        n = self.dimension
        if self.hess is not None:
            h = np.asarray(self.hess(x), dtype=float).reshape(n, n)
        else:
            steps = _fd_steps(x, self.fd_step)
            h = np.empty((n, n))
            for i in range(n):
                e = np.zeros(n)
                e[i] = steps[i]
                h[:, i] = (self.gradient(x + e) - self.gradient(x - e)) / (2.0 * steps[i])
        return 0.5 * (h + h.T)

    # batched evaluation, X has shape (M, n)

    def values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.vectorized:
            return np.asarray(self.func(X.T), dtype=float).reshape(X.shape[0])
        return np.array([self.value(x) for x in X])

    def gradients(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.vectorized and self.grad is not None:
            g = np.asarray(self.grad(X.T), dtype=float)
            return np.broadcast_to(g.reshape(self.dimension, -1), (self.dimension, X.shape[0])).T.copy()
        return np.array([self.gradient(x) for x in X])

    def hessians(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        n = self.dimension
        if self.vectorized and self.hess is not None:
            h = np.asarray(self.hess(X.T), dtype=float).reshape(n, n, -1)
            h = np.broadcast_to(h, (n, n, X.shape[0]))
            h = np.moveaxis(h, -1, 0)
            return 0.5 * (h + np.swapaxes(h, 1, 2))
        if self.vectorized and self.grad is not None:
            steps = _fd_steps(X, self.fd_step)
            out = np.empty((X.shape[0], n, n))
            for i in range(n):
                E = np.zeros_like(X)
                E[:, i] = steps[:, i]
                out[:, :, i] = (self.gradients(X + E) - self.gradients(X - E)) / (2.0 * steps[:, i : i + 1])
            return 0.5 * (out + np.swapaxes(out, 1, 2))
        return np.array([self.hessian(x) for x in X])

    def negated(self) -> "ScalarField":
        """The field ``-W``; used for reversed flows."""
        f, g, h = self.func, self.grad, self.hess
        return ScalarField(
            self.dimension,
            lambda x: -f(x),
            None if g is None else (lambda x: -np.asarray(g(x))),
            None if h is None else (lambda x: -np.asarray(h(x))),
            name=f"-({self.name})" if self.name else "",
            vectorized=self.vectorized,
            fd_step=self.fd_step,
            params=dict(self.params),
        )


@dataclass(frozen=True)
class Metric:
    """A Riemannian metric ``g_ij(x)`` on a coordinate chart.

    ``constant`` marks metrics independent of position (flat space, or a
    particle mass folded into the kinetic term); the flow and relaxation
    code uses it to skip Christoffel terms.
    """

    dimension: int
    components_fn: Callable[[np.ndarray], np.ndarray]
    inverse_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant: bool = False
    name: str = ""

    def components(self, x) -> np.ndarray:
        return np.asarray(self.components_fn(np.asarray(x, dtype=float)), dtype=float).reshape(
            self.dimension, self.dimension
        )

    def inverse(self, x) -> np.ndarray:
        if self.inverse_fn is not None:
            return np.asarray(self.inverse_fn(np.asarray(x, dtype=float)), dtype=float).reshape(
                self.dimension, self.dimension
            )
        return np.linalg.inv(self.components(x))

    def check(self, x) -> np.ndarray:
        """Return ``g(x)``; raise :class:`MetricError` unless it is SPD."""
        g = self.components(x)
        if not np.all(np.isfinite(g)) or not np.allclose(g, g.T, rtol=1e-12, atol=0.0):
            raise MetricError(f"metric not symmetric/finite at x={np.asarray(x).tolist()}")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise MetricError(f"metric not positive definite at x={np.asarray(x).tolist()}") from None
        return g


def flat_metric(dimension: int, scale: float = 1.0) -> Metric:
    """``scale * identity``; ``scale`` plays the role of a particle mass."""
    if scale <= 0.0:
        raise MetricError(f"flat metric scale must be positive, got {scale}")
    eye = scale * np.eye(dimension)
    inv = np.eye(dimension) / scale
    return Metric(dimension, lambda x: eye, lambda x: inv, constant=True, name=f"flat({scale:g})")


def diagonal_metric(diag: Callable[[np.ndarray], np.ndarray], dimension: int, name: str = "") -> Metric:
    def comps(x):
        return np.diag(np.asarray(diag(x), dtype=float))

    def inv(x):
        return np.diag(1.0 / np.asarray(diag(x), dtype=float))

    return Metric(dimension, comps, inv, name=name)


@dataclass(frozen=True)
class CriticalPoint:
    """A zero of the gradient of a superpotential.

    ``morse_index`` is ``None`` when the point is degenerate; such points are
    reported but never classified.
    """

    location: np.ndarray
    w_value: float
    morse_index: Optional[int]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate: bool = False
    label: str = ""

    @property
    def dimension(self) -> int:
        return self.location.size

    def __repr__(self) -> str:
        loc = np.array2string(self.location, precision=6)
        tag = "degenerate" if self.degenerate else f"index={self.morse_index}"
        name = f"{self.label} " if self.label else ""
        return f"CriticalPoint({name}{loc}, W={self.w_value:.6g}, {tag})"


def _classify(hessian: np.ndarray, degeneracy_rel: float):
    vals, vecs = np.linalg.eigh(hessian)
    top = np.max(np.abs(vals)) if vals.size else 0.0
    tol = degeneracy_rel * top
    degenerate = top == 0.0 or bool(np.any(np.abs(vals) <= tol))
    index = None if degenerate else int(np.sum(vals < -tol))
    return vals, vecs, index, degenerate


def classify_point(
    W: ScalarField, x, *, degeneracy_rel: float = 1e-8, label: str = "", polish: bool = True
) -> CriticalPoint:
    """Build a :class:`CriticalPoint` at (a Newton-polished) ``x``."""
    x = np.array(x, dtype=float).reshape(W.dimension)
    if polish:
        polished = _newton(W, x, max_iter=50, grad_tol=0.0)
        if polished is not None:
            x = polished
    vals, vecs, index, degenerate = _classify(W.hessian(x), degeneracy_rel)
    return CriticalPoint(x, W.value(x), index, vals, vecs, degenerate, label)


def _newton(W: ScalarField, x: np.ndarray, max_iter: int, grad_tol: float, max_step: float = np.inf):
    """Newton iteration on grad W = 0; returns the root or ``None``."""
    x = x.copy()
    g = W.gradient(x)
    best = np.linalg.norm(g)
    for _ in range(max_iter):
        if best <= grad_tol:
            return x
        h = W.hessian(x)
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, -g, rcond=None)[0]
        norm = np.linalg.norm(step)
        if not np.isfinite(norm):
            return None
        if norm > max_step:
            step *= max_step / norm
        x = x + step
        g = W.gradient(x)
        gnorm = np.linalg.norm(g)
        best = gnorm
        if norm <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    return x


def find_critical_points(
    W: ScalarField,
    search_box: Sequence[tuple[float, float]],
    n_seeds: int = 9,
    *,
    dedup_radius: Optional[float] = None,
    degeneracy_rel: float = 1e-8,
    grad_rel: float = 1e-10,
    periodic: Optional[Sequence[Optional[float]]] = None,
    max_iter: int = 100,
) -> list[CriticalPoint]:
    """Locate and classify the critical points of ``W`` inside ``search_box``.

    Newton's method is started from a uniform grid of ``n_seeds`` points per
    box side; non-converging seeds are dropped. Roots are deduplicated within
    ``dedup_radius`` (default ``1e-6`` times the box diameter). Points with a
    Hessian eigenvalue inside ``(-tol, tol)``, ``tol = degeneracy_rel *
    max|eig|``, are flagged degenerate instead of being given a Morse index.

    ``periodic`` optionally gives a period per axis; such coordinates are
    wrapped into ``[lo, lo + period)``.
    """
    box = np.asarray(search_box, dtype=float).reshape(W.dimension, 2)
    lo, hi = box[:, 0], box[:, 1]
    if np.any(hi <= lo):
        raise ValueError(f"degenerate search box {box.tolist()}")
    periods = list(periodic) if periodic is not None else [None] * W.dimension
    diameter = float(np.linalg.norm(hi - lo))
    radius = 1e-6 * diameter if dedup_radius is None else dedup_radius
    axes = [np.linspace(a, b, n_seeds) for a, b in zip(lo, hi)]
    seeds = np.array(list(itertools.product(*axes)))
    scale = max(1.0, float(np.max(np.abs([W.value(s) for s in seeds]))))
    grad_tol = grad_rel * scale
    # Newton is run to the rounding floor; acceptance uses a looser bar when
    # the analytic floor sits above grad_tol (finite-difference fields).
    accept_tol = max(grad_tol, 1e-7 * scale) if W.grad is None else grad_tol

    def wrap(x):
        x = x.copy()
        for i, p in enumerate(periods):
            if p is not None:
                x[i] = lo[i] + np.mod(x[i] - lo[i], p)
        return x

    def inside(x):
        slack = 1e-9 * diameter
        for i, p in enumerate(periods):
            if p is None and not (lo[i] - slack <= x[i] <= hi[i] + slack):
                return False
        return True

    def distance(a, b):
        d = a - b
        for i, p in enumerate(periods):
            if p is not None:
                d[i] = (d[i] + 0.5 * p) % p - 0.5 * p
        return float(np.linalg.norm(d))

    found: list[tuple[np.ndarray, float]] = []
    for s in seeds:
        x = _newton(W, s, max_iter, grad_tol, max_step=diameter)
        if x is None or not np.all(np.isfinite(x)):
            continue
        x = wrap(x)
        if not inside(x):
            continue
        gnorm = float(np.linalg.norm(W.gradient(x)))
        if gnorm > accept_tol:
            continue
        for k, (y, gy) in enumerate(found):
            if distance(x, y) <= radius:
                if gnorm < gy:
                    found[k] = (x, gnorm)
                break
        else:
            found.append((x, gnorm))

    points = []
    for x, _ in found:
        vals, vecs, index, degenerate = _classify(W.hessian(x), degeneracy_rel)
        points.append(CriticalPoint(x, W.value(x), index, vals, vecs, degenerate))
    points.sort(key=lambda c: (-c.w_value, tuple(c.location)))
    return points


@dataclass(frozen=True)
class PotentialFromSuperpotential:
    """``V(x) = 1/2 g^ij(x) dW/dx^i dW/dx^j``.

    With the default identity metric this is the flat-space potential; a
    constant metric ``m * I`` describes a particle of mass ``m``.
    """

    superpotential: ScalarField
    metric: Optional[Metric] = None

    def __post_init__(self):
        if self.metric is None:
            object.__setattr__(self, "metric", flat_metric(self.superpotential.dimension))
        elif self.metric.dimension != self.superpotential.dimension:
            raise ValueError("metric and superpotential dimensions differ")

    @property
    def dimension(self) -> int:
        return self.superpotential.dimension

    @property
    def mass(self) -> Optional[float]:
        """Scalar mass for metrics of the form ``m * I``, else ``None``."""
        if not self.metric.constant:
            return None
        g = self.metric.components(np.zeros(self.dimension))
        m = g[0, 0]
        return float(m) if np.allclose(g, m * np.eye(self.dimension), rtol=1e-14, atol=0.0) else None

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self.metric.check(x)
        dw = self.superpotential.gradient(x)
        return 0.5 * float(dw @ self.metric.inverse(x) @ dw)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dimension)
        W = self.superpotential
        if self.metric.constant:
            return W.hessian(x) @ (self.metric.inverse(x) @ W.gradient(x))
        steps = _fd_steps(x, FD_STEP)
        out = np.empty(self.dimension)
        for i in range(self.dimension):
            e = np.zeros(self.dimension)
            e[i] = steps[i]
            out[i] = (self.value(x + e) - self.value(x - e)) / (2.0 * steps[i])
        return out

    def as_scalar_field(self) -> ScalarField:
        """``V`` as a :class:`ScalarField` (vectorized for constant metrics)."""
        W = self.superpotential
        if self.metric.constant and W.vectorized and W.grad is not None and W.hess is not None:
            ginv = self.metric.inverse(np.zeros(self.dimension))

            def v(x):
                dw = np.asarray(W.grad(x), dtype=float)
                return 0.5 * np.einsum("i...,ij,j...->...", dw, ginv, dw)

            def dv(x):
                dw = np.asarray(W.grad(x), dtype=float)
                h = np.asarray(W.hess(x), dtype=float)
                return np.einsum("ij...,jk,k...->i...", h, ginv, dw)

            return ScalarField(self.dimension, v, dv, None, name=f"V[{W.name}]", vectorized=True)
        return ScalarField(self.dimension, self.value, self.gradient, None, name=f"V[{W.name}]")


def potential_value(pfs: PotentialFromSuperpotential, x) -> float:
    """Evaluate ``V(x)``; raises :class:`MetricError` naming ``x`` if the metric fails."""
    return pfs.value(x)


def warn_if_low_barrier(action: float, threshold: float = 3.0) -> None:
    if action < threshold:
        warnings.warn(
            f"tunneling action {action:.4g} < {threshold:g}: barrier is not high, "
            "exponential approximation is rough",
            LowBarrierWarning,
            stacklevel=3,
        )
