"""Small numerical helpers shared by the solvers.

Finite-difference derivatives on nonuniform grids, the monitor-function
resampler used for reported trajectories, and a (mantissa, exponent) number
type for probabilities that underflow double precision.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = ["Log10Number", "grid_derivative", "monitor_grid"]


class Log10Number(NamedTuple):
    """A positive number stored as ``mantissa * 10**exponent``.

    ``1 <= mantissa < 10`` and ``exponent`` is an integer, so values such as
    ``exp(-200)`` are representable without underflow.
    """

    mantissa: float
    exponent: int

    @classmethod
    def from_log10(cls, log10_value: float) -> "Log10Number":
        exponent = math.floor(log10_value)
        mantissa = 10.0 ** (log10_value - exponent)
        if mantissa >= 10.0:  # rounding at an exact power of ten
            mantissa /= 10.0
            exponent += 1
        return cls(mantissa, int(exponent))

    @classmethod
    def from_ln(cls, ln_value: float) -> "Log10Number":
        return cls.from_log10(ln_value / math.log(10.0))

    @property
    def log10(self) -> float:
        return math.log10(self.mantissa) + self.exponent

    def __float__(self) -> float:
        return self.mantissa * 10.0 ** self.exponent


def _stencil_indices(n_points: int, width: int) -> np.ndarray:
    half = width // 2
    start = np.clip(np.arange(n_points) - half, 0, n_points - width)
    return start[:, None] + np.arange(width)[None, :]


def grid_derivative(t, y, order: int = 1, width: int = 5) -> np.ndarray:
    """Differentiate samples ``y(t)`` on an arbitrary increasing grid.

    Each point uses the ``width`` nearest samples (centered where possible,
    one-sided at the ends); the weights are the exact derivatives of the
    interpolating polynomial, so the scheme is of order ``width - order``
    on nonuniform grids.

    Parameters
    ----------
    t : array_like, shape (K,)
        Strictly increasing abscissae.
    y : array_like, shape (K,) or (K, n)
    order : int
        1 or 2.
    width : int
        Stencil size, at most ``K``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n_points = t.size
    width = min(width, n_points)
    if width <= order:
        raise ValueError(f"need more than {order} samples to take derivative of order {order}")
    idx = _stencil_indices(n_points, width)
    offsets = t[idx] - t[:, None]
    scale = np.max(np.abs(offsets), axis=1)
    scale[scale == 0.0] = 1.0
    z = offsets / scale[:, None]
    # Vandermonde system A w = e_order with A[i, j] = z_j**i / i!
    powers = np.arange(width)
    vander = z[:, None, :] ** powers[None, :, None]
    vander /= np.array([math.factorial(p) for p in powers], dtype=float)[None, :, None]
    rhs = np.zeros((n_points, width))
    rhs[:, order] = 1.0
    weights = np.linalg.solve(vander, rhs[..., None])[..., 0] / scale[:, None] ** order
    if y.ndim == 1:
        return np.einsum("kw,kw->k", weights, y[idx])
    return np.einsum("kw,kwn->kn", weights, y[idx])


def monitor_grid(tau: np.ndarray, x: np.ndarray, n_samples: int) -> np.ndarray:
    """Return ``n_samples`` times equidistributing arc length plus elapsed time.

    Uniform arc length alone leaves the exponential approach to a critical
    point unresolved in ``tau`` (spacing grows like 1/speed), which spoils
    finite-difference velocities there; adding the normalized time keeps the
    tails resolved while the wall region still gets half the samples.
    """
    seg = np.linalg.norm(np.diff(x, axis=0), axis=1)
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    length = arc[-1]
    duration = tau[-1] - tau[0]
    sigma = (tau - tau[0]) / duration
    if length > 0.0:
        sigma = sigma + arc / length
    targets = np.linspace(sigma[0], sigma[-1], n_samples)
    out = np.interp(targets, sigma, tau)
    out[0], out[-1] = tau[0], tau[-1]
    return out
