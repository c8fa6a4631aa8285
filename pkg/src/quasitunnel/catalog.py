"""Built-in superpotentials and potentials, addressable by string id.

Flat-space entries act on ``x`` (1-D) or ``(x, y)``; surface entries act on
chart coordinates ``(theta, phi)`` of a sphere-like surface. All callables
are numpy-vectorized over trailing axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .fields import ScalarField, find_critical_points

__all__ = [
    "CatalogEntry",
    "CATALOG",
    "make_field",
    "double_well",
    "double_well_potential",
    "saddle_to_min",
    "quartic",
    "quadratic",
    "sphere_height",
    "sphere_perturbed",
    "sphere_tilted",
    "constant_field",
    "polynomial_2d",
    "random_polynomial_2d",
]


def double_well(m: float = 1.0, lam: float = 1.0, eta: float = 1.0) -> ScalarField:
    """``W = sqrt(2 m lam) (eta^2 x - x^3/3)``.

    Paired with the kinetic metric ``m``, ``V = W'^2 / (2m) = lam (x^2 - eta^2)^2``.
    The W-maximum sits at ``+eta``, the minimum at ``-eta``.
    """
    k = math.sqrt(2.0 * m * lam)
    return ScalarField(
        1,
        lambda x: k * (eta**2 * x[0] - x[0] ** 3 / 3.0),
        lambda x: np.array([k * (eta**2 - x[0] ** 2)]),
        lambda x: np.array([[-2.0 * k * x[0]]]),
        name="double-well",
        vectorized=True,
        params={"m": m, "lam": lam, "eta": eta},
    )


def double_well_potential(lam: float = 1.0, eta: float = 1.0) -> ScalarField:
    """Raw potential ``V = lam (x^2 - eta^2)^2`` (no superpotential needed)."""
    return ScalarField(
        1,
        lambda x: lam * (x[0] ** 2 - eta**2) ** 2,
        lambda x: np.array([4.0 * lam * x[0] * (x[0] ** 2 - eta**2)]),
        lambda x: np.array([[lam * (12.0 * x[0] ** 2 - 4.0 * eta**2)]]),
        name="double-well-potential",
        vectorized=True,
        params={"lam": lam, "eta": eta},
    )


def saddle_to_min() -> ScalarField:
    """``W = x^3/3 - x + y^2/2``: saddle at (-1, 0), minimum at (1, 0)."""
    return ScalarField(
        2,
        lambda x: x[0] ** 3 / 3.0 - x[0] + 0.5 * x[1] ** 2,
        lambda x: np.array([x[0] ** 2 - 1.0, x[1]]),
        lambda x: np.array([[2.0 * x[0], np.zeros_like(x[0])], [np.zeros_like(x[0]), np.ones_like(x[0])]]),
        name="saddle-to-min",
        vectorized=True,
    )


def quartic() -> ScalarField:
    """``W = x^4/4 - x^2/2``: maximum at 0, minima at +-1."""
    return ScalarField(
        1,
        lambda x: 0.25 * x[0] ** 4 - 0.5 * x[0] ** 2,
        lambda x: np.array([x[0] ** 3 - x[0]]),
        lambda x: np.array([[3.0 * x[0] ** 2 - 1.0]]),
        name="quartic",
        vectorized=True,
    )


def quadratic() -> ScalarField:
    return ScalarField(
        1,
        lambda x: 0.5 * x[0] ** 2,
        lambda x: np.array([x[0]]),
        lambda x: np.array([[np.ones_like(x[0])]]),
        name="quadratic",
        vectorized=True,
    )


def constant_field(c: float = 1.0, dimension: int = 2) -> ScalarField:
    return ScalarField(
        dimension,
        lambda x: c + 0.0 * x[0],
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        lambda x: np.zeros((dimension,) + np.asarray(x, dtype=float).shape),
        name="constant",
        vectorized=True,
        params={"c": c},
    )


def sphere_height() -> ScalarField:
    """``W = cos(theta)``: maximum at the north pole, minimum at the south."""
    return ScalarField(
        2,
        lambda x: np.cos(x[0]),
        lambda x: np.array([-np.sin(x[0]), np.zeros_like(x[0])]),
        lambda x: np.array(
            [[-np.cos(x[0]), np.zeros_like(x[0])], [np.zeros_like(x[0]), np.zeros_like(x[0])]]
        ),
        name="sphere-height",
        vectorized=True,
    )


def sphere_perturbed(eps: float = 0.3) -> ScalarField:
    """``W = cos(theta) + eps sin^2(theta) cos(phi)``."""

    def w(x):
        t, p = x[0], x[1]
        return np.cos(t) + eps * np.sin(t) ** 2 * np.cos(p)

    def dw(x):
        t, p = x[0], x[1]
        s, c = np.sin(t), np.cos(t)
        return np.array([-s + 2.0 * eps * s * c * np.cos(p), -eps * s**2 * np.sin(p)])

    def d2w(x):
        t, p = x[0], x[1]
        tt = -np.cos(t) + 2.0 * eps * np.cos(2.0 * t) * np.cos(p)
        tp = -eps * np.sin(2.0 * t) * np.sin(p)
        pp = -eps * np.sin(t) ** 2 * np.cos(p)
        return np.array([[tt, tp], [tp, pp]])

    return ScalarField(2, w, dw, d2w, name="sphere-perturbed", vectorized=True, params={"eps": eps})


def sphere_tilted(kappa: float = 1.0) -> ScalarField:
    """``W = cos(theta) - kappa sin^2(theta) cos^2(phi)``, i.e. ``z - kappa x^2``.

    Smooth on the sphere. For ``kappa > 1/2`` the south pole turns into a
    saddle and two minima appear at ``cos(theta) = -1/(2 kappa)``,
    ``phi = 0, pi``, so the sphere splits into two Morse cells.
    """

    def w(x):
        t, p = x[0], x[1]
        return np.cos(t) - kappa * np.sin(t) ** 2 * np.cos(p) ** 2

    def dw(x):
        t, p = x[0], x[1]
        return np.array(
            [-np.sin(t) - kappa * np.sin(2.0 * t) * np.cos(p) ** 2, kappa * np.sin(t) ** 2 * np.sin(2.0 * p)]
        )

    def d2w(x):
        t, p = x[0], x[1]
        tt = -np.cos(t) - 2.0 * kappa * np.cos(2.0 * t) * np.cos(p) ** 2
        tp = kappa * np.sin(2.0 * t) * np.sin(2.0 * p)
        pp = 2.0 * kappa * np.sin(t) ** 2 * np.cos(2.0 * p)
        return np.array([[tt, tp], [tp, pp]])

    return ScalarField(2, w, dw, d2w, name="sphere-tilted", vectorized=True, params={"kappa": kappa})


def polynomial_2d(coeffs) -> ScalarField:
    """``W(x, y) = sum_ij coeffs[i, j] x^i y^j``."""
    c = np.array(coeffs, dtype=float)
    cx, cy = P.polyder(c, axis=0), P.polyder(c, axis=1)
    cxx, cxy, cyy = P.polyder(cx, axis=0), P.polyder(cx, axis=1), P.polyder(cy, axis=1)

    def w(x):
        return P.polyval2d(x[0], x[1], c)

    def dw(x):
        return np.array([P.polyval2d(x[0], x[1], cx), P.polyval2d(x[0], x[1], cy)])

    def d2w(x):
        xy = P.polyval2d(x[0], x[1], cxy)
        return np.array([[P.polyval2d(x[0], x[1], cxx), xy], [xy, P.polyval2d(x[0], x[1], cyy)]])

    return ScalarField(2, w, dw, d2w, name="polynomial-2d", vectorized=True, params={"coeffs": c.tolist()})


RANDOM_BOX = ((-2.0, 2.0), (-2.0, 2.0))


def random_polynomial_2d(rng: np.random.Generator, *, max_tries: int = 10_000):
    """Draw a degree-4 polynomial superpotential with exactly two critical points in the box.

    Rejection-sampled so that both points are nondegenerate with Hessian
    eigenvalues of magnitude in ``[0.3, 5]``, at least 0.5 apart, and with
    ``|dW| >= 0.2``. Returns ``(W, [cp_a, cp_b])`` with ``cp_a`` the higher one.
    """
    for _ in range(max_tries):
        c = np.zeros((5, 5))
        for i in range(5):
            for j in range(5 - i):
                if i + j >= 1:
                    c[i, j] = rng.normal(scale=1.0 / (1 + i + j))
        W = polynomial_2d(c)
        cps = find_critical_points(W, RANDOM_BOX, n_seeds=7)
        if len(cps) != 2 or any(cp.degenerate for cp in cps):
            continue
        eigs = np.abs(np.concatenate([cp.eigenvalues for cp in cps]))
        if eigs.min() < 0.3 or eigs.max() > 5.0:
            continue
        if np.linalg.norm(cps[0].location - cps[1].location) < 0.5:
            continue
        if abs(cps[0].w_value - cps[1].w_value) < 0.2:
            continue
        return W, cps
    raise RuntimeError("no admissible random polynomial found")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    factory: Callable[..., ScalarField]
    defaults: dict = field(default_factory=dict)
    kind: str = "flat"  # "flat" or "surface"
    box: Optional[tuple] = None
    description: str = ""


CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in [
        CatalogEntry("double-well", double_well, {"m": 1.0, "lam": 1.0, "eta": 1.0}, "flat", ((-2.0, 2.0),),
                     "1-D double-well superpotential"),
        CatalogEntry("saddle-to-min", saddle_to_min, {}, "flat", ((-2.0, 2.0), (-2.0, 2.0)),
                     "2-D saddle (-1,0) to minimum (1,0)"),
        CatalogEntry("quartic", quartic, {}, "flat", ((-2.0, 2.0),), "three critical points at -1, 0, 1"),
        CatalogEntry("quadratic", quadratic, {}, "flat", ((-2.0, 2.0),), "single minimum"),
        CatalogEntry("sphere-height", sphere_height, {}, "surface", None, "W = cos(theta)"),
        CatalogEntry("sphere-perturbed", sphere_perturbed, {"eps": 0.3}, "surface", None,
                     "W = cos(theta) + eps sin^2(theta) cos(phi)"),
        CatalogEntry("sphere-tilted", sphere_tilted, {"kappa": 1.0}, "surface", None,
                     "W = cos(theta) - kappa sin^2(theta) cos^2(phi)"),
        CatalogEntry("constant", constant_field, {"c": 1.0}, "surface", None, "degenerate constant field"),
    ]
}


def make_field(name: str, **params) -> ScalarField:
    """Instantiate catalog entry ``name``; unknown parameters are rejected."""
    try:
        entry = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown field {name!r}; known: {', '.join(sorted(CATALOG))}") from None
    unknown = set(params) - set(entry.defaults)
    if unknown:
        raise KeyError(f"field {name!r} does not take parameter(s) {sorted(unknown)}")
    kwargs = {**entry.defaults, **params}
    return entry.factory(**kwargs)
