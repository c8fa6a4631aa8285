"""One-dimensional barrier penetration in the exponential approximation.

Units for the alpha-decay model are MeV and fm with hbar = c = 1; the
conversion constant ``hbar_c`` turns ``sqrt(2 m (V - E)) dr`` into a pure
number.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .numerics import Log10Number

__all__ = [
    "BarrierModel1D",
    "NuclearConstants",
    "AlphaDecayModel",
    "TurningPointError",
    "QuadratureError",
    "SweepRow",
    "turning_points",
    "wkb_exponent",
    "tunneling_probability",
    "coulomb_exponent_closed_form",
    "lifetime_sweep",
    "write_sweep_csv",
]

C_FM_PER_S = 2.99792458e23


class TurningPointError(ValueError):
    """The bracket does not enclose exactly one forbidden interval."""

    def __init__(self, message: str, crossings: Sequence[float] = ()):
        super().__init__(f"{message}; detected crossings: {[round(c, 12) for c in crossings]}")
        self.crossings = list(crossings)


class QuadratureError(RuntimeError):
    def __init__(self, estimate: float, bound: float, tol: float):
        super().__init__(
            f"quadrature did not reach tolerance {tol:.3g}: estimate {estimate!r}, error bound {bound:.3g}"
        )
        self.estimate = estimate
        self.bound = bound


@dataclass(frozen=True)
class BarrierModel1D:
    """A particle of ``mass`` and ``energy`` facing ``potential(r)``.

    ``steps`` lists locations where the potential is discontinuous; a
    turning point falling on a step is reported at the step itself.
    """

    potential: Callable[[float], float]
    mass: float
    energy: float
    bracket: tuple[float, float]
    hbar_c: float = 1.0
    steps: tuple[float, ...] = ()
    n_scan: int = 4096

    def excess(self, r: float) -> float:
        return float(self.potential(r)) - self.energy

    def reflected(self) -> "BarrierModel1D":
        """The mirror image ``r -> -r``."""
        v = self.potential
        lo, hi = self.bracket
        return replace(self, potential=lambda r: v(-r), bracket=(-hi, -lo), steps=tuple(-s for s in self.steps))


def _zero_tol(model: BarrierModel1D, values: np.ndarray) -> float:
    return 1e-12 * max(abs(model.energy), float(np.max(np.abs(values))), 1e-300)


def turning_points(model: BarrierModel1D) -> tuple[float, float]:
    """Return ``(r_in, r_out)`` bounding the single forbidden interval in the bracket.

    The bracket is scanned on ``n_scan`` points; each boundary of the region
    ``V > E`` is refined by Brent's method, except boundaries on a potential
    step (reported at the step) and bracket ends where ``V - E`` vanishes.
    """
    lo, hi = model.bracket
    if not hi > lo:
        raise TurningPointError(f"empty bracket {model.bracket}")
    r = np.linspace(lo, hi, model.n_scan)
    f = np.array([model.excess(x) for x in r])
    tol = _zero_tol(model, f)
    positive = f > tol

    crossings: list[float] = []
    for k in range(len(r) - 1):
        if positive[k] == positive[k + 1]:
            continue
        a, b = r[k], r[k + 1]
        step = next((s for s in model.steps if a <= s <= b), None)
        if step is not None:
            crossings.append(float(step))
        elif abs(f[k]) <= tol:
            crossings.append(float(a))
        elif abs(f[k + 1]) <= tol:
            crossings.append(float(b))
        else:
            root = optimize.brentq(model.excess, a, b, xtol=1e-15 * max(1.0, abs(a)), rtol=4 * np.finfo(float).eps, maxiter=500)
            crossings.append(float(root))
    if positive[0]:
        if abs(f[0]) > tol and lo not in model.steps:
            raise TurningPointError("forbidden region extends past the lower bracket end", [lo] + crossings)
    if positive[-1]:
        if abs(f[-1]) > tol and hi not in model.steps:
            raise TurningPointError("forbidden region extends past the upper bracket end", crossings + [hi])
    if positive[0] and lo in model.steps:
        crossings = [float(lo)] + crossings
    if positive[-1] and hi in model.steps:
        crossings = crossings + [float(hi)]
    crossings = sorted(set(crossings))
    if len(crossings) != 2:
        raise TurningPointError(f"expected exactly two turning points, found {len(crossings)}", crossings)
    return crossings[0], crossings[1]


def wkb_exponent(
    model: BarrierModel1D,
    *,
    limits: Optional[tuple[float, float]] = None,
    rtol: float = 1e-10,
    return_error: bool = False,
):
    """Barrier integral ``S = (1/hbar_c) * int sqrt(2 m (V - E)) dr``.

    The substitution ``r = a + (b - a) sin^2 u`` removes the square-root
    zeros at the turning points, leaving a smooth integrand for adaptive
    Gauss-Kronrod quadrature. ``limits`` bypasses the turning-point search.

    Raises
    ------
    QuadratureError
        If the error estimate exceeds ``rtol * |S|`` (with an absolute floor).
    """
    a, b = turning_points(model) if limits is None else limits
    length = b - a
    pref = math.sqrt(2.0 * model.mass) / model.hbar_c

    def integrand(u):
        r = a + length * math.sin(u) ** 2
        excess = max(model.excess(r), 0.0)
        return pref * math.sqrt(excess) * length * math.sin(2.0 * u)

    with warnings.catch_warnings():
        # failure is reported below as QuadratureError
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(integrand, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=rtol, limit=400)
    bound = max(rtol * abs(value), 1e-14)
    if not err <= bound:
        raise QuadratureError(value, err, rtol)
    return (value, err) if return_error else value


def tunneling_probability(model: BarrierModel1D, **kwargs) -> Log10Number:
    """``exp(-2 S)`` as a (mantissa, power-of-ten) pair."""
    return Log10Number.from_ln(-2.0 * wkb_exponent(model, **kwargs))


@dataclass(frozen=True)
class NuclearConstants:
    """Unit constants; ``e2`` defaults to 260/180 so that 2 x 90 x e^2 = 260 MeV fm."""

    hbar_c: float = 197.327
    e2: float = 260.0 / 180.0
    m_alpha: float = 3727.38
    amu: float = 931.49
    use_reduced_mass: bool = True


@dataclass(frozen=True)
class AlphaDecayModel:
    """Alpha particle in a flat nuclear well joined to a Coulomb tail at ``R_n``.

    The defaults describe U-238 -> Th-234 + alpha at 4.7 MeV.
    """

    z1: int = 2
    z2: int = 90
    a_daughter: int = 234
    e_alpha: float = 4.7
    v_well: float = 0.0
    r0: float = 1.2
    constants: NuclearConstants = field(default_factory=NuclearConstants)

    def __post_init__(self):
        if self.a_daughter <= 0 or self.z1 <= 0 or self.z2 <= 0:
            raise ValueError("charges and mass number must be positive")
        if not (math.isfinite(self.e_alpha) and self.e_alpha > 0):
            raise ValueError(f"alpha energy must be positive, got {self.e_alpha}")
        if self.v_well >= self.e_alpha:
            raise ValueError("well depth must lie below the alpha energy")

    @property
    def nuclear_radius(self) -> float:
        return self.r0 * self.a_daughter ** (1.0 / 3.0)

    @property
    def coulomb_strength(self) -> float:
        """``Z1 Z2 e^2`` in MeV fm."""
        return self.z1 * self.z2 * self.constants.e2

    @property
    def mass(self) -> float:
        k = self.constants
        if not k.use_reduced_mass:
            return k.m_alpha
        m_d = k.amu * self.a_daughter
        return k.m_alpha * m_d / (k.m_alpha + m_d)

    @property
    def barrier_top(self) -> float:
        return self.coulomb_strength / self.nuclear_radius

    def potential(self, r: float) -> float:
        return self.v_well if r < self.nuclear_radius else self.coulomb_strength / r

    def barrier(self) -> BarrierModel1D:
        r_exit = self.coulomb_strength / self.e_alpha
        return BarrierModel1D(
            self.potential,
            self.mass,
            self.e_alpha,
            (0.0, 2.0 * max(r_exit, self.nuclear_radius)),
            hbar_c=self.constants.hbar_c,
            steps=(self.nuclear_radius,),
        )

    def with_energy(self, e_alpha: float) -> "AlphaDecayModel":
        return replace(self, e_alpha=e_alpha)

    def assault_frequency(self) -> float:
        """Wall-collision rate ``v / (2 R_n)`` in 1/s."""
        v = math.sqrt(2.0 * (self.e_alpha - self.v_well) / self.mass)  # units of c
        return v * C_FM_PER_S / (2.0 * self.nuclear_radius)


def coulomb_exponent_closed_form(model: AlphaDecayModel) -> float:
    """Exact ``S`` for the Coulomb tail between ``R_n`` and the outer turning point."""
    b = model.coulomb_strength / model.e_alpha
    k = math.sqrt(2.0 * model.mass * model.e_alpha) / model.constants.hbar_c
    x = model.nuclear_radius / b
    return k * b * (math.acos(math.sqrt(x)) - math.sqrt(x * (1.0 - x)))


class SweepRow(NamedTuple):
    energy: float
    two_s: float
    log10_p: float
    log10_tau: float
    flag: str = ""


def lifetime_sweep(template: AlphaDecayModel, energies: Sequence[float]) -> list[SweepRow]:
    """Tabulate ``2S``, ``log10 P`` and ``log10 tau`` (seconds) against energy.

    ``tau = 1 / (nu P)`` with the assault frequency ``nu`` of
    :meth:`AlphaDecayModel.assault_frequency`. Energies at or above the
    barrier top yield a row flagged ``"no barrier"`` with NaN entries.
    """
    energies = sorted(float(e) for e in energies)
    if any(not (math.isfinite(e) and e > 0.0) for e in energies):
        raise ValueError("energies must be finite and strictly positive")
    rows = []
    for e in energies:
        if e >= template.barrier_top:
            rows.append(SweepRow(e, math.nan, math.nan, math.nan, "no barrier"))
            continue
        model = template.with_energy(e)
        two_s = 2.0 * wkb_exponent(model.barrier())
        log10_p = -two_s / math.log(10.0)
        log10_tau = -math.log10(model.assault_frequency()) - log10_p
        rows.append(SweepRow(e, two_s, log10_p, log10_tau))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("E_MeV,two_S,log10_P,log10_tau_s\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row[:4]) + "\n")
