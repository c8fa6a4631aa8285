"""Scenario runner: ``quasitunnel [SUBCOMMAND] --config FILE --out DIR``.

A config file holds one INI section named after the subcommand, with flat
``key = value`` entries. Unknown keys are rejected. Every run writes
``report.txt`` (report values plus one ``CHECK`` line per verified
invariant) and, depending on the subcommand, ``trajectory_*.csv``,
``sweep.csv`` or ``cells.csv``. The exit status is 0 when every check
passes, 1 when a check fails, 2 for usage or config errors and 3 when a
solver raises.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .catalog import CATALOG, make_field, random_polynomial_2d
from .fields import PotentialFromSuperpotential, ScalarField, find_critical_points, flat_metric
from .flow import (
    FlowOptions,
    FlowProblem,
    action_closed_form,
    action_from_trajectory,
    is_descending,
    solve_flow,
    verify_second_order,
    write_trajectory_csv,
)
from .instanton import BvpProblem, compare_routes, solve_instanton
from .manifold import (
    ChartedSurface,
    manifold_action,
    manifold_flow,
    morse_cells,
    surface_critical_points,
    write_cells_csv,
)
from .wkb import (
    AlphaDecayModel,
    BarrierModel1D,
    NuclearConstants,
    coulomb_exponent_closed_form,
    lifetime_sweep,
    tunneling_probability,
    turning_points,
    wkb_exponent,
    write_sweep_csv,
)

SUBCOMMANDS = ("alpha", "wkb", "flow", "instanton", "compare", "manifold", "morse", "sweep")
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(ValueError):
    """A config or override problem, located by line and column where possible."""


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _positive(v: float) -> float:
    if not (math.isfinite(v) and v > 0.0):
        raise ValueError("must be finite and > 0")
    return v


def _nonneg_int(v: int) -> int:
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


@dataclass(frozen=True)
class Opt:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], Any]] = None
    help: str = ""


def _f(default, check=_finite, help=""):
    return Opt(float, default, check, help)


def _i(default, check=_nonneg_int, help=""):
    return Opt(int, default, check, help)


def _s(default, help=""):
    return Opt(str, default, None, help)


NUCLEAR = {
    "z1": _i(2, help="projectile charge"),
    "z2": _i(90, help="daughter charge"),
    "a_daughter": _i(234, help="daughter mass number"),
    "v_well": _f(0.0, help="well depth (MeV)"),
    "r0": _f(1.2, _positive, "radius constant (fm)"),
    "hbar_c": _f(197.327, _positive),
    "e2": _f(260.0 / 180.0, _positive),
    "m_alpha": _f(3727.38, _positive),
    "amu": _f(931.49, _positive),
    "reduced_mass": Opt(_parse_bool, True),
}
FLOW_KNOBS = {
    "rtol": _f(1e-9, _positive),
    "atol": _f(1e-13, _positive),
    "initial_offset": _f(1e-6, _positive),
    "capture_radius": _f(1e-5, _positive),
    "grad_tol": _f(1e-7, _positive),
    "escape_radius": _f(1e3, _positive),
    "max_steps": _i(1_000_000),
    "n_samples": _i(1024),
}
FIELD_KEYS = {
    "field": _s("double-well"),
    "source": _i(0, help="index into critical points sorted by W descending"),
    "target": Opt(int, -1),
    "mass": Opt(float, None, _positive, "defaults to the field's m parameter, else 1"),
    "seed": _i(0),
}
SURFACE_KEYS = {
    "surface": _s("sphere"),
    "a": _f(1.0, _positive),
    "c": _f(2.0, _positive),
    "theta_min": _f(1e-4, _positive),
    "field": _s("sphere-height"),
}

SCHEMAS: dict[str, dict[str, Opt]] = {
    "alpha": {**NUCLEAR, "e_alpha": _f(4.7, _positive)},
    "sweep": {**NUCLEAR, "e_min": _f(2.0, _positive), "e_max": _f(8.0, _positive), "n_energies": _i(25)},
    "wkb": {**FIELD_KEYS, "energy": _f(0.0), "lo": _f(-2.0), "hi": _f(2.0)},
    "flow": {**FIELD_KEYS, **FLOW_KNOBS},
    "instanton": {**FIELD_KEYS, "n_grid": _i(2048), "half_time": _f(0.0, help="0 selects omega T = 20")},
    "compare": {**FIELD_KEYS, **FLOW_KNOBS, "n_grid": _i(2048)},
    "manifold": {**SURFACE_KEYS, **FLOW_KNOBS, "source": _i(0), "target": Opt(int, -1), "phi0": _f(0.0)},
    "morse": {**SURFACE_KEYS, "n_theta": _i(32), "n_phi": _i(32), "separatrix_tol": _f(1e-3, _positive),
              "min_classified": _f(0.95)},
}
RANDOM_FIELD = "random-polynomial"


@dataclass
class Scenario:
    subcommand: str
    values: dict
    field_params: dict
    out_dir: str
    seed: int


def _locate(text: str, section: str, key: str) -> tuple[int, int]:
    """Line and column (1-based) of ``key``'s value inside ``[section]``."""
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current != section:
            continue
        m = re.match(rf"(\s*{re.escape(key)}\s*[=:]\s*)", line, flags=re.IGNORECASE)
        if m:
            return lineno, m.end() + 1
    return 0, 0


def _coerce(sub: str, key: str, raw: str, where: str) -> Any:
    opt = SCHEMAS[sub][key]
    try:
        value = opt.parse(raw.strip())
        if opt.check is not None:
            value = opt.check(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value {raw.strip()!r} for {key!r} ({exc})") from None
    return value


def _field_param_names(sub: str, values: dict) -> set:
    if "field" not in SCHEMAS[sub]:
        return set()
    name = values.get("field", SCHEMAS[sub]["field"].default)
    if name == RANDOM_FIELD or name not in CATALOG:
        return set()
    return set(CATALOG[name].defaults)


def load_scenario(config_path: Optional[str], subcommand: Optional[str], overrides: list[str],
                  out_dir: str, seed: Optional[int]) -> Scenario:
    """Parse and validate a scenario; raises :class:`ConfigError`."""
    text = ""
    sections: dict[str, dict[str, str]] = {}
    if config_path is not None:
        try:
            with open(config_path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        parser = configparser.ConfigParser(interpolation=None, default_section="\x00unused")
        parser.optionxform = str.lower
        try:
            parser.read_string(text, source=config_path)
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"{config_path}:{exc.lineno}:1: key outside any [section]") from None
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"{config_path}:{exc.lineno}:1: duplicate key {exc.option!r}") from None
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"{config_path}:{exc.lineno}:1: duplicate section {exc.section!r}") from None
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            raise ConfigError(f"{config_path}:{lineno}:1: cannot parse line {line.strip()!r}") from None
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
        if not sections:
            raise ConfigError(f"{config_path}: config is empty; expected one [subcommand] section")
        for s in sections:
            if s not in SCHEMAS:
                lineno = next((i for i, ln in enumerate(text.splitlines(), 1) if ln.strip() == f"[{s}]"), 0)
                raise ConfigError(f"{config_path}:{lineno}:2: unknown section [{s}]; expected one of {', '.join(SUBCOMMANDS)}")

    if subcommand is None:
        if len(sections) != 1:
            raise ConfigError("give the subcommand explicitly or use a config with exactly one section")
        subcommand = next(iter(sections))
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    raw = dict(sections.get(subcommand, {}))
    origin = {k: f"{config_path}:%d:%d" % _locate(text, subcommand, k) for k in raw}
    for n, item in enumerate(overrides, 1):
        if "=" not in item:
            raise ConfigError(f"--set argument {n}: expected KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip().lower()
        if "." in key:
            sec, key = key.split(".", 1)
            if sec != subcommand:
                raise ConfigError(f"--set argument {n}: section {sec!r} does not match subcommand {subcommand!r}")
        raw[key] = value
        origin[key] = f"--set argument {n}, column {len(item) - len(value) + 1}"

    schema = SCHEMAS[subcommand]
    values = {k: opt.default for k, opt in schema.items()}
    for key in raw:
        if key in schema:
            values[key] = _coerce(subcommand, key, raw[key], origin[key])
    params = {}
    allowed = _field_param_names(subcommand, values)
    for key, text_value in raw.items():
        if key in schema:
            continue
        if key not in allowed:
            known = sorted(set(schema) | allowed)
            raise ConfigError(f"{origin[key]}: unknown key {key!r} for [{subcommand}]; known keys: {', '.join(known)}")
        try:
            params[key] = _finite(float(text_value))
        except ValueError:
            raise ConfigError(f"{origin[key]}: field parameter {key!r} must be a finite number") from None
    if "field" in schema and values["field"] != RANDOM_FIELD and values["field"] not in CATALOG:
        raise ConfigError(
            f"{origin.get('field', subcommand)}: unknown field {values['field']!r}; "
            f"known: {', '.join(sorted(CATALOG) + [RANDOM_FIELD])}"
        )
    if "surface" in schema and values["surface"] not in ("sphere", "spheroid"):
        raise ConfigError(f"{origin.get('surface', subcommand)}: unknown surface {values['surface']!r}")
    if seed is None:
        seed = values.get("seed", 0)
    return Scenario(subcommand, values, params, out_dir, int(seed))


def fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


@dataclass
class Report:
    title: str
    lines: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    def value(self, key: str, v) -> None:
        self.lines.append(f"{key} = {fmt(v)}")

    def block(self, text: str) -> None:
        self.lines.extend(text.rstrip("\n").splitlines())

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def render(self) -> str:
        out = [f"# quasitunnel {self.title}"] + self.lines
        for name, ok, detail in self.checks:
            out.append(f"CHECK {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else ""))
        return "\n".join(out) + "\n"


def _nuclear_model(v: dict, energy: float) -> AlphaDecayModel:
    consts = NuclearConstants(v["hbar_c"], v["e2"], v["m_alpha"], v["amu"], v["reduced_mass"])
    return AlphaDecayModel(v["z1"], v["z2"], v["a_daughter"], energy, v["v_well"], v["r0"], consts)


def _flat_field(sc: Scenario):
    """The field and its critical points (sorted by W descending)."""
    v = sc.values
    if v["field"] == RANDOM_FIELD:
        W, cps = random_polynomial_2d(np.random.default_rng(sc.seed))
    else:
        entry = CATALOG[v["field"]]
        if entry.kind != "flat":
            raise ConfigError(f"field {v['field']!r} lives on a surface; use the manifold or morse subcommand")
        W = make_field(v["field"], **sc.field_params)
        cps = find_critical_points(W, entry.box, 9)
    if v["mass"] is None:
        v["mass"] = float(W.params.get("m", 1.0))
    return W, cps


def _pick(cps, idx: int, what: str):
    try:
        return cps[idx]
    except IndexError:
        raise ConfigError(f"{what} index {idx} out of range; the field has {len(cps)} critical points") from None


def _flow_options(v: dict, **extra) -> FlowOptions:
    return FlowOptions(**{k: v[k] for k in FLOW_KNOBS}, **extra)


def run_alpha(sc: Scenario, out: str, rep: Report) -> None:
    model = _nuclear_model(sc.values, sc.values["e_alpha"])
    barrier = model.barrier()
    r_in, r_out = turning_points(barrier)
    s = wkb_exponent(barrier)
    s_exact = coulomb_exponent_closed_form(model)
    p = tunneling_probability(barrier)
    rep.value("nuclear_radius_fm", model.nuclear_radius)
    rep.value("r_in_fm", r_in)
    rep.value("r_out_fm", r_out)
    rep.value("mass_MeV", model.mass)
    rep.value("two_S", 2.0 * s)
    rep.value("two_S_closed_form", 2.0 * s_exact)
    rep.value("log10_P", p.log10)
    rep.value("P_mantissa", p.mantissa)
    rep.value("P_exponent", p.exponent)
    rel = abs(s - s_exact) / s_exact
    rep.check("quadrature_vs_closed_form", rel <= 1e-6, f"relative difference {rel:.3g}")
    miss = abs(barrier.excess(r_out))
    rep.check("outer_turning_point", miss <= 1e-9 * barrier.energy, f"|V - E| = {miss:.3g} MeV")


def run_sweep(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    if v["n_energies"] < 1 or v["e_max"] < v["e_min"]:
        raise ConfigError("need n_energies >= 1 and e_max >= e_min")
    energies = np.linspace(v["e_min"], v["e_max"], v["n_energies"])
    rows = lifetime_sweep(_nuclear_model(v, float(energies[0])), energies)
    write_sweep_csv(rows, os.path.join(out, "sweep.csv"))
    good = [r for r in rows if not r.flag]
    rep.value("rows", len(rows))
    rep.value("rows_without_barrier", len(rows) - len(good))
    if good:
        span = max(r.log10_tau for r in good) - min(r.log10_tau for r in good)
        rep.value("log10_tau_span", span)
    two_s = [r.two_s for r in good]
    rep.check("two_S_decreasing_in_E", all(b < a for a, b in zip(two_s, two_s[1:])))


def run_wkb(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    W, cps = _flat_field(sc)
    if W.dimension != 1:
        raise ConfigError("the wkb subcommand needs a one-dimensional field")
    pfs = PotentialFromSuperpotential(W, flat_metric(1, v["mass"]))
    model = BarrierModel1D(lambda x: pfs.value(np.array([x])), v["mass"], v["energy"], (v["lo"], v["hi"]))
    limits = None
    if v["energy"] == 0.0:
        # zeros of V touch E = 0 without a sign change: integrate between critical points
        a, b = _pick(cps, v["source"], "source"), _pick(cps, v["target"], "target")
        limits = tuple(sorted((float(a.location[0]), float(b.location[0]))))
    s = wkb_exponent(model, limits=limits)
    rep.value("S", s)
    rep.value("log10_P", tunneling_probability(model, limits=limits).log10)
    if limits is not None:
        dw = action_closed_form(W, a, b)
        rep.value("s_closed_form", dw)
        rel = abs(s - dw) / dw if dw > 0 else abs(s)
        rep.check("wkb_equals_dW", rel <= 1e-6, f"relative difference {rel:.3g}")
    rep.check("S_nonnegative", s >= 0.0)


def _write_traj(traj, out: str, name: str) -> None:
    write_trajectory_csv(traj, os.path.join(out, f"trajectory_{name}.csv"))


def run_flow(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    W, cps = _flat_field(sc)
    a, b = _pick(cps, v["source"], "source"), _pick(cps, v["target"], "target")
    metric = flat_metric(W.dimension, v["mass"])
    sign = 1 if a.w_value >= b.w_value else -1
    outcome = solve_flow(FlowProblem(W, a, b, sign, metric, cps, _flow_options(v)))
    _write_traj(outcome.trajectory, out, "flow")
    pfs = PotentialFromSuperpotential(W, metric)
    s_closed = action_closed_form(W, a, b)
    rep.value("flow_status", outcome.status.value)
    rep.value("s_closed_form", s_closed)
    rep.check("flow_converged", outcome.converged)
    if not outcome.converged:
        return
    traj = outcome.trajectory
    s_quad = action_from_trajectory(traj, pfs)
    resid = verify_second_order(traj, pfs)
    rep.value("s_quadrature", s_quad)
    rep.value("residual_second_order", resid)
    w = sign * W.values(traj.x)
    rep.check("identity_quadrature_vs_closed_form", abs(s_quad - s_closed) <= 1e-4 * s_closed,
              f"relative difference {abs(s_quad - s_closed) / s_closed:.3g}")
    rep.check("flow_solves_second_order", resid <= 1e-3, f"residual {resid:.3g}")
    rep.check("monotone_descent", is_descending(w))
    if W.dimension == 1:
        lim = tuple(sorted((float(a.location[0]), float(b.location[0]))))
        model = BarrierModel1D(lambda x: pfs.value(np.array([x])), v["mass"], 0.0, lim)
        s_wkb = wkb_exponent(model, limits=lim)
        rep.value("s_wkb", s_wkb)
        rep.check("wkb_equals_dW", abs(s_wkb - s_closed) <= 1e-6 * s_closed,
                  f"relative difference {abs(s_wkb - s_closed) / s_closed:.3g}")


def run_instanton(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    W, cps = _flat_field(sc)
    a, b = _pick(cps, v["source"], "source"), _pick(cps, v["target"], "target")
    pfs = PotentialFromSuperpotential(W, flat_metric(W.dimension, v["mass"]))
    kwargs = {"n_grid": v["n_grid"]}
    if v["half_time"] > 0.0:
        kwargs["half_time"] = v["half_time"]
    res = solve_instanton(BvpProblem.from_superpotential(pfs, a, b, **kwargs))
    _write_traj(res.trajectory, out, "instanton")
    vmax = float(np.max(pfs.as_scalar_field().values(res.trajectory.x)))
    rep.value("s_second_order", res.action)
    rep.value("s_closed_form", action_closed_form(W, a, b))
    rep.value("euclidean_energy_drift", res.energy_drift)
    rep.value("newton_residual", res.residual)
    rep.value("iterations", res.iterations)
    rep.check("energy_conserved", res.energy_drift <= 1e-6 * max(vmax, 1e-300),
              f"drift {res.energy_drift:.3g}, max V {vmax:.6g}")
    s_closed = action_closed_form(W, a, b)
    rep.check("bound_s_ge_dW", res.action >= s_closed - 1e-4 * s_closed)


def run_compare(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    W, cps = _flat_field(sc)
    a, b = _pick(cps, v["source"], "source"), _pick(cps, v["target"], "target")
    report, details = compare_routes(W, a, b, mass=v["mass"], flow_options=_flow_options(v),
                                     critical_points=cps, n_grid=v["n_grid"], check=False)
    if "flow" in details:
        _write_traj(details["flow"].trajectory, out, "flow")
    _write_traj(details["instanton"].trajectory, out, "instanton")
    rep.block(report.as_text())
    s0, s2 = report.s_closed_form, report.s_second_order
    rep.check("bound_s_ge_dW", s2 >= s0 - 1e-4 * s0, f"s_second_order - s_closed_form = {s2 - s0:.3g}")
    if report.flow_status == "converged":
        rep.check("bps_equality", abs(s2 - s0) <= 1e-3 * s0, f"relative difference {abs(s2 - s0) / s0:.3g}")
        rep.check("identity_quadrature_vs_closed_form", abs(report.s_quadrature - s0) <= 1e-4 * s0)


def _surface(v: dict) -> ChartedSurface:
    if v["surface"] == "sphere":
        return ChartedSurface.sphere(theta_min=v["theta_min"])
    return ChartedSurface.spheroid(v["a"], v["c"], theta_min=v["theta_min"])


def _surface_field(sc: Scenario) -> ScalarField:
    name = sc.values["field"]
    if CATALOG[name].kind != "surface":
        raise ConfigError(f"field {name!r} is not defined on a surface")
    return make_field(name, **sc.field_params)


def run_manifold(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    surf, W = _surface(v), _surface_field(sc)
    cps = surface_critical_points(surf, W)
    a, b = _pick(cps, v["source"], "source"), _pick(cps, v["target"], "target")
    outcome = manifold_flow(surf, W, a, b, _flow_options(v), critical_points=cps, phi0=v["phi0"])
    _write_traj(outcome.trajectory, out, "manifold")
    s_closed = action_closed_form(W, a, b)
    rep.value("surface", surf.name)
    rep.value("flow_status", outcome.status.value)
    rep.value("s_closed_form", s_closed)
    rep.check("flow_converged", outcome.converged)
    if outcome.converged:
        s = manifold_action(outcome.trajectory, surf, W)
        rep.value("s_quadrature", s)
        rep.check("metric_independent_action", abs(s - s_closed) <= 1e-5 * s_closed,
                  f"relative difference {abs(s - s_closed) / s_closed:.3g}")
        rep.check("monotone_descent", is_descending(W.values(outcome.trajectory.x)))


def run_morse(sc: Scenario, out: str, rep: Report) -> None:
    v = sc.values
    surf, W = _surface(v), _surface_field(sc)
    dec = morse_cells(surf, W, (v["n_theta"], v["n_phi"]), separatrix_tol=v["separatrix_tol"])
    write_cells_csv(dec, os.path.join(out, "cells.csv"))
    rep.value("critical_points", len(dec.critical_points))
    for k, cp in enumerate(dec.critical_points):
        rep.value(f"critical_point_{k}", f"{fmt(cp.location[0])} {fmt(cp.location[1])} index={cp.morse_index}")
    rep.value("cells", len(dec.cells))
    for cell in dec.cells:
        rep.value(f"cell_{cell.source_id}_{cell.sink_id}", len(cell.members))
    rep.value("classified_fraction", dec.classified_fraction)
    total = sum(len(c.members) for c in dec.cells) + len(dec.unclassified)
    rep.check("cells_partition_seeds", total == len(dec.seeds))
    rep.check("classified_fraction", dec.classified_fraction >= v["min_classified"],
              f"{dec.classified_fraction:.4f} >= {v['min_classified']:g}")


RUNNERS = {
    "alpha": run_alpha,
    "sweep": run_sweep,
    "wkb": run_wkb,
    "flow": run_flow,
    "instanton": run_instanton,
    "compare": run_compare,
    "manifold": run_manifold,
    "morse": run_morse,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasitunnel", description="Tunneling exponents by WKB, flow and relaxation.")
    p.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                   help="scenario type (default: the single section of the config)")
    p.add_argument("--config", metavar="PATH", help="INI file with one [subcommand] section")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                   help="override a config key; repeatable")
    p.add_argument("--seed", type=int, help="seed for randomized fields")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(config_path: Optional[str], subcommand: Optional[str] = None, overrides=(), out_dir: str = ".",
        seed: Optional[int] = None) -> int:
    """Execute one scenario; returns the process exit status."""
    try:
        if config_path is None and subcommand is None:
            raise ConfigError("nothing to run: give a subcommand or --config")
        sc = load_scenario(config_path, subcommand, list(overrides), out_dir, seed)
    except ConfigError as exc:
        print(f"quasitunnel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    os.makedirs(out_dir, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".quasitunnel-", dir=out_dir)
    rep = Report(sc.subcommand)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            RUNNERS[sc.subcommand](sc, staging, rep)
        for w in caught:
            rep.lines.append(f"warning = {w.category.__name__}: {w.message}")
        with open(os.path.join(staging, "report.txt"), "w", newline="") as fh:
            fh.write(rep.render())
        for name in sorted(os.listdir(staging)):
            os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
    except ConfigError as exc:
        print(f"quasitunnel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # solver failure: report with module context, keep no partial output
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"quasitunnel: {sc.subcommand} failed in {module}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    sys.stdout.write(rep.render())
    return EXIT_OK if rep.passed else EXIT_CHECK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.config, args.subcommand, args.overrides, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
