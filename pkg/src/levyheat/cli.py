"""Command line scenario runner.

``levyheat run <config>`` executes the requested verification suites and
writes ``report.json``, one CSV (plus a ``.schema.json`` column sidecar) per
plotted curve and binary kernel snapshots into the output directory.
``levyheat diff`` compares two snapshots and ``levyheat dump-tables``
prints the symbol table of a scenario's profile.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
import traceback
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import free_kernel as fk
from . import kato, oracle, perturbation, profiles, snapshot, symbol
from .config import DEPENDENCIES, SUITES, Scenario, load_scenario
from .errors import ConfigurationError, LevyHeatError, ScopeWarning
from .fitting import FittedConstant

log = logging.getLogger("levyheat")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


# Output helpers --------------------------------------------------------------------


def _plain(obj: Any) -> Any:
    """JSON-ready copy: numpy scalars and arrays become Python values, non-finite floats strings."""
    if isinstance(obj, FittedConstant):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def write_curve(out: Path, name: str, columns: Sequence[tuple[str, str]], rows: Iterable[Sequence[Any]]) -> Path:
    """``<name>.csv`` with a header row and ``<name>.schema.json`` describing each column."""
    path = out / f"{name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([c for c, _ in columns])
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    schema = {"file": path.name, "columns": [{"name": c, "description": d} for c, d in columns]}
    (out / f"{name}.schema.json").write_text(json.dumps(schema, indent=2))
    return path


def _constants(*items: Any) -> list[FittedConstant]:
    """Flatten fitted constants returned as singletons, tuples or dicts."""
    out: list[FittedConstant] = []
    for item in items:
        if isinstance(item, FittedConstant):
            out.append(item)
        elif isinstance(item, dict):
            out += _constants(*item.values())
        elif isinstance(item, (list, tuple)):
            out += _constants(*item)
    return out


# Suite plumbing --------------------------------------------------------------------------


@dataclass
class Context:
    scenario: Scenario
    out: Path
    seed: int
    threads: int
    state: dict[str, Any] = field(default_factory=dict)

    @property
    def tol(self) -> Callable[[str], float]:
        return lambda key: float(self.scenario[f"tolerances.{key}"])

    def table(self) -> symbol.SymbolTable:
        if "table" not in self.state:
            sc = self.scenario
            self.state["table"] = symbol.build_symbol_table(sc.profile(), t_min=float(sc["time.t_min"]), t0=float(sc["time.t0"]))
        return self.state["table"]

    def torus(self) -> perturbation.Torus:
        if "torus" not in self.state:
            sc = self.scenario
            self.state["torus"] = perturbation.default_torus(self.table(), sc.get("grid.n"), sc.get("grid.x_max"))
        return self.state["torus"]


@dataclass
class SuiteResult:
    assertions: dict[str, bool] = field(default_factory=dict)
    constants: list[FittedConstant] = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    def check(self, name: str, value: Any) -> None:
        self.assertions[name] = bool(value)

    def require_stable(self, constants: Iterable[FittedConstant]) -> None:
        for c in constants:
            self.constants.append(c)
            self.check(f"{c.name}_stable", c.stable)

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "assertions": dict(sorted(self.assertions.items())),
            "constants": [c.to_dict() for c in self.constants],
            **self.data,
            "files": self.files,
        }


def suite_conditions(ctx: Context) -> SuiteResult:
    prof = ctx.scenario.profile()
    tol = ctx.tol("stability")
    res = SuiteResult()
    for name, fn in (("A", profiles.check_condition_A), ("B", profiles.check_condition_B), ("C", profiles.check_condition_C)):
        rep = fn(prof, tolerance=tol)
        res.data[f"condition_{name}"] = rep.to_dict()
        res.check(f"condition_{name}", rep.passed)
    base, wit = profiles.local_ratio_constant(prof, 1.0, level=0)
    fine, _ = profiles.local_ratio_constant(prof, 1.0, level=1)
    res.require_stable([FittedConstant("local_ratio", "upper", base, fine, wit, tol)])
    return res


def suite_symbol(ctx: Context) -> SuiteResult:
    table = ctx.table()
    prof = table.profile
    tol = ctx.tol("stability")
    res = SuiteResult()
    if prof.family == "fractional":
        exact = symbol.stable_constant(prof.alpha, prof.dim)
        err = abs(float(table.phi(1.0)) / exact - 1.0)
        res.data["phi_at_one"] = {"value": float(table.phi(1.0)), "closed_form": exact, "relative_error": err}
        res.check("phi_closed_form", err <= ctx.tol("symbol"))
    fits = _constants(
        symbol.check_asymptotic_psi(table),
        symbol.check_h_vs_H(table),
        symbol.check_doubling_h(table),
        symbol.check_f_of_h(table),
        symbol.check_psi_moment(table),
        symbol.check_lower_phi(table),
        symbol.check_h_integrals(table),
    )
    for c in fits:
        c.tolerance = tol
    res.require_stable(fits)
    path = ctx.out / "symbol_table.csv"
    path.write_text(table.to_csv())
    (ctx.out / "symbol_table.schema.json").write_text(
        json.dumps({"file": path.name, "columns": [{"name": "quantity", "description": "phi, psi, psi_inv, h, H or g"}, {"name": "argument", "description": "u, r, s or t"}, {"name": "value", "description": "tabulated value"}]}, indent=2)
    )
    res.files.append(path.name)
    return res


def suite_kernel(ctx: Context) -> SuiteResult:
    table = ctx.table()
    prof = table.profile
    t0 = table.t0
    tol = ctx.tol("stability")
    res = SuiteResult()
    ck_times = (0.2 * t0, 0.3 * t0, 0.5 * t0)
    spec = fk.resolving_grid(table, ck_times[0])
    kernel = fk.free_density_grid(table, ck_times, spec, threads=ctx.threads)
    ck = fk.chapman_kolmogorov_residual(kernel, ck_times[0], ck_times[1])
    res.data["chapman_kolmogorov"] = {"s": ck_times[0], "t": ck_times[1], "residual": ck, "dx": spec.dx, "x_max": spec.x_max}
    res.check("chapman_kolmogorov", ck <= ctx.tol("ck"))
    # the published slice lives on the default grid, sized for t0
    t_snap = t0
    kernel = fk.free_density_grid(table, t_snap, fk.default_grid(table), threads=ctx.threads)
    spec = kernel.spec
    res.data["mass_defect"] = float(kernel.mass_defect[0])
    res.data["aliasing_bound"] = float(kernel.aliasing_bound[0])
    if prof.family == "fractional" and prof.alpha == 1.0 and prof.dim == 1:
        x = kernel.axis()
        inner = np.abs(x) <= 10.0
        exact = t_snap / ((math.pi * t_snap) ** 2 + x[inner] ** 2)
        err = float(np.max(np.abs(kernel.slice(t_snap)[inner] / exact - 1.0)))
        res.data["closed_form"] = {"t": t_snap, "max_relative_error": err, "range": 10.0}
        res.check("closed_form_slice", err <= 1e-5)
    fits = _constants(
        fk.check_two_sided(table, ctx.scenario["time.fractions"], tolerance=tol),
        fk.check_translation(table, tolerance=tol),
        fk.check_3g(table, tolerance=tol),
        fk.check_4g(table, tolerance=tol),
        fk.check_envelope_comparability(table, tolerance=tol),
        fk.check_envelope_split(table, tolerance=tol),
        fk.check_difference(table, tolerance=tol),
        fk.check_derivative(table, tolerance=tol),
    )
    res.require_stable(fits)
    if prof.dim == 1:
        t = 0.2 * t0
        h = float(table.h(t))
        pts = h * np.array([0.1, 0.3, 1.0, 3.0, 10.0])
        worst, used = fk.gradient_fd_discrepancy(table, t, pts, 1e-3 * h)
        res.data["gradient_check"] = {"t": t, "max_relative_gap": worst, "points": used}
        res.check("gradient_finite_difference", used > 0 and worst <= 1e-5)
    stride = max(1, spec.n // 4096)
    k = kernel.index(t_snap)
    ax = kernel.axis()[::stride]
    if prof.dim == 1:
        rows = ((t_snap, float(xv), float(pv)) for xv, pv in zip(ax, kernel.values[k][::stride]))
        write_curve(ctx.out, "kernel_slice", [("t", "time"), ("x1", "position"), ("p", "free kernel p(t, x)")], rows)
        res.files.append("kernel_slice.csv")
    snapshot.write_snapshot(ctx.out / "kernel.bin", snapshot.kernel_snapshot(kernel, t_snap))
    res.files.append("kernel.bin")
    return res


def suite_kato(ctx: Context) -> SuiteResult:
    table = ctx.table()
    q = ctx.scenario.potential()
    a = float(ctx.scenario["kato.a"])
    tol = ctx.tol("stability")
    res = SuiteResult()
    rep = kato.kato_membership(table, q, a, seed=ctx.seed, check_agreement=False)
    res.data["membership"] = rep.to_dict()
    res.check("verdicts_agree", rep.verdict == rep.time_verdict)
    rows = zip(rep.r_sequence, rep.I_values, rep.t_sequence, rep.time_form_values)
    write_curve(
        ctx.out,
        "kato_decay",
        [("r", "ball radius"), ("I_r", "sup over centres of the ball integral of V|q|"), ("t", "matched time 1/Psi(1/r)"), ("time_form", "sup over centres of the time-form integral")],
        rows,
    )
    res.files.append("kato_decay.csv")
    diagnostics = kato.check_potential_kernel(table, a, tolerance=tol)
    res.constants += _constants(diagnostics)
    res.data["potential_kernel_note"] = "potential-kernel comparison constants are reported, not asserted"
    if q.locally_integrable:
        res.require_stable(
            _constants(
                kato.check_spacetime_convolution(table, q, a, seed=ctx.seed, tolerance=tol),
                kato.check_convolution_bound(table, q, seed=ctx.seed, tolerance=tol),
            )
        )
    return res


def _probes(ctx: Context, torus: perturbation.Torus, t: float) -> np.ndarray:
    pts = perturbation.default_probes(torus, t)
    if "oracle" in ctx.scenario.suites and torus.dim in oracle.MAX_POINTS:
        spec = fk.GridSpec(torus.dim, int(ctx.scenario["grid.oracle_n"]), torus.spec.x_max)
        extra = oracle.oracle_probes(spec)
        pts = np.unique(np.concatenate([pts, extra]), axis=0)
    return pts


def suite_perturbation(ctx: Context) -> SuiteResult:
    sc = ctx.scenario
    torus = ctx.torus()
    q = sc.potential()
    t = float(sc["time.t"])
    res = SuiteResult()
    horizons = np.sort(np.asarray(sc["time.horizons"], dtype=float)) if sc["time.horizons"] is not None else perturbation.default_horizons(torus)
    probes = _probes(ctx, torus, t)
    rk = perturbation.relative_kato_estimate(torus, q, horizons, probes)
    s_ck = round(0.4 * t, 12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ScopeWarning)
        pk = perturbation.perturbed_kernel(torus, q, t, ctx.tol("series"), rk, probes, extra_times=(s_ck, t - s_ck))
        free = perturbation.perturbed_kernel(torus, kato.constant(0.0, torus.dim), t, ctx.tol("series"), probes=probes, extra_times=(s_ck, t - s_ck))
    ctx.state.update(pk=pk, rk=rk)
    th1 = perturbation.check_perturbed_bounds(pk, rk, ctx.tol("slack"))
    ck_free = perturbation.chapman_kolmogorov(free, s_ck, t - s_ck)
    ck = perturbation.chapman_kolmogorov(pk, s_ck, t - s_ck)
    th1["chapman_kolmogorov"] = {"s": s_ck, "t": t - s_ck, "free_residual": ck_free, "residual": ck}
    th1["relative_kato"] = rk.to_dict()
    th1["series"] = {k: v for k, v in pk.to_dict().items() if k != "probes"}
    res.data["theorem1"] = th1
    res.check("ratio_bounds_ok", th1["ratio_bounds_ok"])
    res.check("positive", th1["positive"])
    res.check("symmetric", th1["symmetry_residual"] <= 1e-4)
    res.check("term_bounds_hold", th1["term_bounds_hold"])
    res.check("relative_kato_shape_holds", th1["relative_kato_shape_holds"])
    res.check("fixed_point", pk.fixed_point_change <= pk.tail_bound + 1e-4)
    res.check("free_chapman_kolmogorov", ck_free <= ctx.tol("ck"))
    res.check("chapman_kolmogorov", ck <= 10 * ctx.tol("ck"))
    write_curve(
        ctx.out,
        "relative_kato",
        [("t", "horizon"), ("kappa", "sup over probes of p_1^{|q|} / p"), ("envelope", "fitted eta_fit + beta t")],
        zip(rk.horizons, rk.kappa, rk.envelope(rk.horizons)),
    )
    p = pk.free_values()
    pt = pk.grid_values()
    ok = perturbation._trusted(torus, p, pk.coefficients())
    stride = max(1, torus.spec.n // 256)
    ax = torus.spec.axis()

    def ratio_rows():
        for j, y in enumerate(pk.probes):
            line = (p[j], pt[j], ok[j]) if torus.dim == 1 else (p[j][:, torus.spec.n // 2], pt[j][:, torus.spec.n // 2], ok[j][:, torus.spec.n // 2])
            for i in range(0, torus.spec.n, stride):
                if line[2][i]:
                    yield float(y[0]), float(ax[i]), float(line[1][i] / line[0][i]), th1["lower_bound"], th1["upper_bound"]

    write_curve(
        ctx.out,
        "comparability",
        [("y1", "probe source (first coordinate)"), ("x1", "target (first coordinate)"), ("ratio", "p~ / p"), ("lower", "lower bound"), ("upper", "upper bound")],
        ratio_rows(),
    )
    res.files += ["relative_kato.csv", "comparability.csv"]
    snapshot.write_snapshot(ctx.out / "perturbed.bin", snapshot.perturbed_snapshot(pk))
    res.files.append("perturbed.bin")
    return res


def suite_regularity(ctx: Context) -> SuiteResult:
    sc = ctx.scenario
    pk = ctx.state["pk"]
    torus = pk.torus
    a = float(sc["regularity.a"])
    tol = ctx.tol("stability")
    res = SuiteResult()
    n_ref = sc.get("grid.refined_n", 2 * torus.spec.n)
    fine = perturbation.Torus(torus.table, fk.GridSpec(torus.dim, int(n_ref), torus.spec.x_max))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ScopeWarning)
        refined = perturbation.perturbed_kernel(fine, pk.q, pk.t, ctx.tol("series"), probes=pk.probes)
    rep = perturbation.regularity_report(pk, a=a, refined=refined)
    grad = rep["gradient"]
    grad_const = FittedConstant("gradient_constant", "upper", float(grad["value"]), float(grad["refined"]), grad["witness"], tol)
    rep["gradient"] = grad_const.to_dict()
    res.check("holder_exponent", rep["holder_holds"])
    if rep["gradient_applicable"]:
        res.require_stable([grad_const])
    else:
        res.constants.append(grad_const)
    integrals = []
    for a_int in (1.5, 2.0):
        for c in perturbation.check_time_integrals(torus.table, a_int, tolerance=tol):
            c.name = f"{c.name}_a{a_int:g}"
            integrals.append(c)
    res.require_stable(integrals)
    rep["time_integrals"] = [c.to_dict() for c in integrals]
    res.data["theorem2"] = rep
    write_curve(
        ctx.out,
        "holder",
        [("delta", "shift |z - x|"), ("D", "sup of the envelope-normalised difference"), ("delta_over_h", "shift in units of h(t)")],
        zip(rep["holder_deltas"], rep["holder_sup"], np.asarray(rep["holder_deltas"]) / float(torus.table.h(pk.t))),
    )
    res.files.append("holder.csv")
    return res


def suite_oracle(ctx: Context) -> SuiteResult:
    sc = ctx.scenario
    pk = ctx.state["pk"]
    torus = pk.torus
    res = SuiteResult()
    spec = fk.GridSpec(torus.dim, int(sc["grid.oracle_n"]), torus.spec.x_max)
    gen = oracle.discretize_generator(torus.table.profile, spec)
    A = gen.matrix
    off = A - np.diag(np.diag(A))
    res.data["generator"] = {
        "symmetry": float(np.max(np.abs(A - A.T))),
        "row_sum": float(np.max(np.abs(A.sum(axis=1)))),
        "min_off_diagonal": float(off.min()),
        "jump_rate": gen.jump_rate,
        "diffusion_rate": gen.diffusion_rate,
    }
    res.check("generator_symmetric", res.data["generator"]["symmetry"] <= 1e-12 * np.abs(A).max())
    res.check("generator_row_sums", res.data["generator"]["row_sum"] <= 1e-9 * np.abs(A).max())
    res.check("generator_rates_nonnegative", res.data["generator"]["min_off_diagonal"] >= 0)
    ok = oracle.oracle_kernel(gen, pk.q, pk.t)
    cmp_ = oracle.compare_with_series(ok, pk)
    res.data["comparison"] = cmp_
    res.check("median_error", cmp_["median_relative_error"] <= ctx.tol("oracle_median"))
    res.check("max_error", cmp_["max_relative_error"] <= ctx.tol("oracle_max"))
    snapshot.write_snapshot(ctx.out / "oracle.bin", snapshot.oracle_snapshot(ok, pk.t))
    res.files.append("oracle.bin")
    return res


def space_time_bump(t_lo: float, t_hi: float, radius: float, dim: int) -> Callable[[float, np.ndarray], np.ndarray]:
    """Smooth ``phi(t, y)`` supported in ``(t_lo, t_hi) x B(0, radius)`` with maximum ``e^-2``."""

    def bump(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1, np.exp(-1.0 / np.maximum(1.0 - u**2, 1e-300)), 0.0)

    mid, half = 0.5 * (t_lo + t_hi), 0.5 * (t_hi - t_lo)

    def phi(t: float, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        r = np.abs(y) if dim == 1 else np.linalg.norm(y, axis=-1)
        return bump((t - mid) / half) * bump(r / radius)

    return phi


def suite_weak_solution(ctx: Context) -> SuiteResult:
    sc = ctx.scenario
    torus = ctx.torus()
    q = sc.potential()
    t0 = torus.table.t0
    res = SuiteResult()
    s = 0.2 * t0
    phi = space_time_bump(0.05 * t0, 0.95 * t0, min(3.0, 0.3 * torus.spec.x_max), torus.dim)
    sup = math.exp(-2.0)
    x = np.zeros(torus.dim)
    tol = ctx.tol("series")
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ScopeWarning)
        for label, uniform, series_tol in (("default", 128, tol), ("refined", 256, tol / 100)):
            pk = perturbation.perturbed_kernel(torus, q, t0, series_tol, ctx.state.get("rk"), x[None], uniform=uniform)
            out[label] = {"uniform_steps": uniform, "series_tol": series_tol, "residual": perturbation.weak_solution_residual(pk, q, phi, s, x)}
    r0, r1 = abs(out["default"]["residual"]), abs(out["refined"]["residual"])
    # residuals at rounding level cannot halve further
    floor = 1e-10 * sup
    res.data["weak_solution"] = {"s": s, "x": x.tolist(), "phi_sup": sup, **out}
    res.check("residual_small", r0 <= ctx.tol("weak") * sup)
    res.check("residual_halves", r1 <= 0.5 * r0 or max(r0, r1) <= floor)
    return res


SUITE_FUNCTIONS: dict[str, Callable[[Context], SuiteResult]] = {
    "conditions": suite_conditions,
    "symbol": suite_symbol,
    "kernel": suite_kernel,
    "kato": suite_kato,
    "perturbation": suite_perturbation,
    "regularity": suite_regularity,
    "oracle": suite_oracle,
    "weak_solution": suite_weak_solution,
}

# verification results surfaced at the top level of the report
_TOP_LEVEL = {"perturbation": "theorem1", "regularity": "theorem2", "weak_solution": "weak_solution"}


def run_scenario(scenario: Scenario, out: str | Path | None = None, seed: int | None = None, threads: int = 1) -> tuple[int, dict[str, Any]]:
    """Run the scenario's suites in dependency order and write ``report.json``.

    Returns the exit status (0 iff every assertion of every suite holds)
    and the report. A suite whose prerequisite failed with an error is
    skipped and marked failed; errors inside one suite do not stop the
    independent ones.
    """
    out = Path(out if out is not None else scenario["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(scenario["seed"] if seed is None else seed)
    perturbation.THREADS = threads
    ctx = Context(scenario, out, seed, threads)
    report: dict[str, Any] = {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    if scenario.suites:
        report.update(scenario=scenario.to_dict(), seed=seed, suites={})
    status = EXIT_OK
    for name in SUITES:
        if name not in scenario.suites:
            continue
        missing = [d for d in DEPENDENCIES.get(name, ()) if report["suites"].get(d, {}).get("error")]
        if missing:
            report["suites"][name] = {"passed": False, "error": f"prerequisite suite failed: {', '.join(missing)}"}
            status = EXIT_FAILED
            continue
        log.info("suite %s", name)
        start = time.perf_counter()
        try:
            res = SUITE_FUNCTIONS[name](ctx)
            entry = _plain(res.to_dict())
            entry["error"] = None
        except (LevyHeatError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            log.error("suite %s failed: %s", name, exc)
            log.debug("%s", traceback.format_exc())
            entry = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
        log.info("suite %s %s in %.1f s", name, "passed" if entry["passed"] else "FAILED", time.perf_counter() - start)
        if name in _TOP_LEVEL and _TOP_LEVEL[name] in entry:
            report[_TOP_LEVEL[name]] = entry.pop(_TOP_LEVEL[name])
        report["suites"][name] = entry
        if not entry["passed"]:
            status = EXIT_FAILED
    if scenario.suites:
        report["passed"] = status == EXIT_OK
    (out / "report.json").write_text(json.dumps(_plain(report), indent=2, sort_keys=True))
    return status, report


# Entry point ---------------------------------------------------------------------------------


def _threads(arg: int | None) -> int:
    env = os.environ.get("LEVYHEAT_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"LEVYHEAT_THREADS must be an integer, got {env!r}") from exc
    else:
        value = 1 if arg is None else arg
    if value < 1:
        raise ConfigurationError("thread count must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyheat", description="Heat kernels of non-local Schrödinger operators and their verification suites.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the suites of a scenario file")
    run.add_argument("config", help="scenario file (dotted TOML keys)")
    run.add_argument("--out", help="output directory (default: output.dir of the scenario)")
    run.add_argument("--seed", type=int, help="seed of the random centre scans (default: scenario seed)")
    run.add_argument("--threads", type=int, help="FFT worker threads (LEVYHEAT_THREADS overrides)")
    diff = sub.add_parser("diff", help="compare two kernel snapshots")
    diff.add_argument("a")
    diff.add_argument("b")
    diff.add_argument("--tol", type=float, required=True, help="allowed maximum relative difference")
    dump = sub.add_parser("dump-tables", help="print the symbol table of the scenario profile as CSV")
    dump.add_argument("config")
    dump.add_argument("--out", help="write to this file instead of standard output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            scenario = load_scenario(args.config)
            status, _ = run_scenario(scenario, args.out, args.seed, _threads(args.threads))
            return status
        if args.command == "diff":
            result = snapshot.diff_snapshots(snapshot.read_snapshot(args.a), snapshot.read_snapshot(args.b), args.tol)
            print(json.dumps(_plain(result), indent=2, sort_keys=True))
            return EXIT_OK if result["within_tolerance"] else EXIT_FAILED
        scenario = load_scenario(args.config)
        sc = scenario
        table = symbol.build_symbol_table(sc.profile(), t_min=float(sc["time.t_min"]), t0=float(sc["time.t0"]))
        text = table.to_csv()
        if args.out:
            Path(args.out).write_text(text)
        else:
            try:
                sys.stdout.write(text)
                sys.stdout.flush()
            except BrokenPipeError:
                # reader closed early (e.g. ``| head``); silence the flush at exit
                os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"levyheat: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
