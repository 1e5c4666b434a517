"""Orchestration of configured runs: evaluation, result tables and manifests.

Points of a sweep are evaluated independently (optionally in a process
pool) and only the parent process writes files. Every table is rendered
with a fixed number format, so the CSV bodies do not depend on the worker
count.
"""

from __future__ import annotations

import json
import math
import os
import platform
import tempfile
import time
import warnings
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig
from .decoherence import (
    ThermalEnv,
    coherence_budget,
    purcell_exact,
    purcell_perturbative,
    shot_noise_rate,
)
from .dispersive import TRUNCATION_EXTRA, coupling_matrix, stark_lamb, truncation_change
from .eigen import dense_oracle
from .errors import ConvergenceError, ZeroPiError
from .operators import build_h_2d, build_h_3d
from .params import BasisSpec
from .spectrum import (
    SpectrumSolver,
    basis_convergence,
    run_tasks,
    solve_dressed,
    solve_3d,
    sweep as run_sweep,
    thermal_cutoff,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CONVERGENCE = 3

TABLES = {
    "spectrum": ("grid_value", "level_index", "label_l", "label_n", "energy_GHz", "overlap"),
    "dispersive": ("grid_value", "level", "chi_GHz", "Lambda_GHz", "chi01_GHz", "max_g_over_Delta"),
    "coherence": ("grid_value", "channel", "Tphi_s", "T1_s", "Gamma_1to0_per_s", "Gamma_0up_per_s",
                  "Gamma_1up_per_s"),
    "purcell": ("grid_value", "source", "target", "exact_per_s", "perturbative_per_s", "abs_g_over_Delta"),
}


def format_value(value) -> str:
    """Fixed-width rendering: integers verbatim, reals with 12 significant digits."""
    if isinstance(value, (str, bool)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.11e}"


def render_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_json(columns, rows) -> str:
    # numbers go through the same formatter so JSON and CSV carry identical digits
    records = [{c: format_value(v) for c, v in zip(columns, row)} for row in rows]
    return json.dumps({"columns": list(columns), "rows": records}, indent=1) + "\n"


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- per-point evaluation (runs in worker processes) ----------------------------


@dataclass
class PointResult:
    grid_value: float
    tables: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: Optional[str] = None
    error_kind: Optional[str] = None


def _dressed(config: RunConfig, params, basis):
    sol2d = SpectrumSolver(basis, config.levels, seed=config.seed).solve(params)
    return solve_dressed(params, basis, levels=config.levels, n_zeta_max=config.n_zeta_max, sol2d=sol2d)


def _spectrum_rows(config, params, basis, x, meta):
    d = _dressed(config, params, basis)
    lab = d.labels
    meta["n_zeta_max"] = d.n_zeta_max
    count = min(config.run["spectrum_states"], lab.energies.size)
    return {"spectrum": [(x, i, lab.labels[i][0], lab.labels[i][1], lab.energies[i], lab.overlaps[i])
                         for i in range(count)]}


def _dispersive_rows(config, params, basis, x, meta):
    wide = config.levels + TRUNCATION_EXTRA
    sol = SpectrumSolver(basis, wide, seed=config.seed).solve(params)
    d = solve_dressed(params, basis, levels=config.levels, n_zeta_max=config.n_zeta_max, sol2d=sol)
    rep = stark_lamb(d.g, sol.eigenvalues[: config.levels], params.Omega_zeta)
    meta["chi01_truncation_change"] = truncation_change(
        coupling_matrix(sol, params, basis, wide), sol.eigenvalues[:wide], params.Omega_zeta, config.levels)
    env = ThermalEnv.from_params(params)
    shot = shot_noise_rate(rep.chi01, params.kappa_zeta, env.n_th)
    meta.update(chi01_GHz=rep.chi01, Tphi_shot_s=1 / shot.rate if shot.rate else math.inf,
                shot_regime=shot.regime, excluded_terms=[list(map(int, p)) for p in rep.excluded])
    return {"dispersive": [(x, l, rep.chi[l], rep.Lambda[l], rep.chi01, rep.max_g_over_Delta)
                           for l in range(rep.chi.size)]}


def _coherence_rows(config, params, basis, x, meta):
    budget = coherence_budget(params, basis, levels=config.levels,
                              include_charge=config.run["include_charge"], n_zeta_max=config.n_zeta_max)
    meta.update({k: v for k, v in budget.metadata.items() if not isinstance(v, str)})
    if budget.failed:
        meta["failed_channels"] = dict(budget.failed)
    rows = [(x,) + tuple(r) for r in budget.rows()]
    return {"coherence": rows}


def _purcell_rows(config, params, basis, x, meta):
    d = _dressed(config, params, basis)
    env = ThermalEnv.from_params(params)
    E = d.sol2d.eigenvalues[: config.levels]
    exact = purcell_exact(d.labels, env)
    pert = purcell_perturbative(d.g, E, params.Omega_zeta, env)
    rows = []
    for (l, lp) in sorted(exact.rates):
        up = E[lp] > E[l]
        coupling = d.g[lp, l] if up else d.g[l, lp]
        delta = E[l] - E[lp] + (params.Omega_zeta if up else -params.Omega_zeta)
        rows.append((x, l, lp, exact.rates[(l, lp)], pert.rates.get((l, lp), math.nan), abs(coupling / delta)))
    for name, tr in (("exact", exact), ("perturbative", pert)):
        meta[f"Gamma1_{name}_per_s"] = tr.Gamma1
    return {"purcell": rows}


EVALUATORS = {
    "spectrum": _spectrum_rows,
    "dispersive": _dispersive_rows,
    "coherence": _coherence_rows,
    "purcell": _purcell_rows,
}


def _evaluate(task) -> PointResult:
    config, parameter, value = task
    params = config.params if parameter is None else replace(config.params, **{parameter: float(value)})
    x = float(getattr(params, parameter or "flux"))
    out = PointResult(x)
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            basis = config.basis_for(params)
            out.meta["basis"] = asdict(basis)
            out.tables = EVALUATORS[config.task](config, params, basis, x, out.meta)
            if out.meta.get("failed_channels"):
                out.error = "failed channels: " + ", ".join(sorted(out.meta["failed_channels"]))
                out.error_kind = "ChannelFailure"
        except ZeroPiError as exc:
            out.error = str(exc)
            out.error_kind = type(exc).__name__
    out.warnings = _unique(f"{w.category.__name__}: {w.message}" for w in caught)
    out.seconds = time.perf_counter() - start
    return out


def _unique(items):
    seen = []
    for item in items:
        if item not in seen:
            seen.append(item)
    return seen


# -- run -----------------------------------------------------------------------


@dataclass
class RunResult:
    status: int
    files: list
    manifest: dict


class _Stages:
    """Accumulated wall-clock seconds per named stage."""

    def __init__(self):
        self.seconds = {}

    @contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - t0


def _sweep_task_tables(config: RunConfig, stages, notes):
    s = config.sweep
    basis = config.basis_for(config.params)
    with stages("sweep"), warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        curve = run_sweep(config.params, basis, s.parameter, s.grid, config.levels,
                          workers=config.workers, seed=config.seed)
    notes.extend(f"{w.category.__name__}: {w.message}" for w in caught)
    rows = []
    for i, x in enumerate(curve.grid):
        for lvl in range(curve.energies.shape[1]):
            rows.append((x, lvl, lvl, 0, curve.energies[i, lvl], curve.track_overlap[i, lvl]))
    meta = {"basis": asdict(basis), "failed_points": [float(v) for v in curve.grid[curve.failed]],
            "anticrossings": int(np.count_nonzero(curve.anticrossing))}
    return {"spectrum": rows}, meta


def run(config: RunConfig, out_dir=None, workers: Optional[int] = None) -> RunResult:
    """Execute ``config.task`` and write its tables plus ``manifest.json``."""
    if workers is not None:
        config = replace(config, workers=int(workers))
    if config.task == "validate":
        report = validate(config)
        return RunResult(EXIT_OK, [], {"validate": report.lines()})
    out = Path(out_dir if out_dir is not None else config.directory)
    stages = _Stages()
    notes = []
    tables = {}
    point_meta = []
    errors = []
    t_start = time.perf_counter()

    if config.task == "sweep":
        try:
            tables, meta = _sweep_task_tables(config, stages, notes)
            point_meta.append(meta)
        except ConvergenceError as exc:
            errors.append({"kind": "ConvergenceError", "message": str(exc)})
    else:
        if config.sweep is not None:
            tasks = [(config, config.sweep.parameter, v) for v in config.sweep.grid]
        else:
            tasks = [(config, None, None)]
        with stages(config.task):
            results = run_tasks(_evaluate, tasks, config.workers)
        for r in results:
            for name, rows in r.tables.items():
                tables.setdefault(name, []).extend(rows)
            notes.extend(r.warnings)
            point_meta.append({"grid_value": r.grid_value, "seconds": r.seconds, **r.meta})
            if r.error:
                errors.append({"grid_value": r.grid_value, "kind": r.error_kind, "message": r.error})

    convergence = None
    if config.run["convergence_report"] and not errors:
        with stages("convergence_report"), warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                basis = config.basis_for(config.params)
                rep = basis_convergence(config.params, basis, levels=min(config.levels, 10),
                                        threshold=config.run["convergence_threshold"])
                convergence = {"passed": rep.passed, "threshold_GHz": rep.threshold,
                               "shifts_GHz": rep.shifts, "lines": rep.lines()}
            except ZeroPiError as exc:
                convergence = {"passed": False, "error": str(exc)}
        notes.extend(f"{w.category.__name__}: {w.message}" for w in caught)

    out.mkdir(parents=True, exist_ok=True)
    files = []
    with stages("write"):
        for name, rows in tables.items():
            columns = TABLES[name]
            if "csv" in config.formats:
                write_atomic(out / f"{name}.csv", render_csv(columns, rows))
                files.append(f"{name}.csv")
            if "json" in config.formats:
                write_atomic(out / f"{name}.json", render_json(columns, rows))
                files.append(f"{name}.json")

    status = EXIT_OK
    if errors:
        numerical = ("ConvergenceError", "LabelingError", "ResonanceError", "ChannelFailure")
        status = EXIT_CONVERGENCE if any(e["kind"] in numerical for e in errors) else EXIT_INVALID
    manifest = {
        "tool": {"name": "zeropi", "version": __version__, "python": platform.python_version(),
                 "numpy": np.__version__},
        "config": {"task": config.task, "sections": config.raw, "ini": config.to_ini()},
        "status": status,
        "files": files,
        "basis_convergence": convergence,
        "stage_seconds": {**stages.seconds, "total": time.perf_counter() - t_start},
        "points": point_meta,
        "warnings": _unique(notes),
        "errors": errors,
    }
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=1, default=_json_default) + "\n")
    files.append("manifest.json")
    return RunResult(status, files, manifest)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    return str(value)


# -- validate ------------------------------------------------------------------


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)  # (name, passed, detail)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append((name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def lines(self):
        return [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in self.checks]


def _reduced_basis(basis: BasisSpec) -> BasisSpec:
    """A small problem of the same shape for dense cross-checks (dim <= 2000)."""
    return replace(basis, n_theta_max=min(basis.n_theta_max, 4), phi_points=min(basis.phi_points, 101),
                   n_zeta_max=min(basis.n_zeta_max, 2))


def validate(config: RunConfig) -> ValidationReport:
    """Convergence policy, eigensolver oracle and tensor-consistency checks."""
    report = ValidationReport()
    params = config.params
    basis = config.basis_for(params)
    threshold = config.run["convergence_threshold"]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            conv = basis_convergence(params, basis, levels=min(config.levels, 10), threshold=threshold)
            worst = max(conv.shifts.values())
            hint = "" if conv.passed else (
                f"; increase the offending cutoffs (phi_points={basis.phi_points}, "
                f"n_theta_max={basis.n_theta_max}) until doubling moves the levels by < {threshold:g} GHz")
            report.add("basis convergence", conv.passed,
                       ", ".join(f"{k} {v:.2e} GHz" for k, v in conv.shifts.items()) + hint)
        except ZeroPiError as exc:
            worst = math.inf
            report.add("basis convergence", False, f"solve failed ({exc}); refine the grid")

        small = _reduced_basis(basis)
        k = 6
        for label, H, solve in (
            ("2D", build_h_2d(params, small), lambda: SpectrumSolver(small, k, seed=config.seed).solve(params)),
            ("3D", build_h_3d(params, small), lambda: solve_3d(params, small, k, seed=config.seed)),
        ):
            try:
                sparse = solve()
                dense = dense_oracle(H).eigenvalues[:k]
                err = float(np.max(np.abs(sparse.eigenvalues - dense) / np.maximum(1.0, np.abs(dense))))
                report.add(f"eigensolver oracle ({label}, dim {H.dim})", err < 1e-9, f"max relative error {err:.2e}")
            except ZeroPiError as exc:
                report.add(f"eigensolver oracle ({label}, dim {H.dim})", False, str(exc))

        coupled = params.dC != 0 or params.dEL != 0
        from .decoherence import thermal_occupation

        needed = thermal_cutoff(thermal_occupation(params.Omega_zeta, params.temperature))
        nz = config.n_zeta_max
        if nz is None:
            report.add("tensor consistency", True, f"automatic Fock cutoff {needed + 10} covers the thermal population")
        elif coupled and nz < needed:
            report.add("tensor consistency", False,
                       f"n_zeta_max = {nz} truncates the zeta mode although dC/dEL couple it; "
                       f"thermally populated Fock states need n_zeta_max >= {needed}")
        else:
            report.add("tensor consistency", True, f"n_zeta_max = {nz} >= {needed}")

        # without capacitive/inductive disorder the full 3D grid spectrum is E_l + n Omega
        bare = replace(params, dC=0.0, dEL=0.0)
        try:
            k3 = 8
            sol3 = solve_3d(bare, small, k3, seed=config.seed)
            E = SpectrumSolver(replace(small, n_zeta_max=0), k3, seed=config.seed).solve(bare).eigenvalues
            sums = np.sort((E[:, None] + bare.Omega_zeta * np.arange(small.n_zeta_max + 1)[None, :]).ravel())[:k3]
            err = float(np.max(np.abs(sol3.eigenvalues - sums)))
            report.add("tensor-sum identity", err < 1e-9, f"max deviation {err:.2e} GHz")
        except ZeroPiError as exc:
            report.add("tensor-sum identity", False, str(exc))
    return report


# -- gnuplot companions -----------------------------------------------------------


GNUPLOT_SCRIPTS = {
    "spectrum_vs_parameter.gp": """set datafile separator ','
set key off
set xlabel '{xlabel}'
set ylabel 'E - E_0 (GHz)'
plot '{dir}/spectrum.csv' every ::1 using 1:5:2 with points pointtype 7 pointsize 0.4 lc variable
""",
    "dephasing_times.gp": """set datafile separator ','
set logscale y
set xlabel '{xlabel}'
set ylabel 'T_phi (s)'
plot for [ch in "Tphi_flux_1f Tphi_Ic_1f Tphi_charge_1f Tphi_shot combined"] \\
  '{dir}/coherence.csv' every ::1 using 1:(strcol(2) eq ch ? $3 : 1/0) with linespoints title ch
""",
    "relaxation_times.gp": """set datafile separator ','
set logscale y
set xlabel '{xlabel}'
set ylabel 'T_1 (s)'
plot for [ch in "T1_Ic T1_flux_1f T1_fluxline T1_purcell combined"] \\
  '{dir}/coherence.csv' every ::1 using 1:(strcol(2) eq ch ? $4 : 1/0) with linespoints title ch
""",
    "shot_noise_vs_parameter.gp": """set datafile separator ','
set logscale y
set xlabel '{xlabel}'
set ylabel 'T_phi shot noise (s)'
plot '{dir}/coherence.csv' every ::1 using 1:(strcol(2) eq 'Tphi_shot' ? $3 : 1/0) with linespoints notitle
""",
    "purcell_methods.gp": """set datafile separator ','
set logscale y
set xlabel '{xlabel}'
set ylabel 'rate (1/s)'
plot '{dir}/purcell.csv' every ::1 using 1:4 title 'exact', '' every ::1 using 1:5 title 'perturbative'
""",
}


def write_gnuplot(config: RunConfig, out_dir=None) -> list:
    """Write gnuplot scripts that plot the tables of a finished run."""
    out = Path(out_dir if out_dir is not None else config.directory)
    out.mkdir(parents=True, exist_ok=True)
    xlabel = config.sweep.parameter if config.sweep else "flux (Phi_0)"
    written = []
    for name, template in GNUPLOT_SCRIPTS.items():
        write_atomic(out / name, template.format(dir=".", xlabel=xlabel))
        written.append(name)
    return written

