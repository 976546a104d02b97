"""Scenario configs, runners and CSV/JSON emission.

A scenario integrates one system on one problem over a log-spaced sample
grid and tabulates a :class:`~tikhonov_pd.diagnostics.MetricRow` per sample.
Sweeps vary the regularization exponent ``r``; comparisons run several
systems on the same problem and horizon.
"""

import copy
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as dg
from .dynamics import (
    PrimalDualState,
    SystemParams,
    TikhonovSchedule,
    classify_schedule,
    he_avd_field,
    tikhonov_field,
    z_avd_field,
)
from .errors import ConfigError, DivergenceError, InsufficientDataError, IntegrationError, TikhonovPDError
from .integrator import IntegrationConfig, Trajectory, integrate
from .problem import problem_from_dict, reference_for

SYSTEMS = ("tikhonov", "he_avd", "z_avd")
SYSTEM_PARAMS = {
    "tikhonov": ("alpha", "rho", "c", "r"),
    "he_avd": ("alpha", "beta"),
    "z_avd": ("alpha", "theta"),
}
PROBLEM_KEYS = {
    "example1": {"kind", "m", "n", "e"},
    "qp_seeded": {"kind", "rows", "cols", "seed"},
    "qp_dense": {"kind", "M", "q", "A", "b"},
}
INTEGRATION_DEFAULTS = {
    "t_start": 1.0,
    "t_end": 100.0,
    "abs_tol": 1e-6,
    "rel_tol": 1e-3,
    "samples": 400,
    "max_steps": 10**6,
    "initial_step": None,
}
SCENARIO_KEYS = {"name", "problem", "system", "params", "initial", "integration", "output"}
SYSTEM_ENTRY_KEYS = {"label", "system", "params", "initial", "integration"}

#: lower edge of the window used for slopes and tail suprema
TAIL_START = 10.0
#: assumed range of the uniform right-hand side of the random QP
QP_RHS_DISTRIBUTION = "uniform[0,1)"


# --------------------------------------------------------------------------
# Validation


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"'{where}' must be an object")
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}.{key}'" if where else f"unknown key '{key}'")


def _require(d, keys, where):
    for key in keys:
        if key not in d:
            raise ConfigError(f"missing key '{where}.{key}'" if where else f"missing key '{key}'")


def _number(d, key, where, positive=False, nonneg=False):
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"'{where}.{key}' must be a finite number, got {val!r}")
    if positive and not val > 0:
        raise ConfigError(f"'{where}.{key}' must be > 0, got {val!r}")
    if nonneg and not val >= 0:
        raise ConfigError(f"'{where}.{key}' must be >= 0, got {val!r}")
    return float(val)


def validate_problem(spec, where="problem"):
    _reject_unknown(spec, set().union(*PROBLEM_KEYS.values()), where)
    kind = spec.get("kind")
    if kind == "example1":
        keys = PROBLEM_KEYS["example1"]
    elif kind == "qp":
        keys = PROBLEM_KEYS["qp_seeded"] if "seed" in spec or "rows" in spec else PROBLEM_KEYS["qp_dense"]
    else:
        raise ConfigError(f"'{where}.kind' must be 'example1' or 'qp', got {kind!r}")
    _reject_unknown(spec, keys, where)
    _require(spec, sorted(keys), where)
    if kind == "example1":
        for key in ("m", "n", "e"):
            if _number(spec, key, where) == 0:
                raise ConfigError(f"'{where}.{key}' must be nonzero")


def validate_params(system, params, where="params"):
    if system not in SYSTEMS:
        raise ConfigError(f"'system' must be one of {', '.join(SYSTEMS)}, got {system!r}")
    allowed = SYSTEM_PARAMS[system]
    _reject_unknown(params, allowed, where)
    _require(params, allowed, where)
    if _number(params, "alpha", where) <= 1:
        raise ConfigError(f"'{where}.alpha' must be > 1")
    if system == "tikhonov":
        _number(params, "rho", where, nonneg=True)
        _number(params, "c", where, nonneg=True)
        _number(params, "r", where, positive=True)
    elif system == "he_avd":
        _number(params, "beta", where, positive=True)
    else:
        _number(params, "theta", where, positive=True)


def validate_integration(spec, where="integration"):
    _reject_unknown(spec, INTEGRATION_DEFAULTS, where)
    merged = {**INTEGRATION_DEFAULTS, **spec}
    t0 = _number(merged, "t_start", where, positive=True)
    t1 = _number(merged, "t_end", where, positive=True)
    if t1 < t0:
        raise ConfigError(f"'{where}.t_end' must be >= t_start")
    _number(merged, "abs_tol", where, positive=True)
    _number(merged, "rel_tol", where, positive=True)
    if merged["initial_step"] is not None:
        _number(merged, "initial_step", where, positive=True)
    for key in ("samples", "max_steps"):
        val = merged[key]
        if isinstance(val, bool) or not isinstance(val, int) or val < (2 if key == "samples" else 1):
            raise ConfigError(f"'{where}.{key}' must be an integer >= {2 if key == 'samples' else 1}, got {val!r}")
    return merged


def validate_initial(spec, system, where="initial"):
    keys = {"fill", "x", "v", "lambda"} | ({"mu"} if system == "z_avd" else set())
    _reject_unknown(spec, keys, where)
    if "fill" in spec:
        if len(spec) != 1:
            raise ConfigError(f"'{where}.fill' excludes explicit components")
        _number(spec, "fill", where)
    else:
        _require(spec, ["x", "v", "lambda"] + (["mu"] if system == "z_avd" else []), where)


@dataclass
class ScenarioConfig:
    name: str
    problem: dict
    system: str
    params: dict
    initial: dict = field(default_factory=lambda: {"fill": 1.0})
    integration: dict = field(default_factory=dict)
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        _reject_unknown(d, SCENARIO_KEYS, "")
        _require(d, ["name", "problem", "system", "params"], "")
        if not isinstance(d["name"], str) or not d["name"]:
            raise ConfigError("'name' must be a non-empty string")
        validate_problem(d["problem"])
        validate_params(d["system"], d["params"])
        initial = d.get("initial", {"fill": 1.0})
        validate_initial(initial, d["system"])
        integration = validate_integration(d.get("integration", {}))
        return cls(d["name"], copy.deepcopy(d["problem"]), d["system"], dict(d["params"]),
                   copy.deepcopy(initial), integration, d.get("output"))

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "problem": self.problem,
            "system": self.system,
            "params": self.params,
            "initial": self.initial,
            "integration": {**INTEGRATION_DEFAULTS, **self.integration},
        }
        if self.output is not None:
            out["output"] = self.output
        return out

    def integration_settings(self) -> dict:
        return {**INTEGRATION_DEFAULTS, **self.integration}


# --------------------------------------------------------------------------
# Scenario assembly


def sample_grid(t_start: float, t_end: float, samples: int) -> np.ndarray:
    """``samples`` log-spaced times with exact endpoints."""
    if t_end == t_start:
        return np.array([t_start])
    grid = np.logspace(math.log10(t_start), math.log10(t_end), samples)
    grid[0], grid[-1] = t_start, t_end
    return grid


def metric_params(config: ScenarioConfig) -> SystemParams:
    """Parameters the energies and the gap are evaluated with.

    He-AVD is the regularized system with ``rho = 0`` and no regularization;
    Z-AVD carries an implicit unit penalty.
    """
    p = config.params
    t0 = config.integration_settings()["t_start"]
    if config.system == "tikhonov":
        return SystemParams(p["alpha"], p["rho"], TikhonovSchedule(p["c"], p["r"]), t0)
    rho = 0.0 if config.system == "he_avd" else 1.0
    return SystemParams(p["alpha"], rho, TikhonovSchedule(0.0, 1.0), t0)


def build_field(config: ScenarioConfig, problem):
    p = config.params
    if config.system == "tikhonov":
        return tikhonov_field(metric_params(config), problem)
    if config.system == "he_avd":
        return he_avd_field(p["alpha"], p["beta"], problem)
    return z_avd_field(p["alpha"], p["theta"], problem)


def initial_state(config: ScenarioConfig, problem) -> PrimalDualState:
    n, m = problem.dim_primal, problem.dim_dual
    spec = config.initial
    with_mu = config.system == "z_avd"
    if "fill" in spec:
        c = float(spec["fill"])
        return PrimalDualState(np.full(n, c), np.full(n, c), np.full(m, c), np.full(m, c) if with_mu else None)
    try:
        state = PrimalDualState(spec["x"], spec["v"], spec["lambda"], spec.get("mu") if with_mu else None)
    except TikhonovPDError as exc:
        raise ConfigError(f"'initial': {exc}") from exc
    if state.x.shape != (n,) or state.lam.shape != (m,):
        raise ConfigError(f"'initial' has wrong dimensions for a problem with n={n}, m={m}")
    return state


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trajectory: Trajectory
    rows: list
    summary: dict
    status: str = "ok"
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def final(self, name: str) -> float:
        return float(getattr(self.rows[-1], name))


def _safe(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InsufficientDataError:
        return None


def tail_window(t_start: float, t_end: float) -> tuple:
    return (TAIL_START, t_end) if t_end > TAIL_START else (t_start, t_end)


def summarize(config: ScenarioConfig, trajectory: Trajectory, rows: list, problem, refs,
              runtime: float, status: str, error: Optional[str]) -> dict:
    settings = config.integration_settings()
    params = metric_params(config)
    times = np.array([r.t for r in rows])
    window = tail_window(settings["t_start"], settings["t_end"])
    metrics = [c for c in dg.MetricRow.columns() if c != "t"]
    slopes = {m: _safe(dg.rate_fit, times, [getattr(r, m) for r in rows], window) for m in metrics}
    gap = np.array([r.gap for r in rows])
    feas = np.array([r.feas for r in rows])
    tail = {
        "t2_gap": _safe(dg.tail_sup, times, gap, 2.0, window),
        "t2_feas": _safe(dg.tail_sup, times, feas, 2.0, window),
    }

    certificates = {}
    if config.system == "tikhonov" and params.alpha >= 3 and len(rows) > 0:
        certificates["energy_bound"] = dg.certificate_energy_bound(trajectory, refs, params, problem).to_dict()
        s = params.schedule
        if s.c > 0 and s.r <= 2:
            rep = _safe(dg.certificate_power_rate, trajectory, refs, params, problem, window)
            if rep is not None:
                certificates["power_rate"] = rep.to_dict()
    qp = problem.quadratic()
    if config.system == "tikhonov" and params.schedule.c > 0 and qp is not None:
        certificates["viscosity"] = dg.certificate_viscosity(trajectory, qp, refs, params).to_dict()

    meta = config.to_dict()
    if config.problem.get("kind") == "qp" and "seed" in config.problem:
        meta["qp_rhs_distribution"] = QP_RHS_DISTRIBUTION
    regime = classify_schedule(params.schedule).value

    return {
        "name": config.name,
        "status": status,
        "error": error,
        "params": meta,
        "regime": regime,
        "slopes": slopes,
        "slope_window": list(window),
        "tail_sup": tail,
        "certificates": certificates,
        "final": {m: float(getattr(rows[-1], m)) for m in dg.MetricRow.columns()},
        "monitoring": {
            "int_t_gap": dg.running_integral(times, times * gap),
            "int_t_grad_dev_sq": dg.running_integral(times, times * np.array([r.grad_dev for r in rows]) ** 2),
        },
        "runtime_seconds": runtime,
        "integrator": {
            "method": "bogacki-shampine-3(2)",
            "abs_tol": settings["abs_tol"],
            "rel_tol": settings["rel_tol"],
            "samples": len(rows),
            "accepted_steps": trajectory.accepted_steps,
            "rejected_steps": trajectory.rejected_steps,
        },
    }


def run_scenario(config) -> ScenarioResult:
    """Integrate one scenario and compute its metric table and summary.

    Integrator failures do not raise: the partial trajectory is tabulated and
    the result carries ``status`` ``"diverged"`` or ``"step_limit"``.
    """
    if isinstance(config, dict):
        config = ScenarioConfig.from_dict(config)
    start = time.perf_counter()
    problem = problem_from_dict(config.problem)
    refs = reference_for(problem)
    field_ = build_field(config, problem)
    state0 = initial_state(config, problem)
    settings = config.integration_settings()
    t0, t1 = settings["t_start"], settings["t_end"]
    status, error = "ok", None

    if t1 == t0:
        trajectory = Trajectory(np.array([t0]), state0.pack()[None, :], 0, 0, field_.layout, None)
    else:
        grid = sample_grid(t0, t1, settings["samples"])
        icfg = IntegrationConfig(
            t0, t1, settings["abs_tol"], settings["rel_tol"], settings["initial_step"],
            settings["max_steps"], grid[1:-1],
        )
        try:
            trajectory = integrate(field_, state0, icfg)
        except IntegrationError as exc:
            trajectory = exc.partial
            status = "diverged" if isinstance(exc, DivergenceError) else "step_limit"
            error = str(exc)

    params = metric_params(config)
    rows = dg.metrics_table(trajectory, refs, params, problem)
    summary = summarize(config, trajectory, rows, problem, refs,
                        time.perf_counter() - start, status, error)
    return ScenarioResult(config, trajectory, rows, summary, status, error)


# --------------------------------------------------------------------------
# Sweeps and comparisons


def _run_many(configs, jobs: int):
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_scenario, configs))
    return [run_scenario(c) for c in configs]


SWEEP_COLUMNS = ["r", "regime", "status", "dist_min_norm_final", "gap_final", "obj_err_final",
                 "feas_final", "slope_gap", "slope_dist_min_norm", "energy_bound_holds"]


@dataclass
class SweepResult:
    name: str
    results: dict
    table: list


def sweep_r(base, r_values, jobs: int = 1, name: Optional[str] = None) -> SweepResult:
    """Run ``base`` once per regularization exponent in ``r_values``."""
    if isinstance(base, dict):
        base = ScenarioConfig.from_dict(base)
    if base.system != "tikhonov":
        raise ConfigError("'base.system' must be 'tikhonov' for an r-sweep")
    r_values = [float(r) for r in r_values]
    for r in r_values:
        if not r > 0:
            raise ConfigError(f"'r_values' entries must be > 0, got {r}")
    name = name or base.name
    configs = []
    for r in r_values:
        cfg = copy.deepcopy(base)
        cfg.params["r"] = r
        cfg.name = f"{name}_r{r:g}"
        cfg.output = None
        configs.append(cfg)
    results = {}
    table = []
    for r, res in zip(r_values, _run_many(configs, jobs)):
        results[r] = res
        s = res.summary
        table.append({
            "r": r,
            "regime": s["regime"],
            "status": res.status,
            "dist_min_norm_final": res.final("dist_min_norm"),
            "gap_final": res.final("gap"),
            "obj_err_final": res.final("obj_err"),
            "feas_final": res.final("feas"),
            "slope_gap": s["slopes"]["gap"],
            "slope_dist_min_norm": s["slopes"]["dist_min_norm"],
            "energy_bound_holds": s["certificates"].get("energy_bound", {}).get("holds"),
        })
    return SweepResult(name, results, table)


@dataclass
class CompareResult:
    name: str
    results: dict
    times: np.ndarray
    table: list = field(default_factory=list)

    @property
    def columns(self):
        cols = ["t"]
        for label in self.results:
            cols += [f"{label}_obj_err", f"{label}_feas"]
        return cols


def compare_systems(problem_spec: dict, system_configs: list, integration: Optional[dict] = None,
                    name: str = "compare", jobs: int = 1) -> CompareResult:
    """Run several systems on one problem and tabulate ``obj_err`` and ``feas`` side by side."""
    integration = integration or {}
    configs = []
    labels = []
    for i, entry in enumerate(system_configs):
        where = f"systems.{i}"
        _reject_unknown(entry, SYSTEM_ENTRY_KEYS, where)
        _require(entry, ["system", "params"], where)
        label = entry.get("label", entry["system"])
        if label in labels:
            raise ConfigError(f"duplicate label '{where}.label' = {label!r}")
        labels.append(label)
        cfg = {
            "name": f"{name}_{label}",
            "problem": problem_spec,
            "system": entry["system"],
            "params": entry["params"],
            "initial": entry.get("initial", {"fill": 1.0}),
            "integration": {**integration, **entry.get("integration", {})},
        }
        try:
            configs.append(ScenarioConfig.from_dict(cfg))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    horizons = {(c.integration_settings()["t_start"], c.integration_settings()["t_end"],
                 c.integration_settings()["samples"]) for c in configs}
    if len(horizons) > 1:
        raise ConfigError(f"'systems' use mismatched horizons {sorted(horizons)}")
    results = dict(zip(labels, _run_many(configs, jobs)))
    s = configs[0].integration_settings() if configs else {**INTEGRATION_DEFAULTS, **integration}
    times = sample_grid(s["t_start"], s["t_end"], s["samples"])
    table = []
    for i, t in enumerate(times):
        row = {"t": float(t)}
        for label, res in results.items():
            ok = i < len(res.rows)
            row[f"{label}_obj_err"] = res.rows[i].obj_err if ok else math.nan
            row[f"{label}_feas"] = res.rows[i].feas if ok else math.nan
        table.append(row)
    return CompareResult(name, results, times, table)


# --------------------------------------------------------------------------
# Emission


def format_float(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows):
    """Write dict-or-sequence rows with a header; floats use 17 significant digits."""
    path = Path(path)
    lines = [",".join(columns)]
    for row in rows:
        vals = [row[c] for c in columns] if isinstance(row, dict) else row
        lines.append(",".join(format_float(v) for v in vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_metrics_csv(path, rows):
    return write_csv(path, dg.MetricRow.columns(), [r.values() for r in rows])


def read_metrics_csv(path) -> dict:
    """Columns of a metrics CSV as float arrays keyed by header name."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]]).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def emit_scenario(result: ScenarioResult, out_dir) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = result.config.output or result.config.name
    csv_path = write_metrics_csv(out_dir / f"{prefix}.csv", result.rows)
    json_path = write_json(out_dir / f"{prefix}.summary.json", result.summary)
    return {"csv": csv_path, "summary": json_path}


def emit_sweep(sweep: SweepResult, out_dir) -> dict:
    paths = {r: emit_scenario(res, out_dir) for r, res in sweep.results.items()}
    table = write_csv(Path(out_dir) / f"{sweep.name}_sweep.csv", SWEEP_COLUMNS, sweep.table)
    return {"runs": paths, "table": table}


def emit_compare(cmp: CompareResult, out_dir) -> dict:
    paths = {label: emit_scenario(res, out_dir) for label, res in cmp.results.items()}
    table = write_csv(Path(out_dir) / f"{cmp.name}_compare.csv", cmp.columns, cmp.table)
    return {"runs": paths, "table": table}


# --------------------------------------------------------------------------
# Presets

_EXAMPLE1 = {"kind": "example1", "m": 5, "n": 1, "e": 1}
_SLOW_PARAMS = {"alpha": 13, "rho": 1, "c": 3, "r": 0.5}
_HORIZON = {"t_start": 1.0, "t_end": 100.0, "samples": 400}

PRESETS = {
    "example1_slow": {
        "kind": "run",
        "config": {
            "name": "example1_slow",
            "problem": _EXAMPLE1,
            "system": "tikhonov",
            "params": _SLOW_PARAMS,
            "initial": {"x": [1, 1, 1], "v": [1, 1, 1], "lambda": [1]},
            "integration": _HORIZON,
        },
    },
    "example1_sweep": {
        "kind": "sweep",
        "config": {
            "name": "example1_sweep",
            "base": {
                "name": "example1_sweep",
                "problem": _EXAMPLE1,
                "system": "tikhonov",
                "params": _SLOW_PARAMS,
                "initial": {"fill": 1.0},
                "integration": _HORIZON,
            },
            "r_values": [0.5, 1.0, 1.5],
        },
    },
    "example1_vs_heavd": {
        "kind": "compare",
        "config": {
            "name": "example1_vs_heavd",
            "problem": _EXAMPLE1,
            "integration": _HORIZON,
            "systems": [
                {"label": "tikhonov", "system": "tikhonov", "params": _SLOW_PARAMS},
                {"label": "he_avd", "system": "he_avd", "params": {"alpha": 13, "beta": 1}},
            ],
        },
    },
    "qp_compare": {
        "kind": "compare",
        "config": {
            "name": "qp_compare",
            "problem": {"kind": "qp", "rows": 20, "cols": 40, "seed": 1},
            "integration": _HORIZON,
            "systems": [
                {"label": "tikhonov", "system": "tikhonov",
                 "params": {"alpha": 15, "rho": 1, "c": 1, "r": 3}},
                {"label": "z_avd", "system": "z_avd", "params": {"alpha": 15, "theta": 0.5}},
            ],
        },
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return copy.deepcopy(PRESETS[name]["config"])


SWEEP_KEYS = {"name", "base", "r_values"}
COMPARE_KEYS = {"name", "problem", "integration", "systems"}


def run_sweep_config(d: dict, jobs: int = 1) -> SweepResult:
    _reject_unknown(d, SWEEP_KEYS, "")
    _require(d, ["base", "r_values"], "")
    if not isinstance(d["r_values"], list):
        raise ConfigError("'r_values' must be a list")
    base = ScenarioConfig.from_dict(d["base"]) if isinstance(d["base"], dict) else None
    if base is None:
        raise ConfigError("'base' must be an object")
    return sweep_r(base, d["r_values"], jobs=jobs, name=d.get("name"))


def run_compare_config(d: dict, jobs: int = 1) -> CompareResult:
    _reject_unknown(d, COMPARE_KEYS, "")
    _require(d, ["problem", "systems"], "")
    validate_problem(d["problem"])
    if not isinstance(d["systems"], list) or not d["systems"]:
        raise ConfigError("'systems' must be a non-empty list")
    integration = d.get("integration", {})
    validate_integration(integration)
    return compare_systems(d["problem"], d["systems"], integration, name=d.get("name", "compare"), jobs=jobs)
