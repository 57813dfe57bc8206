"""
Experiment harness: configuration, pipeline orchestration and persistence.

A run resolves one ExperimentConfig (YAML file plus command-line
overrides), executes its pipeline and writes

    <out>/results.csv     one row per run, sweep point or lemma
    <out>/manifest.json   resolved config, library version, seed, overrides

Sweep rows may run in worker processes; rows are re-ordered by index
before anything is written, so the CSV does not depend on worker count.
"""

import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from copy import deepcopy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from cdkit import __version__
from cdkit.agp import select_eta_a
from cdkit.aqc import compare_cd_aqc, matched_aqc, run_aqc
from cdkit.cd import run_cd, verify_lemma2, verify_lemma3, verify_lemma4
from cdkit.costs import select_r
from cdkit.errors import CDKitError, ConfigError
from cdkit.models import MODELS, ModelSpec, gap_integral, get_model
from cdkit.operators import min_gap, track_path
from cdkit.qdrift import run_qdrift
from cdkit.quadrature import select_M
from cdkit.results import RunResult
from utils.constants import (
    BISECTION_MAX_ITER,
    BISECTION_REL_TOL,
    DEFAULT_C_T,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_COST_CONSTANT,
    DEFAULT_EPSILON,
    DEFAULT_EPSILON_GRID,
    DEFAULT_K,
    DEFAULT_LOG_BASE,
    DEFAULT_N_BOOTSTRAP,
    DEFAULT_N_TRAJECTORIES,
    DEFAULT_Q,
    DEFAULT_SEED,
    MANIFEST_JSON,
    OUT_DIR_ENV,
    PIPELINES,
    PLOT_SVG,
    RESOLVED_CONFIG_YAML,
    RESULTS_CSV,
    RESULTS_DIR,
    SWEEP_KINDS,
    SWEEP_PIPELINES,
    VERIFY_COLUMNS,
)
from utils.io import ensure_dir, save_config, write_json, write_results_csv
from utils.logging_utils import ProgressLogger, log_parameters

logger = logging.getLogger(__name__)

CONFIG_SECTIONS = {
    "model", "pipeline", "epsilon", "epsilon_grid", "q", "k", "seed", "verify",
    "overrides", "cost_model", "aqc", "qdrift", "sweep", "plot", "output",
    "resources", "logging",
}
OVERRIDE_KEYS = ("eta", "a", "M", "r", "T", "C_T")
MIN_FIT_POINTS = 3


# =============================================================================
# CONFIGURATION
# =============================================================================

def _section(raw: dict, name: str) -> dict:
    value = raw.get(name)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(value).__name__}")
    return dict(value)


def _check_epsilon(value, field_name: str) -> float:
    try:
        eps = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{field_name}: expected a number, got {value!r}")
    if not 0 < eps <= 1:
        raise ConfigError(f"{field_name}: must lie in (0, 1], got {eps}")
    return eps


def _check_int(value, field_name: str, minimum: int) -> int:
    integral = isinstance(value, (int, np.integer)) or (isinstance(value, float) and value.is_integer())
    if isinstance(value, bool) or not integral:
        raise ConfigError(f"{field_name}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{field_name}: must be at least {minimum}, got {value}")
    return int(value)


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    pipeline: str
    model: str
    model_params: Dict[str, object] = field(default_factory=dict)
    level: int = 0
    epsilon: float = DEFAULT_EPSILON
    epsilon_grid: List[float] = field(default_factory=lambda: list(DEFAULT_EPSILON_GRID))
    q: int = DEFAULT_Q
    k: int = DEFAULT_K
    seed: int = DEFAULT_SEED
    verify: bool = False
    overrides: Dict[str, object] = field(default_factory=dict)
    cost_model: Dict[str, object] = field(default_factory=dict)
    aqc: Dict[str, object] = field(default_factory=dict)
    qdrift: Dict[str, object] = field(default_factory=dict)
    sweep: Dict[str, object] = field(default_factory=dict)
    plot: Dict[str, object] = field(default_factory=dict)
    output_root: Path = Path(RESULTS_DIR)
    workers: int = 1
    logging: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Optional[dict], cli: Optional[dict] = None) -> "ExperimentConfig":
        """
        Resolve a config mapping; non-None entries of ``cli`` win over the file.

        Recognised ``cli`` keys: pipeline, model, eps, q, k, seed, out, workers.

        Raises
        ------
        ConfigError
            Unknown section, unknown model or pipeline, or a field outside
            its domain; the message names the field.
        """
        raw = deepcopy(raw or {})
        cli = {key: value for key, value in (cli or {}).items() if value is not None}
        unknown = sorted(set(raw) - CONFIG_SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown config section(s): {', '.join(unknown)}")

        model = _section(raw, "model")
        name = cli.get("model", model.get("name"))
        if name is None:
            raise ConfigError("model.name: no model given")
        if name not in MODELS:
            raise ConfigError(f"model.name: unknown model '{name}'. Available models: {', '.join(sorted(MODELS))}")
        model_params = model.get("params") or {}
        if not isinstance(model_params, dict):
            raise ConfigError("model.params: expected a mapping")

        pipeline = cli.get("pipeline", raw.get("pipeline"))
        if pipeline not in PIPELINES:
            raise ConfigError(f"pipeline: expected one of {', '.join(PIPELINES)}, got {pipeline!r}")

        overrides = {key: value for key, value in _section(raw, "overrides").items() if value is not None}
        bad = sorted(set(overrides) - set(OVERRIDE_KEYS))
        if bad:
            raise ConfigError(f"overrides: unknown key(s) {', '.join(bad)}; allowed {', '.join(OVERRIDE_KEYS)}")
        for key in ("M", "r"):
            if key in overrides:
                overrides[key] = _check_int(overrides[key], f"overrides.{key}", 1)
        for key in ("eta", "a", "T", "C_T"):
            if key in overrides and not float(overrides[key]) > 0:
                raise ConfigError(f"overrides.{key}: must be positive, got {overrides[key]}")

        epsilon = _check_epsilon(cli.get("eps", raw.get("epsilon", DEFAULT_EPSILON)), "epsilon")
        grid = raw.get("epsilon_grid") or list(DEFAULT_EPSILON_GRID)
        if not isinstance(grid, (list, tuple)) or not grid:
            raise ConfigError("epsilon_grid: expected a non-empty list")
        grid = [_check_epsilon(value, f"epsilon_grid[{i}]") for i, value in enumerate(grid)]

        sweep = _section(raw, "sweep")
        sweep.setdefault("kind", "epsilon")
        sweep.setdefault("pipeline", "cd")
        if sweep["kind"] not in SWEEP_KINDS:
            raise ConfigError(f"sweep.kind: expected one of {', '.join(SWEEP_KINDS)}, got {sweep['kind']!r}")
        if sweep["pipeline"] not in SWEEP_PIPELINES:
            raise ConfigError(
                f"sweep.pipeline: expected one of {', '.join(SWEEP_PIPELINES)}, got {sweep['pipeline']!r}"
            )
        if sweep["kind"] == "gap":
            sweep.setdefault("family", name)
            sweep.setdefault("param", "n_qubits")
            if sweep["family"] not in MODELS:
                raise ConfigError(f"sweep.family: unknown model '{sweep['family']}'")
            if not sweep.get("sizes"):
                raise ConfigError("sweep.sizes: a gap sweep needs a non-empty grid")

        output = _section(raw, "output")
        root = cli.get("out") or output.get("root") or os.environ.get(OUT_DIR_ENV) or RESULTS_DIR
        resources = _section(raw, "resources")

        return cls(
            pipeline=pipeline,
            model=name,
            model_params=dict(model_params),
            level=_check_int(model.get("level") or 0, "model.level", 0),
            epsilon=epsilon,
            epsilon_grid=grid,
            q=_check_int(cli.get("q", raw.get("q", DEFAULT_Q)), "q", 0),
            k=_check_int(cli.get("k", raw.get("k", DEFAULT_K)), "k", 1),
            seed=_check_int(cli.get("seed", raw.get("seed", DEFAULT_SEED)), "seed", 0),
            verify=bool(raw.get("verify", False)),
            overrides=overrides,
            cost_model=_section(raw, "cost_model"),
            aqc=_section(raw, "aqc"),
            qdrift=_section(raw, "qdrift"),
            sweep=sweep,
            plot=_section(raw, "plot"),
            output_root=Path(root),
            workers=_check_int(cli.get("workers", resources.get("workers", 1)), "resources.workers", 1),
            logging=_section(raw, "logging"),
        )

    @property
    def cost_constant(self) -> float:
        return float(self.cost_model.get("constant", DEFAULT_COST_CONSTANT))

    @property
    def log_base(self) -> str:
        return str(self.cost_model.get("log_base", DEFAULT_LOG_BASE))

    @property
    def C_T(self) -> float:
        return float(self.overrides.get("C_T", self.aqc.get("C_T", DEFAULT_C_T)))

    def build_model(self, **extra) -> ModelSpec:
        return get_model(self.model, **{**self.model_params, **extra})

    def resolved(self) -> dict:
        """Plain mapping echoed into the manifest."""
        return {
            "pipeline": self.pipeline,
            "model": {"name": self.model, "params": self.model_params, "level": self.level},
            "epsilon": self.epsilon,
            "epsilon_grid": self.epsilon_grid,
            "q": self.q,
            "k": self.k,
            "seed": self.seed,
            "verify": self.verify,
            "overrides": self.overrides,
            "cost_model": {"constant": self.cost_constant, "log_base": self.log_base},
            "aqc": self.aqc,
            "qdrift": self.qdrift,
            "sweep": self.sweep,
            "plot": self.plot,
            "output": {"root": str(self.output_root)},
            "resources": {"workers": self.workers},
        }


# =============================================================================
# SINGLE RUNS
# =============================================================================

def run_single(config: ExperimentConfig, pipeline: str, epsilon: float,
               model: Optional[ModelSpec] = None, path=None) -> RunResult:
    """One cd / aqc / qdrift run at ``epsilon``."""
    model = model or config.build_model()
    path = path or track_path(model.hamiltonian)
    level = config.level

    if pipeline == "cd":
        return run_cd(
            model, level, epsilon, q=config.q, k=config.k, path=path,
            overrides={key: config.overrides.get(key) for key in ("eta", "a", "M", "r")},
            cost_constant=config.cost_constant, log_base=config.log_base,
            verify=config.verify, seed=config.seed,
        )
    if pipeline == "aqc":
        if "T" in config.overrides or not config.aqc.get("matched", False):
            result = run_aqc(
                model, level, T=config.overrides.get("T"), epsilon=epsilon, k=config.k,
                r=config.overrides.get("r"), C_T=config.C_T, path=path,
                cost_constant=config.cost_constant, log_base=config.log_base, seed=config.seed,
            )
        else:
            result, converged = matched_aqc(
                model, level, epsilon, k=config.k, C_T=config.C_T, path=path,
                rel_tol=float(config.aqc.get("rel_tol", BISECTION_REL_TOL)),
                max_iter=int(config.aqc.get("max_iter", BISECTION_MAX_ITER)),
            )
            result.flags["bisection_converged"] = converged
            result.seed = config.seed
        result.overrides = {key: config.overrides[key] for key in ("T", "C_T", "r") if key in config.overrides}
        return result
    if pipeline == "qdrift":
        result, _ = run_qdrift(
            model, level, epsilon,
            n_trajectories=int(config.qdrift.get("n_trajectories", DEFAULT_N_TRAJECTORIES)),
            n_bootstrap=int(config.qdrift.get("n_bootstrap", DEFAULT_N_BOOTSTRAP)),
            chunk_size=int(config.qdrift.get("chunk_size", DEFAULT_CHUNK_SIZE)),
            seed=config.seed, workers=1, path=path,
            overrides={key: config.overrides.get(key) for key in ("eta", "a", "r")},
            cost_constant=config.cost_constant, log_base=config.log_base,
        )
        return result
    raise ConfigError(f"pipeline: {pipeline!r} is not a single-run pipeline")


def verify_bounds(config: ExperimentConfig) -> pd.DataFrame:
    """One row per lemma (2, 3, 4) at ``config.epsilon``."""
    model = config.build_model()
    path = track_path(model.hamiltonian)
    n, eps = config.level, config.epsilon
    checks = [
        verify_lemma2(path, n, eps),
        verify_lemma3(path, n, eps, config.q),
        verify_lemma4(path, n, eps, config.q, config.k),
    ]
    for check in checks:
        status = "holds" if check.holds else "VIOLATED"
        logger.info(f"Lemma {check.lemma}: measured {check.measured:.3e} vs bound {check.bound:.3e} ({status})")
    return pd.DataFrame([check.to_row() for check in checks], columns=VERIFY_COLUMNS)


def recheck_parameters(result: RunResult) -> Dict[str, Tuple[float, float]]:
    """
    Recompute η, a, M and r from the inputs recorded on a CD result.

    Returns
    -------
    dict
        name -> (recorded, recomputed) for every mismatch; empty when the
        record is consistent. Overridden parameters are not rechecked.
    """
    p = result.params
    needed = ("gap", "dH_norm_n1", "H_norm_max", "lambda_tilde", "dlam", "eta", "a", "M", "r")
    if result.pipeline != "cd" or any(key not in p for key in needed):
        return {}
    eps = result.epsilon
    mismatches = {}
    params = select_eta_a(p["gap"], eps, p["dH_norm_n1"])
    eta, a = float(p["eta"]), float(p["a"])
    if "eta" not in result.overrides and "a" not in result.overrides:
        for key, expected in (("eta", params.eta), ("a", params.a)):
            if not math.isclose(float(p[key]), expected, rel_tol=1e-9):
                mismatches[key] = (float(p[key]), expected)
    if "M" not in result.overrides:
        M = select_M(result.q, a, eps, p["H_norm_max"], p["dH_norm_n1"], eta)
        if int(p["M"]) != M:
            mismatches["M"] = (int(p["M"]), M)
    if "r" not in result.overrides:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = select_r(result.k, p["lambda_tilde"], p["dlam"], eps)
        if int(p["r"]) != r:
            mismatches["r"] = (int(p["r"]), r)
    return mismatches


# =============================================================================
# SWEEPS
# =============================================================================

def _failed_row(config: ExperimentConfig, pipeline: str, epsilon: float, error: Exception) -> dict:
    return RunResult(
        pipeline=pipeline, model=config.model, level=config.level, epsilon=epsilon,
        q=config.q, k=config.k, seed=config.seed, error=f"{type(error).__name__}: {error}",
    ).to_row()


def _epsilon_row(index: int, config: ExperimentConfig, epsilon: float) -> Tuple[int, dict]:
    pipeline = config.sweep["pipeline"]
    try:
        return index, run_single(config, pipeline, epsilon).to_row()
    except CDKitError as e:
        logger.warning(f"Sweep row {index} (ε={epsilon:.6g}) failed: {e}")
        return index, _failed_row(config, pipeline, epsilon, e)


def _gap_row(index: int, config: ExperimentConfig, size) -> Tuple[int, dict]:
    pipeline = config.sweep["pipeline"]
    param = config.sweep["param"]
    try:
        model = get_model(config.sweep["family"], **{**config.model_params, param: size})
        path = track_path(model.hamiltonian)
        gap = min_gap(path, config.level)
        row = run_single(config, pipeline, config.epsilon, model=model, path=path).to_row()
        row.update({"gap_n": gap, "inverse_gap": 1.0 / gap, "gap_integral": gap_integral(path, config.level)})
    except CDKitError as e:
        logger.warning(f"Sweep point {param}={size} failed: {e}")
        row = _failed_row(config, pipeline, config.epsilon, e)
    return index, {param: size, **row}


def _run_rows(worker, config: ExperimentConfig, points: list, label: str) -> List[dict]:
    """Evaluate ``worker(index, config, point)`` for every point; rows come back in index order."""
    rows: Dict[int, dict] = {}
    progress = ProgressLogger(logger, total=len(points), step=1, label=label)
    if config.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            futures = [executor.submit(worker, i, config, point) for i, point in enumerate(points)]
            for future in as_completed(futures):
                index, row = future.result()
                rows[index] = row
                progress.update()
    else:
        for i, point in enumerate(points):
            index, row = worker(i, config, point)
            rows[index] = row
            progress.update()
    return [rows[i] for i in range(len(points))]


def epsilon_sweep(config: ExperimentConfig) -> pd.DataFrame:
    """One row per ε in ``config.epsilon_grid``; per-row failures land in ``error``."""
    if config.sweep["pipeline"] == "compare":
        return compare_cd_aqc(
            config.build_model(), config.epsilon_grid, level=config.level,
            q=config.q, k=config.k, C_T=config.C_T,
        )
    rows = _run_rows(_epsilon_row, config, list(config.epsilon_grid), "ε sweep")
    return pd.DataFrame(rows)


def fit_gap_scaling(frame: pd.DataFrame) -> Optional[dict]:
    """
    Least-squares slope of log(gate_count) against log(1/Δ_n).

    Returns None below three valid points.
    """
    if "inverse_gap" not in frame:
        return None
    valid = frame[(frame["error"].fillna("") == "") & (frame["gate_count"] > 0) & (frame["inverse_gap"] > 0)]
    if len(valid) < MIN_FIT_POINTS:
        return None
    x = np.log(valid["inverse_gap"].to_numpy(dtype=float))
    y = np.log(valid["gate_count"].to_numpy(dtype=float))
    coeffs, residuals, _, _, _ = np.polyfit(x, y, 1, full=True)
    residual = float(residuals[0]) if len(residuals) else 0.0
    return {"slope": float(coeffs[0]), "intercept": float(coeffs[1]), "residual": residual, "points": int(len(valid))}


def gap_sweep(config: ExperimentConfig) -> Tuple[pd.DataFrame, Optional[dict]]:
    """
    Run the sweep pipeline across ``sweep.sizes`` of ``sweep.family`` and fit
    the gate-count scaling in 1/Δ_n.
    """
    rows = _run_rows(_gap_row, config, list(config.sweep["sizes"]), "gap sweep")
    frame = pd.DataFrame(rows)
    fit = fit_gap_scaling(frame)
    if fit is None:
        logger.info(f"Fewer than {MIN_FIT_POINTS} valid points; no scaling fit")
    else:
        logger.info(
            f"Gate count ~ (1/Δ)^{fit['slope']:.3f} over {fit['points']} points "
            f"(residual {fit['residual']:.3e})"
        )
    return frame, fit


# =============================================================================
# ORCHESTRATION
# =============================================================================

@dataclass
class RunReport:
    """What one harness invocation produced."""

    frame: pd.DataFrame
    manifest: dict
    csv_path: Path
    manifest_path: Path
    plot_path: Optional[Path] = None
    fit: Optional[dict] = None


def run(config: ExperimentConfig) -> RunReport:
    """
    Execute ``config.pipeline`` and write results.csv, manifest.json and the
    resolved config.yaml under ``config.output_root``; a plot follows when
    ``plot.enabled``. The saved config reloads to the same run.
    """
    start = time.perf_counter()
    log_parameters(logger, config.resolved(), title="Resolved configuration")
    fit = None
    records = []

    if config.pipeline in ("cd", "aqc", "qdrift"):
        result = run_single(config, config.pipeline, config.epsilon)
        frame = pd.DataFrame([result.to_row()])
        records.append(result.record())
        if config.pipeline == "cd":
            mismatches = recheck_parameters(result)
            if mismatches:
                logger.warning(f"Recorded parameters disagree with their selection rules: {mismatches}")
    elif config.pipeline == "verify-bounds":
        frame = verify_bounds(config)
    elif config.sweep["kind"] == "gap":
        frame, fit = gap_sweep(config)
    else:
        frame = epsilon_sweep(config)

    ensure_dir(config.output_root)
    csv_path = config.output_root / RESULTS_CSV
    write_results_csv(frame, csv_path)
    logger.info(f"Wrote {len(frame)} row(s) to {csv_path}")

    plot_path = None
    if config.plot.get("enabled"):
        from cdkit.plotting import emit_plot
        plot_path = emit_plot(
            csv_path,
            x=config.plot.get("x", "epsilon"),
            y=config.plot.get("y", "gate_count"),
            output=config.output_root / config.plot.get("output", PLOT_SVG),
            logx=bool(config.plot.get("logx", True)),
            logy=bool(config.plot.get("logy", True)),
        )

    manifest = {
        "version": __version__,
        "config": config.resolved(),
        "seed": config.seed,
        "overrides": config.overrides,
        "rows": len(frame),
        "fit": fit,
        "results": records,
        "files": {
            "csv": RESULTS_CSV,
            "config": RESOLVED_CONFIG_YAML,
            "plot": plot_path.name if plot_path else None,
        },
    }
    manifest_path = config.output_root / MANIFEST_JSON
    write_json(manifest, manifest_path)
    save_config(config.resolved(), config.output_root / RESOLVED_CONFIG_YAML)
    logger.info(f"Finished {config.pipeline} in {time.perf_counter() - start:.1f}s")
    return RunReport(frame, manifest, csv_path, manifest_path, plot_path, fit)
