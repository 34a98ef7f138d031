"""Experiment harness: config files, Monte Carlo sweeps, CSV output, validation.

Config files are flat ``key = value`` text whose keys match the Scenario and
ExperimentSpec field names exactly; unknown keys are errors. Sweeps pair
trials across schemes and sweep values by seeding channels with
``base_seed + trial``, so every comparison at a fixed trial index sees the
same geometry and fading.
"""

from __future__ import annotations

import ast
import concurrent.futures
import csv
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import fp, metrics, optimizer, subsolver
from .model import (ChannelSet, Scenario, generate_channels,
                    generate_scenario_geometry, snr_db_to_p_max)
from .optimizer import SCHEMES, InfeasibleScenarioError, OptimizerConfig

SWEEP_AXES = ("backhaul_capacity", "privacy_threshold", "snr_db", "subset_size")

CSV_HEADER = ("trial,seed,scheme,sweep_axis,sweep_value,sum_rate_bps,"
              "secrecy_sum_rate_bps,w_p1_hz,w_p2_hz,w_s_hz,iterations,"
              "feasible,wall_ms")

SCENARIO_KEYS = {
    "n_rus", "n_ues", "n_antennas", "fronthaul_capacity", "backhaul_capacity",
    "total_bandwidth", "p_max", "noise_psd", "privacy_threshold",
    "subset_size", "cell_radius", "d_ref", "pathloss_exp", "ru_layout",
}
EXPERIMENT_KEYS = {
    "sweep_axis", "sweep_values", "schemes", "trials", "base_seed", "output",
}


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


def limit_blas_threads() -> None:
    """Pin BLAS to one thread; every matrix here is tiny and the spinning
    worker threads of an oversubscribed pool cost more than they earn."""
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    sweep_axis: str
    sweep_values: tuple
    schemes: tuple
    trials: int = 200
    base_seed: int = 0
    output: str = "results.csv"

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(
                f"sweep_axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.sweep_values:
            raise ConfigError("sweep_values must be nonempty")
        for v in self.sweep_values:
            if not np.isfinite(v):
                raise ConfigError("sweep values must be finite")
            if self.sweep_axis != "snr_db" and v < 0:
                raise ConfigError("sweep values must be nonnegative")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")


def _parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        pass
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part) for part in _split_top_level(inner)]
    return text


def _split_top_level(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for pos, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:pos])
            start = pos + 1
    parts.append(text[start:])
    return [p for p in (s.strip() for s in parts) if p]


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(value)
    return out


def scenario_from_mapping(cfg: dict) -> Scenario:
    unknown = set(cfg) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    missing = {"n_rus", "n_ues", "n_antennas", "fronthaul_capacity",
               "backhaul_capacity", "total_bandwidth", "p_max",
               "privacy_threshold", "subset_size"} - set(cfg)
    if missing:
        raise ConfigError(f"missing scenario keys: {sorted(missing)}")
    return Scenario(**cfg)


def load_experiment(path: str) -> ExperimentSpec:
    with open(path) as fh:
        cfg = parse_config_text(fh.read())
    unknown = set(cfg) - SCENARIO_KEYS - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    scenario = scenario_from_mapping({k: v for k, v in cfg.items()
                                      if k in SCENARIO_KEYS})
    exp = {k: v for k, v in cfg.items() if k in EXPERIMENT_KEYS}
    missing = {"sweep_axis", "sweep_values", "schemes"} - set(exp)
    if missing:
        raise ConfigError(f"missing experiment keys: {sorted(missing)}")
    schemes = exp["schemes"]
    if isinstance(schemes, str):
        schemes = [schemes]
    values = exp["sweep_values"]
    if not isinstance(values, (list, tuple)):
        values = [values]
    return ExperimentSpec(
        scenario=scenario,
        sweep_axis=exp["sweep_axis"],
        sweep_values=tuple(float(v) for v in values),
        schemes=tuple(schemes),
        trials=int(exp.get("trials", 200)),
        base_seed=int(exp.get("base_seed", 0)),
        output=str(exp.get("output", "results.csv")),
    )


def apply_sweep(scenario: Scenario, axis: str, value: float) -> Scenario:
    """Scenario variant with one swept parameter replaced."""
    if axis == "backhaul_capacity":
        return replace(scenario, backhaul_capacity=(value, value))
    if axis == "privacy_threshold":
        return replace(scenario, privacy_threshold=value)
    if axis == "snr_db":
        return replace(scenario, p_max=snr_db_to_p_max(value, scenario.noise_psd))
    if axis == "subset_size":
        s = int(value)
        return replace(scenario, subset_size=(s, s))
    raise ConfigError(f"unknown sweep axis {axis!r}")


@dataclass
class RunRecord:
    trial: int
    seed: int
    scheme: str
    sweep_axis: str
    sweep_value: float
    sum_rate_bps: float
    secrecy_sum_rate_bps: float
    w_p1_hz: float
    w_p2_hz: float
    w_s_hz: float
    iterations: int
    feasible: bool
    wall_ms: float

    def to_csv_row(self) -> str:
        return (f"{self.trial},{self.seed},{self.scheme},{self.sweep_axis},"
                f"{self.sweep_value:.10g},{self.sum_rate_bps:.6f},"
                f"{self.secrecy_sum_rate_bps:.6f},{self.w_p1_hz:.6f},"
                f"{self.w_p2_hz:.6f},{self.w_s_hz:.6f},{self.iterations},"
                f"{str(self.feasible).lower()},{self.wall_ms:.3f}")


def _run_single(channels: ChannelSet, scenario: Scenario, scheme: str,
                config_kwargs: dict) -> tuple:
    t0 = time.perf_counter()
    try:
        cfg = OptimizerConfig(scheme=scheme, **config_kwargs)
        design, trace = optimizer.optimize(channels, scenario, cfg)
        report = metrics.constraint_report(channels, scenario, design)
        feasible = report.max_relative_violation() <= 1e-6
        return (design.sum_rate(), metrics.secrecy_sum_rate(design, scenario),
                design.bands.w_private[0], design.bands.w_private[1],
                design.bands.w_shared, len(trace), feasible,
                1000.0 * (time.perf_counter() - t0))
    except InfeasibleScenarioError:
        return (0.0, 0.0, 0.0, 0.0, 0.0, 0, False,
                1000.0 * (time.perf_counter() - t0))


def _run_trial(spec: ExperimentSpec, trial: int, config_kwargs: dict) -> list:
    """All (sweep value, scheme) runs for one trial; channels drawn once."""
    seed = spec.base_seed + trial
    placement = generate_scenario_geometry(spec.scenario, seed)
    base_channels = generate_channels(spec.scenario, placement, seed)
    rows = []
    for vi, value in enumerate(spec.sweep_values):
        scenario = apply_sweep(spec.scenario, spec.sweep_axis, value)
        if spec.sweep_axis == "subset_size":
            channels = base_channels.with_subset_size(scenario.subset_size)
        else:
            channels = replace(base_channels, scenario=scenario)
        for si, scheme in enumerate(spec.schemes):
            out = _run_single(channels, scenario, scheme, config_kwargs)
            rows.append(((trial, vi, si), RunRecord(
                trial=trial, seed=seed, scheme=scheme,
                sweep_axis=spec.sweep_axis, sweep_value=value,
                sum_rate_bps=out[0], secrecy_sum_rate_bps=out[1],
                w_p1_hz=out[2], w_p2_hz=out[3], w_s_hz=out[4],
                iterations=out[5], feasible=out[6], wall_ms=out[7])))
    return rows


def run_experiment(spec: ExperimentSpec, jobs: int | None = None,
                   progress: bool = False, **config_kwargs) -> str:
    """Run the full sweep and write one CSV row per (trial, value, scheme).

    Rows are written in deterministic (trial, sweep value, scheme) order
    regardless of worker completion order. Returns the output path.
    """
    jobs = jobs or 1
    all_rows: list = []
    if jobs <= 1:
        for trial in range(spec.trials):
            all_rows.extend(_run_trial(spec, trial, config_kwargs))
            if progress:
                print(f"trial {trial + 1}/{spec.trials} done", flush=True)
    else:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=jobs, initializer=limit_blas_threads) as pool:
            futures = {pool.submit(_run_trial, spec, trial, config_kwargs): trial
                       for trial in range(spec.trials)}
            for fut in concurrent.futures.as_completed(futures):
                all_rows.extend(fut.result())
                if progress:
                    print(f"trial {futures[fut] + 1}/{spec.trials} done", flush=True)
    all_rows.sort(key=lambda item: item[0])
    out_dir = os.path.dirname(os.path.abspath(spec.output))
    os.makedirs(out_dir, exist_ok=True)
    with open(spec.output, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for _, rec in all_rows:
            fh.write(rec.to_csv_row() + "\n")
    return spec.output


def read_records(path: str) -> list[RunRecord]:
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ConfigError(f"unexpected CSV header in {path}")
        out = []
        for row in reader:
            out.append(RunRecord(
                trial=int(row["trial"]), seed=int(row["seed"]),
                scheme=row["scheme"], sweep_axis=row["sweep_axis"],
                sweep_value=float(row["sweep_value"]),
                sum_rate_bps=float(row["sum_rate_bps"]),
                secrecy_sum_rate_bps=float(row["secrecy_sum_rate_bps"]),
                w_p1_hz=float(row["w_p1_hz"]), w_p2_hz=float(row["w_p2_hz"]),
                w_s_hz=float(row["w_s_hz"]), iterations=int(row["iterations"]),
                feasible=row["feasible"] == "true",
                wall_ms=float(row["wall_ms"])))
        return out


# ---------------------------------------------------------------------------
# Validation suite (CLI `validate`)
# ---------------------------------------------------------------------------


def _random_small_scenario(rng: np.random.Generator) -> Scenario:
    n_rus = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    n_ues = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    n_ant = tuple(tuple(int(rng.integers(1, 3)) for _ in range(n_rus[i]))
                  for i in range(2))
    return Scenario(
        n_rus=n_rus, n_ues=n_ues, n_antennas=n_ant,
        fronthaul_capacity=tuple(tuple(5e8 for _ in range(n_rus[i]))
                                 for i in range(2)),
        backhaul_capacity=(1e9, 1e9), total_bandwidth=1e8, p_max=1.0,
        privacy_threshold=6e8,
        subset_size=(int(rng.integers(0, n_rus[0] + 1)),
                     int(rng.integers(0, n_rus[1] + 1))),
    )


def _random_feasible_design(channels, scenario, rng) -> metrics.DesignPoint:
    w = rng.dirichlet([2.0, 2.0, 2.0]) * scenario.total_bandwidth
    design = metrics.zero_design(
        scenario, metrics.BandAllocation((w[0], w[1]), w[2]))
    for i in range(2):
        design.power[i][:, :] = rng.uniform(
            0.1, 1.0, size=design.power[i].shape) * np.sqrt(scenario.p_max)
        for r in range(scenario.n_rus[i]):
            n = scenario.n_antennas[i][r]
            for m in range(2):
                mat = (rng.standard_normal((n, n))
                       + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
                design.quantizer[i][r][m] = 0.3 * mat
    # shrink until feasible
    for _ in range(40):
        metrics.refresh_rates(channels, design)
        if metrics.constraint_report(channels, scenario, design).is_feasible(1e-9):
            return design
        for i in range(2):
            design.power[i] *= 0.7
            for r in range(scenario.n_rus[i]):
                design.quantizer[i][r] *= 0.7
    raise RuntimeError("could not build a feasible random design")


def validate(seed: int = 0, n_instances: int = 5, verbose: bool = True,
             surrogate_builder=None, solver=None) -> bool:
    """Run the invariant suite on small randomized instances.

    ``surrogate_builder`` and ``solver`` default to the production
    implementations; tests inject mutated variants to confirm the checks
    actually discriminate.
    """
    surrogate_builder = surrogate_builder or fp.build_surrogates
    solver = solver or subsolver.solve
    rng = np.random.default_rng([seed, 0x9E5])
    checks: list[tuple[str, bool, str]] = []

    def run_check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        checks.append((name, ok, detail))

    def check_det_ratio():
        worst = 0.0
        for t in range(n_instances):
            sc = _random_small_scenario(rng)
            pl = generate_scenario_geometry(sc, seed + 10 * t)
            ch = generate_channels(sc, pl, seed + 10 * t)
            d = _random_feasible_design(ch, sc, rng)
            for i in range(2):
                for k in range(sc.n_ues[i]):
                    m1 = metrics.rate_private(ch, d, i, k)
                    m2 = _gaussian_mi(metrics.model_for_rate(ch, d, i, k, 0))
                    worst = max(worst, abs(m1 - m2) / max(abs(m1), 1e-9))
                    m1 = metrics.privacy_leakage(ch, d, i, k)
                    m2 = _gaussian_mi(metrics.model_for_privacy(ch, d, i, k))
                    worst = max(worst, abs(m1 - m2) / max(abs(m1), 1e-9))
        return worst <= 1e-9, f"worst rel err {worst:.2e}"

    def check_tightness():
        worst = 0.0
        for t in range(n_instances):
            sc = _random_small_scenario(rng)
            pl = generate_scenario_geometry(sc, seed + 100 + 10 * t)
            ch = generate_channels(sc, pl, seed + 100 + 10 * t)
            d = _random_feasible_design(ch, sc, rng)
            aux = fp.update_aux(ch, sc, d)
            for block in fp.BLOCKS:
                system = surrogate_builder(ch, sc, d, aux, block)
                slacks = system.evaluate(system.anchor)
                for rec, s in zip(system.records, slacks):
                    if rec.tag.split(".")[0] in ("rate_cap", "rate_bound",
                                                 "usage_cap", "usage_bound",
                                                 "privacy_bound", "privacy_qt"):
                        worst = max(worst, abs(s))
                    else:
                        worst = max(worst, max(0.0, -s))
        return worst <= 1e-8, f"worst residual {worst:.2e}"

    def check_monotone():
        sc = _random_small_scenario(rng)
        pl = generate_scenario_geometry(sc, seed + 500)
        ch = generate_channels(sc, pl, seed + 500)
        design = optimizer.initialize(ch, sc, "optimized-pooling")
        plan = optimizer.scheme_plan("optimized-pooling")
        ok_mono, ok_feas = True, True
        prev = design.sum_rate()
        for it in range(8):
            for block in (fp.BLOCK_BANDS, fp.BLOCK_POWER, fp.BLOCK_QUANTIZERS):
                aux = fp.update_aux(ch, sc, design)
                system = surrogate_builder(ch, sc, design, aux, block)
                res = solver(system, tol=1e-7)
                if not res.used_warm_start:
                    design = optimizer._apply_solution(
                        ch, sc, design, system, res.x, block, plan, 1.0)
            cur = design.sum_rate()
            if cur < prev - 10.0 * 1e-7 * sc.total_bandwidth:
                ok_mono = False
            prev = cur
            if not metrics.constraint_report(ch, sc, design).is_feasible(1e-6):
                ok_feas = False
        return (ok_mono and ok_feas,
                f"final {prev / 1e6:.2f} Mbps"
                + ("" if ok_feas else ", iterate infeasible"))

    def check_dominance():
        ok = True
        for t in range(2):
            sc = _random_small_scenario(rng)
            pl = generate_scenario_geometry(sc, seed + 900 + t)
            ch = generate_channels(sc, pl, seed + 900 + t)
            rates = {}
            for scheme in SCHEMES:
                d, _ = optimizer.optimize(
                    ch, sc, OptimizerConfig(scheme=scheme, max_outer_iters=40))
                rates[scheme] = d.sum_rate()
            best_baseline = max(v for k, v in rates.items()
                                if k != "optimized-pooling")
            if rates["optimized-pooling"] < best_baseline * (1.0 - 1e-3):
                ok = False
        return ok, ""

    run_check("metrics-det-ratio", check_det_ratio)
    run_check("fp-tightness", check_tightness)
    run_check("monotone-objective", check_monotone)
    run_check("scheme-dominance", check_dominance)

    all_ok = all(ok for _, ok, _ in checks)
    if verbose:
        for name, ok, detail in checks:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        print(f"validate: {'all checks passed' if all_ok else 'FAILURES detected'}")
        # constraint slacks of one optimized sample instance, as a flat block
        sc = _random_small_scenario(rng)
        pl = generate_scenario_geometry(sc, seed + 1300)
        ch = generate_channels(sc, pl, seed + 1300)
        try:
            d, _ = optimizer.optimize(ch, sc, OptimizerConfig(max_outer_iters=20))
            print("\nsample optimized design, constraint slacks:")
            print(metrics.constraint_report(ch, sc, d).to_text())
        except InfeasibleScenarioError as exc:
            print(f"\nsample instance infeasible: {exc}")
    return all_ok


def _gaussian_mi(model: metrics.ObservationModel) -> float:
    """Closed-form Gaussian MI of an observation model via joint covariance."""
    G, T_s = model.signal_map, model.target_signal
    F, T_z = model.noise_map, model.target_noise
    n0 = model.noise_power
    n_t = T_s.shape[0]
    n_obs = G.shape[0]
    if n_t == 0 or n_obs == 0:
        return 0.0
    cov_t = T_s @ T_s.conj().T + n0 * (T_z @ T_z.conj().T)
    cov_y = G @ G.conj().T + n0 * (F @ F.conj().T) + np.eye(n_obs)
    cross = T_s @ G.conj().T + n0 * (T_z @ F.conj().T)
    joint = np.block([[cov_t, cross], [cross.conj().T, cov_y]])
    sign_t, ld_t = np.linalg.slogdet(cov_t)
    sign_y, ld_y = np.linalg.slogdet(cov_y)
    sign_j, ld_j = np.linalg.slogdet(joint)
    return float((ld_t + ld_y - ld_j) / np.log(2.0))
