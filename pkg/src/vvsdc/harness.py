"""Experiment drivers: order studies, stability tables, work-precision,
Hamiltonian drift.  Everything returns plain data and can be dumped to CSV."""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .baselines import integrate_rkn4, integrate_verlet, rkn4_step
from .collocation import picard_iterate, update_step
from .errors import ConfigurationError, DivergenceError
from .problems import (PenningParams, SecondOrderIVP, exact_solution,
                       make_oscillator, make_penning)
from .quadrature import NodeFamily, build_rule
from .sdc import GuessStrategy, SweeperConfig, integrate, sdc_step
from .stability import GridSpec, ScanKind, scan_domain, stability_limit

SATURATION_LOW = 1e-12
SATURATION_HIGH = 1e2


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    kind: str = "global-order"
    problem: str = "penning"            # "penning" | "oscillator"
    kappa: float = 1.0
    mu: float = 0.0
    penning: PenningParams = field(default_factory=PenningParams)
    family: NodeFamily = NodeFamily.GAUSS_LEGENDRE
    M: int = 3
    K_list: tuple = (1, 2, 3)
    initial_guess: GuessStrategy = GuessStrategy.RANDOM
    seed: int = 42
    dt_list: tuple = ()
    t_end: float = 2.0
    n_steps: int = 100_000
    hamiltonian_dt: float = 2.0 * math.pi / 10.0
    methods: tuple = ("sdc", "picard", "rkn4")
    grid: GridSpec = field(default_factory=GridSpec)
    out: str | None = None
    fast_linear_path: bool = True

    def make_problem(self) -> SecondOrderIVP:
        if self.problem == "oscillator":
            return make_oscillator(self.kappa, self.mu)
        if self.problem == "penning":
            return make_penning(self.penning)
        raise ConfigurationError(f"unknown problem kind {self.problem!r}")

    def initial_value(self):
        if self.problem == "oscillator":
            return np.array([1.0]), np.array([0.0])
        return np.array(self.penning.x0), np.array(self.penning.v0)

    def sweeper(self, K: int) -> SweeperConfig:
        return SweeperConfig(rule=build_rule(self.family, self.M), K=K,
                             initial_guess=self.initial_guess, seed=self.seed)


_KNOWN_KEYS = {
    "problem": {"kind", "kappa", "mu", "omega_b", "omega_e", "epsilon",
                "alpha", "x0", "v0"},
    "rule": {"family", "m"},
    "sweeper": {"k", "k_list", "initial_guess", "seed"},
    "run": {"kind", "dt_list", "t_end", "n_steps", "hamiltonian_dt",
            "methods", "out", "kappa_max", "mu_max", "kappa_cells",
            "mu_cells", "fast_linear_path"},
}

_GUESS_NAMES = {"copy": GuessStrategy.COPY_INITIAL,
                "verlet": GuessStrategy.VERLET_SWEEP,
                "random": GuessStrategy.RANDOM}


def load_config(path: str) -> ExperimentConfig:
    """Parse a key-value config file; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
    cfg = ExperimentConfig()
    p = parser
    if p.has_section("problem"):
        s = p["problem"]
        cfg.problem = s.get("kind", cfg.problem)
        cfg.kappa = s.getfloat("kappa", cfg.kappa)
        cfg.mu = s.getfloat("mu", cfg.mu)
        pen = cfg.penning
        cfg.penning = PenningParams(
            omega_b=s.getfloat("omega_b", pen.omega_b),
            omega_e=s.getfloat("omega_e", pen.omega_e),
            epsilon=s.getfloat("epsilon", pen.epsilon),
            alpha=s.getfloat("alpha", pen.alpha),
            x0=tuple(float(x) for x in s.get("x0", "10 0 0").split()),
            v0=tuple(float(x) for x in s.get("v0", "100 0 100").split()),
        )
    if p.has_section("rule"):
        s = p["rule"]
        cfg.family = NodeFamily.from_name(s.get("family", "legendre"))
        cfg.M = s.getint("m", cfg.M)
    if p.has_section("sweeper"):
        s = p["sweeper"]
        if "k_list" in s:
            cfg.K_list = tuple(int(x) for x in s["k_list"].split())
        elif "k" in s:
            cfg.K_list = (s.getint("k"),)
        guess = s.get("initial_guess", "random").lower()
        if guess not in _GUESS_NAMES:
            raise ConfigurationError(f"unknown initial_guess {guess!r}")
        cfg.initial_guess = _GUESS_NAMES[guess]
        cfg.seed = s.getint("seed", cfg.seed)
    if p.has_section("run"):
        s = p["run"]
        cfg.kind = s.get("kind", cfg.kind)
        if "dt_list" in s:
            cfg.dt_list = tuple(float(x) for x in s["dt_list"].split())
        cfg.t_end = s.getfloat("t_end", cfg.t_end)
        cfg.n_steps = s.getint("n_steps", cfg.n_steps)
        cfg.hamiltonian_dt = s.getfloat("hamiltonian_dt", cfg.hamiltonian_dt)
        if "methods" in s:
            cfg.methods = tuple(s["methods"].split())
        cfg.out = s.get("out", cfg.out)
        cfg.grid = GridSpec(kappa_max=s.getfloat("kappa_max", 20.0),
                            mu_max=s.getfloat("mu_max", 20.0),
                            kappa_cells=s.getint("kappa_cells", 200),
                            mu_cells=s.getint("mu_cells", 200))
        cfg.fast_linear_path = s.getboolean("fast_linear_path", True)
    return cfg


# ---------------------------------------------------------------------------
# slope fitting

def fit_slope(dts, errs, low=SATURATION_LOW, high=SATURATION_HIGH):
    """Least-squares slope of log(err) vs log(dt), excluding saturated points.

    Returns (slope, fit_residual, n_points_used).
    """
    dts = np.asarray(dts, float)
    errs = np.asarray(errs, float)
    mask = (errs > low) & (errs < high) & np.isfinite(errs)
    if mask.sum() < 2:
        return math.nan, math.nan, int(mask.sum())
    x = np.log(dts[mask])
    y = np.log(errs[mask])
    coef, res = np.polyfit(x, y, 1, full=True)[:2]
    resid = float(np.sqrt(res[0] / mask.sum())) if len(res) else 0.0
    return float(coef[0]), resid, int(mask.sum())


@dataclass
class OrderReport:
    dts: np.ndarray
    errors: dict        # label -> error array over dts
    slopes: dict        # label -> fitted slope
    predicted: dict     # label -> theoretical order
    fit_residuals: dict

    def check(self, label: str, tol: float) -> bool:
        s = self.slopes.get(label, math.nan)
        p = self.predicted.get(label)
        return p is not None and math.isfinite(s) and abs(s - p) <= tol


def _predicted_local(p, K, k0, velocity_dependent, var):
    gain = 1 if velocity_dependent else 2
    extra = 2 if var == "x" else 1
    return min(p + 1, gain * K + k0 + extra)


def _predicted_global(p, K, k0, velocity_dependent):
    gain = 1 if velocity_dependent else 2
    return min(p, gain * K + k0)


# ---------------------------------------------------------------------------
# order studies

def run_local_order(config: ExperimentConfig) -> OrderReport:
    """Single-step absolute errors per component, one row per dt."""
    rule = build_rule(config.family, config.M)
    p = rule.order
    probe = config.make_problem()
    if probe.exact is None:
        raise ConfigurationError("local-order study needs an exact oracle")
    x0, v0 = config.initial_value()
    dts = np.asarray(config.dt_list, float)
    if len(dts) < 4:
        raise ConfigurationError("order studies need at least 4 dt values")
    errors, slopes, predicted, residuals = {}, {}, {}, {}
    for K in config.K_list:
        sw = config.sweeper(K)
        errs = {("x", i): [] for i in range(probe.d)}
        errs.update({("v", i): [] for i in range(probe.d)})
        for dt in dts:
            problem = config.make_problem()
            res = sdc_step(problem, (x0, v0), dt, sw)
            xe, ve = exact_solution(problem, dt, x0, v0)
            for i in range(problem.d):
                errs[("x", i)].append(abs(res.x_end[i] - xe[i]))
                errs[("v", i)].append(abs(res.v_end[i] - ve[i]))
        for (var, i), seq in errs.items():
            label = f"K{K}_{var}{i + 1}"
            errors[label] = np.array(seq)
            slope, resid, _ = fit_slope(dts, seq)
            slopes[label] = slope
            residuals[label] = resid
            predicted[label] = _predicted_local(
                p, K, sw.k0, bool(probe.velocity_dependent[i]), var)
    return OrderReport(dts, errors, slopes, predicted, residuals)


def run_global_order(config: ExperimentConfig) -> OrderReport:
    """Relative errors at t_end per component, slope-fitted over the ladder."""
    rule = build_rule(config.family, config.M)
    p = rule.order
    probe = config.make_problem()
    if probe.exact is None:
        raise ConfigurationError("global-order study needs an exact oracle")
    x0, v0 = config.initial_value()
    dts = np.asarray(config.dt_list, float)
    if len(dts) < 4:
        raise ConfigurationError("order studies need at least 4 dt values")
    xe, ve = exact_solution(probe, config.t_end, x0, v0)
    errors, slopes, predicted, residuals = {}, {}, {}, {}
    for K in config.K_list:
        sw = config.sweeper(K)
        errs = {("x", i): [] for i in range(probe.d)}
        errs.update({("v", i): [] for i in range(probe.d)})
        for dt in dts:
            problem = config.make_problem()
            try:
                _, results = integrate(problem, (x0, v0), 0.0, config.t_end, dt, sw)
                xn, vn = results[-1].x_end, results[-1].v_end
            except DivergenceError:
                xn = np.full(problem.d, np.inf)
                vn = np.full(problem.d, np.inf)
            for i in range(problem.d):
                errs[("x", i)].append(abs(xn[i] - xe[i]) / max(abs(xe[i]), 1e-300))
                errs[("v", i)].append(abs(vn[i] - ve[i]) / max(abs(ve[i]), 1e-300))
        for (var, i), seq in errs.items():
            label = f"K{K}_{var}{i + 1}"
            errors[label] = np.array(seq)
            slope, resid, _ = fit_slope(dts, seq)
            slopes[label] = slope
            residuals[label] = resid
            predicted[label] = _predicted_global(
                p, K, sw.k0, bool(probe.velocity_dependent[i]))
    return OrderReport(dts, errors, slopes, predicted, residuals)


# ---------------------------------------------------------------------------
# work-precision

def _picard_integrate(problem, u0, t0, t_end, dt, rule, K):
    x, v = np.atleast_1d(np.asarray(u0[0], float)), np.atleast_1d(np.asarray(u0[1], float))
    t = t0
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        step_dt = min(dt, t_end - t)
        state, _, F = picard_iterate(problem, (x, v), step_dt, rule, K=K)
        x, v = update_step(state, (x, v), step_dt, rule, forces=F)
        t += step_dt
    return x, v


def run_work_precision(config: ExperimentConfig):
    """Rows of (method, K, dt, f_evals, rel. position errors) for each run.

    Divergent runs are recorded with infinite error.
    """
    rule = build_rule(config.family, config.M)
    x0, v0 = config.initial_value()
    probe = config.make_problem()
    xe, _ = exact_solution(probe, config.t_end, x0, v0)
    dts = config.dt_list
    rows = []

    def record(method, K, dt, problem, x_end):
        err = np.abs(np.asarray(x_end) - xe) / np.maximum(np.abs(xe), 1e-300)
        rows.append({"method": method, "K": K, "dt": dt,
                     "f_evals": problem.f_evals,
                     "err1": float(err[0]),
                     "err3": float(err[-1])})

    for method in config.methods:
        if method == "sdc":
            for K in config.K_list:
                sw = SweeperConfig(rule=rule, K=K,
                                   initial_guess=GuessStrategy.COPY_INITIAL)
                for dt in dts:
                    problem = config.make_problem()
                    try:
                        _, results = integrate(problem, (x0, v0), 0.0,
                                               config.t_end, dt, sw)
                        record("sdc", K, dt, problem, results[-1].x_end)
                    except DivergenceError:
                        rows.append({"method": "sdc", "K": K, "dt": dt,
                                     "f_evals": problem.f_evals,
                                     "err1": math.inf, "err3": math.inf})
        elif method == "picard":
            for K in config.K_list:
                for dt in dts:
                    problem = config.make_problem()
                    try:
                        x_end, _ = _picard_integrate(problem, (x0, v0), 0.0,
                                                     config.t_end, dt, rule, K)
                        record("picard", K, dt, problem, x_end)
                    except DivergenceError:
                        rows.append({"method": "picard", "K": K, "dt": dt,
                                     "f_evals": problem.f_evals,
                                     "err1": math.inf, "err3": math.inf})
        elif method == "rkn4":
            for dt in dts:
                problem = config.make_problem()
                _, xs, _ = integrate_rkn4(problem, (x0, v0), 0.0, config.t_end, dt)
                record("rkn4", 0, dt, problem, xs[-1])
        elif method == "verlet":
            for dt in dts:
                problem = config.make_problem()
                _, xs, _ = integrate_verlet(problem, (x0, v0), 0.0, config.t_end, dt)
                record("verlet", 0, dt, problem, xs[-1])
        else:
            raise ConfigurationError(f"unknown work-precision method {method!r}")
    return rows


# ---------------------------------------------------------------------------
# Hamiltonian drift

def _one_step_matrix(step_fn) -> np.ndarray:
    """One-step map of a linear scalar problem, extracted column by column."""
    S = np.empty((2, 2))
    for j, (x0, v0) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        x1, v1 = step_fn(np.array([x0]), np.array([v0]))
        S[0, j], S[1, j] = x1[0], v1[0]
    return S


@dataclass
class DriftSeries:
    label: str
    steps: np.ndarray     # subsampled step indices
    rel_error: np.ndarray
    max_rel_error: float
    trend_slope: float    # fitted decades of log10(err) per step
    trend_stderr: float


def _fit_trend(steps: np.ndarray, series: np.ndarray, blocks: int = 50):
    """Drift of the error envelope: slope of log10(block maxima) vs step.

    The raw error series oscillates through near-zeros whose log spikes
    would dominate a direct fit, so the trend is measured on per-block
    maxima instead.
    """
    edges = np.array_split(np.arange(len(steps)), blocks)
    bs = np.array([steps[i].mean() for i in edges if len(i)])
    bm = np.array([series[i].max() for i in edges if len(i)])
    logged = np.log10(np.maximum(bm, 1e-300))
    A = np.vstack([bs, np.ones_like(bs)]).T
    coef, res = np.linalg.lstsq(A, logged, rcond=None)[:2]
    dof = max(len(bs) - 2, 1)
    var = float(res[0]) / dof if len(res) else 0.0
    sxx = float(np.sum((bs - bs.mean()) ** 2))
    stderr = math.sqrt(var / sxx) if sxx > 0 else math.inf
    return float(coef[0]), stderr


def _drift_from_matrix(S: np.ndarray, u0, n_steps: int, subsample: int,
                       label: str) -> DriftSeries:
    x, v = float(u0[0]), float(u0[1])
    h0 = 0.5 * (x * x + v * v)
    steps, series = [], []
    max_err = 0.0
    s00, s01, s10, s11 = S[0, 0], S[0, 1], S[1, 0], S[1, 1]
    for n in range(1, n_steps + 1):
        x, v = s00 * x + s01 * v, s10 * x + s11 * v
        err = abs(0.5 * (x * x + v * v) - h0) / h0
        if err > max_err:
            max_err = err
        if n % subsample == 0:
            steps.append(n)
            series.append(err)
    steps = np.array(steps)
    series = np.array(series)
    slope, stderr = _fit_trend(steps, series)
    return DriftSeries(label=label, steps=steps, rel_error=series,
                       max_rel_error=max_err, trend_slope=slope,
                       trend_stderr=stderr)


def run_hamiltonian_drift(config: ExperimentConfig, M_list=(3, 5),
                          subsample: int = 10,
                          guess: GuessStrategy = GuessStrategy.VERLET_SWEEP):
    """Relative discrete-Hamiltonian error series for SDC and RKN-4.

    The undamped oscillator is linear, so each fixed-dt method is an affine
    map on (x, v); the long run iterates the one-step matrix extracted from
    the actual stepper, which is exact for this problem and keeps the
    default 1e5-step run fast.  Set ``fast_linear_path = False`` to force
    stepping through the integrator itself.

    The starting iterate defaults to a velocity-Verlet sweep: with a
    copied initial value, even iteration counts leave the one-step map
    marginally unstable at this step size (spectral radius above 1 by
    ~1e-6), which shows up as slow exponential energy growth over long
    runs, whereas the verlet start keeps every K in the K=2..4 range
    conservative.
    """
    if config.problem != "oscillator" or config.mu != 0.0:
        raise ConfigurationError("Hamiltonian drift study needs the undamped oscillator")
    dt = config.hamiltonian_dt
    u0 = (1.0, 0.0)
    out = []
    for M in M_list:
        rule = build_rule(config.family, M)
        for K in config.K_list:
            sw = SweeperConfig(rule=rule, K=K, initial_guess=guess)
            label = f"sdc_M{M}_K{K}"
            if config.fast_linear_path:
                problem = config.make_problem()
                S = _one_step_matrix(
                    lambda x, v: (lambda r: (r.x_end, r.v_end))(
                        sdc_step(problem, (x, v), dt, sw)))
                out.append(_drift_from_matrix(S, u0, config.n_steps,
                                              subsample, label))
            else:
                out.append(_drift_direct(config, sw, dt, u0, subsample, label))
    problem = config.make_problem()
    S = _one_step_matrix(lambda x, v: rkn4_step(problem, x, v, dt))
    out.append(_drift_from_matrix(S, u0, config.n_steps, subsample, "rkn4"))
    return out


def _drift_direct(config, sw, dt, u0, subsample, label):
    problem = config.make_problem()
    x, v = np.array([u0[0]]), np.array([u0[1]])
    h0 = 0.5 * (x[0] ** 2 + v[0] ** 2)
    steps, series = [], []
    max_err = 0.0
    for n in range(1, config.n_steps + 1):
        res = sdc_step(problem, (x, v), dt, sw)
        x, v = res.x_end, res.v_end
        err = abs(0.5 * (x[0] ** 2 + v[0] ** 2) - h0) / h0
        max_err = max(max_err, err)
        if n % subsample == 0:
            steps.append(n)
            series.append(err)
    steps = np.array(steps)
    series = np.array(series)
    slope, stderr = _fit_trend(steps, series)
    return DriftSeries(label=label, steps=steps, rel_error=series,
                       max_rel_error=max_err, trend_slope=slope,
                       trend_stderr=stderr)


# ---------------------------------------------------------------------------
# stability maps and limits

def run_scan(config: ExperimentConfig, kind: ScanKind, K: int | None = None):
    rule = build_rule(config.family, config.M)
    return scan_domain(kind, rule, K, config.grid)


def run_limits(config: ExperimentConfig, M_values=(2, 3, 4, 5, 6),
               K_values=(1, 2, 3, 4)):
    """Stability-limit table on the mu = 0 axis: SDC with Picard alongside."""
    table = {}
    for K in K_values:
        for M in M_values:
            rule = build_rule(config.family, M)
            table[(K, M)] = (
                stability_limit(ScanKind.SDC_STABILITY, rule, K),
                stability_limit(ScanKind.PICARD_STABILITY, rule, K),
            )
    return table


# ---------------------------------------------------------------------------
# CSV output

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path: str, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def read_csv(path: str):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            cells = line.strip().split(",")
            parsed = []
            for c in cells:
                try:
                    parsed.append(float(c))
                except ValueError:
                    parsed.append(c)
            rows.append(parsed)
    return header, rows


def order_report_rows(report: OrderReport):
    labels = sorted(report.errors)
    header = ["dt"] + labels
    rows = []
    for i, dt in enumerate(report.dts):
        rows.append([float(dt)] + [float(report.errors[lbl][i]) for lbl in labels])
    return header, rows
