"""
Experiment harness: JSON configs in, CSV tables, SVG figures and a manifest out.

Every runner takes an :class:`ExperimentConfig`, writes into
``config.output_dir`` and returns a :class:`RunResult` whose ``passed`` flag
reflects the experiment's pass criterion. CSV content depends only on the
resolved config, so reruns reproduce it bit for bit.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .bifurcation import (BracketError, critical_lambda, find_bracket, quadratic_fit, sweep_omega,
                          write_sweep_csv)
from .dynamics import ConfigurationError, FlowParams, rhs
from .spectral import NormConvention, SpectralField, TorusSpec, field_shift, l2_norm, velocity_norm
from .taylor import DivergenceError, IntegratorConfig, integrate, integrate_until_stationary
from .toy import ToyCase, ToyParams, tail_amplitude, verify_proposition1

log = logging.getLogger(__name__)

EXPERIMENTS = ("stabilize", "bifurcate", "gap", "convergence_time", "toy", "galilean", "decay_rate")

# ω0 presets as Hermitian-half coefficients
PRESETS: dict[str, dict[tuple[int, int], complex]] = {
    "I": {(1, 1): 30.0},   # 60 cos(x + y/β)
    "II": {(1, 0): 1.0},   # 2 cos x
    "III": {(2, 0): 1.0},  # 2 cos 2x
    "IV": {},              # 0
}

PRESET_I_NOTE = ("preset I is read as 60*cos(x + y/beta), the (1,1) basis mode; "
                 "the literal 60*cos(x + y) is not periodic on the torus unless beta = 1")

_FLOW_KEYS = {"epsilon", "alpha", "lam", "Omega", "beta", "N", "forcing_mode"}
_INTEGRATOR_KEYS = {"order", "tol", "safety", "h_max", "t_max", "kernel"}


@dataclass
class ExperimentConfig:
    """Resolved experiment description.

    ``flow`` holds :class:`FlowParams` fields plus ``beta`` and ``N``;
    ``integrator`` holds :class:`IntegratorConfig` fields; ``options`` carries
    experiment-specific knobs (grids, horizons, targets). A null
    ``initial_condition`` selects the experiment's own default.
    """

    experiment: str
    flow: dict[str, Any]
    integrator: dict[str, Any] = field(default_factory=dict)
    initial_condition: str | list | None = None
    norm_convention: str = NormConvention.COEFFICIENT.value
    output_dir: str = "runs"
    seed: int = 0
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        unknown = set(self.flow) - _FLOW_KEYS
        if unknown:
            raise ConfigurationError(f"unknown flow keys {sorted(unknown)}")
        unknown = set(self.integrator) - _INTEGRATOR_KEYS
        if unknown:
            raise ConfigurationError(f"unknown integrator keys {sorted(unknown)}")
        try:
            self.norm_convention = NormConvention(self.norm_convention).value
        except ValueError as exc:
            raise ConfigurationError(f"unknown norm convention {self.norm_convention!r}") from exc
        if isinstance(self.initial_condition, str) and self.initial_condition not in PRESETS:
            raise ConfigurationError(f"unknown preset {self.initial_condition!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"experiment", "flow", "integrator", "initial_condition", "norm_convention",
                 "output_dir", "seed", "options"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        if "experiment" not in data or "flow" not in data:
            raise ConfigurationError("config needs 'experiment' and 'flow'")
        return cls(**copy.deepcopy(data))

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def default(cls, experiment: str) -> "ExperimentConfig":
        """The packaged default config for ``experiment``."""
        if experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {experiment!r}")
        text = resources.files("kolmoflow.configs").joinpath(f"{experiment}.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "flow": dict(self.flow),
            "integrator": dict(self.integrator),
            "initial_condition": self.initial_condition,
            "norm_convention": self.norm_convention,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "options": copy.deepcopy(self.options),
        }

    def with_overrides(self, Omega: float | None = None, lam: float | None = None, N: int | None = None,
                       norm: str | None = None, out: str | None = None) -> "ExperimentConfig":
        """Apply command-line style overrides.

        ``Omega`` also collapses any Ω grid in ``options`` to that single value.
        """
        d = self.to_dict()
        if Omega is not None:
            d["flow"]["Omega"] = float(Omega)
            if "omegas" in d["options"]:
                d["options"]["omegas"] = [float(Omega)]
        if lam is not None:
            d["flow"]["lam"] = float(lam)
        if N is not None:
            d["flow"]["N"] = int(N)
        if norm is not None:
            d["norm_convention"] = norm
        if out is not None:
            d["output_dir"] = str(out)
        return ExperimentConfig.from_dict(d)

    def flow_params(self, **changes) -> FlowParams:
        f = {"epsilon": 1.0, "alpha": 0.0, "lam": 1.0, "Omega": 0.0, "beta": 1.0, "N": 5, "forcing_mode": 1}
        f.update(self.flow)
        f.update(changes)
        try:
            torus = TorusSpec(float(f.pop("beta")), int(f.pop("N")))
            return FlowParams(torus=torus, **f)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from exc

    def integrator_config(self) -> IntegratorConfig:
        try:
            return IntegratorConfig(**self.integrator)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from exc

    def initial_field(self, torus: TorusSpec) -> SpectralField:
        if self.initial_condition is None:
            raise ConfigurationError(f"{self.experiment} needs an explicit initial_condition")
        return initial_field(torus, self.initial_condition)


def initial_field(torus: TorusSpec, ic: str | list) -> SpectralField:
    """Preset name or explicit ``[[k1, k2, re, im], ...]`` list of stored-half modes."""
    if isinstance(ic, str):
        if ic not in PRESETS:
            raise ConfigurationError(f"unknown preset {ic!r}")
        modes = PRESETS[ic]
    else:
        try:
            modes = {(int(k1), int(k2)): complex(re, im) for k1, k2, re, im in ic}
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad mode list: {exc}") from exc
    try:
        return SpectralField.from_modes(torus, modes)
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"initial condition does not fit the truncation: {exc}") from exc


@dataclass
class RunResult:
    experiment: str
    passed: bool | None
    metrics: dict[str, Any]
    output_dir: Path
    files: list[str] = field(default_factory=list)

    def summary(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "DONE"}[self.passed]
        return f"{self.experiment}: {status} ({self.output_dir})"


# -- output helpers -----------------------------------------------------------------

def git_blob_sha1(data: bytes) -> str:
    """Content hash in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _canonical(config: ExperimentConfig) -> bytes:
    return json.dumps(config.to_dict(), sort_keys=True, indent=2).encode()


class _Writer:
    """Collects output files of one run."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(name)
        return path

    def add(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _figure(nrows: int = 1, ncols: int = 1, **kw):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "kolmoflow"
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.0 * ncols, 3.8 * nrows), squeeze=False, **kw)
    return fig, axes.ravel()


def _save(fig, path: Path) -> None:
    import matplotlib.pyplot as plt
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _tag(x: float) -> str:
    return f"{x:g}".replace(".", "p")


# -- stabilize ------------------------------------------------------------------------

def classify_window(t: np.ndarray, norms: np.ndarray, stationary_rel: float = 1e-3) -> str:
    """'stationary' if the norm is flat over the window, 'periodic' if it keeps oscillating."""
    mean = float(np.mean(norms))
    spread = float(np.ptp(norms)) / max(mean, np.finfo(float).tiny)
    if spread <= stationary_rel:
        return "stationary"
    d = np.diff(norms)
    turns = int(np.sum((d[:-1] > 0) & (d[1:] <= 0)))
    return "periodic" if turns >= 2 else "transient"


def _cluster(values: list[float], rel: float) -> int:
    reps: list[float] = []
    for v in sorted(values):
        if not reps or abs(v - reps[-1]) > rel * max(abs(v), abs(reps[-1])):
            reps.append(v)
    return len(reps)


def assess_stabilization(low: dict[str, dict], high: dict[str, dict], options: dict) -> dict:
    """Score the four-preset runs.

    ``low`` / ``high`` map preset → {"t", "coefficient", "integral", "kind"}
    at Ω = 0 and at large Ω. The calibrated check picks the first convention
    whose IC II terminal norm hits its target; without one the convention-free
    checks decide.
    """
    targets = options.get("targets", {"II": 9.68043, "III": 14.2384, "IV": 25.0})
    band = options.get("periodic_band", [19.0, 20.7])
    window = options.get("window", [3.0, 5.0])
    rel = options.get("target_rel", 0.02)
    agree = options.get("agreement_rel", 1e-3)
    out: dict[str, Any] = {"calibration": None}
    # (b) common attractor at large Ω
    finals = [high[k]["final"] for k in high]
    worst = 0.0
    for i in range(len(finals)):
        for j in range(i + 1, len(finals)):
            scale = max(finals[i], finals[j])
            worst = max(worst, abs(finals[i] - finals[j]) / scale)
    out["high_pairwise_rel"] = worst
    out["b_pass"] = len(finals) == 4 and worst <= agree
    # (a) calibrated
    for conv in ("coefficient", "integral"):
        ii = low.get("II")
        if ii is None:
            break
        if abs(ii[conv][-1] - targets["II"]) <= rel * targets["II"]:
            out["calibration"] = conv
            break
    if out["calibration"] is not None:
        conv = out["calibration"]
        ok = all(k in low and abs(low[k][conv][-1] - v) <= rel * v for k, v in targets.items())
        if "I" in low:
            t = low["I"]["t"]
            m = (t >= window[0]) & (t <= window[1])
            n = low["I"][conv][m]
            ok = ok and bool(np.all((n > band[0]) & (n < band[1])))
        else:
            ok = False
        out["a_mode"] = "calibrated"
        out["a_pass"] = ok
    else:
        kinds = {k: v["kind"] for k, v in low.items()}
        stat = [low[k]["final"] for k, kd in kinds.items() if kd == "stationary"]
        n_stat = _cluster(stat, agree)
        n_per = sum(1 for kd in kinds.values() if kd == "periodic")
        out["a_mode"] = "convention-free"
        out["low_kinds"] = kinds
        out["low_distinct_stationary"] = n_stat
        out["low_periodic"] = n_per
        out["a_pass"] = len(low) == 4 and n_stat == 3 and n_per == 1
        # the degraded criterion also wants one common attractor at large Ω
        out["a_pass"] = out["a_pass"] and out["b_pass"]
    out["passed"] = bool(out["a_pass"] and out["b_pass"])
    return out


def run_stabilize(config: ExperimentConfig) -> RunResult:
    opts = config.options
    t_final = float(opts.get("t_final", 5.0))
    dt = float(opts.get("sample_every", 0.01))
    omegas = [0.0, float(config.flow.get("Omega", 100.0))]
    presets = opts.get("presets", ["I", "II", "III", "IV"])
    window = opts.get("window", [3.0, 5.0])
    if not 0 <= window[0] < window[1] <= t_final or window[1] - window[0] < 2 * dt:
        raise ConfigurationError(f"scoring window {window} must span several samples inside [0, {t_final:g}]")
    icfg = config.integrator_config()
    w = _Writer(Path(config.output_dir))
    runs: dict[float, dict[str, dict]] = {}
    errors = {}
    for Om in omegas:
        p = config.flow_params(Omega=Om)
        vol = math.sqrt(p.torus.volume)
        runs[Om] = {}
        for ic in presets:
            try:
                tr = integrate(p, initial_field(p.torus, ic), t_final, icfg, sample_every=dt)
            except DivergenceError as exc:
                errors[f"{ic}@{Om:g}"] = str(exc)
                log.warning("preset %s at Omega=%g diverged: %s", ic, Om, exc)
                continue
            coef = tr.norms
            conv = coef * (vol if config.norm_convention == "integral" else 1.0)
            w.csv(f"traj_{ic}_omega{_tag(Om)}.csv", ["t", "norm"], zip(tr.times, conv))
            m = (tr.times >= window[0]) & (tr.times <= window[1])
            runs[Om][ic] = {"t": tr.times, "coefficient": coef, "integral": coef * vol,
                            "final": float(coef[-1]), "kind": classify_window(tr.times[m], coef[m]),
                            "residual": l2_norm(rhs(p, tr.final)) / max(l2_norm(tr.final), 1e-300)}
    verdict = assess_stabilization(runs[omegas[0]], runs[omegas[1]], opts)
    w.csv("terminal.csv", ["preset", "omega", "norm_coefficient", "norm_integral", "kind", "residual"],
          [(ic, Om, r["final"], r["integral"][-1], r["kind"], r["residual"])
           for Om in omegas for ic, r in runs[Om].items()])
    fig, ax = _figure(1, 2)
    for a, Om in zip(ax, omegas):
        for ic, r in runs[Om].items():
            a.plot(r["t"], r[config.norm_convention], label=f"IC {ic}")
        a.set_title(f"Omega = {Om:g}")
        a.set_xlabel("t")
        a.set_ylabel(f"||omega|| ({config.norm_convention})")
        a.legend()
    _save(fig, w.add("stabilize.svg"))
    metrics = {k: v for k, v in verdict.items() if k != "passed"}
    metrics["terminal"] = {f"{ic}@{Om:g}": runs[Om][ic]["final"] for Om in omegas for ic in runs[Om]}
    metrics["errors"] = errors
    return RunResult("stabilize", verdict["passed"], metrics, w.out, w.files)


# -- bifurcate ------------------------------------------------------------------------

def run_bifurcate(config: ExperimentConfig) -> RunResult:
    opts = config.options
    omegas = opts.get("omegas", list(range(0, 21, 2)))
    p = config.flow_params()
    res = sweep_omega(p, omegas, tol_rel=float(opts.get("tol_rel", 1e-4)),
                      initial_guess=float(opts.get("initial_guess", 10.0)), convention=config.norm_convention)
    w = _Writer(Path(config.output_dir))
    write_sweep_csv(res, w.add("sweep.csv"))
    metrics: dict[str, Any] = {"lambda0": {f"{r.Omega:g}": r.lambda0 for r in res},
                               "certified": all(r.certified for r in res)}
    passed = None
    fit = None
    if len(res) >= 3:
        fit = quadratic_fit([(r.Omega, r.lambda0) for r in res])
        fit.to_csv(w.add("fit.csv"))
        c2_lo, c2_hi = opts.get("c2_range", [0.853, 0.943])
        c0_lo, c0_hi = opts.get("c0_range", [0.8, 1.2])
        metrics.update(c2=fit.c2, c1=fit.c1, c0=fit.c0, rms=fit.rms_residual)
        passed = bool(c2_lo <= fit.c2 <= c2_hi and c0_lo <= fit.c0 <= c0_hi)
    fig, ax = _figure(1, 2)
    Om = np.array([r.Omega for r in res])
    ax[0].plot(Om, [r.lambda0 for r in res], "o", label="lambda_0")
    if fit is not None:
        xs = np.linspace(Om.min(), Om.max(), 200)
        ax[0].plot(xs, fit(xs), "-", label="quadratic fit")
    ax[0].set_xlabel("Omega")
    ax[0].set_ylabel("lambda_0")
    ax[0].legend()
    ax[1].plot(Om, [r.norm_at_crit for r in res], "o-")
    ax[1].set_xlabel("Omega")
    ax[1].set_ylabel(f"||omega(lambda_0)|| ({config.norm_convention})")
    _save(fig, w.add("bifurcation.svg"))
    return RunResult("bifurcate", passed, metrics, w.out, w.files)


# -- gap ----------------------------------------------------------------------------------

def run_gap(config: ExperimentConfig) -> RunResult:
    opts = config.options
    omegas = [float(x) for x in opts.get("omegas", list(range(0, 21, 2)))]
    N, M = int(opts.get("N", 3)), int(opts.get("M", 5))
    tol = float(opts.get("tol_rel", 1e-10))
    bound = float(opts.get("bound", 4e-4))
    flat_from = float(opts.get("flat_from", 10.0))
    flat_rel = float(opts.get("flat_rel", 0.5))
    base = config.flow_params()
    rows = []
    guess = {N: float(opts.get("initial_guess", 10.0)), M: float(opts.get("initial_guess", 10.0))}
    for Om in omegas:
        lam = {}
        for n in (N, M):
            p = base.replace(N=n, Omega=Om)
            lam[n] = critical_lambda(p, find_bracket(p, guess[n]), tol).lambda0
            guess[n] = lam[n]
        rows.append((Om, abs((lam[N] - lam[M]) / lam[N]), lam[N], lam[M]))
    w = _Writer(Path(config.output_dir))
    w.csv("gap.csv", ["omega", "E"], [(r[0], r[1]) for r in rows])
    E = np.array([r[1] for r in rows])
    Om = np.array(omegas)
    tail = E[Om >= flat_from]
    max_ok = bool(E.max() <= bound)
    if tail.size:
        variation = float(np.ptp(tail) / tail.mean()) if tail.mean() > 0 else 0.0
        flat_ok = variation <= flat_rel
    else:
        variation, flat_ok = float("nan"), True
    fig, ax = _figure()
    ax[0].plot(Om, E, "o-")
    ax[0].axhline(bound, ls="--", color="grey")
    ax[0].set_xlabel("Omega")
    ax[0].set_ylabel(f"E(Omega, {N}, {M})")
    _save(fig, w.add("gap.svg"))
    metrics = {"E_max": float(E.max()), "bound": bound, "max_ok": max_ok,
               "tail_variation": variation, "flat_ok": flat_ok,
               "E": {f"{o:g}": float(e) for o, e in zip(omegas, E)}}
    return RunResult("gap", bool(max_ok and flat_ok), metrics, w.out, w.files)


# -- convergence_time ---------------------------------------------------------------------

def linear_r2(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line y ≈ a x + b and its coefficient of determination."""
    a, b = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (a * x + b)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(a), float(b), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def convergence_ic(torus: TorusSpec, Omega: float) -> SpectralField:
    """Ω (sin x + cos x)."""
    return SpectralField.from_modes(torus, {(1, 0): Omega * (1 - 1j) / 2})


def run_convergence_time(config: ExperimentConfig) -> RunResult:
    opts = config.options
    omegas = [float(x) for x in opts.get("omegas", [10, 31.6, 100, 316, 1000, 3160, 10000])]
    tol = float(opts.get("residual_tol", 1e-5))
    t_max = float(opts.get("t_max", 1e3))
    fit_min = float(opts.get("fit_min_omega", 10.0))
    r2_min = float(opts.get("r2_min", 0.95))
    icfg = config.integrator_config()
    rows = []
    for Om in omegas:
        p = config.flow_params(Omega=Om)
        if config.initial_condition is None:
            u0 = convergence_ic(p.torus, Om)
        else:
            u0 = config.initial_field(p.torus)
        res = integrate_until_stationary(p, u0, tol, t_max, icfg)
        rows.append((Om, res.T, res.converged, res.steps))
    w = _Writer(Path(config.output_dir))
    w.csv("convergence_time.csv", ["omega", "T", "converged"], [r[:3] for r in rows])
    sel = [(r[0], r[1]) for r in rows if r[2] and r[0] >= fit_min]
    metrics: dict[str, Any] = {"T": {f"{r[0]:g}": r[1] for r in rows},
                               "steps": {f"{r[0]:g}": r[3] for r in rows},
                               "all_converged": all(r[2] for r in rows)}
    passed = None
    if len(sel) >= 3:
        x = np.log10([s[0] for s in sel])
        y = np.array([s[1] for s in sel])
        slope, icpt, r2 = linear_r2(x, y)
        metrics.update(slope=slope, intercept=icpt, r2=r2)
        passed = bool(r2 >= r2_min and metrics["all_converged"])
    fig, ax = _figure()
    ax[0].semilogx([r[0] for r in rows], [r[1] for r in rows], "o-")
    ax[0].set_xlabel("Omega")
    ax[0].set_ylabel("T")
    _save(fig, w.add("convergence_time.svg"))
    return RunResult("convergence_time", passed, metrics, w.out, w.files)


# -- galilean -------------------------------------------------------------------------------

def galilean_discrepancy(params: FlowParams, u0: SpectralField, times, config: IntegratorConfig) -> list[float]:
    """Max coefficient gap between the oscillating-forcing run and the shifted mean-flow run."""
    times = sorted(float(t) for t in times)
    t_end = times[-1]
    if t_end <= 0:
        return [0.0 for _ in times]
    snaps = [t for t in times if t > 0]
    a = integrate(params, u0, t_end, config, snapshot_times=snaps).snapshots
    b = integrate(params, u0, t_end, config, autonomous=False, snapshot_times=snaps).snapshots
    shift = params.beta * params.Omega
    out = []
    for t in times:
        if t == 0:
            out.append(0.0)
            continue
        d = field_shift(a[t], (0.0, shift * t)).coeffs - b[t].coeffs
        out.append(float(np.abs(d).max()))
    return out


def run_galilean(config: ExperimentConfig) -> RunResult:
    opts = config.options
    t_final = float(opts.get("t_final", 1.0))
    n = int(opts.get("samples", 5))
    tol = float(opts.get("tolerance", 1e-8))
    p = config.flow_params()
    times = list(np.linspace(0.0, t_final, n))
    disc = galilean_discrepancy(p, config.initial_field(p.torus), times, config.integrator_config())
    w = _Writer(Path(config.output_dir))
    w.csv("galilean.csv", ["t", "discrepancy"], zip(times, disc))
    worst = max(disc)
    return RunResult("galilean", bool(worst <= tol), {"max_discrepancy": worst, "tolerance": tol},
                     w.out, w.files)


# -- decay_rate -------------------------------------------------------------------------------

def decay_floor(params: FlowParams) -> float:
    """(ε min(1, 1/β²) + α) / 2."""
    return (params.epsilon * min(1.0, 1.0 / params.beta**2) + params.alpha) / 2


def velocity_gap_history(params: FlowParams, u_a: SpectralField, u_b: SpectralField, times,
                         config: IntegratorConfig) -> np.ndarray:
    """‖v_a(t) − v_b(t)‖ (coefficient convention) at the requested times."""
    times = [float(t) for t in times]
    snaps = [t for t in times if t > 0]
    if not snaps:
        return np.array([velocity_norm(u_a - u_b) for _ in times])
    a = integrate(params, u_a, max(snaps), config, snapshot_times=snaps).snapshots
    b = integrate(params, u_b, max(snaps), config, snapshot_times=snaps).snapshots
    return np.array([velocity_norm(u_a - u_b) if t == 0 else velocity_norm(a[t] - b[t]) for t in times])


def fit_decay_rate(t: np.ndarray, d: np.ndarray, t_from: float = 0.0, floor: float = 1e-12) -> float:
    """Rate r of d ≈ C e^{-rt} by a log-linear least-squares fit over t ≥ t_from."""
    m = (t >= t_from) & (d > floor * d.max())
    if m.sum() < 2:
        raise ValueError("not enough resolved samples to fit a decay rate")
    return float(-np.polyfit(t[m], np.log(d[m]), 1)[0])


def run_decay_rate(config: ExperimentConfig) -> RunResult:
    opts = config.options
    alphas = [float(a) for a in opts.get("alphas", [config.flow.get("alpha", 0.0)])]
    pair = opts.get("initial_conditions", ["I", "II"])
    t_final = float(opts.get("t_final", 8.0))
    n = int(opts.get("samples", 17))
    t_from = float(opts.get("fit_from", 1.0))
    factor = float(opts.get("floor_factor", 0.9))
    icfg = config.integrator_config()
    t = np.linspace(0.0, t_final, n)
    w = _Writer(Path(config.output_dir))
    rows = []
    fig, ax = _figure()
    for a in alphas:
        p = config.flow_params(alpha=a)
        ua, ub = initial_field(p.torus, pair[0]), initial_field(p.torus, pair[1])
        d = velocity_gap_history(p, ua, ub, t, icfg)
        w.csv(f"velocity_gap_alpha{_tag(a)}.csv", ["t", "velocity_diff"], zip(t, d))
        if d.max() == 0:
            rate = math.inf
        else:
            rate = fit_decay_rate(t, d, t_from)
        fl = decay_floor(p)
        rows.append((a, rate, fl, rate >= factor * fl))
        ax[0].semilogy(t, np.maximum(d, 1e-300), "o-", label=f"alpha = {a:g}")
    ax[0].set_xlabel("t")
    ax[0].set_ylabel("||v_a - v_b||")
    ax[0].legend()
    _save(fig, w.add("decay_rate.svg"))
    w.csv("decay_rate.csv", ["alpha", "rate", "floor", "passed"], rows)
    metrics = {"rates": {f"{r[0]:g}": r[1] for r in rows}, "floors": {f"{r[0]:g}": r[2] for r in rows}}
    return RunResult("decay_rate", all(r[3] for r in rows), metrics, w.out, w.files)


# -- toy --------------------------------------------------------------------------------------

def run_toy(config: ExperimentConfig) -> RunResult:
    opts = config.options
    alphas = [float(a) for a in opts.get("alphas", [1.0])]
    omegas = [float(o) for o in opts.get("omegas", [10.0, 100.0, 1000.0])]
    case = ToyCase(opts.get("case", "B"))
    torus = TorusSpec(float(config.flow.get("beta", 1.0)), int(config.flow.get("N", 2)))
    f = initial_field(torus, opts.get("f", [[1, 0, 0.5, 0.0]]))
    if config.initial_condition is None:
        w0 = f * float(opts.get("w0_scale", 5.0))
    else:
        w0 = initial_field(torus, config.initial_condition)
    horizon = float(opts.get("horizon", 10.0))
    samples = int(opts.get("samples", 2001))
    c1_max = float(opts.get("C1_max", 3.0))
    t_tail = float(opts.get("tail_time", 30.0))
    halving_rel = float(opts.get("halving_rel", 0.1))
    w = _Writer(Path(config.output_dir))
    rows = []
    ok = True
    for a in alphas:
        for Om in omegas:
            tp = ToyParams(a, Om, case, f)
            rep = verify_proposition1(tp, w0, horizon, samples)
            rep.to_csv(w.add(f"toy_alpha{_tag(a)}_omega{_tag(Om)}.csv"))
            tail = tail_amplitude(tp, w0, t_tail)
            tail2 = tail_amplitude(ToyParams(a, 2 * Om, case, f), w0, t_tail)
            ratio = tail2 / tail
            halves = abs(ratio - 0.5) <= halving_rel * 0.5
            rows.append((a, Om, rep.C1, rep.second_bound_holds, rep.mode_defect, tail, tail2, halves))
            ok = ok and rep.C1 <= c1_max and rep.second_bound_holds and halves
    w.csv("toy_summary.csv", ["alpha", "omega", "C1", "second_bound_holds", "mode_defect", "tail", "tail_2omega",
                              "halves"], rows)
    metrics = {"C1": {f"{r[0]:g},{r[1]:g}": r[2] for r in rows},
               "tail_ratio": {f"{r[0]:g},{r[1]:g}": r[6] / r[5] for r in rows},
               "mode_defect": max(r[4] for r in rows)}
    return RunResult("toy", bool(ok), metrics, w.out, w.files)


RUNNERS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "stabilize": run_stabilize,
    "bifurcate": run_bifurcate,
    "gap": run_gap,
    "convergence_time": run_convergence_time,
    "toy": run_toy,
    "galilean": run_galilean,
    "decay_rate": run_decay_rate,
}


def run(config: ExperimentConfig, source: bytes | None = None) -> RunResult:
    """Dispatch to the runner and write ``manifest.json`` next to its outputs."""
    start = time.perf_counter()
    try:
        result = RUNNERS[config.experiment](config)
    except BracketError as exc:
        raise ConfigurationError(str(exc)) from exc
    wall = time.perf_counter() - start
    inputs = {"resolved_config": git_blob_sha1(_canonical(config))}
    if source is not None:
        inputs["config_file"] = git_blob_sha1(source)
    notes = []
    if config.experiment in ("stabilize", "decay_rate"):
        notes.append(PRESET_I_NOTE)
    manifest = {
        "experiment": config.experiment,
        "package_version": __version__,
        "config": config.to_dict(),
        "input_hashes": inputs,
        "norm_convention": config.norm_convention,
        "wall_time_s": wall,
        "passed": result.passed,
        "metrics": _jsonable(result.metrics),
        "files": sorted(result.files),
        "notes": notes,
    }
    (result.output_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    result.files.append("manifest.json")
    return result


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj
