"""Experiment configurations, presets and the generate-encode-recover pipeline."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .encoder import EncodedTrace, ModuloParams, encode_and_sample
from .io import write_plot_csv, write_report, write_rows_csv
from .lowrate import reconstruct_lowrate
from .metrics import err_percent, mse, prop1_bound, rmse_fold_times, thm2_bound, thm2_regime
from .report import RecoveryReport
from .signals import BandlimitedSignal, generate_random_sinc, sup_norm
from .threshold import check_conditions, max_order, reconstruct
from .usalg import effective_threshold_search, usalg

METHODS = ("threshold", "lowrate", "usalg")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Everything needed to run one generate-encode-recover pipeline.

    ``signal`` is either an explicit signal description (see
    :meth:`BandlimitedSignal.from_dict`) or a random sinc sum
    ``{"kind": "random_sinc", "omega", "n_centers", "t_start", "spacing",
    "amp_bound", "seed"}`` with optional ``"scale_to"`` (rescale so the
    sup norm over the sampling window equals that value).
    """

    signal: dict
    lam: float
    h: float
    alpha: float
    T: float
    K: int
    t0: float = 0.0
    eta_inf: float = 0.0
    noise_seed: Optional[int] = None
    method: str = "threshold"
    N: Union[int, str] = 1
    theta_beta: Optional[float] = None
    lambda_eff: Optional[float] = None
    grid_lo: Optional[float] = None
    grid_hi: Optional[float] = None
    grid_count: int = 200
    report: Optional[str] = None
    plot: Optional[str] = None
    name: str = ""

    @property
    def params(self) -> ModuloParams:
        return ModuloParams(self.lam, self.h, self.alpha)

    def validate(self) -> None:
        if not isinstance(self.K, (int, np.integer)) or self.K < 3:
            raise ConfigError(f"K must be an integer of at least 3, got {self.K!r}")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.eta_inf < 0:
            raise ConfigError("eta_inf must be non-negative")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.N != "auto" and (not isinstance(self.N, (int, np.integer)) or self.N < 1):
            raise ConfigError(f"N must be a positive integer or 'auto', got {self.N!r}")
        if isinstance(self.N, (int, np.integer)) and self.K < self.N + 2:
            raise ConfigError("K must exceed N + 1")
        if self.theta_beta is not None and not self.theta_beta > 0:
            raise ConfigError("theta_beta must be positive")
        if self.lambda_eff is not None and not self.lambda_eff > 0:
            raise ConfigError("lambda_eff must be positive")
        if self.grid_count < 1:
            raise ConfigError("grid_count must be at least 1")
        if not isinstance(self.signal, dict) or "kind" not in self.signal:
            raise ConfigError("signal must be a description with a 'kind' field")
        try:
            self.params
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(copy.deepcopy(self), **changes)


def _random_sinc(omega, n, amp, seed=0, scale_to=None):
    return {"kind": "random_sinc", "omega": omega, "n_centers": n, "t_start": 0.0,
            "spacing": None, "amp_bound": amp, "seed": seed, "scale_to": scale_to}


PRESETS = {
    # synthetic sinc sum, transient one sample period long
    "exp1": dict(signal=_random_sinc(4.4, 10, 6.0), lam=1.5, h=1.5, alpha=0.02,
                 T=0.02, K=400, method="threshold", N=3),
    # sinusoid of amplitude 12 with large hysteresis
    "exp2": dict(signal={"kind": "sinusoid", "omega": 188.0, "amp": 12.0, "phase": 0.0},
                 lam=2.01, h=3.23, alpha=9e-5, T=1e-4, K=700, method="threshold", N=2),
    # random bandlimited input at a lower rate
    "exp3": dict(signal=_random_sinc(188.0, 10, 20.0), lam=2.05, h=1.0, alpha=7e-5,
                 T=3.6e-4, K=480, method="threshold", N=2),
    # low-rate regime: consecutive folds may be a single sample apart
    "exp4": dict(signal=_random_sinc(1.5, 5, 20.0, scale_to=14.0), lam=1.0, h=0.1,
                 alpha=0.02, T=0.09, K=112, method="lowrate", N=2),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[name])
    sig_over = {k: overrides.pop(k) for k in ("seed", "scale_to", "omega") if k in overrides}
    if sig_over and d["signal"]["kind"] != "random_sinc":
        raise ConfigError(f"preset {name!r} has a fixed signal")
    d["signal"].update(sig_over)
    d.update(overrides)
    d["name"] = name
    return ExperimentConfig.from_dict(d)


def window(config: ExperimentConfig):
    return config.t0, config.t0 + (config.K - 1) * config.T


def build_signal(config: ExperimentConfig) -> BandlimitedSignal:
    desc = dict(config.signal)
    kind = desc.get("kind")
    try:
        if kind != "random_sinc":
            return BandlimitedSignal.from_dict(desc)
        omega = desc["omega"]
        spacing = desc.get("spacing") or math.pi / omega
        g = generate_random_sinc(omega, desc["n_centers"], desc.get("t_start", 0.0), spacing,
                                 desc["amp_bound"], desc.get("seed", 0))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete signal description: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    target = desc.get("scale_to")
    if target is not None:
        current = sup_norm(g, *window(config))
        if current == 0:
            raise ConfigError("cannot rescale an all-zero signal")
        g = g.scaled(target / current)
    return g


def resolve_order(config: ExperimentConfig, g_inf: float) -> int:
    if config.N != "auto":
        return int(config.N)
    n = max_order(config.params, config.T, build_signal(config).omega, g_inf, config.eta_inf)
    if n is None:
        raise ConfigError("no filter order meets the recovery conditions for N='auto'")
    return n


def recover(trace: EncodedTrace, params: ModuloParams, method: str, N: int, theta_beta=None,
            lambda_eff=None, grid_lo=None, grid_hi=None, grid_count=200,
            g_inf=None) -> RecoveryReport:
    """Run one recovery method on ``trace``; no metrics are attached."""
    truth = trace.ground_truth
    offset = truth.offset if truth is not None else 0.0
    if method == "threshold":
        return reconstruct(trace, params, N, omega=trace.omega, g_inf=g_inf, offset=offset)
    if method == "lowrate":
        return reconstruct_lowrate(trace, params, N, theta_beta=theta_beta, offset=offset)
    if method == "usalg":
        diag = {"warnings": []}
        if lambda_eff is None:
            if truth is None:
                raise ConfigError("usalg needs lambda_eff when no ground truth is available")
            search = effective_threshold_search(trace, N, grid_lo, grid_hi, grid_count)
            lambda_eff = search["lambda_usalg"]
            diag["line_search"] = {"grid": search["grid"], "errs": search["errs"]}
        gamma_tilde = usalg(trace.y, lambda_eff, N) + offset
        diag["lambda_eff"] = float(lambda_eff)
        return RecoveryReport("usalg", gamma_tilde, [], np.zeros(len(gamma_tilde)), None, N, diag)
    raise ConfigError(f"unknown method {method!r}")


def evaluate_report(report: RecoveryReport, trace: EncodedTrace, params: ModuloParams,
                    g_inf=None) -> dict:
    """Error metrics against the ground truth, plus the matching bounds."""
    truth = trace.ground_truth
    if truth is None:
        return {}
    n = len(report.gamma_tilde)
    gamma = truth.gamma[:n]
    m = {"err": err_percent(report.gamma_tilde, gamma), "mse": mse(report.gamma_tilde, gamma),
         "P_true": len(truth.folds), "P_est": report.P}
    if report.method != "usalg":
        taus = truth.folds.taus
        if report.P == len(taus):
            m["rmse_tau"] = rmse_fold_times(report.taus, taus)
            m["rmse_coarse"] = rmse_fold_times(
                trace.t0 + trace.T * np.array([f.n for f in report.folds], dtype=float), taus)
        else:
            m["rmse_tau"] = None
        m["prop1_bound"] = prop1_bound(params, report.N, len(taus), trace.K)
    else:
        m["lambda_usalg"] = report.diagnostics.get("lambda_eff")
    if g_inf is not None and trace.omega is not None:
        m["g_inf"] = g_inf
        if params.h_star > 0:
            m["thm2_bound"] = thm2_bound(params, trace.T, trace.omega, g_inf)
            m["thm2_regime"] = thm2_regime(params, trace.T, trace.omega, g_inf, trace.K)
        if report.N is not None:
            m["conditions"] = check_conditions(params, trace.T, trace.omega, g_inf,
                                               trace.eta_inf, report.N)
    return m


def simulate(config: ExperimentConfig):
    """Build the signal and encode it; returns ``(signal, trace, g_inf)``."""
    config.validate()
    g = build_signal(config)
    g_inf = sup_norm(g, *window(config))
    trace = encode_and_sample(g, config.params, config.T, config.K, config.t0,
                              config.eta_inf, config.noise_seed)
    return g, trace, g_inf


def run_experiment(config: ExperimentConfig):
    """Generate, encode, recover and score; writes files named in the config.

    Returns ``(trace, report)``. Recovery failures are recorded in the
    report's diagnostics instead of being raised.
    """
    g, trace, g_inf = simulate(config)
    N = resolve_order(config, g_inf)
    try:
        report = recover(trace, config.params, config.method, N, config.theta_beta,
                         config.lambda_eff, config.grid_lo, config.grid_hi, config.grid_count,
                         g_inf=g_inf)
        report.metrics = evaluate_report(report, trace, config.params, g_inf)
    except ConfigError:
        raise
    except ValueError as exc:
        report = RecoveryReport(config.method, np.full(trace.K, np.nan), [], np.zeros(trace.K),
                                None, N, {"warnings": [], "error": f"{type(exc).__name__}: {exc}"})
    report.diagnostics.setdefault("warnings", []).extend(trace.flags)
    if config.report:
        write_report(report, config.report, {"config": config.to_dict()})
    if config.plot:
        write_plot_csv(config.plot, trace, report)
    return trace, report


SWEEP_FIELDS = ("N", "T", "lambda_eff")


def sweep(config: ExperimentConfig, over: str, values, out_csv=None) -> list:
    """One pipeline run per value of ``over``; returns rows of scores.

    Sweeping ``lambda_eff`` reuses one trace and scores :func:`usalg` at every
    grid value. Sweeping ``N`` reuses one trace; sweeping ``T`` re-encodes.
    """
    if over not in SWEEP_FIELDS:
        raise ConfigError(f"sweep field must be one of {SWEEP_FIELDS}")
    values = list(values)
    if not values:
        raise ConfigError("empty sweep")
    rows = []
    if over == "T":
        for T in values:
            cfg = config.replace(T=float(T), report=None, plot=None)
            _, rep = run_experiment(cfg)
            rows.append(_row("T", float(T), rep))
    else:
        _, trace, g_inf = simulate(config.replace(report=None, plot=None))
        for v in values:
            if over == "N":
                N, lam_e = int(v), config.lambda_eff
            else:
                N, lam_e = resolve_order(config, g_inf), float(v)
            method = "usalg" if over == "lambda_eff" else config.method
            try:
                rep = recover(trace, config.params, method, N, config.theta_beta, lam_e,
                              config.grid_lo, config.grid_hi, config.grid_count, g_inf=g_inf)
                rep.metrics = evaluate_report(rep, trace, config.params, g_inf)
            except ValueError as exc:
                rep = RecoveryReport(method, np.array([]), [], np.array([]), None, N,
                                     {"error": str(exc)})
            rows.append(_row(over, v, rep))
    if out_csv:
        write_rows_csv(out_csv, rows)
    return rows


def _row(field_name, value, report: RecoveryReport) -> dict:
    m = report.metrics
    return {field_name: value, "method": report.method, "err": m.get("err", float("nan")),
            "rmse_tau": m.get("rmse_tau") if m.get("rmse_tau") is not None else float("nan"),
            "P_true": m.get("P_true", ""), "P_est": report.P if report.folds else "",
            "error": report.diagnostics.get("error", "")}


def load_config(path, overrides: dict = None) -> ExperimentConfig:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if overrides:
        d.update(overrides)
    return ExperimentConfig.from_dict(d)
