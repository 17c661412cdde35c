import json

import numpy as np
import pytest

from modfold.experiments import (PRESETS, ConfigError, ExperimentConfig, build_signal, load_config,
                                 preset, resolve_order, run_experiment, sweep)
from modfold.signals import sup_norm


def small_config(**kw):
    d = dict(signal={"kind": "random_sinc", "omega": 1.0, "n_centers": 8, "t_start": 0.0,
                     "spacing": None, "amp_bound": 5.0, "seed": 0, "scale_to": 5.0},
             lam=1.0, h=1.0, alpha=0.02, T=0.05, K=400, method="threshold", N=2)
    d.update(kw)
    return ExperimentConfig.from_dict(d)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build_and_run(name):
    cfg = preset(name, seed=1) if name != "exp2" else preset(name)
    cfg.validate()
    trace, rep = run_experiment(cfg)
    assert trace.K == cfg.K and rep.method == cfg.method
    assert rep.metrics["err"] < 2.0


def test_preset_values():
    e2 = preset("exp2")
    assert (e2.lam, e2.h, e2.alpha, e2.T) == (2.01, 3.23, 9e-5, 1e-4)
    e4 = preset("exp4")
    assert (e4.lam, e4.h, e4.alpha, e4.T, e4.N, e4.method) == (1.0, 0.1, 0.02, 0.09, 2, "lowrate")
    assert preset("exp4", scale_to=16.0).signal["scale_to"] == 16.0
    with pytest.raises(ConfigError):
        preset("exp2", seed=3)
    with pytest.raises(ConfigError):
        preset("nope")


def test_scale_to_sets_window_norm():
    cfg = preset("exp4", seed=2)
    g = build_signal(cfg)
    assert sup_norm(g, 0.0, (cfg.K - 1) * cfg.T) == pytest.approx(14.0, rel=1e-9)


@pytest.mark.parametrize("bad", [dict(K=0), dict(T=0.0), dict(method="magic"), dict(N=0),
                                 dict(N="three"), dict(eta_inf=-1.0), dict(h=5.0),
                                 dict(grid_count=0), dict(theta_beta=-1.0),
                                 dict(signal={"omega": 1})])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        small_config(**bad).validate()


def test_unknown_field_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"lam": 1, "bogus": 2})


def test_config_dict_round_trip(tmp_path):
    cfg = small_config()
    f = tmp_path / "c.json"
    f.write_text(json.dumps(cfg.to_dict()))
    assert load_config(f) == cfg
    assert load_config(f, {"K": 100}).K == 100


def test_auto_order():
    # (0.01 * 1 * 1) with h* = 1 allows N = 8
    cfg = small_config(N="auto", T=0.01, alpha=0.0,
                       signal={"kind": "sinusoid", "omega": 1.0, "amp": 1.0, "phase": 0.0})
    assert resolve_order(cfg, 1.0) == 8
    with pytest.raises(ConfigError):
        resolve_order(small_config(N="auto"), 5.0)


def test_metrics_attached():
    trace, rep = run_experiment(small_config())
    m = rep.metrics
    assert m["P_true"] == m["P_est"] == len(trace.ground_truth.folds)
    assert m["mse"] <= m["prop1_bound"]
    assert m["conditions"] == {"TH1": True, "TH2": True}
    assert m["rmse_tau"] < 0.05


def test_recovery_failure_recorded_not_raised():
    # large input with no quiet stretch: the low-rate sweep has no anchor
    cfg = small_config(method="lowrate", lam=0.1, h=0.0, alpha=0.0, T=0.5, K=60)
    _, rep = run_experiment(cfg)
    assert "UnrecoverableTraceError" in rep.diagnostics["error"]
    assert np.all(np.isnan(rep.gamma_tilde))


def test_sweep_over_order(tmp_path):
    out = tmp_path / "rows.csv"
    rows = sweep(small_config(), "N", [1, 2, 3], out)
    assert [r["N"] for r in rows] == [1, 2, 3]
    assert rows[1]["err"] < 2.0
    assert len(out.read_text().splitlines()) == 4


def test_sweep_over_period_and_threshold():
    rows = sweep(small_config(), "T", [0.04, 0.05])
    assert [r["T"] for r in rows] == [0.04, 0.05]
    rows = sweep(small_config(alpha=0.0, h=0.0), "lambda_eff", [0.7, 1.0])
    assert rows[1]["err"] < 1e-12 and rows[0]["err"] > 1.0
    with pytest.raises(ConfigError):
        sweep(small_config(), "K", [1])
    with pytest.raises(ConfigError):
        sweep(small_config(), "N", [])


def test_report_and_plot_files(tmp_path):
    cfg = small_config(report=str(tmp_path / "r.json"), plot=str(tmp_path / "p.csv"))
    trace, rep = run_experiment(cfg)
    saved = json.loads((tmp_path / "r.json").read_text())
    assert saved["P"] == rep.P and saved["config"]["lambda"] == 1.0
    assert len(saved["gamma_tilde"]) == trace.K
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert all(len(line.split(",")) == 7 for line in lines)
