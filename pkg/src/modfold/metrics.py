"""Error metrics and the theoretical reconstruction-error bounds."""

from __future__ import annotations

import math

import numpy as np

from .encoder import ModuloParams


def mse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty sequences")
    return float(np.mean((a - b) ** 2))


def err_percent(gamma_tilde, gamma) -> float:
    """Relative error ``100 * MSE(gamma_tilde, gamma) / MSE(gamma, 0)``."""
    gamma = np.asarray(gamma, dtype=float)
    energy = mse(gamma, np.zeros_like(gamma))
    if energy == 0:
        raise ValueError("reference sequence has zero energy")
    return 100.0 * mse(gamma_tilde, gamma) / energy


def rmse_fold_times(tau_tilde, tau) -> float:
    tau_tilde = np.asarray(tau_tilde, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if tau_tilde.shape != tau.shape:
        raise ValueError(f"fold count mismatch: {tau_tilde.size} estimated, {tau.size} true")
    if tau.size == 0:
        return 0.0
    return math.sqrt(mse(tau_tilde, tau))


def f_growth(x):
    """The increasing map ``x * 2**(x + 2)`` that limits the order under noise."""
    return x * 2.0 ** (x + 2)


def f_inverse(v: float) -> float:
    """Real inverse of :func:`f_growth` on ``v > 0``."""
    if v <= 0:
        raise ValueError("f_inverse is defined for positive values")
    lo, hi = 0.0, 1.0
    while f_growth(hi) < v:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_growth(mid) < v:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def f_inverse_floor(v: float) -> int:
    """Largest integer ``n >= 0`` with ``f_growth(n) <= v``."""
    n = 0
    while f_growth(n + 1) <= v:
        n += 1
    return n


def prop1_bound(params: ModuloParams, N, P, K) -> float:
    """MSE bound ``(lambda_h / N)**2 * P / K`` for known fold count."""
    if K < 1:
        raise ValueError("K must be at least 1")
    return params.lambda_h ** 2 / N ** 2 * P / K


def prop1_bound_unknown_p(params: ModuloParams, N, T, omega, g_inf, K=None) -> float:
    """MSE bound with the fold count replaced by its separation-based estimate."""
    h_star = params.h_star
    if h_star == 0:
        raise ValueError("bound requires h* > 0")
    if K is not None and h_star > K * T * omega * g_inf:
        raise ValueError("bound requires h* <= K T omega g_inf")
    return params.lambda_h ** 2 / N ** 2 * (2 * T * omega * g_inf / h_star)


def thm2_bound(params: ModuloParams, T, omega, g_inf) -> float:
    """Noiseless cubic bound ``C * T**3``."""
    c = 2 * (16 * math.e * params.lambda_h) ** 2 * (omega * g_inf / params.h_star) ** 3
    return c * T ** 3


def thm2_regime(params: ModuloParams, T, omega, g_inf, K) -> dict:
    x = T * omega * g_inf
    return {"separation": 8 * math.e * x <= params.h_star,
            "count": params.h_star <= K * x,
            "transient": T >= 2 * params.alpha}


def thm3_bound(params: ModuloParams, T, omega, g_inf, eta_inf) -> float:
    """Noisy bound ``max(C * T**3, C_eta * T)``."""
    lh = params.lambda_h
    if eta_inf > lh / 8:
        raise ValueError("noise level above lambda_h / 8 is outside the bound's regime")
    ratio = omega * g_inf / params.h_star
    c = 2 * (32 * math.e * lh) ** 2 * ratio ** 3
    if eta_inf == 0:
        c_eta = 0.0
    else:
        c_eta = 8 * lh ** 2 / f_inverse(lh / eta_inf) ** 2 * ratio
    return max(c * T ** 3, c_eta * T)
