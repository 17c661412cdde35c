"""Generalized modulo encoder with hysteresis and linear folding transients.

The encoder keeps a running offset ``c`` (a sum of signed ``2 * lambda_h``
steps). The virtual output ``z = g - c`` lives in ``[-lambda, lambda]``:
when it reaches ``+lambda`` a positive fold fires and ``z`` resets to
``-lambda + h``; when it drops below ``-lambda`` a negative fold fires and
``z`` resets to ``lambda - h``. Each fold contributes a ramp of duration
``alpha`` to the residual, so samples taken during a transient see a partial
reset.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .signals import BandlimitedSignal, evaluate

log = logging.getLogger(__name__)

OVERLAP_WARNING = "overlapping-transients"


class ModelWarning(UserWarning):
    """Raised (as a warning) when a trace leaves the regime the theory covers."""


@dataclass(frozen=True)
class ModuloParams:
    lam: float
    h: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not 0 <= self.h < 2 * self.lam:
            raise ValueError(f"hysteresis must lie in [0, 2*lambda), got {self.h}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")

    @property
    def lambda_h(self) -> float:
        return self.lam - self.h / 2

    @property
    def h_star(self) -> float:
        return min(self.h, 2 * self.lam - self.h)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "h": self.h, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "ModuloParams":
        return cls(float(d["lambda"]), float(d.get("h", 0.0)), float(d.get("alpha", 0.0)))


@dataclass(frozen=True)
class FoldEvent:
    tau: float
    s: int


@dataclass
class FoldSequence:
    """Fold events in increasing time order plus any model warnings."""

    events: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    @property
    def taus(self) -> np.ndarray:
        return np.array([e.tau for e in self.events], dtype=float)

    @property
    def signs(self) -> np.ndarray:
        return np.array([e.s for e in self.events], dtype=int)


@dataclass
class GroundTruth:
    gamma: np.ndarray
    folds: FoldSequence
    params: ModuloParams
    offset: float = 0.0


@dataclass
class EncodedTrace:
    """Uniform samples ``y[k]`` taken at ``t0 + k*T``.

    ``ground_truth`` is present for simulated traces: clean input samples,
    the fold events inside the window and the initial offset (a multiple of
    ``2*lambda``) that the first sample carries.
    """

    T: float
    y: np.ndarray
    t0: float = 0.0
    eta_inf: float = 0.0
    omega: Optional[float] = None
    params: Optional[ModuloParams] = None
    ground_truth: Optional[GroundTruth] = None
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if not self.T > 0:
            raise ValueError("sampling period must be positive")
        if self.ground_truth is not None and len(self.ground_truth.gamma) != len(self.y):
            raise ValueError("gamma and y lengths differ")

    @property
    def K(self) -> int:
        return len(self.y)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.T * np.arange(self.K)


def ideal_modulo(x, lam):
    """Centered modulo: maps ``x`` into ``[-lam, lam)`` with ``x - result`` in 2*lam*Z."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    out = np.mod(x + lam, 2 * lam) - lam
    return float(out) if out.ndim == 0 else out


def epsilon0(t, params: ModuloParams):
    """Single-fold transient: 0 before 0, linear ramp over ``alpha``, then ``2*lambda_h``."""
    t = np.asarray(t, dtype=float)
    height = 2 * params.lambda_h
    if params.alpha == 0:
        out = np.where(t >= 0, height, 0.0)
    else:
        out = np.where(t < 0, 0.0,
                       np.where(t < params.alpha, height * t / params.alpha, height))
    return float(out) if out.ndim == 0 else out


def residual(t, folds, params: ModuloParams):
    """Sum of signed transients ``sum_p s_p * epsilon0(t - tau_p)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for ev in folds:
        out = out + ev.s * epsilon0(t - ev.tau, params)
    return float(out) if out.ndim == 0 else out


def _bisect(f, a, b, tol):
    # f(a) is False, f(b) is True; returns the smallest grid-refined b with f(b) True
    while b - a > tol:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if f(m):
            b = m
        else:
            a = m
    return b


def find_folds(g: BandlimitedSignal, params: ModuloParams, t_lo, t_hi,
               scan_step=None, tol=None) -> tuple[FoldSequence, float]:
    """Locate fold times of ``g`` on ``[t_lo, t_hi]``.

    Returns the fold sequence and the initial offset ``c0``: the encoder
    starts at ``t_lo`` in the state of an ideal modulo, i.e. with
    ``g(t_lo) - c0`` in ``[-lambda, lambda)``. Crossings are bracketed on a
    grid of pitch ``scan_step`` and refined by bisection to ``tol``.
    """
    if scan_step is None:
        scan_step = (math.pi / g.omega) / 64
    if tol is None:
        tol = 1e-12 * max(1.0, abs(t_lo), abs(t_hi))
    if scan_step > (math.pi / g.omega) / 8:
        raise ValueError("scan_step must not exceed (pi/omega)/8")
    lam = params.lam
    jump = 2 * params.lambda_h

    n = max(int(math.ceil((t_hi - t_lo) / scan_step)), 1)
    grid = np.linspace(t_lo, t_hi, n + 1)
    vals = evaluate(g, grid)
    g0 = float(vals[0])
    c0 = g0 - ideal_modulo(g0, lam)
    c = c0
    events = []

    for i in range(n):
        a = grid[i]
        b = grid[i + 1]
        gb = float(vals[i + 1])
        # several folds may fire within one grid cell when h is small
        while True:
            zb = gb - c
            if zb >= lam:
                s = 1
                cond = lambda t, c=c: evaluate(g, t) - c >= lam
            elif zb < -lam:
                s = -1
                cond = lambda t, c=c: evaluate(g, t) - c < -lam
            else:
                break
            tau = _bisect(cond, a, b, tol)
            events.append(FoldEvent(float(tau), s))
            c += s * jump
            a = tau

    folds = FoldSequence(events)
    if params.alpha > 0:
        gaps = np.diff(folds.taus)
        if np.any(gaps <= params.alpha):
            folds.warnings.append(OVERLAP_WARNING)
            warnings.warn("consecutive folds closer than the transient duration",
                          ModelWarning, stacklevel=2)
    return folds, c0


def encode_and_sample(g: BandlimitedSignal, params: ModuloParams, T, K, t0=0.0,
                      eta_inf=0.0, seed=None, scan_step=None, tol=None) -> EncodedTrace:
    """Encode ``g`` and sample the output at ``t0 + k*T`` for ``k < K``.

    Bounded noise, uniform on ``[-eta_inf, eta_inf]``, is added when
    ``eta_inf > 0``.
    """
    if not T > 0:
        raise ValueError("sampling period must be positive")
    if K < 1:
        raise ValueError("K must be at least 1")
    if eta_inf < 0:
        raise ValueError("eta_inf must be non-negative")
    flags = []
    if T < params.alpha:
        flags.append("T-below-alpha")
        warnings.warn("sampling period shorter than the transient", ModelWarning,
                      stacklevel=2)
    t = t0 + T * np.arange(K)
    t_end = float(t[-1]) if K > 1 else t0 + T
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        folds, c0 = find_folds(g, params, t0, t_end, scan_step, tol)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)
    flags.extend(folds.warnings)
    gamma = evaluate(g, t)
    y = gamma - c0 - residual(t, folds, params)
    if eta_inf > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.uniform(-eta_inf, eta_inf, size=K)
    truth = GroundTruth(gamma=np.asarray(gamma), folds=folds, params=params, offset=c0)
    return EncodedTrace(T=T, y=y, t0=t0, eta_inf=eta_inf, omega=g.omega, params=params,
                        ground_truth=truth, flags=flags)


def discrete_fold_indices(taus, t0, T) -> np.ndarray:
    """Index of the first sample at or after each fold time."""
    return np.ceil((np.asarray(taus, dtype=float) - t0) / T - 1e-12).astype(int)


def fold_betas(taus, t0, T, alpha) -> np.ndarray:
    """Fractional position of the first post-fold sample inside the transient."""
    taus = np.asarray(taus, dtype=float)
    n = discrete_fold_indices(taus, t0, T)
    lag = t0 + n * T - taus
    if alpha == 0:
        return np.ones_like(taus)
    return np.where(lag < alpha, lag / alpha, 1.0)


def min_fold_separation_bound(params: ModuloParams, omega, g_inf, T) -> int:
    """Guaranteed minimum gap, in samples, between consecutive discrete folds."""
    if params.h_star == 0:
        return 0
    return int(math.floor(params.h_star / (T * omega * g_inf)))
