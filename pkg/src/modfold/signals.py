"""Bandlimited test inputs: finite sinc sums and pure sinusoids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SINC_SUM = "sinc_sum"
SINUSOID = "sinusoid"


@dataclass(frozen=True)
class BandlimitedSignal:
    """A signal in PW_Omega built from sinc atoms or a single sinusoid.

    For ``kind == "sinc_sum"`` the value at ``t`` is
    ``sum_i coeffs[i] * sinc(omega * (t - centers[i]) / pi)`` with
    ``sinc(u) = sin(pi u) / (pi u)``. For ``kind == "sinusoid"`` it is
    ``amp * sin(omega * t + phase)``.
    """

    kind: str
    omega: float
    centers: tuple = field(default_factory=tuple)
    coeffs: tuple = field(default_factory=tuple)
    amp: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.kind == SINC_SUM:
            object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
            if len(self.centers) != len(self.coeffs) or not self.centers:
                raise ValueError("centers and coeffs must have equal, non-zero length")
        elif self.kind != SINUSOID:
            raise ValueError(f"unknown signal kind {self.kind!r}")

    @classmethod
    def sinc_sum(cls, omega, centers, coeffs):
        return cls(SINC_SUM, float(omega), tuple(centers), tuple(coeffs))

    @classmethod
    def sinusoid(cls, omega, amp, phase=0.0):
        return cls(SINUSOID, float(omega), amp=float(amp), phase=float(phase))

    def __call__(self, t):
        return evaluate(self, t)

    def scaled(self, factor: float) -> "BandlimitedSignal":
        """Return a copy with every amplitude multiplied by ``factor``."""
        if self.kind == SINC_SUM:
            return BandlimitedSignal.sinc_sum(
                self.omega, self.centers, [c * factor for c in self.coeffs])
        return BandlimitedSignal.sinusoid(self.omega, self.amp * factor, self.phase)

    def to_dict(self) -> dict:
        if self.kind == SINC_SUM:
            return {"kind": SINC_SUM, "omega": self.omega,
                    "centers": list(self.centers), "coeffs": list(self.coeffs)}
        return {"kind": SINUSOID, "omega": self.omega, "amp": self.amp, "phase": self.phase}

    @classmethod
    def from_dict(cls, d: dict) -> "BandlimitedSignal":
        kind = d.get("kind")
        if kind == SINC_SUM:
            return cls.sinc_sum(d["omega"], d["centers"], d["coeffs"])
        if kind == SINUSOID:
            return cls.sinusoid(d["omega"], d["amp"], d.get("phase", 0.0))
        raise ValueError(f"unknown signal kind {kind!r}")


def evaluate(signal: BandlimitedSignal, t):
    """Evaluate ``signal`` at scalar or array ``t``; returns the same shape."""
    t_arr = np.asarray(t, dtype=float)
    if signal.kind == SINUSOID:
        out = signal.amp * np.sin(signal.omega * t_arr + signal.phase)
    else:
        centers = np.asarray(signal.centers)
        coeffs = np.asarray(signal.coeffs)
        u = signal.omega * (t_arr[..., None] - centers) / np.pi
        out = np.sinc(u) @ coeffs
    if np.ndim(t) == 0:
        return float(out)
    return out


def generate_random_sinc(omega, n_centers, t_start, spacing, amp_bound, seed):
    """Sinc sum with ``n_centers`` atoms spaced by ``spacing`` from ``t_start``.

    Coefficients are i.i.d. uniform on ``[-amp_bound, amp_bound]``, drawn from
    ``numpy.random.default_rng(seed)`` so that equal seeds give equal signals.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if amp_bound < 0:
        raise ValueError("amp_bound must be non-negative")
    if n_centers < 1:
        raise ValueError("n_centers must be at least 1")
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-amp_bound, amp_bound, size=n_centers)
    centers = t_start + spacing * np.arange(n_centers)
    return BandlimitedSignal.sinc_sum(omega, centers, coeffs)


def default_grid_step(omega):
    return (math.pi / omega) / 64


def sup_norm(signal: BandlimitedSignal, t_lo, t_hi, grid_step=None) -> float:
    """Max of |g| over ``[t_lo, t_hi]``: grid search, then ternary refinement."""
    if not t_lo < t_hi:
        raise ValueError(f"empty window [{t_lo}, {t_hi}]")
    if grid_step is None:
        grid_step = default_grid_step(signal.omega)
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    n = max(int(math.ceil((t_hi - t_lo) / grid_step)), 1)
    grid = np.linspace(t_lo, t_hi, n + 1)
    vals = np.abs(evaluate(signal, grid))
    i = int(np.argmax(vals))
    best = float(vals[i])
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n)]
    f = lambda x: abs(evaluate(signal, x))
    for _ in range(100):
        if b - a < 1e-15 * max(1.0, abs(a)):
            break
        m1 = a + (b - a) / 3
        m2 = b - (b - a) / 3
        if f(m1) < f(m2):
            a = m1
        else:
            b = m2
    return max(best, f(0.5 * (a + b)))


def derivative_sup_bound(g_inf, omega):
    """Bernstein bound on ||g'||_inf for g in PW_omega with ||g||_inf = g_inf."""
    return omega * g_inf
