"""Fold detection by thresholding finite differences, and input reconstruction.

Filtered samples use the convention ``F[k] = Delta^N y[k-1]``, valid for
``1 <= k <= K - N`` and stored in a length-``K`` array that is zero outside
that range. A single fold whose first post-fold sample is ``n`` then leaves
non-zero filtered values only on ``n-N+1, ..., n+1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .encoder import EncodedTrace, ModuloParams, epsilon0
from .metrics import f_inverse_floor
from .report import CASE_EDGE, CASE_MID, FoldEstimate, RecoveryReport

log = logging.getLogger(__name__)


class DegenerateClusterError(ValueError):
    pass


INFO_FLAGS = ("edge-refined", "boundary-fit")     # flags that describe, rather than warn


@dataclass(frozen=True)
class Cluster:
    k_m: int
    k_M: int
    left_truncated: bool = False
    right_truncated: bool = False

    @property
    def width(self) -> int:
        return self.k_M - self.k_m


def filter_samples(y, N: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if N < 1:
        raise ValueError("filter order must be at least 1")
    K = len(y)
    if K < N + 2:
        raise ValueError(f"need at least N+2={N + 2} samples, got {K}")
    out = np.zeros(K)
    out[1:K - N + 1] = np.diff(y, N)
    return out


def detection_threshold(params: ModuloParams, N: int) -> float:
    return params.lambda_h / (2 * N)


def make_cluster(k_m, k_M, N, last) -> Cluster:
    """Cluster with truncation flags: a short cluster that a full-width one
    would push past either end of the valid range ``1..last``."""
    short = k_M - k_m < N
    return Cluster(k_m, k_M, left_truncated=short and k_M - N < 1,
                   right_truncated=short and k_m + N > last)


def detect_fold_clusters(filtered, threshold, N: int) -> list:
    """Group above-threshold filtered samples into one cluster per fold.

    Scanning left to right, a cluster starts at the first above-threshold
    index after the previous cluster and ends at the last above-threshold
    index no more than ``N`` samples later.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    filtered = np.asarray(filtered, dtype=float)
    last = len(filtered) - N
    hits = np.flatnonzero(np.abs(filtered) >= threshold)
    hits = hits[(hits >= 1) & (hits <= last)]
    clusters = []
    i = 0
    while i < len(hits):
        k_m = int(hits[i])
        j = i
        while j + 1 < len(hits) and hits[j + 1] <= k_m + N:
            j += 1
        k_M = int(hits[j])
        clusters.append(make_cluster(k_m, k_M, N, last))
        i = j + 1
    return clusters


def _beta_from_last(value, s, lambda_h, N):
    # filtered value at the fold's own sample: -2 lh s (-1)^(N-1) (N beta - (N-1))
    return ((-1) ** N * value + 2 * lambda_h * s * (N - 1)) / (2 * lambda_h * s * N)


def estimate_fold(cluster: Cluster, filtered, params: ModuloParams, N: int, T,
                  t0=0.0) -> FoldEstimate:
    """Discrete fold index, sign and fold time from one cluster."""
    filtered = np.asarray(filtered, dtype=float)
    lh = params.lambda_h
    last = len(filtered) - N
    flags = []
    if cluster.left_truncated:
        # leading samples fall before the data; the trailing sample keeps the sign
        s = int((-1) ** N * np.sign(filtered[cluster.k_M]))
        flags.append("left-boundary")
    else:
        s = -int(np.sign(filtered[cluster.k_m]))
    if s == 0:
        raise DegenerateClusterError(f"zero filtered value at k={cluster.k_m}")

    width = cluster.width
    if cluster.right_truncated:
        flags.append("right-boundary")
        n = cluster.k_m + N - 1
        if n <= last:
            beta = float(np.clip(_beta_from_last(filtered[n], s, lh, N), 0.0, 1.0))
            return FoldEstimate(n, s, t0 + n * T - params.alpha * beta, beta, CASE_MID, flags)
        return FoldEstimate(n, s, t0 + n * T, None, CASE_EDGE, flags)

    n = cluster.k_M - 1
    if width == N:
        beta = float(np.clip(_beta_from_last(filtered[n], s, lh, N), 0.0, 1.0))
        return FoldEstimate(n, s, t0 + n * T - params.alpha * beta, beta, CASE_MID, flags)
    if width != N - 1 and not cluster.left_truncated:
        flags.append("irregular-width")
    return FoldEstimate(n, s, t0 + n * T, None, CASE_EDGE, flags)


def residual_from_estimates(times, estimates, params: ModuloParams) -> np.ndarray:
    out = np.zeros(len(times))
    for est in estimates:
        out += est.s * epsilon0(np.asarray(times) - est.tau, params)
    return out


def kernel(n, s, beta, lambda_h, N, K) -> np.ndarray:
    """Filtered footprint of one fold: ``2 lh s (beta d_n + (1-beta) d_{n+1})``.

    ``d_m[k] = Delta^{N-1} delta[k-m]`` occupies ``m-N+1 .. m``. Entries
    outside the valid filter range are left at zero.
    """
    out = np.zeros(K)
    coeffs = np.array([math.comb(N - 1, N - 1 - i) * (-1) ** i for i in range(N)], dtype=float)
    for m, w in ((n, beta), (n + 1, 1.0 - beta)):
        if w == 0:
            continue
        for i, c in enumerate(coeffs):
            k = m - N + 1 + i
            if 1 <= k <= K - N:
                out[k] += 2 * lambda_h * s * w * c
    return out


def _fit_kernel(est, cluster, filtered, lh, N):
    """Best-fitting footprint of a detected fold as ``(n, beta, kernel)``.

    Near a transient edge the cluster is one sample short and the fold may
    sit at ``k_M - 1`` or ``k_M``; both are tried and the one whose footprint
    explains the cluster best is kept.
    """
    K = len(filtered)
    last = K - N
    s = est.s

    def candidate(n):
        if not 1 <= n <= last:
            return None
        beta = float(np.clip(_beta_from_last(filtered[n], s, lh, N), 0.0, 1.0))
        return n, beta, kernel(n, s, beta, lh, N, K)

    if est.case == CASE_MID:
        return candidate(est.n)
    # score on the cluster and one sample either side: the part of a split
    # transient too small to detect sits just before or just after it
    lo = max(cluster.k_m - 1, 1)
    hi = min(cluster.k_M + 1, last)
    best, best_cost = None, None
    for n in (cluster.k_M - 1, cluster.k_M):
        cand = candidate(n)
        if cand is None:
            continue
        ker = cand[2]
        cost = float(np.sum((filtered[lo:hi + 1] + ker[lo:hi + 1]) ** 2))
        if best is None or cost < best_cost:
            best, best_cost = cand, cost
    return best


def _edge_estimate(est, fit, T, t0, alpha):
    # the fitted footprint also pins down the time of an edge fold
    n, beta, _ = fit
    return FoldEstimate(n, est.s, t0 + n * T - alpha * beta, beta, CASE_EDGE,
                        est.flags + ["edge-refined"])


def _ls_fit(F, idx, s, lh, N, candidates):
    # least-squares beta for each candidate fold index, fitted on F[idx]; a
    # fold near the end of the data only needs its first filtered sample
    # inside the valid range
    K = len(F)
    best = None
    for n in candidates:
        if not (1 <= n and n - N + 1 <= K - N):
            continue
        full = kernel(n, s, 0.0, lh, N, K)       # weight entirely on d_{n+1}
        lead = kernel(n, s, 1.0, lh, N, K)       # weight entirely on d_n
        diff = (lead - full)[idx]
        denom = float(diff @ diff)
        beta = 0.0 if denom == 0 else -float((F[idx] + full[idx]) @ diff) / denom
        beta = float(np.clip(beta, 0.0, 1.0))
        ker = full + beta * (lead - full)
        cost = float(np.sum((F[idx] + ker[idx]) ** 2))
        if best is None or cost < best[0]:
            best = (cost, n, beta, ker)
    return best


def _local_refit(F, k_m, s, lh, N, T, t0, alpha):
    # fold whose later samples are shared with a neighbour: fit position and
    # beta to the leading samples only, which the next fold cannot reach
    last = len(F) - N
    idx = np.arange(max(k_m - 1, 1), min(k_m + 1, last) + 1)
    best = _ls_fit(F, idx, s, lh, N, (k_m + N - 2, k_m + N - 1))
    if best is None:
        return None, None
    _, n, beta, ker = best
    est = FoldEstimate(n, s, t0 + n * T - alpha * beta, beta, CASE_MID, ["overlap-refit"])
    return est, ker


def _boundary_fit(F, est, cluster, lh, N, T, t0, alpha):
    # fold cut by the data window: fit its visible samples
    last = len(F) - N
    if cluster.left_truncated:
        idx = np.arange(1, min(cluster.k_M + 1, last) + 1)
        candidates = (cluster.k_M - 1, cluster.k_M)
    else:
        idx = np.arange(max(cluster.k_m - 1, 1), last + 1)
        candidates = (cluster.k_m + N - 2, cluster.k_m + N - 1)
    best = _ls_fit(F, idx, est.s, lh, N, candidates)
    if best is None:
        return est, None
    _, n, beta, ker = best
    fitted = FoldEstimate(n, est.s, t0 + n * T - alpha * beta, beta, est.case,
                          est.flags + ["boundary-fit"])
    return fitted, ker


def estimate_isolated(cluster: Cluster, filtered, params: ModuloParams, N: int, T, t0=0.0,
                      refine=True):
    """Estimate one fold from a cluster that no other fold's footprint reaches.

    Returns ``(estimate, kernel)``; the kernel is the fitted footprint, or
    ``None`` when the cluster is too irregular to fit. With ``refine`` the
    time of an edge fold comes from the fitted footprint and a fold cut by
    the data window is fitted on its visible samples.
    """
    F = np.asarray(filtered, dtype=float)
    lh = params.lambda_h
    est = estimate_fold(cluster, F, params, N, T, t0)
    if cluster.left_truncated != cluster.right_truncated:
        if refine:
            return _boundary_fit(F, est, cluster, lh, N, T, t0, params.alpha)
        return est, None
    if est.flags:
        return est, None
    fit = _fit_kernel(est, cluster, F, lh, N)
    if fit is None:
        return est, None
    if est.case == CASE_EDGE and refine:
        est = _edge_estimate(est, fit, T, t0, params.alpha)
    return est, fit[2]


def sequential_estimates(filtered, params: ModuloParams, N: int, T, t0=0.0,
                         deflate=True, refine_edges=True):
    """Detect and estimate folds left to right.

    With ``deflate`` each estimated fold's footprint is removed from the
    filtered data and the scan resumes just after the cluster start, so a
    sample shared with the next cluster is not lost. If removing the
    footprint leaves above-threshold values inside the cluster, the cluster
    was contaminated by a neighbouring fold and the fold is refitted from its
    leading samples instead (flagged ``overlap-refit``). When clusters are
    disjoint the (n, s) estimates equal those of the plain cluster rule.

    With ``refine_edges`` a fold whose cluster is one sample short (a sample
    near a transient edge) gets its time from the fitted footprint instead of
    the coarse ``n*T``; such estimates carry the ``edge-refined`` flag.
    """
    F = np.array(filtered, dtype=float)
    K = len(F)
    last = K - N
    thr = detection_threshold(params, N)
    lh = params.lambda_h
    estimates, warn = [], []
    k = 1
    while k <= last:
        hits = np.flatnonzero(np.abs(F[k:last + 1]) >= thr)
        if hits.size == 0:
            break
        k_m = k + int(hits[0])
        window = np.abs(F[k_m:min(k_m + N, last) + 1]) >= thr
        k_M = k_m + int(np.flatnonzero(window)[-1])
        cl = make_cluster(k_m, k_M, N, last)
        try:
            est, ker = estimate_isolated(cl, F, params, N, T, t0, refine_edges)
        except DegenerateClusterError as exc:
            warn.append(f"degenerate-cluster at k={k_m}: {exc}")
            k = k_M + 1
            continue
        boundary = cl.left_truncated or cl.right_truncated
        if not deflate:
            ker = None
        elif not boundary:
            inner = slice(k_m, k_M)
            if ker is None or np.any(np.abs(F[inner] + ker[inner]) >= thr):
                refit, rker = _local_refit(F, k_m, est.s, lh, N, T, t0, params.alpha)
                if refit is not None:
                    est, ker = refit, rker
        estimates.append(est)
        warn.extend(f"{flag} at k={k_m}" for flag in est.flags if flag not in INFO_FLAGS)
        if ker is None:
            k = k_M + 1
        else:
            F += ker
            k = k_m + 1
    return estimates, warn


def reconstruct(trace: EncodedTrace, params: ModuloParams, N: int, omega=None,
                g_inf=None, offset=0.0, deflate=True) -> RecoveryReport:
    """Threshold-based recovery of the input samples.

    The first sample is taken as unfolded; ``offset`` (the known multiple of
    ``2*lambda`` it carries) is added back to the result.
    """
    if N < 1:
        raise ValueError("filter order must be at least 1")
    filtered = filter_samples(trace.y, N)
    thr = detection_threshold(params, N)
    estimates, warn = sequential_estimates(filtered, params, N, trace.T, trace.t0, deflate)
    eps = residual_from_estimates(trace.times, estimates, params)
    gamma_tilde = trace.y + eps + offset
    diagnostics = {"warnings": warn, "threshold": thr}
    if omega is not None and g_inf is not None:
        diagnostics.update(check_conditions(params, trace.T, omega, g_inf, trace.eta_inf, N))
    return RecoveryReport("threshold", gamma_tilde, estimates, eps, filtered, N, diagnostics)


def check_conditions(params: ModuloParams, T, omega, g_inf, eta_inf, N) -> dict:
    """Sufficient recovery conditions: filtered-input smallness and fold separation."""
    th1 = (T * omega * math.e) ** N * g_inf + 2 ** N * eta_inf <= params.lambda_h / (2 * N)
    th2 = (N + 1) * T * omega * g_inf <= params.h_star
    return {"TH1": bool(th1), "TH2": bool(th2)}


def max_order(params: ModuloParams, T, omega, g_inf, eta_inf=0.0):
    """Largest filter order with a recovery guarantee, or ``None``."""
    x = T * omega * g_inf
    h_star = params.h_star
    if eta_inf == 0:
        bound = h_star / (4 * math.e * x) - 1
    else:
        if eta_inf > params.lambda_h / 8:
            return None
        bound = min(h_star / (8 * math.e * x) - 1,
                    f_inverse_floor(params.lambda_h / eta_inf))
    n = math.floor(bound)
    return n if n >= 1 else None
