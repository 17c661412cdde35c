"""Recovery at low sampling rates by a sequential sweep over filtered samples.

Only one run of ``N`` quiet filtered samples (the anchor) is needed; between
folds a single sample suffices. Starting at the anchor, the sweep walks
right (and, on the index-reversed data, left). At each index it reads the
corrected filtered value, which has every fold found so far removed. A fold
whose kernel starts at index ``k`` is attributed to sample ``m = k + N - 1``.
"""

from __future__ import annotations

import logging

import numpy as np

from .encoder import EncodedTrace, ModuloParams
from .report import CASE_EDGE, CASE_MID, FoldEstimate, RecoveryReport
from .threshold import (INFO_FLAGS, DegenerateClusterError, detection_threshold, estimate_isolated,
                        filter_samples, kernel, make_cluster, residual_from_estimates)

log = logging.getLogger(__name__)


class UnrecoverableTraceError(ValueError):
    """No anchor run exists, so the sweep has nowhere to start."""


def find_anchor(filtered, threshold, N: int):
    """Start of the first run of ``N`` consecutive sub-threshold filtered values."""
    filtered = np.asarray(filtered, dtype=float)
    last = len(filtered) - N
    run = 0
    for k in range(1, last + 1):
        if abs(filtered[k]) < threshold:
            run += 1
            if run == N:
                return k - N + 1
        else:
            run = 0
    return None


def _unit(m, N, K):
    # d_m with unit weight, zero outside the valid filter range
    return kernel(m, 1, 1.0, 0.5, N, K)


def _fit_beta(y, n, s, lh, N, idx):
    # least-squares share of a fold's jump on d_n, fitted on y[idx]; the two
    # shares sum to one, so the remainder is never read off a single sample
    K = len(y)
    idx = list(idx)
    lead = kernel(n, s, 1.0, lh, N, K)[idx]
    full = kernel(n, s, 0.0, lh, N, K)[idx]
    diff = lead - full
    denom = float(diff @ diff)
    if denom == 0:
        return 1.0
    return float(np.clip(-(y[idx] + full) @ diff / denom, 0.0, 1.0))


def _lead_before(y, k, m, s, lh, N):
    # Does a fold at m-1 (lead at k-1, rest at k) explain samples k-1 and k
    # better than a fold at m (lead at k)? The latter fits k exactly but
    # leaves k-1 as it is. Decided on these two samples only, since the
    # next fold may already reach k+1.
    if k < 2 or abs(y[k - 1]) < lh / (4 * N):
        return False
    K = len(y)
    idx = [k - 1, k]
    beta = _fit_beta(y, m - 1, s, lh, N, idx)
    cost_before = float(np.sum((y[idx] + kernel(m - 1, s, beta, lh, N, K)[idx]) ** 2))
    return cost_before < y[k - 1] ** 2


def _sweep(F, lh, N, theta_beta, k_start):
    """Forward sweep over filtered data ``F`` starting at ``k_start``.

    Returns ``(folds, corrected)`` where each fold is
    ``(n, s, beta, flags)`` in the index space of ``F``.
    """
    y = np.array(F, dtype=float)
    K = len(y)
    last = K - N
    base = lh / (2 * N)
    folds = []
    k = k_start
    while k <= last:
        yk = y[k]
        m = k + N - 1
        if abs(yk) > 2 * lh - base:
            # complete fold. A transient that is almost but not quite over at
            # sample m leaves a same-signed residue of 2*lh*delta*N at k+1.
            # A next fold starting there passes the two-sample transient test
            # below; the residue does not.
            s = -int(np.sign(yk))
            y += 2 * lh * s * _unit(m, N, K)
            b = 1.0
            if k + 1 <= last:
                r = y[k + 1]
                if base <= abs(r) <= 2 * N * base and np.sign(r) == np.sign(yk):
                    next_fold = False
                    if k + 2 <= last:
                        after = y[k + 2] - r * _unit(m + 1, N, K)[k + 2]
                        # the two parts of a real fold add up to the full
                        # jump up to the smooth leakage of two samples, each
                        # below base
                        next_fold = abs(r + after - 2 * lh * np.sign(r)) < 2 * base
                    if not next_fold:
                        delta = abs(r) / (2 * lh * N)
                        y += 2 * lh * s * delta * (_unit(m + 1, N, K) - _unit(m, N, K))
                        b = 1.0 - delta
            folds.append((m, s, b, []))
            k += 1
        elif abs(yk) >= base:
            s = -int(np.sign(yk))
            if k + 1 > last:
                y -= yk * _unit(m, N, K)
                folds.append((m, s, abs(yk) / (2 * lh), ["right-boundary"]))
                k += 1
                continue
            trial = y - yk * _unit(m, N, K)
            y_next = trial[k + 1]
            if (abs(yk + y_next - 2 * lh * np.sign(yk)) <= theta_beta
                    and not _lead_before(y, k, m, s, lh, N)):
                # k carries the leading part beta, k+1 the remainder
                beta = _fit_beta(y, m, s, lh, N, (k, k + 1))
                y += kernel(m, s, beta, lh, N, K)
                folds.append((m, s, beta, []))
                k += 2
            else:
                # the leading part sat, too small to see, at k-1
                flags = []
                beta = _fit_beta(y, m - 1, s, lh, N, (k - 1, k) if k >= 2 else (k,))
                alt = y + kernel(m - 1, s, beta, lh, N, K)
                if k + 1 <= last and abs(alt[k + 1]) > theta_beta:
                    flags.append("contradictory-split")
                y = alt
                folds.append((m - 1, s, beta, flags))
                k += 1
        else:
            k += 1
    return folds, y


def _refine(est_raw, F, lh, N, params, T, t0, refine_edges=True):
    # Re-estimate each fold from its own cluster once every other fold's
    # kernel is removed; keeps the sweep's estimate when the cluster is unclear.
    K = len(F)
    last = K - N
    thr = detection_threshold(params, N)
    kernels = [kernel(n, s, b, lh, N, K) for n, s, b, _ in est_raw]
    total = np.sum(kernels, axis=0) if kernels else np.zeros(K)
    out = []
    for (n, s, beta, flags), ker in zip(est_raw, kernels):
        sweep_est = FoldEstimate(n, s, t0 + n * T - params.alpha * beta, beta,
                                 CASE_EDGE if beta in (0.0, 1.0) else CASE_MID, list(flags))
        if set(flags) - {"right-boundary"}:
            out.append(sweep_est)
            continue
        G = F + (total - ker)
        lo, hi = max(n - N, 1), min(n + 2, last)
        hits = [k for k in range(lo, hi + 1) if abs(G[k]) >= thr]
        if not hits:
            out.append(sweep_est)
            continue
        k_m = hits[0]
        k_M = max(k for k in hits if k <= k_m + N)
        try:
            est, _ = estimate_isolated(make_cluster(k_m, k_M, N, last), G, params, N, T, t0,
                                       refine_edges)
        except DegenerateClusterError:
            out.append(sweep_est)
            continue
        odd = set(est.flags) - set(INFO_FLAGS) - {"left-boundary", "right-boundary"}
        if odd or est.s != s or abs(est.n - n) > 1:
            out.append(sweep_est)
        else:
            out.append(est)
    return out


def reconstruct_lowrate(trace: EncodedTrace, params: ModuloParams, N: int,
                        theta_beta=None, offset=0.0, refine=True) -> RecoveryReport:
    """Sequential low-rate recovery of the input samples.

    ``theta_beta`` (default ``lambda_h``) is the tolerance that decides which
    of two neighbouring samples holds a fold's transient. With ``refine``
    each fold found by the sweep is re-estimated from its isolated cluster,
    which sharpens the fold times and makes the result coincide with the
    cluster-based method whenever the folds are well separated.

    Once every fold's footprint is removed the filtered data should hold
    only smooth leakage; samples still at or above the detection threshold
    are reported as ``unexplained-residue`` warnings, which is how missed or
    misread folds (for instance transients on adjacent samples) show up.
    """
    if N < 1:
        raise ValueError("filter order must be at least 1")
    lh = params.lambda_h
    if theta_beta is None:
        theta_beta = lh
    if not theta_beta > 0:
        raise ValueError("theta_beta must be positive")
    y = trace.y
    K = len(y)
    F = filter_samples(y, N)
    thr = detection_threshold(params, N)
    k0 = find_anchor(F, thr, N)
    if k0 is None:
        raise UnrecoverableTraceError(f"no run of {N} sub-threshold filtered samples")

    forward, _ = _sweep(F, lh, N, theta_beta, k0)

    backward = []
    if k0 > 1:
        # reverse y[0 .. k0+2N-2]; in reversed time a fold of sign s at tau is
        # a fold of sign -s whose transient ends at the mirrored time
        L = min(k0 + 2 * N - 1, K)
        rev = y[:L][::-1]
        Fr = filter_samples(rev, N)
        folds_r, _ = _sweep(Fr, lh, N, theta_beta, 1)
        for n_r, s_r, b_r, fl in folds_r:
            # reversed sample j <-> original L-1-j; the ramp [tau', tau'+alpha]
            # maps to [t_end - tau' - alpha, t_end - tau']
            backward.append((L - 1 - n_r, -s_r, 1.0 - b_r, fl))
        backward.sort(key=lambda f: f[0])

    raw = backward + forward
    if refine:
        estimates = _refine(raw, F, lh, N, params, trace.T, trace.t0)
    else:
        estimates = [FoldEstimate(n, s, trace.t0 + n * trace.T - params.alpha * b, b,
                                  CASE_EDGE if b in (0.0, 1.0) else CASE_MID, list(fl))
                     for n, s, b, fl in raw]

    eps = residual_from_estimates(trace.times, estimates, params)
    gamma_tilde = y + eps + offset
    warn = [f"{flag} at n={e.n}" for e in estimates for flag in e.flags if flag not in INFO_FLAGS]
    # every fold's footprint removed, only smooth leakage should remain
    corrected = F + sum((kernel(e.n, e.s, 0.0 if e.beta is None else e.beta, lh, N, K)
                         for e in estimates), np.zeros(K))
    loud = np.flatnonzero(np.abs(corrected[1:K - N + 1]) >= thr) + 1
    warn.extend(f"unexplained-residue at k={k}" for k in loud)
    diagnostics = {"warnings": warn, "anchor": int(k0), "theta_beta": float(theta_beta),
                   "max_residue": float(np.max(np.abs(corrected))) if K else 0.0}
    if trace.ground_truth is not None and len(trace.ground_truth.folds) > 1:
        gaps = np.diff(trace.ground_truth.folds.taus)
        diagnostics["regime"] = bool(trace.T < gaps.min() - params.alpha)
    return RecoveryReport("lowrate", gamma_tilde, estimates, eps, F, N, diagnostics)
