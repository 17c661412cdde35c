"""Trace files, report files and parameter estimation for ingested data.

A trace is stored as a CSV with header ``k,t,y[,gamma]`` and an optional
JSON sidecar next to it (same stem, ``.json``) holding the sampling period,
the encoder parameters and, for simulated data, the fold events. Values are
written with 17 significant digits, so float64 samples round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .encoder import EncodedTrace, FoldEvent, FoldSequence, GroundTruth, ModuloParams
from .report import RecoveryReport, _jsonable

FMT = "{:.17g}"


class TraceFormatError(ValueError):
    """Malformed trace file; the message names the offending line."""


class EstimationError(ValueError):
    """Parameters cannot be estimated from the samples."""


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_trace(trace: EncodedTrace, csv_path, include_gamma=True) -> Path:
    """Write ``trace`` as CSV plus JSON sidecar; returns the sidecar path."""
    csv_path = Path(csv_path)
    truth = trace.ground_truth
    with_gamma = include_gamma and truth is not None
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "y", "gamma"] if with_gamma else ["k", "t", "y"])
        for k, (t, y) in enumerate(zip(trace.times, trace.y)):
            row = [k, FMT.format(t), FMT.format(y)]
            if with_gamma:
                row.append(FMT.format(truth.gamma[k]))
            w.writerow(row)
    params = trace.params if trace.params is not None else (truth.params if truth else None)
    meta = {"T": trace.T, "t0": trace.t0, "eta_inf": trace.eta_inf, "omega": trace.omega}
    if params is not None:
        meta.update({"lambda": params.lam, "h": params.h, "alpha": params.alpha})
    if truth is not None:
        meta["offset"] = truth.offset
        meta["folds"] = [{"tau": f.tau, "s": f.s} for f in truth.folds]
    if trace.flags:
        meta["flags"] = list(trace.flags)
    side = sidecar_path(csv_path)
    side.write_text(json.dumps(_jsonable(meta), indent=2) + "\n", encoding="utf-8")
    return side


def _read_csv(csv_path):
    # returns (columns, rows) with rows already converted to float
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{csv_path}: line 1: empty file") from None
        header = [c.strip() for c in header]
        if header not in (["k", "t", "y"], ["k", "t", "y", "gamma"], ["t", "y"]):
            raise TraceFormatError(
                f"{csv_path}: line 1: header must be 'k,t,y[,gamma]' or 't,y', got {','.join(header)!r}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise TraceFormatError(
                    f"{csv_path}: line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise TraceFormatError(f"{csv_path}: line {line}: non-numeric field") from None
    if not rows:
        raise TraceFormatError(f"{csv_path}: no samples")
    return header, np.array(rows, dtype=float)


def ingest_trace(csv_path, meta: ModuloParams = None, T=None, keep_truth=False) -> EncodedTrace:
    """Load a trace file.

    Parameters come from ``meta``, else from the sidecar, else from
    :func:`estimate_params` (the trace is then flagged ``"estimated"``).
    ``T`` overrides the sidecar and the spacing of the ``t`` column. Clean
    samples and folds are attached only with ``keep_truth``.
    """
    header, data = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    t = data[:, col["t"]]
    y = data[:, col["y"]]
    side = sidecar_path(csv_path)
    info = {}
    if side.exists():
        try:
            info = json.loads(side.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{side}: line {exc.lineno}: {exc.msg}") from None
    if T is None:
        T = info.get("T")
    if T is None:
        if len(t) < 2:
            raise TraceFormatError(f"{csv_path}: cannot infer the sampling period from one sample")
        T = float(np.median(np.diff(t)))
    if not T > 0:
        raise TraceFormatError(f"{csv_path}: sampling period must be positive")
    t0 = float(info.get("t0", t[0]))
    flags = list(info.get("flags", []))
    params = meta
    if params is None and "lambda" in info:
        params = ModuloParams(info["lambda"], info.get("h", 0.0), info.get("alpha", 0.0))
    if params is None:
        params = estimate_params(y, T)
        flags.append("estimated")
    truth = None
    if keep_truth and "gamma" in col:
        folds = FoldSequence([FoldEvent(f["tau"], int(f["s"])) for f in info.get("folds", [])])
        truth = GroundTruth(gamma=data[:, col["gamma"]], folds=folds, params=params,
                            offset=float(info.get("offset", 0.0)))
    return EncodedTrace(T=float(T), y=y, t0=t0, eta_inf=float(info.get("eta_inf", 0.0)),
                        omega=info.get("omega"), params=params, ground_truth=truth, flags=flags)


JUMP_FRACTION = 0.4     # a fold jump moves y by more than this share of its range
STEP_FRACTION = 0.05    # steps this large may belong to a transient split over samples


def _jump_events(y):
    """Fold jumps as ``(size, steps, pre, slope)`` with the smooth drift removed.

    A run of same-signed large steps is one jump; the input moves against
    the fold, so its own steps do not join the run, and a run whose
    neighbours move the same way, or whose neighbours are both jumps, is a
    steep stretch of the input instead. The local slope, taken
    from the steps on either side, is subtracted from every step of the run.
    Runs holding two or more folds in a row are discarded. ``pre`` is the
    magnitude of the last sample before the jump and ``slope`` the size of
    one input step there.
    """
    d = np.diff(y)
    span = float(np.max(y) - np.min(y))
    if span == 0:
        return []
    big = np.abs(d) > STEP_FRACTION * span
    runs = []
    i = 0
    while i < len(d):
        if not big[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(d) and big[j + 1] and np.sign(d[j + 1]) == np.sign(d[i]):
            j += 1
        near = [d[q] for q in (i - 1, j + 1) if 0 <= q < len(d)]
        # a steep stretch of the input fades out through same-signed steps
        steep = any(not abs(v) > STEP_FRACTION * span and np.sign(v) == np.sign(d[i])
                    and abs(v) > 0.5 * STEP_FRACTION * span for v in near)
        side = [v for v in near if abs(v) <= JUMP_FRACTION * span]
        slope = float(np.mean(side)) if side else 0.0
        steps = d[i:j + 1] - slope
        size = abs(float(np.sum(steps)))
        # a stretch squeezed between two fold jumps has no ordinary neighbour
        if side and not steep and size > JUMP_FRACTION * span:
            runs.append((size, np.abs(steps), abs(y[i]), abs(slope)))
        i = j + 1
    if not runs:
        return []
    typical = float(np.median([r[0] for r in runs]))
    return [r for r in runs if r[0] < 1.5 * typical]


def estimate_params(y, T) -> ModuloParams:
    """Closed-form estimates of threshold, hysteresis and transient length.

    Every sample lies within the threshold, and the last sample before a
    fold lies within one input step of it, so the threshold is taken as the
    midpoint of ``max|y|`` and the smallest such upper bound. Each fold shows up as a jump of at least
    a large share of the sample range, and the median jump size estimates
    ``2*lambda_h``. A jump spread over three or more steps is a sampled
    transient whose full-slope step ``2*lambda_h*T/alpha`` gives the
    transient length. When most jumps are shorter, at most one sample lands
    on each transient, which happens with probability ``alpha/T``; the share
    of two-step jumps then estimates ``alpha/T``.
    """
    y = np.asarray(y, dtype=float)
    if not T > 0:
        raise ValueError("sampling period must be positive")
    if y.size < 3:
        raise EstimationError("need at least three samples")
    events = _jump_events(y)
    if len(events) < 2:
        raise EstimationError(f"found {len(events)} fold jumps, need at least 2")
    two_lh = float(np.median([e[0] for e in events]))
    # only jumps of the typical size inform the threshold and transient length
    typical = [e for e in events if abs(e[0] - two_lh) <= 0.1 * two_lh]
    lo = float(np.max(np.abs(y)))
    hi = max(lo, min(pre + slope for _, _, pre, slope in typical))
    lam = 0.5 * (lo + hi)
    h = float(np.clip(2 * lam - two_lh, 0.0, np.nextafter(2 * lam, 0)))
    clean = [e[1] for e in typical]
    long_ramps = [two_lh * T / float(np.max(steps)) for steps in clean if len(steps) >= 3]
    if len(long_ramps) * 2 > len(clean):
        alpha = float(np.median(long_ramps))
    else:
        alpha = T * sum(len(steps) == 2 for steps in clean) / max(len(clean), 1)
    return ModuloParams(lam, h, alpha)


def write_report(report: RecoveryReport, path, extra=None) -> None:
    d = report.to_dict()
    if extra:
        d.update(_jsonable(extra))
    Path(path).write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")


def write_plot_csv(path, trace: EncodedTrace, report: RecoveryReport) -> None:
    """Per-sample plot data: ``k,t,y,gamma,gamma_tilde,residual_tilde,filtered``.

    Missing quantities are left empty so every row has seven fields.
    """
    K = trace.K
    gamma = trace.ground_truth.gamma if trace.ground_truth is not None else None

    def col(arr, k):
        return FMT.format(arr[k]) if arr is not None and k < len(arr) else ""

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "y", "gamma", "gamma_tilde", "residual_tilde", "filtered"])
        for k in range(K):
            w.writerow([k, FMT.format(trace.times[k]), FMT.format(trace.y[k]), col(gamma, k),
                        col(report.gamma_tilde, k), col(report.residual_tilde, k),
                        col(report.filtered, k)])


def write_rows_csv(path, rows: list) -> None:
    """Write a list of flat dicts (same keys) as CSV."""
    if not rows:
        raise ValueError("no rows to write")
    keys = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (FMT.format(v) if isinstance(v, float) else v) for k, v in r.items()})
