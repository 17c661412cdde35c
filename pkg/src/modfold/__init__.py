"""Modulo sampling with hysteresis and folding transients, and input recovery."""

from .encoder import (EncodedTrace, FoldEvent, ModuloParams, encode_and_sample, epsilon0,
                      find_folds, ideal_modulo, min_fold_separation_bound, residual)
from .lowrate import UnrecoverableTraceError, find_anchor, reconstruct_lowrate
from .metrics import (err_percent, mse, prop1_bound, rmse_fold_times, thm2_bound,
                      thm3_bound)
from .report import FoldEstimate, RecoveryReport
from .signals import (BandlimitedSignal, derivative_sup_bound, evaluate, generate_random_sinc,
                      sup_norm)
from .threshold import (check_conditions, detect_fold_clusters, detection_threshold,
                        estimate_fold, filter_samples, max_order, reconstruct)
from .usalg import effective_threshold_search, usalg

__version__ = "0.1.0"
