"""Shared trace builders for the test suite."""

import math
import warnings

import numpy as np
import pytest

from modfold.encoder import EncodedTrace, FoldEvent, FoldSequence, GroundTruth, ModuloParams
from modfold.encoder import encode_and_sample, residual
from modfold.signals import generate_random_sinc, sup_norm

# Parameters of the hand-worked single-fold example: lambda_h = 0.75, T = 1,
# fold at 3.8 with a 0.5 s ramp, so sample 4 sees 40% of the jump.
SINGLE_PARAMS = ModuloParams(1.5, 1.5, 0.5)
SINGLE_TAU = 3.8

# A family that meets both sufficient recovery conditions at N = 2:
# (T*omega*e)^2 * g_inf = 0.092 <= lambda_h/4 = 0.125 and 3*T*omega*g_inf = 0.75 <= h* = 1.
GOOD_PARAMS = ModuloParams(1.0, 1.0, 0.02)
GOOD_T = 0.05
GOOD_K = 400
GOOD_OMEGA = 1.0
GOOD_GINF = 5.0


@pytest.fixture(autouse=True)
def _quiet_model_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def planted_trace(tau=SINGLE_TAU, s=1, params=SINGLE_PARAMS, K=10, T=1.0):
    """Zero input with one planted fold: ``y = -residual``."""
    folds = FoldSequence([FoldEvent(tau, s)])
    t = T * np.arange(K)
    y = -residual(t, folds, params)
    truth = GroundTruth(gamma=np.zeros(K), folds=folds, params=params, offset=0.0)
    return EncodedTrace(T=T, y=y, params=params, ground_truth=truth)


def good_signal(seed):
    g = generate_random_sinc(GOOD_OMEGA, 8, 0.0, math.pi, 5.0, seed)
    return g.scaled(GOOD_GINF / sup_norm(g, 0.0, (GOOD_K - 1) * GOOD_T))


def good_trace(seed, negate=False):
    g = good_signal(seed)
    if negate:
        g = g.scaled(-1.0)
    return encode_and_sample(g, GOOD_PARAMS, GOOD_T, GOOD_K)
