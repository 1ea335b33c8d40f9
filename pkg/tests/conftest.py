"""Shared fixtures and an independent quadrature oracle for Omega moments.

The oracle integrates out the orthogonal coordinate and the noise in closed
form and leaves a single 1-D integral for scipy.integrate.quad, so it shares
no code with the package's closed forms or its Monte-Carlo estimator.
"""
import math

import numpy as np
import pytest
from scipy import integrate, stats


def _mean_abs_response(u, sigma, model):
    # E_w |y| (mixture) or E_w y (phase retrieval) for y = link(u) + sigma w
    if model == "phase_retrieval" or sigma == 0:
        return abs(u)
    return (sigma * math.sqrt(2 / math.pi) * math.exp(-u * u / (2 * sigma * sigma))
            + u * (1 - 2 * stats.norm.cdf(-u / sigma)))


def quad_moments(alpha, beta, sigma, model):
    """(E[Omega^2], E[Z1 Omega], E[Z2 Omega]) for the higher-order weight at alpha >= 0."""
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200, points=[0.0])
    f1 = lambda u: (u * _mean_abs_response(u, sigma, model)
                    * (2 * stats.norm.cdf(alpha * u / beta) - 1) * stats.norm.pdf(u))
    f2 = lambda u: (_mean_abs_response(u, sigma, model) * 2 * stats.norm.pdf(alpha * u / beta)
                    * stats.norm.pdf(u))
    return (1 + sigma ** 2, integrate.quad(f1, -12, 12, **opts)[0],
            integrate.quad(f2, -12, 12, **opts)[0])


@pytest.fixture
def quad():
    return quad_moments


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
