"""Residuals of the two Equilibrium Equations."""
from __future__ import annotations

import numpy as np

from ..spectral import time_average_series


def ee1_residual(beta: float, mu, im_E_w, im_Q_w) -> dict:
    """``beta Im E_w + sum_a mu^a Im Q^a_w`` per sample and outcome.

    ``im_E_w`` has shape ``(T, n)`` (or ``(n,)``) and ``im_Q_w`` stacks one such
    array per multiplier in ``mu``. NaN entries mark undefined weak values;
    they are excluded from the statistics and counted.
    """
    e = np.atleast_2d(np.asarray(im_E_w, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    series = beta * e
    if mu.size:
        q = np.asarray(im_Q_w, dtype=float).reshape((mu.size,) + e.shape)
        series = series + np.tensordot(mu, q, axes=1)
    ok = np.isfinite(series)
    mean = np.full(e.shape[1], np.nan)
    mad = np.full(e.shape[1], np.nan)
    for j in range(e.shape[1]):
        if ok[:, j].any():
            st = time_average_series(series[ok[:, j], j])
            mean[j], mad[j] = st["mean"], st["mad"]
    return {"series": series, "mean": mean, "mad": mad, "excluded": int((~ok).sum())}


def ee2_residual(p, d, lambda_N: float, beta: float, mu, R, R_charges=None, tol: float = 1e-10) -> np.ndarray:
    """``-p log(p/d) - (lambda p + beta R + sum_a mu^a R^a)`` per outcome.

    Zero-probability outcomes contribute 0 on the left.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    lhs = np.zeros_like(p)
    nz = p > 0
    lhs[nz] = -p[nz] * np.log(p[nz] / d[nz])
    rhs = lambda_N * p + beta * np.asarray(R, dtype=float)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.size:
        rhs = rhs + np.tensordot(mu, np.asarray(R_charges, dtype=float).reshape(mu.size, -1), axes=1)
    return lhs - rhs
