"""Penalized least-squares smoothing with GCV, robust reweighting, and
numerical differentiation for sampled trajectories.

The smoother solves

    min_x  sum_i w_i (y_i - x_i)^2 + s * ||D2 x||^2

where D2 is the (n-2) x n second-difference matrix, so constants and straight
lines are exact fixed points for every s. The normal equations
(W + s D2'D2) x = W y are symmetric pentadiagonal and solved with a banded
Cholesky; the GCV trace uses the eigenvalues of D2'D2, computed once per
signal length and cached.

Robust smoothing follows the usual iterated bisquare scheme: residuals are
studentized by 1.4826 * MAD and turned into weights w = (1 - (u/4.685)^2)^2
clipped at zero, with the roughness re-selected by GCV each iteration.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solveh_banded

from .dynamics import Trajectory

GCV_GRID = np.logspace(-2.0, 6.0, 20)
GCV_MAX_N = 4096
BISQUARE_C = 4.685
MAD_TO_SD = 1.4826
ROBUST_SIGMA_FLOOR_REL = 1e-8  # of the signal's range; below this MAD is numerical noise

_eig_cache: dict[int, np.ndarray] = {}


def _check_signal(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"expected a 1-D signal, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("signal contains non-finite values")
    return y


def _penalty_banded(n: int) -> np.ndarray:
    """Upper banded form (3, n) of K = D2'D2 for solveh_banded."""
    diag = np.zeros(n)
    sup1 = np.zeros(n)  # entry j holds K[j-1, j]
    sup2 = np.zeros(n)  # entry j holds K[j-2, j]
    i = np.arange(n)
    diag += np.where(i <= n - 3, 1.0, 0.0)
    diag += np.where((i >= 1) & (i <= n - 2), 4.0, 0.0)
    diag += np.where(i >= 2, 1.0, 0.0)
    j = np.arange(1, n)
    sup1[1:] = np.where((j - 1 >= 1) & (j - 1 <= n - 2), -2.0, 0.0) + np.where(
        j - 1 <= n - 3, -2.0, 0.0
    )
    sup2[2:] = 1.0
    return np.vstack([sup2, sup1, diag])


def _penalty_dense(n: int) -> np.ndarray:
    d2 = np.zeros((n - 2, n))
    for r in range(n - 2):
        d2[r, r : r + 3] = (1.0, -2.0, 1.0)
    return d2.T @ d2


def _penalty_eigenvalues(n: int) -> np.ndarray:
    if n not in _eig_cache:
        if n > GCV_MAX_N:
            raise ValueError(f"GCV trace computation supports n <= {GCV_MAX_N}, got {n}")
        mu = np.linalg.eigvalsh(_penalty_dense(n))
        _eig_cache[n] = np.clip(mu, 0.0, None)
    return _eig_cache[n]


def _fit(y: np.ndarray, s: float, weights: np.ndarray | None = None) -> np.ndarray:
    """Solve (W + s K) x = W y. weights=None means W = I."""
    n = len(y)
    if n < 3 or s == 0 and weights is None:
        return y.copy()
    if s == 0:
        raise ValueError("weighted fits need s > 0")
    ab = s * _penalty_banded(n)
    if weights is None:
        ab[2] += 1.0
        rhs = y
    else:
        ab[2] += weights
        rhs = weights * y
    return solveh_banded(ab, rhs, lower=False)


def smooth(y, s: float) -> np.ndarray:
    """Penalized least-squares smooth of a 1-D signal with roughness s.

    s = 0 returns the input unchanged; larger s approaches the least-squares
    straight line. Constants and lines are fixed points for every s. Signals
    shorter than 3 samples have no curvature to penalize and pass through.
    """
    y = _check_signal(y)
    if not (s >= 0 and np.isfinite(s)):
        raise ValueError(f"roughness s must be finite and >= 0, got {s}")
    return _fit(y, float(s))


def gcv_curve(y, grid=None, weights: np.ndarray | None = None) -> np.ndarray:
    """GCV score for every s in the grid.

    GCV(s) = (RSS/n) / (1 - tr(H_s)/n)^2 with the trace taken from the
    unweighted hat matrix; with weights, RSS is the weighted residual sum
    (the standard approximation for the robust iterations).
    """
    y = _check_signal(y)
    grid = GCV_GRID if grid is None else np.asarray(grid, dtype=float)
    n = len(y)
    mu = _penalty_eigenvalues(n)
    scores = np.empty(len(grid))
    for i, s in enumerate(grid):
        trace = float(np.sum(1.0 / (1.0 + s * mu)))
        rel = 1.0 - trace / n
        if rel <= 0:
            raise ValueError(
                f"degenerate GCV denominator at s={s:g} (trace {trace:.3f} >= n={n})"
            )
        x = _fit(y, float(s), weights)
        r = y - x
        rss = float(np.sum(r * r)) if weights is None else float(np.sum(weights * r * r))
        scores[i] = (rss / n) / rel**2
    return scores


def gcv_select(y, grid=None, weights: np.ndarray | None = None) -> float:
    """Roughness value from the grid minimizing the GCV score."""
    grid = GCV_GRID if grid is None else np.asarray(grid, dtype=float)
    if len(grid) == 0:
        raise ValueError("empty GCV grid")
    scores = gcv_curve(y, grid, weights)
    return float(grid[int(np.argmin(scores))])


def robust_smooth(y, iterations: int = 3, grid=None) -> np.ndarray:
    """Outlier-resistant smooth: iterated bisquare reweighting around GCV fits.

    Each iteration selects s by GCV under the current weights, fits, and
    recomputes bisquare weights from MAD-studentized residuals. iterations=0
    degenerates to a plain unweighted GCV smooth.
    """
    y = _check_signal(y)
    if len(y) < 3:
        return y.copy()
    weights = None
    x = _fit(y, gcv_select(y, grid), weights)
    # sigma at the arithmetic's noise floor means the fit already follows the
    # data; bisquare weights from it would reject genuine curvature as outliers
    sigma_floor = ROBUST_SIGMA_FLOOR_REL * float(np.ptp(y))
    for _ in range(max(0, iterations - 1)):
        r = y - x
        sigma = MAD_TO_SD * float(np.median(np.abs(r - np.median(r))))
        if sigma <= sigma_floor:
            break
        u = r / (BISQUARE_C * sigma)
        weights = np.where(np.abs(u) < 1.0, (1.0 - u**2) ** 2, 0.0)
        x = _fit(y, gcv_select(y, grid, weights), weights)
    return x


def velocity(trajectory: Trajectory) -> np.ndarray:
    """Velocity in mm/s: central differences, one-sided at the ends."""
    y = trajectory.samples
    if len(y) < 3:
        raise ValueError("velocity needs at least 3 samples")
    return np.gradient(y, 1.0 / trajectory.sample_rate_hz)
