"""Principal-branch Lambert W and the Gaussian-count lower bound.

The bound answers: how many splatted 2D Gaussians does a representation need
before its best-case mean-squared error can drop to eps? The count grows as
exp(W((c/eps)^2)), which is super-linear in 1/eps: on this curve, halving the
error eventually costs more than double the Gaussians.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, NumericError

_MAX_ITERATIONS = 50
_REL_TOL = 1e-15


def lambert_w0(x: float) -> float:
    """Solve w * exp(w) = x for x >= 0 by Halley iteration."""
    x = float(x)
    if not x >= 0.0:
        raise ConfigurationError(f"lambert_w0 is defined here for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x > np.e:
        log_x = np.log(x)
        w = log_x - np.log(log_x)
    else:
        w = np.log1p(x) * 0.7
        if w == 0.0:
            w = x
    for _ in range(_MAX_ITERATIONS):
        ew = np.exp(w)
        residual = w * ew - x
        denominator = ew * (w + 1.0) - (w + 2.0) * residual / (2.0 * w + 2.0)
        step = residual / denominator
        w -= step
        if abs(step) <= _REL_TOL * (1.0 + abs(w)):
            return float(w)
    raise NumericError(f"lambert_w0 failed to converge for x={x!r}")


def gaussian_count_bound(eps: float, c: float) -> float:
    """Least Gaussian count compatible with target MSE eps: exp(W((c/eps)^2))."""
    if eps <= 0 or c <= 0:
        raise ConfigurationError(
            f"eps and c must be positive, got eps={eps} c={c}"
        )
    return float(np.exp(lambert_w0((c / eps) ** 2)))
