"""Adaptive focal loss: data-driven focusing exponent and gradient rescaling.

Two map-level coefficients extend the focal/poly family:

* ``gamma_a = 1 - mean(pt over foreground)`` raises the focusing exponent on
  poorly learned samples, giving the effective exponent
  ``gamma_d = gamma + gamma_a``.
* ``mu = N / sum_i (1-pt_i)^gamma_d * (1 + delta*gamma_d)`` rescales the loss
  so its total gradient tracks the plain cross-entropy gradient, balancing
  the "treat pixels equally" and "favor hard pixels" regimes.

Final per-pixel form:  -mu*(1-pt)^gamma_d*log(pt) + alpha*(1-pt)^(gamma_d+1).

Both coefficients are computed from the clamped pt map and detached: the
analytic gradient differentiates through pt only.  With ADA and AGR disabled
(gamma_a := 0, mu := 1) the loss collapses to poly, then focal (alpha=0),
then bce (gamma=0) -- bit-exactly, since all share one kernel.

The ``*_series`` functions are truncated expansions of the loss and its
gradient around pt = 1; they are verification tools restricted to pt > 0.5,
where the expansions converge fast, and are never the production gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_EPS_CLIP,
    DimensionError,
    DomainError,
    ParameterError,
    as_binary_mask,
    check_eps_clip,
    pt_map,
)
from .losses import LossOutput, _pt_and_chain, _reduce, powlog_kernel

MU_FLOOR_PER_PIXEL = 1e-12  # caps mu at 1e12 when the map is near perfect


@dataclass(frozen=True)
class AflParams:
    gamma: float = 2.0
    alpha: float = 1.0
    delta: float = 0.4
    ada_enabled: bool = True
    agr_enabled: bool = True
    eps_clip: float = DEFAULT_EPS_CLIP

    def validate(self) -> "AflParams":
        if not (0.0 <= self.gamma <= 5.0):
            raise ParameterError(f"gamma must be in [0, 5], got {self.gamma}")
        if self.alpha < 0.0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not (0.0 <= self.delta <= 1.0):
            raise ParameterError(f"delta must be in [0, 1], got {self.delta}")
        check_eps_clip(self.eps_clip)
        return self


@dataclass
class AflDiagnostics:
    gamma_a: float
    gamma_d: float
    mu: float
    hard_count: int
    foreground_pt_mean: float

    def as_dict(self) -> dict:
        return {
            "gamma_a": self.gamma_a,
            "gamma_d": self.gamma_d,
            "mu": self.mu,
            "hard_count": self.hard_count,
            "foreground_pt_mean": self.foreground_pt_mean,
        }


def gamma_a(pred, gt, eps_clip: float = DEFAULT_EPS_CLIP) -> float:
    """1 - mean(pt) over foreground pixels; 0 when the map has no foreground."""
    pt = pt_map(pred, gt, eps_clip)
    fg = as_binary_mask(gt) == 1
    if not fg.any():
        return 0.0
    return float(1.0 - pt[fg].mean())


def mu(pt, gamma_d: float, delta: float) -> float:
    """Gradient-representation factor N / sum (1-pt)^gamma_d * (1+delta*gamma_d).

    The denominator is floored at 1e-12 per pixel: on a near-perfect map the
    loss is ~0 anyway, the floor just keeps mu finite.
    """
    arr = np.asarray(pt, dtype=np.float64)
    if arr.size == 0:
        raise DimensionError("mu needs at least one pixel")
    if gamma_d < 0.0:
        raise ParameterError(f"gamma_d must be >= 0, got {gamma_d}")
    if not (0.0 <= delta <= 1.0):
        raise ParameterError(f"delta must be in [0, 1], got {delta}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("pt values must lie in [0, 1]")
    n = arr.size
    denom = float(((1.0 - arr) ** gamma_d).sum() * (1.0 + delta * gamma_d))
    return n / max(denom, MU_FLOOR_PER_PIXEL * n)


def afl(pred, gt, params: AflParams = AflParams(),
        reduction: str = "sum") -> tuple[LossOutput, AflDiagnostics]:
    """Adaptive focal loss value, detached-coefficient gradient, diagnostics.

    Reduction order matters: gamma_a and mu are full-map reductions computed
    before the per-pixel pass, then held constant.
    """
    params.validate()
    pt, chain = _pt_and_chain(pred, gt, params.eps_clip)
    fg = as_binary_mask(gt) == 1
    hard_count = int(fg.sum())
    fg_pt_mean = float(pt[fg].mean()) if hard_count else 1.0

    g_a = 1.0 - fg_pt_mean if (params.ada_enabled and hard_count > 0) else 0.0
    g_d = params.gamma + g_a
    mu_val = mu(pt, g_d, params.delta) if params.agr_enabled else 1.0

    value_px, dvalue_dpt = powlog_kernel(pt, g_d, params.alpha, mu_val)
    value, grad = _reduce(value_px, dvalue_dpt * chain, reduction)
    diag = AflDiagnostics(g_a, g_d, mu_val, hard_count, fg_pt_mean)
    return LossOutput(value, grad, diag.as_dict()), diag


def afl_value_with_coeffs(pred, gt, gamma_d: float, mu_val: float, alpha: float,
                          eps_clip: float = DEFAULT_EPS_CLIP,
                          reduction: str = "sum") -> float:
    """Loss value with gamma_d and mu frozen at the given numbers.

    This is the function whose finite differences the detached analytic
    gradient must reproduce.
    """
    pt, _ = _pt_and_chain(pred, gt, eps_clip)
    value_px, _ = powlog_kernel(pt, gamma_d, alpha, mu_val)
    if reduction == "mean":
        return float(value_px.sum() / value_px.size)
    return float(value_px.sum())


# ---------------------------------------------------------------------------
# truncated-series verification tools (domain pt > 0.5)
# ---------------------------------------------------------------------------

def _series_domain(pt) -> np.ndarray:
    arr = np.asarray(pt, dtype=np.float64)
    if arr.size == 0:
        raise DimensionError("series operations need at least one pixel")
    if arr.min() <= 0.5 or arr.max() > 1.0:
        raise DomainError("series expansions require pt in (0.5, 1]")
    return arr


def neg_log_series(pt, terms: int) -> np.ndarray:
    """Truncated expansion of -log(pt): sum_{k=1..terms} (1-pt)^k / k."""
    arr = _series_domain(pt)
    if terms < 1:
        raise ParameterError("terms must be >= 1")
    omp = 1.0 - arr
    total = np.zeros_like(arr)
    for k in range(1, terms + 1):
        total += omp ** k / k
    return total


def bce_grad_series(pt, terms: int) -> np.ndarray:
    """Truncated expansion of 1/pt: sum_{k=0..terms-1} (1-pt)^k.

    The leading term is 1 for every pixel regardless of difficulty, which is
    the equal-treatment signature of plain cross entropy.
    """
    arr = _series_domain(pt)
    if terms < 1:
        raise ParameterError("terms must be >= 1")
    omp = 1.0 - arr
    total = np.zeros_like(arr)
    for k in range(terms):
        total += omp ** k
    return total


def afl_grad_series(pt, gamma_d: float, alpha: float, terms: int) -> np.ndarray:
    """Truncated adaptive-focal gradient magnitude.

    (1-pt)^gamma_d * [ (1+alpha)(1+gamma_d) + (1+gamma_d/2)(1-pt)
                       + (1+gamma_d/3)(1-pt)^2 + ... ]

    Every term scales with pixel difficulty through the leading modifier,
    unlike the constant first term of ``bce_grad_series``.  With gamma_d=0
    and alpha=0 the bracket is the geometric series for 1/pt.
    """
    arr = _series_domain(pt)
    if terms < 1:
        raise ParameterError("terms must be >= 1")
    if gamma_d < 0.0:
        raise ParameterError(f"gamma_d must be >= 0, got {gamma_d}")
    omp = 1.0 - arr
    bracket = np.full_like(arr, (1.0 + alpha) * (1.0 + gamma_d))
    for k in range(2, terms + 1):
        bracket += (1.0 + gamma_d / k) * omp ** (k - 1)
    return omp ** gamma_d * bracket


def gradient_decomposition(pt, gamma_d: float, alpha: float, delta: float,
                           terms: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the gradient bracket into its cross-entropy and correction columns.

    Returns ``(nu, nabla_b, mixed)`` where ``nu`` is the truncated 1/pt
    series, ``nabla_b`` collects the extra terms the difficulty modifier
    generates (first row gamma_d*(1+alpha)+alpha, then (gamma_d/k)(1-pt)^(k-1)),
    and ``mixed = (1 + delta*gamma_d) * nu`` is the proportional surrogate
    obtained by treating the correction column as delta-proportional to nu.
    Row-for-row, ``nu + nabla_b`` equals the bracket of ``afl_grad_series``.
    """
    arr = _series_domain(pt)
    if terms < 2:
        raise ParameterError("decomposition needs terms >= 2")
    if gamma_d < 0.0:
        raise ParameterError(f"gamma_d must be >= 0, got {gamma_d}")
    if not (0.0 <= delta <= 1.0):
        raise ParameterError(f"delta must be in [0, 1], got {delta}")
    omp = 1.0 - arr
    nu = bce_grad_series(arr, terms)
    nabla_b = np.full_like(arr, gamma_d * (1.0 + alpha) + alpha)
    for k in range(2, terms + 1):
        nabla_b += (gamma_d / k) * omp ** (k - 1)
    mixed = (1.0 + delta * gamma_d) * nu
    return nu, nabla_b, mixed


def chebyshev_identity_check(pt, gamma_d: float) -> float:
    """Residual |sum(a*b) - (1/N) sum(a) sum(b)| for a=(1-pt)^gamma_d, b=1/pt.

    Computed in pivot-shifted covariance form, which is algebraically
    identical and returns exactly 0.0 for constant maps (the equality case of
    the sum inequality) instead of accumulating float noise.
    """
    arr = np.asarray(pt, dtype=np.float64)
    if arr.size == 0:
        raise DimensionError("residual needs at least one pixel")
    if gamma_d < 0.0:
        raise ParameterError(f"gamma_d must be >= 0, got {gamma_d}")
    if arr.min() <= 0.0 or arr.max() > 1.0:
        raise ParameterError("pt values must lie in (0, 1]")
    a = ((1.0 - arr) ** gamma_d).ravel()
    b = (1.0 / arr).ravel()
    da = a - a[0]
    db = b - b[0]
    n = a.size
    return float(abs((da * db).sum() - da.sum() * db.sum() / n))
