"""Panel regression with a low-rank interactive fixed effect.

Model: Y = M + X beta + eps with X = D + u, both M and D low rank.  The main
estimator is a bias-corrected trace ratio built from the leading eigenspaces
of X and Y; it achieves the (nT)^{-1/2} rate uniformly over factor strengths.
Also provided: the least-squares estimator via alternating minimization, the
strong-factor confidence interval whose width is known in closed form, and
the asymptotic standard deviation of the least-squares estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entrywise import Interval
from .linalg import annihilator, svd_truncated, trace_product
from .model import PanelInstance

__all__ = [
    "PanelEstimate",
    "DegenerateDesignError",
    "estimate_beta",
    "effective_rank_rhat",
    "ls_estimator",
    "sigma_theta",
    "ci_star",
]


class DegenerateDesignError(ValueError):
    """Raised when the regressor matrix carries no usable variation."""


@dataclass(frozen=True)
class PanelEstimate:
    beta_hat: float
    r_hat: float
    numerator: float
    denominator: float
    flipped: bool


def effective_rank_rhat(alpha_hat, lambda_hat, r1: int, k: int) -> float:
    """Effective rank k + r1 - trace(P_Lambda P_alpha).

    Both arguments must have orthonormal columns (r1 and k of them), so the
    trace of the projector product reduces to ||Lambda' alpha||_F^2.
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    lambda_hat = np.asarray(lambda_hat, dtype=float)
    if alpha_hat.shape[1] != r1 or lambda_hat.shape[1] != k:
        raise ValueError("column counts must match declared ranks")
    overlap = float(np.sum((lambda_hat.T @ alpha_hat) ** 2))
    return k + r1 - overlap


def estimate_beta(x, y, r0: int, r1: int) -> PanelEstimate:
    """Bias-corrected trace estimator of the regression coefficient.

    If T < n the data are transposed first (the construction estimates the
    lower-dimensional side of the factor structure).  r0 and r1 are upper
    bounds on the ranks of M and D; overstating them is allowed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("X and Y must have the same shape")
    n, t = x.shape
    if min(n, t) < 2:
        raise ValueError("need at least a 2x2 panel")
    flipped = False
    if t < n:
        x, y = x.T, y.T
        n, t = t, n
        flipped = True
    k = r0 + r1
    if k >= min(n, t):
        raise ValueError("r0 + r1 must be below min(n, T)")

    alpha_hat = (
        svd_truncated(x, r1).U if r1 > 0 else np.zeros((n, 0))
    )
    lambda_hat = svd_truncated(y, k).U if k > 0 else np.zeros((n, 0))
    r_hat = effective_rank_rhat(alpha_hat, lambda_hat, r1, k)
    if n - r_hat <= 0:
        raise ValueError(f"effective rank {r_hat:g} >= n = {n}")

    pi_alpha_x = x - alpha_hat @ (alpha_hat.T @ x)
    denominator = trace_product(x, pi_alpha_x)
    if denominator <= 0:
        raise DegenerateDesignError("trace(X' Pi_alpha X) <= 0")
    pi_lambda_pi_alpha_x = pi_alpha_x - lambda_hat @ (lambda_hat.T @ pi_alpha_x)
    numerator = trace_product(y, pi_lambda_pi_alpha_x)
    beta_hat = (n - r1) / (n - r_hat) * numerator / denominator
    return PanelEstimate(
        beta_hat=float(beta_hat),
        r_hat=float(r_hat),
        numerator=float(numerator),
        denominator=float(denominator),
        flipped=flipped,
    )


def ls_estimator(
    x,
    y,
    rank: int,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[float, np.ndarray, bool]:
    """Least-squares fit of Y = A + X beta with rank(A) <= `rank`.

    Alternating minimization: the A-step is a truncated SVD of Y - X beta,
    the beta-step is scalar least squares on the residual.  The objective is
    monotonically nonincreasing; iteration stops when its relative decrease
    falls below `tol`.

    Returns (beta_ls, a_hat, converged).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("X and Y must have the same shape")
    if rank >= min(x.shape):
        raise ValueError("rank must be below min(n, T)")
    x_ss = float(np.sum(x * x))
    if x_ss == 0.0:
        raise DegenerateDesignError("X is identically zero")

    beta = 0.0
    a = np.zeros_like(y)
    obj = float(np.sum((y - a - x * beta) ** 2))
    converged = False
    for _ in range(max_iter):
        resid = y - x * beta
        if rank > 0:
            u, s, v = svd_truncated(resid, rank)
            a = u @ (s[:, None] * v.T)
        else:
            a = np.zeros_like(y)
        beta = float(np.sum(x * (y - a)) / x_ss)
        new_obj = float(np.sum((y - a - x * beta) ** 2))
        if obj - new_obj <= tol * max(obj, 1.0):
            converged = True
            obj = new_obj
            break
        obj = new_obj
    return beta, a, converged


def sigma_theta(inst: PanelInstance) -> float:
    """Asymptotic sd of the least-squares slope under strong factors.

    sigma_eps / sqrt(sigma_u^2 + trace(Pi_{M'} D' Pi_M D) / (nT)), where Pi_M
    annihilates the column space of M (n x n) and Pi_{M'} that of M' (T x T).
    """
    m = inst.mean
    d = inst.regressor_mean
    n, t = m.shape
    pi_rows = annihilator(m)        # n x n
    pi_cols = annihilator(m.T)      # T x T
    proj_d = pi_rows @ d @ pi_cols
    extra = float(np.sum(d * proj_d)) / (n * t)
    return inst.sigma_eps / math.sqrt(inst.sigma_u**2 + extra)


def ci_star(x, y, kappa2: float) -> Interval:
    """Strong-factor 95% interval around the least-squares slope.

    Half-width 1.96 (nT)^{-1/2} (1 + kappa2^2)^{-1/2}; valid only when the
    fixed effects are strong, orthogonal to a strong regressor structure with
    ||D||_F >= kappa2 sqrt(nT).
    """
    x = np.asarray(x, dtype=float)
    n, t = x.shape
    beta_ls, _, _ = ls_estimator(x, y, rank=2)
    half = 1.96 / math.sqrt(n * t) / math.sqrt(1.0 + kappa2**2)
    return Interval(beta_ls - half, beta_ls + half)
