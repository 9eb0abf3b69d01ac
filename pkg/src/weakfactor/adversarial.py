"""Hard two-point instances and exact information-theoretic oracles.

The constructions here pin down what no procedure can do: pairs of parameter
values whose observed-data distributions are provably close (or identical)
while their targets differ.  Each constructor validates the membership
conditions of the spaces it claims and attaches exact divergence values
(chi-square cross moment, total-variation upper bound, Gaussian KL) that the
Monte Carlo suite cross-checks empirically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .linalg import frobenius_norm, numerical_rank, zero_entry_11
from .model import (
    FactorInstance,
    PanelInstance,
    SpaceSpec,
    check_membership,
    make_rank_one,
)

__all__ = [
    "TwoPointPair",
    "KroneckerCov",
    "rank_one_testing_pair",
    "entry_perturbation_pair",
    "panel_shift_pair",
    "gaussian_kl",
    "chi_square_cross",
    "tv_discrepancy_upper",
    "likelihood_ratio_stat",
]


@dataclass(frozen=True)
class TwoPointPair:
    """A null/alternative pair with its separation and divergence bookkeeping."""

    null_instance: Union[FactorInstance, PanelInstance]
    alt_instance: Union[FactorInstance, PanelInstance]
    separation: float
    info: dict = field(default_factory=dict)
    construction: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "construction": self.construction,
                "separation": self.separation,
                "info": {k: v for k, v in self.info.items()},
                "null": json.loads(self.null_instance.to_json()),
                "alt": json.loads(self.alt_instance.to_json()),
            }
        )


def rank_one_testing_pair(
    n: int,
    t: int,
    tau: float,
    kappa: float,
    alpha: float,
    transpose: bool = False,
) -> TwoPointPair:
    """Rank-one pair that defeats any size-alpha test of a zero (1,1) entry.

    Both means share the loading (kappa/2, c1, ..., c1); the null factor has a
    zero first coordinate while the alternative's is c2, chosen so the
    total-variation distance between the observed-data laws is at most alpha.
    Requires tau <= kappa sqrt(nT) / 12.  With `transpose` the construction is
    applied to the transposed dimensions (n and T swap roles).
    """
    if transpose:
        pair = rank_one_testing_pair(t, n, tau, kappa, alpha, transpose=False)
        null_m = pair.null_instance.mean.T
        alt_m = pair.alt_instance.mean.T
        return TwoPointPair(
            null_instance=FactorInstance(null_m, kappa, label="testing-pair-null"),
            alt_instance=FactorInstance(alt_m, kappa, label="testing-pair-alt"),
            separation=pair.separation,
            info=dict(pair.info),
            construction="rank_one_testing_pair(transposed)",
        )

    if n < 2 or t < 2:
        raise ValueError("need n, T >= 2")
    limit = kappa * math.sqrt(n * t) / 12.0
    if tau > limit * (1 + 1e-12):
        raise ValueError(
            f"tau={tau:g} violates tau <= kappa*sqrt(nT)/12 = {limit:g}"
        )
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")

    c1 = 2.0 * tau / math.sqrt(n * t)
    q = math.sqrt(math.log(alpha**2 + 1.0)) / 2.0
    c2 = q * min(0.5, math.sqrt(t) / tau)

    loading = np.concatenate(([kappa / 2.0], np.full(n - 1, c1)))
    null_factor = np.concatenate(([0.0], np.ones(t - 1)))
    alt_factor = np.concatenate(([c2], np.ones(t - 1)))
    null_m = make_rank_one(loading, null_factor)
    alt_m = make_rank_one(loading, alt_factor)

    separation = c2 * kappa / 2.0
    null_spec = SpaceSpec(kind="null_entry", kappa=kappa, tau=tau)
    alt_spec = SpaceSpec(kind="separated_entry", kappa=kappa, tau=tau, rho=separation)
    for name, m, spec in (("null", null_m, null_spec), ("alt", alt_m, alt_spec)):
        report = check_membership(m, spec)
        if not report:
            raise AssertionError(f"{name} mean failed membership:\n{report}")

    diff_sq = c1**2 * c2**2 * (n - 1)
    info = {
        "c1": c1,
        "c2": c2,
        "q": q,
        "observed_diff_fro_sq": diff_sq,
        "tv_upper": tv_discrepancy_upper(null_m, alt_m),
        "chi2_cross": chi_square_cross(
            zero_entry_11(null_m).ravel(),
            zero_entry_11(alt_m).ravel(),
            zero_entry_11(alt_m).ravel(),
        ),
    }
    return TwoPointPair(
        null_instance=FactorInstance(null_m, kappa, label="testing-pair-null"),
        alt_instance=FactorInstance(alt_m, kappa, label="testing-pair-alt"),
        separation=separation,
        info=info,
        construction="rank_one_testing_pair",
    )


def entry_perturbation_pair(
    base: FactorInstance,
    eta: float,
    kappa: float,
    tau0: float,
    tau2: float,
) -> TwoPointPair:
    """Perturb only the hidden entry: observationally identical designs.

    The base must be a strict one-factor instance with headroom eta (entry
    bound kappa(1-eta), strength at least tau0(1+eta)).  The alternative adds
    c0 = min{kappa eta, tau0 eta, tau2} to entry (1,1) only, landing inside
    the strong-plus-weak space while the observed data (entry (1,1) removed)
    are bit-for-bit identical.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must be in (0, 1)")
    m = base.mean
    s = np.linalg.svd(m, compute_uv=False)
    if np.max(np.abs(m)) > kappa * (1 - eta) * (1 + 1e-12):
        raise ValueError("base violates the entry bound kappa(1 - eta)")
    if s[0] < tau0 * (1 + eta) * (1 - 1e-12):
        raise ValueError("base strength below tau0(1 + eta)")
    if s.size > 1 and s[1] > 1e-8 * s[0]:
        raise ValueError("base is not a one-factor instance")

    c0 = min(kappa * eta, tau0 * eta, tau2)
    alt_m = m.copy()
    alt_m[0, 0] += c0
    if not np.array_equal(zero_entry_11(alt_m), zero_entry_11(m)):
        raise AssertionError("perturbation leaked outside entry (1,1)")

    alt_spec = SpaceSpec(kind="strong_plus_weak", kappa=kappa, tau1=tau0, tau2=tau2)
    report = check_membership(alt_m, alt_spec)
    if not report:
        raise AssertionError(f"perturbed mean failed membership:\n{report}")

    return TwoPointPair(
        null_instance=FactorInstance(m, kappa, label="perturbation-base"),
        alt_instance=FactorInstance(alt_m, kappa, label="perturbation-alt"),
        separation=c0,
        info={"c0": c0, "tv_upper": 0.0},
        construction="entry_perturbation_pair",
    )


def panel_shift_pair(m1, d1, c: float) -> TwoPointPair:
    """Panel pair with identical means and a covariance tilt of known KL.

    Null: (M1, D1, 1, 1, 0).  Alternative: (M1 - delta D1, D1, 1, 1, delta)
    with delta = c (nT)^{-1/2}, so the Y-means coincide and the divergence is
    carried entirely by the noise covariance: KL = c^2 / 2 exactly.

    M1 must be rank one and orthogonal to the rank-one D1 in both row and
    column spaces (the strong-factor configuration).
    """
    if not 0.0 < c < 4.0:
        raise ValueError("c must be in (0, 4)")
    m1 = np.asarray(m1, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    if m1.shape != d1.shape:
        raise ValueError("M1 and D1 must have the same shape")
    n, t = m1.shape
    scale = max(frobenius_norm(m1), frobenius_norm(d1), 1.0)
    if numerical_rank(m1) != 1 or numerical_rank(d1) != 1:
        raise ValueError("M1 and D1 must both be rank one")
    if (
        np.max(np.abs(m1.T @ d1)) > 1e-8 * scale**2
        or np.max(np.abs(m1 @ d1.T)) > 1e-8 * scale**2
    ):
        raise ValueError("M1 and D1 must be orthogonal (M'D = 0 and MD' = 0)")

    delta = c / math.sqrt(n * t)
    null = PanelInstance(
        mean=m1, regressor_mean=d1, sigma_eps=1.0, sigma_u=1.0, beta=0.0,
        r0=2, r1=1, label="panel-pair-null",
    )
    alt = PanelInstance(
        mean=m1 - delta * d1, regressor_mean=d1, sigma_eps=1.0, sigma_u=1.0,
        beta=delta, r0=2, r1=1, label="panel-pair-alt",
    )
    # Joint law of (vec Y, vec X): shared mean, covariance I vs the 2x2 tilt.
    mu = np.concatenate([m1.ravel(), d1.ravel()])
    cov_null = KroneckerCov(np.eye(2), n * t)
    cov_alt = KroneckerCov(
        np.array([[delta**2 + 1.0, delta], [delta, 1.0]]), n * t
    )
    kl = gaussian_kl(mu, cov_null, mu, cov_alt)
    return TwoPointPair(
        null_instance=null,
        alt_instance=alt,
        separation=delta,
        info={"delta": delta, "kl": kl, "kl_closed_form": 0.5 * c**2},
        construction="panel_shift_pair",
    )


@dataclass(frozen=True)
class KroneckerCov:
    """Covariance of the form block (small, symmetric PD) kron I_copies."""

    block: np.ndarray
    copies: int

    def __post_init__(self):
        object.__setattr__(self, "block", np.asarray(self.block, dtype=float))
        b = self.block
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("block must be square")
        if not np.allclose(b, b.T):
            raise ValueError("block must be symmetric")
        if self.copies < 1:
            raise ValueError("copies must be positive")

    @property
    def dim(self) -> int:
        return self.block.shape[0] * self.copies

    def dense(self) -> np.ndarray:
        return np.kron(self.block, np.eye(self.copies))


def _chol(mat: np.ndarray, name: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} is not positive definite") from exc


def gaussian_kl(mu1, sigma1, mu2, sigma2) -> float:
    """KL(N(mu2, sigma2) || N(mu1, sigma1)) in closed form.

    Covariances may be dense arrays or :class:`KroneckerCov`; the Kronecker
    path never materializes the large matrix (the mean term reshapes the mean
    difference into `copies` independent blocks).
    """
    mu1 = np.asarray(mu1, dtype=float).ravel()
    mu2 = np.asarray(mu2, dtype=float).ravel()
    if mu1.shape != mu2.shape:
        raise ValueError("mean vectors must have the same length")
    d = mu1.size
    diff = mu1 - mu2

    if isinstance(sigma1, KroneckerCov) and isinstance(sigma2, KroneckerCov):
        if sigma1.copies != sigma2.copies or sigma1.dim != d:
            raise ValueError("covariance shapes do not match the means")
        b1, b2, m = sigma1.block, sigma2.block, sigma1.copies
        l1 = _chol(b1, "sigma1 block")
        _chol(b2, "sigma2 block")  # PD check only
        b1_inv = np.linalg.inv(b1)
        # vec ordering: component i of the block varies slowest.
        diff_blocks = diff.reshape(b1.shape[0], m)
        quad = float(np.sum(diff_blocks * (b1_inv @ diff_blocks)))
        tr = m * float(np.trace(b1_inv @ b2))
        logdet1 = 2.0 * m * float(np.sum(np.log(np.diag(l1))))
        sign2, logdet2_single = np.linalg.slogdet(b2)
        logdet2 = m * float(logdet2_single)
        return 0.5 * (quad + tr - d + logdet1 - logdet2)

    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if s1.shape != (d, d) or s2.shape != (d, d):
        raise ValueError("covariance shapes do not match the means")
    l1 = _chol(s1, "sigma1")
    _chol(s2, "sigma2")
    s1_inv = np.linalg.inv(s1)
    quad = float(diff @ s1_inv @ diff)
    tr = float(np.trace(s1_inv @ s2))
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(l1))))
    _, logdet2 = np.linalg.slogdet(s2)
    return 0.5 * (quad + tr - d + logdet1 - float(logdet2))


def chi_square_cross(mu0, mu1, mu2) -> float:
    """Cross moment of two identity-covariance Gaussian likelihood ratios.

    Equals exp((mu1 - mu0)'(mu2 - mu0)); with mu1 = mu2 this is the second
    moment of the likelihood ratio under mu0 (one plus the chi-square
    divergence).
    """
    mu0 = np.asarray(mu0, dtype=float).ravel()
    mu1 = np.asarray(mu1, dtype=float).ravel()
    mu2 = np.asarray(mu2, dtype=float).ravel()
    if not mu0.shape == mu1.shape == mu2.shape:
        raise ValueError("mean vectors must have the same length")
    return float(np.exp((mu1 - mu0) @ (mu2 - mu0)))


def tv_discrepancy_upper(null_m, alt_m) -> float:
    """Upper bound on E_null |likelihood ratio - 1| for the observed data.

    The observed-data law excludes entry (1,1), so the bound is
    sqrt(exp(||diff with (1,1) zeroed||_F^2) - 1); matrices differing only at
    (1,1) give exactly zero.
    """
    null_m = np.asarray(null_m, dtype=float)
    alt_m = np.asarray(alt_m, dtype=float)
    if null_m.shape != alt_m.shape:
        raise ValueError("shapes must match")
    diff = zero_entry_11(alt_m) - zero_entry_11(null_m)
    return math.sqrt(math.expm1(float(np.sum(diff * diff))))


def likelihood_ratio_stat(x, null_m, alt_m) -> float:
    """Log likelihood ratio of alt vs null on the observed entries.

    Gaussian unit-variance model with entry (1,1) excluded:
    sum over observed (i,t) of [(x - null)^2 - (x - alt)^2] / 2.
    """
    x = np.asarray(x, dtype=float)
    null_m = np.asarray(null_m, dtype=float)
    alt_m = np.asarray(alt_m, dtype=float)
    if not x.shape == null_m.shape == alt_m.shape:
        raise ValueError("shapes must match")
    # Zeroing entry (1,1) in data and both means makes its residuals vanish,
    # which is exactly the exclusion of the unobserved entry.
    r_null = zero_entry_11(x) - zero_entry_11(null_m)
    r_alt = zero_entry_11(x) - zero_entry_11(alt_m)
    return float(0.5 * (np.sum(r_null**2) - np.sum(r_alt**2)))
