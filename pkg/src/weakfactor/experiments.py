"""Prebuilt experiments: instance families, registered procedures, checks.

This module wires the estimators to the replication engine.  It registers
the instance generators and procedures used by the command-line front end,
and provides builder functions returning ready-to-run
:class:`~weakfactor.montecarlo.ExperimentSpec` objects for each headline
experiment (rate in strength, rate in size, adaptive coverage, the
pre-test negative control, panel rates, and the panel coverage tradeoff).

Standalone checks that do not fit the one-estimate-per-replication shape
(likelihood-ratio power, noise-norm concentration, the information-theory
oracle cross-checks) live here as plain functions.
"""

from __future__ import annotations

import math

import numpy as np

from .adversarial import (
    chi_square_cross,
    entry_perturbation_pair,
    gaussian_kl,
    likelihood_ratio_stat,
    panel_shift_pair,
    rank_one_testing_pair,
    KroneckerCov,
)
from .entrywise import (
    DEFAULT_C0,
    adaptive_ci,
    adaptive_estimate_m11,
    estimate_m11,
    naive_pretest_ci,
)
from .model import (
    FactorInstance,
    replication_rng,
    sample_observation,
    sample_panel,
)
from .montecarlo import ExperimentSpec, register_generator, register_procedure
from .panel import ci_star, estimate_beta, ls_estimator

__all__ = [
    "spiked_rank_one_instance",
    "flat_rank_one_instance",
    "orthogonal_unit_pair",
    "panel_means",
    "rate_in_tau_spec",
    "rate_in_size_spec",
    "adaptive_coverage_spec",
    "pretest_control_spec",
    "panel_rate_spec",
    "panel_tradeoff_spec",
    "lr_power_check",
    "noise_norm_check",
    "oracle_checks",
    "PANEL_CONFIGS",
]


def flat_rank_one_instance(n: int, t: int, tau: float, kappa: float = 1.0) -> FactorInstance:
    """Constant matrix with sigma_1 = tau; every entry equals tau/sqrt(nT)."""
    if not 0 < tau <= kappa * math.sqrt(n * t):
        raise ValueError("tau must lie in (0, kappa sqrt(nT)]")
    return FactorInstance(np.full((n, t), tau / math.sqrt(n * t)), kappa, label="flat")


def spiked_rank_one_instance(
    n: int,
    t: int,
    tau: float,
    kappa: float = 1.0,
    spike_frac: float = 0.75,
) -> FactorInstance:
    """Rank-one instance with a distinguished first loading coordinate.

    M = L 1_T' with L = (s, c, ..., c), s = spike_frac * kappa and c chosen
    so that sigma_1 = tau.  The first coordinate stays fixed as tau varies,
    which makes the family suitable for rate-in-tau experiments; the flat
    instance is the best case for the plug-in estimator and hides the rate.
    The spike is capped below the loading norm when tau is small, and raised
    when matching tau would push c above kappa (at tau = kappa sqrt(nT) the
    instance degenerates to the flat one).
    """
    if not 0.0 < spike_frac < 1.0:
        raise ValueError("spike_frac must be in (0, 1)")
    if not 0 < tau <= kappa * math.sqrt(n * t):
        raise ValueError("tau must lie in (0, kappa sqrt(nT)]")
    norm_sq = tau * tau / t  # required ||L||^2
    # Cap the spike below both the entry bound and the total loading norm so
    # the remaining coordinates stay real and nonzero.
    s = spike_frac * min(kappa, math.sqrt(norm_sq))
    c_sq = (norm_sq - s * s) / (n - 1)
    if c_sq > kappa * kappa:
        s = math.sqrt(norm_sq - kappa * kappa * (n - 1))
        c_sq = kappa * kappa
    loading = np.full(n, math.sqrt(c_sq))
    loading[0] = s
    return FactorInstance(np.outer(loading, np.ones(t)), kappa, label="spiked")


def orthogonal_unit_pair(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Two deterministic orthonormal vectors in R^m.

    The first is the normalized ones vector; the second alternates sign and
    is projected against the first (exactly orthogonal for even m).
    """
    a = np.ones(m) / math.sqrt(m)
    c = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    c = c - (c @ a) * a
    return a, c / np.linalg.norm(c)


def panel_means(
    n: int, t: int, sigma_m: float, sigma_d: float
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one fixed-effect and regressor means with M'D = 0 and MD' = 0."""
    a, c = orthogonal_unit_pair(n)
    b, d = orthogonal_unit_pair(t)
    return sigma_m * np.outer(a, b), sigma_d * np.outer(c, d)


# ---------------------------------------------------------------------------
# Registered generators.  Signature: (grid_point, params, rng) -> (truth, data).


@register_generator("rank_one_entrywise")
def _gen_rank_one(grid_point, params, rng):
    n, t, tau = int(grid_point["n"]), int(grid_point["T"]), float(grid_point["tau"])
    kappa = float(params.get("kappa", 1.0))
    spike_frac = params.get("spike_frac")
    if spike_frac is None:
        inst = flat_rank_one_instance(n, t, tau, kappa)
    else:
        inst = spiked_rank_one_instance(n, t, tau, kappa, float(spike_frac))
    return inst.mean[0, 0], sample_observation(inst, rng)


@register_generator("perturbation_pair_arm")
def _gen_perturbation_arm(grid_point, params, rng):
    n, t = int(grid_point["n"]), int(grid_point["T"])
    arm = grid_point["arm"]
    kappa = float(params.get("kappa", 1.0))
    eta = float(params.get("eta", 0.5))
    tau0 = float(params.get("tau0", math.sqrt(n * t) / 24.0))
    tau2 = float(params.get("tau2", 1.0))
    base = FactorInstance(
        np.full((n, t), kappa * (1.0 - eta)), kappa, label="perturbation-base"
    )
    pair = entry_perturbation_pair(base, eta=eta, kappa=kappa, tau0=tau0, tau2=tau2)
    inst = pair.null_instance if arm == "base" else pair.alt_instance
    return inst.mean[0, 0], sample_observation(inst, rng)


@register_generator("panel_config")
def _gen_panel(grid_point, params, rng):
    n, t = int(grid_point["n"]), int(grid_point["T"])
    beta = float(params.get("beta", 0.5))
    sigma_m = math.sqrt(n + t) if params.get("weak_m") else math.sqrt(n * t)
    sigma_d = math.sqrt(n + t) if params.get("weak_d") else math.sqrt(n * t)
    m, d = panel_means(n, t, sigma_m, sigma_d)
    from .model import PanelInstance

    inst = PanelInstance(
        mean=m, regressor_mean=d, sigma_eps=1.0, sigma_u=1.0, beta=beta,
        r0=1, r1=1, kappa=10.0,
    )
    return beta, sample_panel(inst, rng)


@register_generator("panel_pair_arm")
def _gen_panel_arm(grid_point, params, rng):
    n, t = int(grid_point["n"]), int(grid_point["T"])
    arm = grid_point["arm"]
    kappa2 = float(params.get("kappa2", 10.0))
    c = float(params.get("c", 3.9))
    m1, d1 = panel_means(n, t, math.sqrt(n * t), kappa2 * math.sqrt(n * t))
    pair = panel_shift_pair(m1, d1, c)
    inst = pair.null_instance if arm == "null" else pair.alt_instance
    return inst.beta, sample_panel(inst, rng)


# ---------------------------------------------------------------------------
# Registered procedures.  Signature: (data, grid_point, params) -> result dict.


@register_procedure("pca_point")
def _proc_pca(data, grid_point, params):
    return {"estimate": estimate_m11(data)}


@register_procedure("adaptive_point")
def _proc_adaptive(data, grid_point, params):
    est = adaptive_estimate_m11(data, float(params.get("kappa_bar", 1.0)))
    return {"estimate": est.value, "truncated": est.truncated}


@register_procedure("adaptive_interval")
def _proc_adaptive_ci(data, grid_point, params):
    kappa_bar = float(params.get("kappa_bar", 1.0))
    c0 = float(params.get("c0", DEFAULT_C0))
    est = adaptive_estimate_m11(data, kappa_bar)
    iv = adaptive_ci(data, kappa_bar, c0)
    return {
        "estimate": est.value,
        "lower": iv.lower,
        "upper": iv.upper,
        "truncated": est.truncated,
    }


@register_procedure("naive_interval")
def _proc_naive_ci(data, grid_point, params):
    iv = naive_pretest_ci(
        data,
        alpha=float(params.get("alpha", 0.05)),
        k_max=int(params.get("k_max", 2)),
    )
    return {
        "estimate": 0.5 * (iv.lower + iv.upper),
        "lower": iv.lower,
        "upper": iv.upper,
    }


@register_procedure("panel_trace")
def _proc_panel_trace(data, grid_point, params):
    x, y = data
    est = estimate_beta(x, y, int(params.get("r0", 1)), int(params.get("r1", 1)))
    return {"estimate": est.beta_hat, "r_hat": est.r_hat}


@register_procedure("panel_ls")
def _proc_panel_ls(data, grid_point, params):
    x, y = data
    beta, _, converged = ls_estimator(x, y, rank=int(params.get("rank", 2)))
    return {"estimate": beta, "converged": converged}


@register_procedure("panel_ci_star")
def _proc_panel_ci_star(data, grid_point, params):
    x, y = data
    iv = ci_star(x, y, float(params.get("kappa2", 10.0)))
    return {
        "estimate": 0.5 * (iv.lower + iv.upper),
        "lower": iv.lower,
        "upper": iv.upper,
    }


# ---------------------------------------------------------------------------
# Experiment builders.


def rate_in_tau_spec(
    n: int = 100,
    t: int = 100,
    tau_fracs=(0.1, 0.2, 0.4, 0.8),
    reps: int = 500,
    seed: int = 20260823,
    kappa: float = 1.0,
    spike_frac: float = 0.75,
) -> ExperimentSpec:
    """Median plug-in error against factor strength; slope should be -1."""
    grid = tuple(
        {"n": n, "T": t, "tau": f * math.sqrt(n * t)} for f in tau_fracs
    )
    return ExperimentSpec(
        name="entrywise-rate-tau",
        generator="rank_one_entrywise",
        procedure="pca_point",
        replications=reps,
        master_seed=seed,
        grid=grid,
        generator_params={"kappa": kappa, "spike_frac": spike_frac},
    )


def rate_in_size_spec(
    sizes=(50, 100, 200),
    tau_frac: float = 0.5,
    reps: int = 500,
    seed: int = 20260823,
    kappa: float = 1.0,
    spike_frac: float = 0.75,
) -> ExperimentSpec:
    """Median error across matrix sizes at proportional strength.

    The normalization median * tau / sqrt(n + T) should be flat.
    """
    grid = tuple(
        {"n": m, "T": m, "tau": tau_frac * m} for m in sizes
    )
    return ExperimentSpec(
        name="entrywise-rate-size",
        generator="rank_one_entrywise",
        procedure="pca_point",
        replications=reps,
        master_seed=seed,
        grid=grid,
        generator_params={"kappa": kappa, "spike_frac": spike_frac},
    )


def adaptive_coverage_spec(
    n: int = 100,
    t: int = 100,
    tau_fracs=(0.3, 0.5, 1.0),
    reps: int = 500,
    seed: int = 20260823,
    kappa: float = 1.0,
    c0: float = DEFAULT_C0,
) -> ExperimentSpec:
    """Adaptive CI coverage over a strength grid plus a weak-signal point.

    The final grid point has tau of order sqrt(n + T), far below the
    detection threshold; there the interval is the trivial one and coverage
    is exact.
    """
    grid = [
        {"n": n, "T": t, "tau": f * math.sqrt(n * t)} for f in tau_fracs
    ]
    grid.append({"n": n, "T": t, "tau": 2.0 * math.sqrt(n + t)})
    return ExperimentSpec(
        name="entrywise-coverage",
        generator="rank_one_entrywise",
        procedure="adaptive_interval",
        replications=reps,
        master_seed=seed,
        grid=tuple(grid),
        generator_params={"kappa": kappa},
        procedure_params={"kappa_bar": kappa, "c0": c0},
    )


def pretest_control_spec(
    n: int = 100,
    t: int = 100,
    reps: int = 500,
    seed: int = 20260823,
    kappa: float = 1.0,
    eta: float = 0.5,
    tau2: float = 1.0,
    alpha: float = 0.05,
) -> ExperimentSpec:
    """Pre-test interval coverage on the hidden-entry pair: the negative control.

    Grid point 0 is the strong base instance (coverage should be nominal),
    grid point 1 the alternative whose observed-data law is identical but
    whose (1,1) entry moved; a shrinking-width interval must miss it.
    """
    grid = (
        {"n": n, "T": t, "arm": "base"},
        {"n": n, "T": t, "arm": "alt"},
    )
    return ExperimentSpec(
        name="adaptivity-demo",
        generator="perturbation_pair_arm",
        procedure="naive_interval",
        replications=reps,
        master_seed=seed,
        grid=grid,
        generator_params={"kappa": kappa, "eta": eta, "tau2": tau2},
        procedure_params={"alpha": alpha},
    )


# Panel strength configurations for the uniform-rate experiment: the fitted
# ranks in (d) overstate the true ranks (1, 1) by one each.
PANEL_CONFIGS = {
    "strong": {"weak_m": False, "weak_d": False, "r0": 1, "r1": 1},
    "weak_m": {"weak_m": True, "weak_d": False, "r0": 1, "r1": 1},
    "weak_d": {"weak_m": False, "weak_d": True, "r0": 1, "r1": 1},
    "overstated": {"weak_m": False, "weak_d": False, "r0": 2, "r1": 2},
}


def panel_rate_spec(
    config: str = "strong",
    sizes=(50, 100, 200),
    reps: int = 500,
    seed: int = 20260823,
    beta: float = 0.5,
) -> ExperimentSpec:
    """sqrt(nT)-scaled RMSE of the trace estimator across sizes."""
    cfg = PANEL_CONFIGS[config]
    grid = tuple({"n": m, "T": m} for m in sizes)
    return ExperimentSpec(
        name=f"panel-rate-{config}",
        generator="panel_config",
        procedure="panel_trace",
        replications=reps,
        master_seed=seed,
        grid=grid,
        generator_params={
            "beta": beta, "weak_m": cfg["weak_m"], "weak_d": cfg["weak_d"],
        },
        procedure_params={"r0": cfg["r0"], "r1": cfg["r1"]},
    )


def panel_tradeoff_spec(
    n: int = 100,
    t: int = 100,
    kappa2: float = 10.0,
    c: float = 3.9,
    reps: int = 500,
    seed: int = 20260823,
) -> ExperimentSpec:
    """Fixed-width strong-factor interval against the shifted alternative.

    Grid point 0 is the strong-factor null (nominal coverage), grid point 1
    the KL-close alternative where the fixed width forces undercoverage.
    """
    grid = (
        {"n": n, "T": t, "arm": "null"},
        {"n": n, "T": t, "arm": "alt"},
    )
    return ExperimentSpec(
        name="panel-tradeoff",
        generator="panel_pair_arm",
        procedure="panel_ci_star",
        replications=reps,
        master_seed=seed,
        grid=grid,
        generator_params={"kappa2": kappa2, "c": c},
        procedure_params={"kappa2": kappa2},
    )


# ---------------------------------------------------------------------------
# Standalone checks.


def lr_power_check(
    n: int = 100,
    t: int = 100,
    tau: float | None = None,
    kappa: float = 1.0,
    alpha: float = 0.05,
    reps: int = 2000,
    seed: int = 20260823,
) -> dict:
    """Power of the empirically calibrated likelihood-ratio test.

    The critical value is the (1 - alpha) quantile of the statistic over an
    independent batch of null draws, so the test has exact finite-sample
    size up to Monte Carlo error.  At the two-point construction the power
    cannot exceed 2 alpha plus statistical slack.
    """
    if tau is None:
        tau = kappa * math.sqrt(n * t) / 12.0
    pair = rank_one_testing_pair(n, t, tau, kappa, alpha)
    null_m = pair.null_instance.mean
    alt_m = pair.alt_instance.mean

    null_stats = np.empty(reps)
    alt_stats = np.empty(reps)
    for r in range(reps):
        x0 = sample_observation(pair.null_instance, replication_rng(seed, 0, r))
        null_stats[r] = likelihood_ratio_stat(x0, null_m, alt_m)
        x1 = sample_observation(pair.alt_instance, replication_rng(seed, 1, r))
        alt_stats[r] = likelihood_ratio_stat(x1, null_m, alt_m)
    critical = float(np.quantile(null_stats, 1.0 - alpha))
    power = float(np.mean(alt_stats > critical))
    size = float(np.mean(null_stats > critical))
    power_se = math.sqrt(max(power * (1.0 - power), 1e-12) / reps)
    return {
        "n": n, "T": t, "tau": tau, "kappa": kappa, "alpha": alpha,
        "reps": reps, "seed": seed,
        "critical_value": critical,
        "size": size,
        "power": power,
        "power_se": power_se,
        "power_bound": 2.0 * alpha,
        "tv_upper": pair.info["tv_upper"],
        "chi2_cross": pair.info["chi2_cross"],
        "separation": pair.separation,
    }


def noise_norm_check(
    n: int = 100,
    t: int = 100,
    factor: float = 3.0,
    reps: int = 500,
    seed: int = 20260823,
) -> dict:
    """Frequency of ||noise|| <= factor * sqrt(n + T) for iid Gaussian noise."""
    bound = factor * math.sqrt(n + t)
    hits = 0
    for r in range(reps):
        rng = replication_rng(seed, 0, r)
        eps = rng.standard_normal((n, t))
        hits += np.linalg.svd(eps, compute_uv=False)[0] <= bound
    return {
        "n": n, "T": t, "factor": factor, "reps": reps, "seed": seed,
        "bound": bound, "frequency": hits / reps,
    }


def oracle_checks(
    reps: int = 100_000,
    seed: int = 20260823,
    n: int = 8,
    t: int = 8,
) -> dict:
    """Monte Carlo consistency checks for the information-theory oracles.

    Three checks, all on small instances so the simulation is exact enough:
    the closed-form Gaussian KL against the mean log-likelihood-ratio under
    the alternative, the chi-square cross moment against the (trimmed)
    empirical second moment of the likelihood ratio, and the total-variation
    upper bound against the empirical mean absolute deviation of the ratio.
    """
    results: dict = {"reps": reps, "seed": seed, "n": n, "T": t}

    # KL of the panel shift pair at c = 1 is 1/2 in closed form.  Simulate
    # E_2[log dP2/dP1] directly from the stacked Gaussian representation.
    c = 1.0
    delta = c / math.sqrt(n * t)
    block1 = np.eye(2)
    block2 = np.array([[delta * delta + 1.0, delta], [delta, 1.0]])
    mu = np.zeros(2 * n * t)
    kl_exact = gaussian_kl(
        mu, KroneckerCov(block1, n * t), mu, KroneckerCov(block2, n * t)
    )
    rng = replication_rng(seed, 0)
    chol2 = np.linalg.cholesky(block2)
    inv1 = np.linalg.inv(block1)
    inv2 = np.linalg.inv(block2)
    logdet = math.log(np.linalg.det(block1) / np.linalg.det(block2))
    draws = rng.standard_normal((reps, n * t, 2)) @ chol2.T
    # log ratio factorizes over the nT iid 2-vectors.
    quad1 = np.einsum("rki,ij,rkj->r", draws, inv1, draws)
    quad2 = np.einsum("rki,ij,rkj->r", draws, inv2, draws)
    log_ratio = 0.5 * (quad1 - quad2) + 0.5 * n * t * logdet
    kl_mc = float(np.mean(log_ratio))
    results["kl"] = {
        "exact": kl_exact,
        "mc": kl_mc,
        "mc_se": float(np.std(log_ratio, ddof=1) / math.sqrt(reps)),
        "rel_err": abs(kl_mc - kl_exact) / kl_exact,
    }

    # Likelihood-ratio moments at a small testing pair.  E_null[LR^2] equals
    # the chi-square cross moment with both alternatives equal; the ratio is
    # heavy tailed, so the comparison trims the top 0.01%.
    pair = rank_one_testing_pair(
        n, t, tau=math.sqrt(n * t) / 12.0, kappa=1.0, alpha=0.05
    )
    null_m, alt_m = pair.null_instance.mean, pair.alt_instance.mean
    rng = replication_rng(seed, 1)
    noise = rng.standard_normal((reps, n, t))
    x = null_m[None, :, :] + noise
    obs = np.ones((n, t), dtype=bool)
    obs[0, 0] = False
    diff = (alt_m - null_m)[obs]
    resid = x[:, obs] - null_m[obs][None, :]
    log_lr = resid @ diff - 0.5 * float(diff @ diff)
    lr = np.exp(log_lr)
    cross_exact = chi_square_cross(
        null_m[obs], alt_m[obs], alt_m[obs]
    )
    cut = np.quantile(lr**2, 0.9999)
    second_trimmed = float(np.mean(np.minimum(lr**2, cut)))
    second_se = float(np.std(np.minimum(lr**2, cut), ddof=1) / math.sqrt(reps))
    tv_mc = float(np.mean(np.abs(lr - 1.0)))
    tv_se = float(np.std(np.abs(lr - 1.0), ddof=1) / math.sqrt(reps))
    results["chi2"] = {
        "exact": cross_exact,
        "mc_trimmed": second_trimmed,
        "mc_se": second_se,
        "trim_quantile": 0.9999,
    }
    results["tv"] = {
        "upper": pair.info["tv_upper"],
        "mc": tv_mc,
        "mc_se": tv_se,
    }
    return results
