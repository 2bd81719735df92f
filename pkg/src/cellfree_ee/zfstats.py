"""Zero-forcing precoder and the Monte-Carlo statistics that drive power control.

The precoder B satisfies G_hat^T B = I, so the residual interference seen by a
user comes only from the estimation error. Two expectation matrices summarize
everything the optimizers need:

  gamma[k, i] = E[ sum_m var_err[m, k] * |B[m, i]|^2 ]   (interference coupling)
  theta[m, i] = E[ |B[m, i]|^2 ]                         (per-AP power usage)

Both are averaged over independent draws of the estimated channel; the inner
error expectation is taken analytically, which lowers the estimator variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagation import MmseStats, _complex_gaussian

# Draws whose Gram matrix is worse-conditioned than this are discarded.
CONDITION_LIMIT = 1e10
# Precoder identity G_hat^T B = I must hold to this tolerance on every draw.
ZF_IDENTITY_TOL = 1e-8


class SingularChannelError(RuntimeError):
    """Estimated channel too close to rank deficiency for zero forcing."""


@dataclass(frozen=True)
class ZfStatistics:
    """Monte-Carlo expectations parameterizing the power-control problem."""

    gamma: np.ndarray  # (K, K), residual-interference coefficients
    theta: np.ndarray  # (M, K), per-AP power-usage coefficients
    n_realizations: int
    n_rejected: int = 0
    gamma_se: np.ndarray | None = None  # standard errors of the means
    theta_se: np.ndarray | None = None

    @property
    def n_aps(self) -> int:
        return self.theta.shape[0]

    @property
    def n_users(self) -> int:
        return self.theta.shape[1]


@dataclass(frozen=True)
class SinrValidation:
    """Signal-level measurement of the desired and interference powers."""

    desired: np.ndarray  # (K,), per-realization desired power (deterministic)
    interference: np.ndarray  # (K,), empirical interference power
    interference_se: np.ndarray  # (K,), standard error of the mean
    predicted_interference: np.ndarray  # rho_f * (gamma @ eta)
    n_realizations: int


def zf_matrix(g_hat: np.ndarray) -> np.ndarray:
    """Zero-forcing precoder B = conj(G_hat) (G_hat^T conj(G_hat))^{-1}.

    Raises SingularChannelError when the K x K Gram matrix is
    ill-conditioned beyond CONDITION_LIMIT.
    """
    g_hat = np.asarray(g_hat)
    gram = g_hat.T @ g_hat.conj()
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularChannelError(f"Gram matrix condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    return g_hat.conj() @ np.linalg.inv(gram)


def estimate_zf_statistics(stats: MmseStats, n_mc: int, rng, batch_size: int = 512) -> ZfStatistics:
    """Estimate gamma and theta over n_mc independent channel draws.

    Singular draws (Gram condition number above CONDITION_LIMIT) are redrawn
    and counted; the estimation aborts if more than 1% of attempts are
    rejected. Requires M > K so the Gram matrix is invertible almost surely.

    Returns the means together with their standard errors.
    """
    m, k = stats.shape
    if m <= k:
        raise ValueError(f"need M > K for invertibility, got M={m}, K={k}")
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    rng = np.random.default_rng(rng)

    theta_sum = np.zeros((m, k))
    theta_sq = np.zeros((m, k))
    gamma_sum = np.zeros((k, k))
    gamma_sq = np.zeros((k, k))
    accepted = 0
    attempts = 0
    max_attempts = 2 * n_mc + 1000

    while accepted < n_mc:
        b = min(batch_size, n_mc - accepted)
        g_hat = _complex_gaussian(stats.var_hat, rng, extra_shape=(b,))
        attempts += b
        precoder, _ = _batched_zf(g_hat)  # rejected draws already dropped
        abs_b2 = np.abs(precoder) ** 2  # (b', M, K)
        # gamma draw for row k: sum_m var_err[m, k] |B[m, i]|^2
        gamma_draw = np.einsum("mk,bmi->bki", stats.var_err, abs_b2)
        theta_sum += abs_b2.sum(axis=0)
        theta_sq += (abs_b2**2).sum(axis=0)
        gamma_sum += gamma_draw.sum(axis=0)
        gamma_sq += (gamma_draw**2).sum(axis=0)
        accepted += abs_b2.shape[0]
        if attempts > max_attempts:
            raise SingularChannelError(
                f"rejection cap hit: {attempts - accepted} rejected in {attempts} attempts"
            )

    rejected = attempts - accepted
    if rejected / attempts > 0.01:
        raise SingularChannelError(
            f"rejection rate {rejected / attempts:.2%} exceeds 1% ({rejected}/{attempts})"
        )

    theta = theta_sum / accepted
    gamma = gamma_sum / accepted
    return ZfStatistics(
        gamma=gamma,
        theta=theta,
        n_realizations=accepted,
        n_rejected=rejected,
        gamma_se=_mean_se(gamma_sum, gamma_sq, accepted),
        theta_se=_mean_se(theta_sum, theta_sq, accepted),
    )


def validate_sinr(
    stats: MmseStats,
    zf: ZfStatistics,
    eta: np.ndarray,
    rho_f: float,
    n_mc: int,
    rng,
    batch_size: int = 512,
) -> SinrValidation:
    """Measure per-user desired and interference powers at the signal level.

    Each realization transmits independent unit-modulus symbols through the
    zero-forcing precoder at power coefficients eta (noise-normalized scale,
    unit receiver noise). The desired term is deterministic and equals
    rho_f * eta_k per realization; the interference term is averaged and
    returned with its standard error for comparison against the gamma model.
    """
    eta = np.asarray(eta, dtype=float)
    rng = np.random.default_rng(rng)
    m, k = stats.shape
    amp = np.sqrt(eta)

    interf_sum = np.zeros(k)
    interf_sq = np.zeros(k)
    accepted = 0
    attempts = 0
    max_attempts = 2 * n_mc + 1000

    while accepted < n_mc:
        b = min(batch_size, n_mc - accepted)
        g_hat = _complex_gaussian(stats.var_hat, rng, extra_shape=(b,))
        g_err = _complex_gaussian(stats.var_err, rng, extra_shape=(b,))
        attempts += b
        precoder, ok = _batched_zf(g_hat)
        if not np.all(ok):
            g_err = g_err[ok]
        nb = precoder.shape[0]
        symbols = np.exp(2j * np.pi * rng.random((nb, k)))
        # error channel of user k through the precoder columns: (b, K, K)
        leak = np.einsum("bmk,bmi->bki", g_err, precoder)
        interf_amp = np.sqrt(rho_f) * np.einsum("bki,i,bi->bk", leak, amp, symbols)
        p = np.abs(interf_amp) ** 2
        interf_sum += p.sum(axis=0)
        interf_sq += (p**2).sum(axis=0)
        accepted += nb
        if attempts > max_attempts:
            raise SingularChannelError("rejection cap hit during signal-level validation")

    return SinrValidation(
        desired=rho_f * eta,
        interference=interf_sum / accepted,
        interference_se=_mean_se(interf_sum, interf_sq, accepted),
        predicted_interference=rho_f * (zf.gamma @ eta),
        n_realizations=accepted,
    )


def _batched_zf(g_hat: np.ndarray) -> tuple:
    """Precoders for a batch of draws plus the acceptance mask."""
    gram = np.einsum("bmk,bml->bkl", g_hat, g_hat.conj())
    cond = np.linalg.cond(gram)
    ok = np.isfinite(cond) & (cond <= CONDITION_LIMIT)
    precoder = np.einsum("bmk,bkl->bml", g_hat[ok].conj(), np.linalg.inv(gram[ok]))
    residual = np.einsum("bmk,bml->bkl", g_hat[ok], precoder)
    residual -= np.eye(g_hat.shape[2])
    worst = np.max(np.abs(residual)) if residual.size else 0.0
    if worst > ZF_IDENTITY_TOL:
        raise SingularChannelError(f"precoder identity residual {worst:.3e} exceeds {ZF_IDENTITY_TOL:.0e}")
    return precoder, ok


def _mean_se(total: np.ndarray, total_sq: np.ndarray, n: int) -> np.ndarray:
    """Standard error of the sample mean from running sums."""
    if n < 2:
        return np.zeros_like(total)
    mean = total / n
    var = np.maximum(total_sq / n - mean**2, 0.0) * n / (n - 1)
    return np.sqrt(var / n)
