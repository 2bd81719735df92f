import dataclasses

import numpy as np
import pytest

from cellfree_ee.power import QosSpec, equal_power_allocation, make_power_params, per_user_rate
from cellfree_ee.propagation import generate_topology, large_scale_fading, mmse_stats
from cellfree_ee.zfstats import estimate_zf_statistics


def build_instance(m, k, seed, n_mc=2000, p_tx_watts=0.2, sigma_shad_db=8.0):
    """Full pipeline up to the zero-forcing statistics for one topology."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    topo = generate_topology(m, k, 1.0, np.random.SeedSequence([seed, 7]))
    beta = large_scale_fading(topo, sigma_shad_db, rng=rng)
    params = make_power_params(m=m, tau_u=k, p_tx_watts=p_tx_watts)
    stats = mmse_stats(beta, params.rho_r, k)
    zf = estimate_zf_statistics(stats, n_mc, rng)
    return topo, stats, zf, params


def loose_qos(zf, params, fraction=0.5):
    """Scalar floor at a fraction of the worst equal-power rate."""
    eq = equal_power_allocation(zf.theta)
    rates = per_user_rate(eq.eta, zf.gamma, params)
    k = zf.theta.shape[1]
    return QosSpec.from_floor(np.full(k, fraction * float(rates.min())), params)


def perfect_view(zf):
    """The same statistics with the interference coupling zeroed out."""
    return dataclasses.replace(zf, gamma=np.zeros_like(zf.gamma))


def grid_best_ee(zf, params, qos, n=400):
    """Brute-force oracle: best energy efficiency on an n x n grid (K=2 only).

    The grid covers the box [0, ub_k] with ub_k the single-user per-AP cap;
    points violating a per-AP or QoS constraint are discarded.
    """
    assert zf.theta.shape[1] == 2, "grid oracle is for two users"
    ub = 1.0 / zf.theta.max(axis=0)
    g1 = np.linspace(0.0, ub[0], n)
    g2 = np.linspace(0.0, ub[1], n)
    e1, e2 = np.meshgrid(g1, g2, indexing="ij")
    etas = np.stack([e1.ravel(), e2.ravel()], axis=1)
    ap_ok = np.all(etas @ zf.theta.T <= 1.0, axis=1)
    denom = 1.0 + params.rho_f * (etas @ zf.gamma.T)
    rates = params.prelog * np.log2(1.0 + params.rho_f * etas / denom)
    qos_ok = np.all(rates >= qos.r_bar[None, :] - 1e-12, axis=1)
    throughput = params.bandwidth_hz * rates.sum(axis=1)
    power = (
        params.rho_f * params.n0_watts * (etas @ (params.alpha @ zf.theta))
        + params.p_fixed
        + throughput * np.sum(params.p_btm)
    )
    ee = np.where(ap_ok & qos_ok, throughput / power, -np.inf)
    return float(ee.max())


@pytest.fixture(scope="session")
def small_instance():
    """M=8, K=2 instance reused across solver tests."""
    return build_instance(8, 2, seed=3)
