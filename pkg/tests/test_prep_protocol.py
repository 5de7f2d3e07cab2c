import math

import numpy as np
import pytest
from scipy import stats

from fault_oracle import fault_oracle
from star_lab.noise import NoiseModel
from star_lab.prep_formulas import ideal_success, infidelity_leading, trace_distance_leading
from star_lab.prep_protocol import (
    ProtocolConfig,
    ProtocolSimulator,
    single_patch_channel,
    combine_counts,
    estimate_stats,
    noise_rejection_hazard,
    run_protocol_trial,
    supply_rate,
)


def noiseless(m=2, k=3, theta_star=0.3, mode="EC"):
    return ProtocolConfig(m, k, theta_star, mode, NoiseModel(0.0))


# ---------------------------------------------------------------- noiseless limit
@pytest.mark.parametrize("mode", ["EC", "PS"])
@pytest.mark.parametrize("m,k", [(2, 3), (1, 4), (3, 2)])
def test_noiseless_acceptance_is_ideal_success(mode, m, k):
    cfg = noiseless(m, k, mode=mode)
    counts = ProtocolSimulator(cfg).count_natural(200_000, seed=1)
    accepted = sum(npass for _, npass in counts.values())
    p = ideal_success(cfg.theta, k)
    assert abs(accepted / 200_000 - p) < 3 * math.sqrt(p * (1 - p) / 200_000)
    assert all(npass == 0 for n, (_, npass) in counts.items() if n > 0)


def test_noiseless_flipped_block_always_rejected():
    sim = ProtocolSimulator(noiseless())
    assert sim.count_stratum(1, 50_000, seed=2) == (50_000, 0)


def test_noiseless_statistics_are_exact():
    st = estimate_stats(noiseless(theta_star=1e-3), shots=20_000, seed=3)
    assert st.infidelity == 0.0
    assert st.trace_distance == 0.0
    assert st.p_suc == pytest.approx(ideal_success(noiseless(theta_star=1e-3).theta, 3), rel=1e-12)
    assert st.defined


def test_noiseless_trials_are_clean():
    cfg = noiseless()
    sim = ProtocolSimulator(cfg)
    rng = np.random.default_rng(4)
    seen = set()
    for _ in range(300):
        res = run_protocol_trial(cfg, rng, sim)
        assert res.accepted == (res.stratum == 0)
        assert not res.logical_x_flip and not res.logical_z_flip
        assert res.residual.weight == 0
        seen.add(res.stratum)
    assert seen == {0, 1}


def test_stratum_frequencies_follow_branch_weights():
    cfg = noiseless(k=5, m=1, theta_star=0.35)
    sim = ProtocolSimulator(cfg)
    n = 200_000
    counts = sim.count_natural(n, seed=5)
    observed = np.array([counts[s][0] for s in sorted(counts)])
    expected = n * sim.table.weights
    assert stats.chisquare(observed, expected).pvalue > 1e-3


# ---------------------------------------------------------------- noisy sampler vs fault enumeration
@pytest.mark.parametrize("mode", ["EC", "PS"])
def test_undetectable_rate_matches_fault_pairs(mode):
    p = 1e-3
    cfg = ProtocolConfig(2, 3, 1e-3, mode, NoiseModel(p))
    oracle = fault_oracle(cfg)
    assert oracle.p_ud_first == pytest.approx(6 / 15 * p, rel=1e-9)
    st = estimate_stats(cfg, shots=2_000_000, seed=6, threads=4)
    # the sampler sees all orders; the pair expansion leaves an O(p^3) remainder
    assert abs(st.p_ud - oracle.p_ud_second) < 3 * st.p_ud_err + 0.01 * oracle.p_ud_second


@pytest.mark.parametrize("mode", ["EC", "PS"])
def test_rejection_hazard_matches_location_sum(mode):
    p = 1e-4
    cfg = ProtocolConfig(2, 3, 1e-3, mode, NoiseModel(p))
    oracle = fault_oracle(cfg)
    counts = {0: ProtocolSimulator(cfg).count_stratum(0, 2_000_000, seed=7, threads=4)}
    ns, npass = counts[0]
    # delta method on -ln(pass rate)
    sigma = math.sqrt((ns - npass) / (ns * npass))
    assert abs(noise_rejection_hazard(counts) - oracle.hazard) < 3 * sigma + 0.01 * oracle.hazard


def test_rejection_hazard_is_smaller_for_checked_subset():
    p = 1e-3
    ec = fault_oracle(ProtocolConfig(2, 3, 1e-3, "EC", NoiseModel(p)))
    ps = fault_oracle(ProtocolConfig(2, 3, 1e-3, "PS", NoiseModel(p)))
    assert ec.hazard < ps.hazard / 2


def test_stratified_and_plain_agree():
    cfg = ProtocolConfig(2, 3, 0.35, "EC", NoiseModel(5e-3))
    sim = ProtocolSimulator(cfg)
    plain = estimate_stats(cfg, "plain", 2_000_000, seed=3, threads=4, simulator=sim)
    strat = estimate_stats(cfg, "stratified", 1_000_000, seed=3, threads=4, simulator=sim)
    sigma = math.hypot(plain.infidelity_err, strat.infidelity_err)
    assert abs(plain.infidelity - strat.infidelity) < 3 * sigma
    assert abs(plain.p_suc - strat.p_suc) < 3 * math.hypot(plain.p_suc_err, strat.p_suc_err)


def test_monte_carlo_infidelity_matches_leading_order():
    p, ts = 1e-3, 1e-3
    cfg = ProtocolConfig(2, 3, ts, "EC", NoiseModel(p))
    oracle = fault_oracle(cfg)
    st = estimate_stats(cfg, shots=2_000_000, seed=8, threads=4)
    theory = infidelity_leading(ts, 3, oracle.p_ud_second)
    assert abs(st.infidelity - theory) < 3 * st.infidelity_err + 0.01 * theory


def test_weight_two_blocks_beat_single_qubit_blocks_in_sampler():
    p, ts = 1e-3, 1e-3
    single = estimate_stats(ProtocolConfig(1, 6, ts, "EC", NoiseModel(p)), shots=1_000_000, seed=9, threads=4)
    paired = estimate_stats(ProtocolConfig(2, 3, ts, "EC", NoiseModel(p)), shots=1_000_000, seed=9, threads=4)
    assert single.trace_distance / paired.trace_distance > 4
    # both sit on their own leading-order curves once P_ud is read from the sampler
    for st, k in ((single, 6), (paired, 3)):
        theory = trace_distance_leading(ts, k, st.p_ud)
        assert st.trace_distance == pytest.approx(theory, rel=0.05)


# ---------------------------------------------------------------- parallelism and bookkeeping
def test_counts_do_not_depend_on_thread_count():
    cfg = ProtocolConfig(2, 3, 0.2, "EC", NoiseModel(2e-3))
    sim = ProtocolSimulator(cfg)
    assert sim.count_natural(300_000, 11, threads=1) == sim.count_natural(300_000, 11, threads=4)
    assert sim.count_stratum(1, 300_000, 11, threads=1) == sim.count_stratum(1, 300_000, 11, threads=3)


def test_batch_size_only_changes_streams_not_totals():
    sim = ProtocolSimulator(ProtocolConfig(2, 3, 0.2, "EC", NoiseModel(0.0)))
    ns, npass = sim.count_stratum(0, 100_001, 1, batch_size=4096)
    assert ns == npass == 100_001


def test_combine_counts_error_propagation():
    cfg = ProtocolConfig(2, 3, 1e-3, "EC", NoiseModel(1e-3))
    w = {0: 0.99, 1: 0.01}
    counts = {0: (10_000, 7_000), 1: (10_000, 30)}
    st = combine_counts(cfg, counts, w, "stratified")
    r0, r1 = 0.7, 0.003
    assert st.p_suc == pytest.approx(0.99 * r0 + 0.01 * r1, rel=1e-14)
    expected_err = math.hypot(0.99 * math.sqrt(r0 * (1 - r0) / 1e4), 0.01 * math.sqrt(r1 * (1 - r1) / 1e4))
    assert st.p_suc_err == pytest.approx(expected_err, rel=1e-12)
    assert st.p_ud == pytest.approx(3 * r1 / r0, rel=1e-12)
    assert st.discard == pytest.approx(0.3)


def test_combine_counts_flags_undefined_and_rejects_bad_counters():
    cfg = ProtocolConfig(2, 3, 1e-3, "EC", NoiseModel(1e-3))
    st = combine_counts(cfg, {0: (100, 0), 1: (100, 0)}, {0: 0.99, 1: 0.01}, "stratified")
    assert not st.defined and math.isnan(st.infidelity)
    with pytest.raises(ValueError):
        combine_counts(cfg, {0: (10, 11)}, {0: 1.0}, "stratified")


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(2, 3, 0.5)
    with pytest.raises(ValueError):
        ProtocolConfig(2, 3, 1e-3, mode="XX")
    with pytest.raises(ValueError):
        ProtocolConfig(0, 3, 1e-3)
    with pytest.raises(ValueError):
        estimate_stats(noiseless(), plan="other")


# ---------------------------------------------------------------- supply rate and baseline channel
def test_supply_rate_noiseless_is_closed_form():
    cfg = noiseless(2, 6, 1e-3)
    assert supply_rate(cfg) == pytest.approx(12 / 4 * ideal_success(cfg.theta, 6), rel=1e-14)
    assert supply_rate(cfg, p_suc=0.5, trials_per_clock=2.0) == 1.0


def test_single_patch_channel_rates():
    assert single_patch_channel(1e-4).x == pytest.approx(6.67e-6, rel=1e-3)
    assert single_patch_channel(1e-4, improved=False).x == pytest.approx(2 * 1e-4 / 15, rel=1e-12)
    ch = single_patch_channel(0.0)
    assert ch.x == 0.0 and ch.y == 0.0
    with pytest.raises(ValueError):
        single_patch_channel(-1e-3)
