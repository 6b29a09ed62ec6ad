"""End-to-end acceptance checks, one test per release criterion.

Each test prints the measured quantities it gates on, so a verbose run
doubles as the acceptance report.  Tolerances are pinned in the asserts.
The slow tests here (1 and 9) run full multi-seed experiments and
dominate the suite's wall time.
"""

import itertools
import os
from dataclasses import replace

import numpy as np
from scipy import stats

from oracles import (
    brute_force_side_step,
    enumerate_expected_successes,
    finite_diff_grads,
    gridworld,
    policy_evaluation,
    random_net_and_batch,
    run_centralized_dqn,
    value_iteration,
)

from greenrl.cloud_loop import (
    CompressionPlan,
    DqnConfig,
    ServiceRequest,
    Session,
    decode_snapshot,
    encode_snapshot,
    run_session,
)
from greenrl.compression import (
    aggregate_states,
    apply_partition,
    quantize_weights,
)
from greenrl.config import (
    CloudSection,
    ExperimentConfig,
    LocalAgentParams,
    RachSection,
    SpatialSection,
)
from greenrl.energy import macs_forward
from greenrl.neural import backprop_minibatch, glorot_init
from greenrl.rach_env import (
    BernoulliTraffic,
    RachAction,
    RachConfig,
    expected_successes,
    simulate_contention,
)
from greenrl.rl_core import QTable
from greenrl.runner import run_experiment, run_rach_seed
from greenrl.spatial import FieldNoise, FieldTrafficSource, Kernel, SpatialField, side_step


_MENU = (
    RachAction(1, 8, 8),
    RachAction(2, 8, 8),
    RachAction(4, 8, 8),
    RachAction(6, 8, 4),
)


def _session_env(**overrides):
    kwargs = dict(
        num_devices=30,
        action_menu=_MENU,
        history_window=4,
        traffic=BernoulliTraffic(0.1),
    )
    kwargs.update(overrides)
    return RachConfig(**kwargs)


def test_c01_agent_ordering(tmp_path):
    """Mean eval reward must rank dqn >= la-q >= le-urc, with dqn beating
    le-urc at p < 0.05, over at least 10 seeds and 5000 slots each."""
    seeds = tuple(range(12))
    base = dict(
        scenario="rach",
        seeds=seeds,
        total_slots=15000,
        eval_slots=3000,
        rach=RachSection(traffic_p=0.08),
        cloud=CloudSection(
            inner_steps=2,
            lr=0.001,
            batch_size=128,
            target_sync_every=100,
            eps_decay_steps=2500,
            replay_capacity=8000,
        ),
        agent_params=LocalAgentParams(eps_decay_steps=6000),
        out_dir=str(tmp_path),
    )
    evals = {}
    for agent in ("dqn", "la-q", "le-urc"):
        cfg = ExperimentConfig(name=f"order-{agent}", agent=agent, **base)
        evals[agent] = np.array(
            [run_rach_seed(cfg, seed)[1]["eval_reward"] for seed in seeds]
        )
    assert len(seeds) >= 10
    assert base["total_slots"] >= 5000
    means = {a: float(v.mean()) for a, v in evals.items()}
    diff = evals["dqn"] - evals["le-urc"]
    t_stat, p_two = stats.ttest_rel(evals["dqn"], evals["le-urc"])
    p_one = p_two / 2 if t_stat > 0 else 1 - p_two / 2
    print(
        f"criterion 1: dqn={means['dqn']:.4f} la-q={means['la-q']:.4f} "
        f"le-urc={means['le-urc']:.4f} p(dqn>le-urc)={p_one:.2e}"
    )
    assert means["dqn"] >= means["la-q"] >= means["le-urc"]
    assert diff.mean() > 0
    assert p_one < 0.05


def test_c02_collision_oracle():
    """Monte Carlo success counts must land within 1% of n(1-1/m)^(n-1)
    for three (n, m) pairs over 1e5 slots, and the closed form must match
    exact enumeration for every n, m <= 6."""
    slots = 100_000
    rng = np.random.default_rng(20260401)
    rel_errs = []
    for n, m in ((5, 8), (10, 12), (12, 6)):
        wins = 0
        for _ in range(slots):
            occupancy = simulate_contention(n, m, rng)
            wins += int((occupancy == 1).sum())
        measured = wins / slots
        expected = expected_successes(n, m)
        rel = abs(measured - expected) / expected
        rel_errs.append((n, m, rel))
        assert rel < 0.01, (n, m, measured, expected)
    worst_exact = 0.0
    for n, m in itertools.product(range(1, 7), range(1, 7)):
        exact = enumerate_expected_successes(n, m)
        worst_exact = max(worst_exact, abs(expected_successes(n, m) - exact))
    print(
        "criterion 2: mc rel errs "
        + " ".join(f"({n},{m})={r:.2e}" for n, m, r in rel_errs)
        + f", enumeration gap={worst_exact:.2e}"
    )
    assert worst_exact < 1e-9


def test_c03_gradient_check():
    """Analytic gradients must match central finite differences to 1e-4
    relative error on 100 random nets of at most 1000 weights."""
    rng = np.random.default_rng(33)
    worst = 0.0
    for _ in range(100):
        net, batch = random_net_and_batch(rng, max_weights=1000)
        n_params = sum(w.size for w in net.weights) + sum(b.size for b in net.biases)
        assert n_params <= 1000
        analytic = backprop_minibatch(net, batch)
        fd_w, fd_b = finite_diff_grads(net, batch)
        pairs = list(zip(analytic.weight_grads, fd_w)) + list(zip(analytic.bias_grads, fd_b))
        for a, f in pairs:
            gap = np.max(np.abs(a - f) / np.maximum(1.0, np.abs(f)))
            worst = max(worst, float(gap))
    print(f"criterion 3: worst relative gradient gap over 100 nets = {worst:.2e}")
    assert worst <= 1e-4


def test_c04_degenerate_loop_matches_centralized():
    """With one entity, one inner step, batch size 1, replay capacity 1
    and no compression, the session weights must match a centralized
    training run bit for bit over at least 1000 steps."""
    steps = 1000
    dqn = DqnConfig(
        hidden=(16, 16),
        lr=0.01,
        batch_size=1,
        replay_capacity=1,
        target_sync_every=25,
        eps_decay_steps=400,
    )
    env_cfg = _session_env()
    seed = 42
    log = run_centralized_dqn(env_cfg, dqn, seed, steps)
    session = Session(
        ServiceRequest(entity_ids=(0,), env_config=env_cfg, inner_steps=1, dqn=dqn, seed=seed)
    )
    mismatch = None
    for i in range(steps):
        batch, _delta = session.outer_round(0)
        session.train_on_batch(batch)
        got = [w.copy() for w in session.online.weights]
        got += [b.copy() for b in session.online.biases]
        if not all(np.array_equal(a, b) for a, b in zip(got, log[i])):
            mismatch = i
            break
    print(f"criterion 4: {steps} steps bit-identical, first mismatch = {mismatch}")
    assert mismatch is None


def test_c05_quantization_budget():
    """Per-layer 8-bit round-trip error must stay within half a scale
    step, and the quantized snapshot must cost at most 30% of the f32
    wire bytes, headers included."""
    net = glorot_init([12, 32, 32, 4], 909, dtype=np.float32)
    quant = quantize_weights(net, bits=8)
    worst_ratio = 0.0
    for orig, q in zip(net.weights, quant.weights):
        scale = float(np.max(np.abs(orig))) / 127.0
        err = float(np.max(np.abs(orig - q)))
        # float32 storage adds at most a few ulp on top of the lattice gap
        assert err <= scale / 2 * (1 + 1e-4), (err, scale / 2)
        worst_ratio = max(worst_ratio, err / (scale / 2))
    dense_bytes = len(encode_snapshot(1, 0.5, net, None))
    quant_bytes = len(encode_snapshot(1, 0.5, net, 8))
    ratio = quant_bytes / dense_bytes
    print(
        f"criterion 5: max err/(scale/2)={worst_ratio:.4f}, "
        f"bytes {quant_bytes}/{dense_bytes} = {ratio:.4f}"
    )
    assert ratio <= 0.30
    _v, _eps, restored = decode_snapshot(encode_snapshot(1, 0.5, net, None))
    for a, b in zip(restored.weights + restored.biases, net.weights + net.biases):
        assert np.array_equal(a, b)


def test_c06_mac_counting_and_sparsity_curve():
    """macs_forward must equal the independent nonzero weight count and
    the pruning report at every level in {0, 25, 50, 75}%; the
    reward-vs-sparsity curve is reported, not gated."""
    rounds = 120
    curve = []
    for level in (0.0, 0.25, 0.5, 0.75):
        session = Session(
            ServiceRequest(
                entity_ids=(0,),
                env_config=_session_env(),
                inner_steps=2,
                dqn=DqnConfig(hidden=(24, 24), eps_decay_steps=300),
                compression=CompressionPlan(prune_quantile=level, prune_at_round=40),
                seed=7,
            )
        )
        metrics = run_session(session, rounds)
        net = metrics.final_net
        nonzero = sum(int(np.count_nonzero(w)) for w in net.weights)
        report = metrics.sparsity_reports[-1]
        assert macs_forward(net) == nonzero == report.mac_count_pruned
        reward = float(metrics.reward_curve()[-40:].mean())
        curve.append((level, nonzero, reward))
    levels, macs, rewards = zip(*curve)
    assert macs[0] > macs[1] > macs[2] > macs[3]
    monotone = all(rewards[i] >= rewards[i + 1] for i in range(len(rewards) - 1))
    print(
        "criterion 6: "
        + " ".join(f"{int(l * 100)}%:macs={m},reward={r:.3f}" for l, m, r in curve)
        + f" (reward monotone non-increasing: {monotone})"
    )


def test_c07_state_aggregation_bound():
    """On a 5x5 gridworld, eps=0 aggregation must merge exactly the
    duplicate Q rows and keep the optimal policy; at eps = 0.1 * value
    range the merged greedy policy must stay within 2*eps/(1-discount)
    of optimal everywhere."""
    discount = 0.9
    mdp = gridworld(5, goal=(4, 4))
    qstar = value_iteration(mdp, discount)
    table = QTable(
        mdp.n_actions, 0.5, {s: qstar[s].copy() for s in range(mdp.n_states)}
    )

    part0 = aggregate_states(table, 0.0)
    for a, b in itertools.combinations(range(mdp.n_states), 2):
        same = part0.mapping[a] == part0.mapping[b]
        assert same == bool(np.array_equal(qstar[a], qstar[b]))
    assert part0.n_clusters < mdp.n_states
    merged0 = apply_partition(table, part0)
    vstar = qstar.max(axis=1)
    for s in range(mdp.n_states):
        greedy = int(np.argmax(merged0.values[part0.mapping[s]]))
        assert qstar[s, greedy] == vstar[s]

    eps = 0.1 * float(qstar.max() - qstar.min())
    part = aggregate_states(table, eps)
    merged = apply_partition(table, part)
    policy = np.array(
        [int(np.argmax(merged.values[part.mapping[s]])) for s in range(mdp.n_states)]
    )
    v_pi = policy_evaluation(mdp, policy, discount)
    loss = float(np.max(vstar - v_pi))
    bound = 2 * eps / (1 - discount)
    print(
        f"criterion 7: eps=0 clusters={part0.n_clusters}/25, "
        f"eps={eps:.4f} clusters={part.n_clusters}, "
        f"worst policy loss={loss:.4f} <= bound={bound:.4f}"
    )
    assert loss <= bound + 1e-9


def test_c08_field_dynamics_and_sampling():
    """One field step must match brute-force quadrature to 1e-12 on 32
    sites, and a flat zero field must drive Poisson arrivals whose mean
    lands within 1% over 1e5 draws."""
    rng = np.random.default_rng(5)
    field = replace(SpatialField.line(32, 16.0), z=rng.normal(size=32))
    kernel = Kernel(amplitude=0.7, length_scale=1.3)
    gaps = []
    for tag, fn in (("identity", lambda v: v), ("squash", np.tanh)):
        stepped = side_step(field, kernel, tag, noise=None)
        brute = brute_force_side_step(field.sites, field.z, field.dx, 0.7, 1.3, fn)
        gap = float(np.max(np.abs(stepped.z - brute)))
        gaps.append(gap)
        assert gap <= 1e-12, (tag, gap)

    mu = 0.45
    source = FieldTrafficSource(
        SpatialField.line(16, 8.0),
        Kernel(amplitude=0.0, length_scale=1.0),
        "identity",
        FieldNoise(0.0),
        base_rate=mu,
        seed=99,
    )
    draws = 100_000
    total = sum(int(source.counts_at(slot).sum()) for slot in range(draws))
    mean = total / (draws * 16)
    rel = abs(mean - mu) / mu
    print(
        f"criterion 8: quadrature gaps={gaps[0]:.1e}/{gaps[1]:.1e}, "
        f"poisson mean={mean:.4f} rel={rel:.2e}"
    )
    assert rel < 0.01


def test_c09_transfer_speedup(tmp_path):
    """Two stations on one shared field must measure correlation >= 0.9,
    and weight transfer every 50 rounds at beta = 0.5 must not slow
    learning: transfer median rounds-to-threshold <= baseline median and
    no terminal-reward degradation at p < 0.05."""
    cfg = ExperimentConfig(
        name="transfer-acceptance",
        scenario="transfer",
        agent="dqn",
        seeds=tuple(range(12)),
        total_slots=1600,
        reward_threshold=9.0,
        threshold_window=25,
        rach=RachSection(),
        cloud=CloudSection(
            inner_steps=4,
            lr=0.0025,
            batch_size=128,
            target_sync_every=100,
            eps_decay_steps=250,
            replay_capacity=3000,
        ),
        spatial=SpatialSection(),
        out_dir=str(tmp_path),
    )
    assert cfg.spatial.transfer_every == 50
    assert cfg.spatial.beta == 0.5
    summary = run_experiment(cfg)
    assert os.path.exists(os.path.join(summary["run_dir"], "transfer_summary.json"))
    corr = summary["estimated_correlation_mean"]
    rtt = summary["rounds_to_threshold"]
    term = summary["terminal_reward"]
    print(
        f"criterion 9: corr={corr:.4f}, rtt median transfer={rtt['transfer_median']} "
        f"baseline={rtt['baseline_median']}, p(drop)={term['p_transfer_drop']:.3f}, "
        f"effect d={term['effect_size_d']:.3f}"
    )
    assert corr >= 0.9
    assert rtt["transfer_median"] <= rtt["baseline_median"]
    assert term["p_transfer_drop"] >= 0.05
    assert "effect_size_d" in term


def test_c10_compression_budget():
    """A pruned, 8-bit-snapshot, fp16-batch session must spend strictly
    fewer MACs and wire bytes than the dense run at equal round count,
    and both energy ledgers must reconcile exactly against their event
    logs."""
    rounds = 160

    def run(plan):
        session = Session(
            ServiceRequest(
                entity_ids=(0,),
                env_config=_session_env(),
                inner_steps=2,
                dqn=DqnConfig(hidden=(24, 24), eps_decay_steps=300),
                compression=plan,
                seed=13,
            )
        )
        metrics = run_session(session, rounds)
        return session, metrics

    dense_session, dense = run(CompressionPlan())
    lean_session, lean = run(
        CompressionPlan(
            snapshot_bits=8,
            batch_fp16=True,
            prune_quantile=0.5,
            prune_at_round=rounds // 4,
        )
    )
    for session in (dense_session, lean_session):
        ledger = session.energy
        recomputed = ledger.recompute_from_events()
        assert recomputed == {
            "macs_inference": ledger.macs_inference,
            "macs_training": ledger.macs_training,
            "mem_accesses": ledger.mem_accesses,
            "bytes_wire": ledger.bytes_wire,
        }
    assert len(lean.rows) == len(dense.rows)
    dense_macs = dense.energy.macs_inference + dense.energy.macs_training
    lean_macs = lean.energy.macs_inference + lean.energy.macs_training
    print(
        f"criterion 10: macs {lean_macs}/{dense_macs}, "
        f"bytes {lean.energy.bytes_wire}/{dense.energy.bytes_wire}"
    )
    assert lean_macs < dense_macs
    assert lean.energy.bytes_wire < dense.energy.bytes_wire
