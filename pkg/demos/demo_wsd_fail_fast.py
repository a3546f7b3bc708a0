#!/usr/bin/env python3
"""Fail-fast learning-rate triage feeding a WSD schedule.

Eight candidate base rates go through a short simulated warmup. The two
aggressive rates destabilize; triage rejects them within the step budget
and the survivors graduate to a full warmup-stable-decay cycle, printed
as a compact table.

Run: python demos/demo_wsd_fail_fast.py
"""

from geoscale.schedule import TriagePolicy, WsdSchedule, lr_at, triage, triage_sweep
from geoscale.simulator import SimConfig, simulate_run

CANDIDATES = [1e-5, 3e-5, 1e-4, 2e-4, 3e-4, 5e-4, 1e-3, 3e-3]
UNSTABLE = {1e-3, 3e-3}

print("fail-fast warmup: 8 candidate rates, 2000-step budget")
print("-" * 60)

policy = TriagePolicy(window=100, spike_ratio=2.0, oscillation_frac=0.6,
                      horizon=2000, smooth_width=5)
candidates = []
for i, lr in enumerate(CANDIDATES):
    config = SimConfig(
        mode="divergent" if lr in UNSTABLE else "stable",
        law=(0.0, 1.0, 0.03),
        scale=5e3,
        total_steps=2200,
        divergence_onset=600 + 90 * i,
        noise_sigma=0.004,
        seed=i,
        base_lr=lr,
    )
    log = simulate_run(config)
    verdict = triage(log, policy)
    state = "ok" if verdict.passed else f"{verdict.reason} @ step {verdict.fail_step}"
    print(f"  lr {lr:8.0e}  ->  {verdict.status:4s}  {state}")
    candidates.append((lr, log))

survivors = triage_sweep(candidates, policy)
print(f"\nsurvivors (ascending): {', '.join(f'{lr:g}' for lr in survivors)}")

print()
print("full WSD cycle for the strongest survivor")
print("-" * 60)
schedule = WsdSchedule(base_lr=max(survivors), total_steps=10_000, decay_floor_ratio=0.01)
print(f"base {schedule.base_lr:g}, 10% warmup / 80% plateau / 10% exponential decay")
for step in (0, 250, 500, 1000, 3000, 5000, 8000, 9000, 9500, 10_000):
    bar = "#" * int(40 * lr_at(schedule, step) / schedule.base_lr)
    print(f"  step {step:6d}  lr {lr_at(schedule, step):.3e}  {bar}")
