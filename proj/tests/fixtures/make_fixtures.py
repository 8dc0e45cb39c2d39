#!/usr/bin/env python3
"""Regenerates the committed test fixtures.

Deterministic: every value is derived from fixed seeds, so reruns are
byte-identical. The numbers frozen into the test suites (net energies,
loss ratios, overhead percentage) are recomputed and asserted here with
an independent rectangle-rule implementation before anything is written.

Fixture set:
  overhead_low/   10 Hz idle + workload pair; net energy renders 648.354 J
  overhead_high/   1 kHz pair over the same nominal workload; net 684.754 J
  counter_wrap.csv wrapping 32-bit energy counter log at constant power
  powermetrics_sample.txt  free-text sampler output with power lines
"""

import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))

IDLE_MW = 106.0


def rect_sum_joules(timestamps_us, powers_mw):
    """Rectangle rule: each sample holds until the next timestamp; the
    final sample is held for one mean inter-sample interval."""
    n = len(timestamps_us)
    mean_interval = (timestamps_us[-1] - timestamps_us[0]) / (n - 1)
    total = 0.0
    for i in range(n - 1):
        dt = float(timestamps_us[i + 1] - timestamps_us[i])
        total += powers_mw[i] * dt
    total += powers_mw[-1] * mean_interval
    return total * 1e-9, (float(timestamps_us[-1] - timestamps_us[0]) + mean_interval) * 1e-6


def write_power_csv(path, timestamps_us, powers_mw):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("timestamp_us,power_mw\n")
        for t, p in zip(timestamps_us, powers_mw):
            fh.write(f"{t},{p!r}\n")


def constant_baseline(path, count, step_us, power_mw):
    timestamps = [i * step_us for i in range(count)]
    with open(path, "w", newline="\n") as fh:
        fh.write("timestamp_us,power_mw\n")
        for t in timestamps:
            fh.write(f"{t},{power_mw!r}\n")


def lossy_workload(path, seed, step_us, grid_points, kept, base_mw, jitter_mw,
                   target_net_joules):
    """On-grid trace with seeded sample drops, powers scaled so that the
    integrated energy minus the idle baseline over the held duration lands
    exactly on target_net_joules."""
    rng = random.Random(seed)
    interior = list(range(1, grid_points - 1))
    kept_interior = sorted(rng.sample(interior, kept - 2))
    indices = [0] + kept_interior + [grid_points - 1]
    timestamps = [i * step_us for i in indices]
    powers = [base_mw + rng.uniform(-jitter_mw, jitter_mw) for _ in indices]

    raw_total, wall_s = rect_sum_joules(timestamps, powers)
    target_total = target_net_joules + (IDLE_MW / 1000.0) * wall_s
    scale = target_total / raw_total
    powers = [p * scale for p in powers]

    total, wall_s = rect_sum_joules(timestamps, powers)
    net = total - (IDLE_MW / 1000.0) * wall_s
    assert abs(net - target_net_joules) < 1e-9, net
    write_power_csv(path, timestamps, powers)
    return timestamps, powers, total, wall_s, net


def counter_wrap_csv(path):
    """Constant-power counter log whose raw value wraps once mid-file."""
    unit_uj = 15.3
    width = 32
    ticks_per_step = 98039  # ~15 W at 10 Hz polling
    step_us = 100000
    records = 20
    start = (1 << 32) - 5 * ticks_per_step - 123
    with open(path, "w", newline="\n") as fh:
        fh.write("timestamp_us,energy_raw,unit_ujoules,width_bits\n")
        for i in range(records):
            raw = (start + i * ticks_per_step) % (1 << 32)
            fh.write(f"{i * step_us},{raw},{unit_uj!r},{width}\n")
    power_mw = ticks_per_step * unit_uj * 1e-6 / (step_us * 1e-6) * 1000.0
    return power_mw


def powermetrics_sample(path):
    lines = [
        "Machine model: Mac14,9",
        "OS version: 22G120",
        "*** Sampled system activity (Tue Nov 14 10:12:01) (503.12ms elapsed) ***",
        "",
        "**** Processor usage ****",
        "CPU Power: 1482 mW",
        "GPU Power: 223 mW",
        "ANE Power: 0 mW",
        "Combined Power (CPU + GPU + ANE): 1705 mW",
        "*** Sampled system activity (Tue Nov 14 10:12:02) (501.87ms elapsed) ***",
        "CPU Power: 1390 mW",
        "GPU Power: 231 mW",
        "*** Sampled system activity (Tue Nov 14 10:12:02) (499.60ms elapsed) ***",
        "   CPU Power: 1612 mW",
        "CPU Power: 1544 mW",
        "CPU Power: 1501 mW",
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def main():
    # 10 Hz pair: 429-point grid with 23 drops -> 406 samples.
    os.makedirs(os.path.join(HERE, "overhead_low"), exist_ok=True)
    constant_baseline(os.path.join(HERE, "overhead_low", "baseline.csv"),
                      385, 100000, IDLE_MW)
    low_t, low_p, low_total, low_wall, low_net = lossy_workload(
        os.path.join(HERE, "overhead_low", "workload.csv"),
        seed=20260819, step_us=100000, grid_points=429, kept=406,
        base_mw=15215.0, jitter_mw=400.0, target_net_joules=648.354)

    # 1 kHz pair: 46787-point grid, 10019 kept.
    os.makedirs(os.path.join(HERE, "overhead_high"), exist_ok=True)
    constant_baseline(os.path.join(HERE, "overhead_high", "baseline.csv"),
                      385, 1000, IDLE_MW)
    high_t, high_p, high_total, high_wall, high_net = lossy_workload(
        os.path.join(HERE, "overhead_high", "workload.csv"),
        seed=41, step_us=1000, grid_points=46787, kept=10019,
        base_mw=14600.0, jitter_mw=380.0, target_net_joules=684.754)

    wrap_power = counter_wrap_csv(os.path.join(HERE, "counter_wrap.csv"))
    powermetrics_sample(os.path.join(HERE, "powermetrics_sample.txt"))

    low_expected = int(low_wall * 10.0)
    high_expected = int(high_wall * 1000.0)
    overhead = (high_net - low_net) / low_net

    print(f"low:  n={len(low_t)} wall={low_wall:.6f} s total={low_total:.6f} J "
          f"net={low_net:.6f} J per_run={low_net / 10:.6f} J "
          f"expected={low_expected} loss={1 - len(low_t) / low_expected:.6f}")
    print(f"high: n={len(high_t)} wall={high_wall:.6f} s total={high_total:.6f} J "
          f"net={high_net:.6f} J expected={high_expected} "
          f"loss={1 - len(high_t) / high_expected:.6f}")
    print(f"overhead: {overhead * 100:.4f}%")
    print(f"counter_wrap constant power: {wrap_power:.6f} mW")

    assert low_expected == 429
    assert abs((1 - 406 / 429) - 0.054) < 1e-3
    assert high_expected == 46790
    assert abs((1 - 10019 / 46790) - 0.786) < 1e-3
    assert abs(overhead * 100 - 5.614) < 0.01


if __name__ == "__main__":
    main()
