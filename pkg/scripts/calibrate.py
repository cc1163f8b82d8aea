"""Grid-search comm/overlap knobs and freeze the shipped calibration file.

Capacity numbers depend only on the budget knobs (held fixed here, already
validated against the reference capacity figures), so this script tunes the
communication side: startup latencies, overlap fractions, and the
context-parallel tail. Each candidate is scored by how many shape checks the
64-GPU sweep and attribution reports satisfy.

Usage: python3 scripts/calibrate.py [--write]
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
import time
from pathlib import Path

import moeplan
from moeplan import reporting
from moeplan.calibration import CalibrationSpec, save_calibration

SWEEP_CONTEXTS = reporting.SWEEP_CONTEXTS
PEAK_WINDOW = (8192, 65536)  # acceptable peak-speedup locations

BASE = CalibrationSpec(
    name="reference-v1",
    reserve_bytes=22e9,
    misc_bytes=12e9,
    safety_fraction=0.14,
    attn_weights_tp_sharded=False,
    allow_dp=False,
    tp_choices=(1, 2, 4, 8),
    ep_choices=(1, 2, 4, 8),
    pp_choices=(1,),
)

GRID = {
    "alpha_intra_s": (0.5e-6, 1e-6, 2e-6),
    "alpha_inter_s": (1.5e-6, 2e-6, 2.4e-6, 2.8e-6, 3.2e-6, 4e-6, 5e-6, 6e-6),
    "cp_ring_tail_fraction": (0.1, 0.25, 0.4),
    "overlap_attention": (0.7, 0.8, 0.9),
    "overlap_projection": (0.7, 0.8),
    "overlap_ffn": (0.4, 0.5, 0.6),
}


def score(cal: CalibrationSpec) -> tuple:
    hw = moeplan.load_builtin_hardware("reference")
    cluster = moeplan.make_cluster(hw, 64, cal)
    moe = moeplan.load_builtin_model("deepseek-v3")

    sweep = reporting.context_sweep(moe, 5.0, cluster, SWEEP_CONTEXTS, cal)
    speedups = [r.speedup for r in sweep.rows]
    if any(s is None for s in speedups):
        return (-1, 0, 0.0, 0.0, {})

    dense_everywhere = all(s >= 0.999 for s in speedups)
    tail = speedups[-1]
    converges = 1.0 <= tail <= 1.1
    peak_i = max(range(len(speedups)), key=lambda i: speedups[i])
    peak_at = SWEEP_CONTEXTS[peak_i]
    peak_located = PEAK_WINDOW[0] <= peak_at <= PEAK_WINDOW[1]
    peak_value_ok = peak_located and 4.0 <= speedups[peak_i] <= 6.5
    s128k = speedups[SWEEP_CONTEXTS.index(131072)]
    mid_ok = 3.2 <= s128k <= 5.9

    attr = reporting.attribution_report(moe, 5.0, cluster, (1024, 131072), cal)
    moe_1k = next(r for r in attr.rows
                  if r["variant"] == "moe" and r["context"] == 1024)
    comm_ratio = (moe_1k["comm_rel"] / moe_1k["compute_rel"]
                  if moe_1k["compute_rel"] > 0 else 0.0)
    comm_dominated = 10.0 <= comm_ratio <= 25.0
    hbm_named = attr.gap_drivers[131072] == "hbm"

    checks = {
        "dense>=moe everywhere": dense_everywhere,
        "tail in [1.0,1.1]": converges,
        "peak in [8k,64k]": peak_located,
        "peak value in [4.0,6.5]": peak_value_ok,
        "128k in [3.2,5.9]": mid_ok,
        "moe 1k comm/compute in [10,25]": comm_dominated,
        "128k gap driver hbm": hbm_named,
    }
    greens = sum(checks.values())
    # tiebreakers: push the mid-range ratio up, keep the tail near 1
    return (greens, int(dense_everywhere and converges), s128k,
            -abs(tail - 1.05), checks)


def search() -> tuple:
    names = list(GRID)
    best = None
    combos = list(itertools.product(*(GRID[n] for n in names)))
    t0 = time.time()
    for i, values in enumerate(combos):
        cal = dataclasses.replace(BASE, **dict(zip(names, values)))
        result = score(cal)
        key = result[:4]
        if best is None or key > best[0][:4]:
            best = (result, cal)
            print(f"[{i + 1}/{len(combos)}] greens={result[0]} "
                  f"s128k={result[2]:.2f} "
                  f"{ {n: v for n, v in zip(names, values)} }")
        if (i + 1) % 200 == 0:
            rate = (i + 1) / (time.time() - t0)
            print(f"  ... {i + 1}/{len(combos)} ({rate:.0f} combos/s)",
                  file=sys.stderr)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--write", action="store_true",
                        help="freeze the winner into the shipped default file")
    args = parser.parse_args()

    (greens, _, s128k, _, checks), cal = search()
    print("\nwinner:")
    print(json.dumps(cal.to_dict(), indent=2))
    print(f"\ngreens={greens}  s128k={s128k:.2f}")
    for name, ok in checks.items():
        print(f"  {'PASS' if ok else 'fail'}  {name}")

    if args.write:
        target = (Path(__file__).resolve().parent.parent / "src" / "moeplan"
                  / "configs" / "calibration" / "default.json")
        save_calibration(cal, target)
        print(f"\nwrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
