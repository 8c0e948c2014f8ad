#!/usr/bin/env python3
"""Benchmark the hot simulation kernels: numba JIT vs the pure-Python path.

The pure path is what you get with HAPTIKIT_DISABLE_NUMBA=1; this script
times the same workloads in the current interpreter and again in a
subprocess with the flag set, so each path runs exactly as users get it.

Usage: python benchmarks/bench_kernels.py [--seconds 30] [--pure-only]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def workloads():
    from haptikit import characterization as ch
    from haptikit import kernels
    from haptikit.controller import ImpedanceConfig

    params = ch.bench_device()
    overlay = ImpedanceConfig(stiffness_K=2.0)
    prof = params.stiction_profile

    def closed_loop(seconds):
        chirp = ch.make_chirp(0.1, 100.0, seconds, 0.4, 1000.0)
        t0 = time.perf_counter()
        ch._run_loop(params, overlay, chirp)
        return time.perf_counter() - t0, chirp.shape[0] * ch.DEFAULT_SUBSTEPS

    def session_chunks(seconds):
        state = np.zeros(kernels.STATE_SIZE)
        state[kernels.S_STICKING] = 1.0
        state[kernels.S_THETA_HAT_PREV] = np.nan
        state[kernels.S_CURSOR] = 600.0
        out = np.empty(8)
        n_chunks = int(seconds * 1000 / 8)
        t0 = time.perf_counter()
        for _ in range(n_chunks):
            kernels.run_session_chunk(
                state, 8, 0.2, 1e-3, 10,
                params.effective_inertia(), params.effective_damping(), 0.0,
                params.coulomb_ratio, params.velocity_deadband,
                params.theta_limit, prof.theta_knots, prof.torque_knots,
                params.encoder_quantum, 22.348, 0.0, 0.0, 32.3, 0.27,
                -3.02, 40.0, 0.0, 1200.0, out)
        return time.perf_counter() - t0, n_chunks * 8 * 10

    return {"closed_loop": closed_loop, "session_chunks": session_chunks}


def run_benchmarks(seconds):
    from haptikit import kernels

    results = {"numba_enabled": kernels.NUMBA_ENABLED, "workloads": {}}
    for name, fn in workloads().items():
        fn(1.0)  # warm up (JIT compile on the numba path)
        elapsed, substeps = fn(seconds)
        results["workloads"][name] = {
            "simulated_s": seconds,
            "wall_s": round(elapsed, 4),
            "plant_substeps": substeps,
            "ns_per_substep": round(1e9 * elapsed / substeps, 1),
            "realtime_factor": round(seconds / elapsed, 1),
        }
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seconds", type=float, default=30.0,
                    help="simulated seconds per workload")
    ap.add_argument("--pure-only", action="store_true",
                    help="skip the subprocess comparison (used internally)")
    args = ap.parse_args()

    mine = run_benchmarks(args.seconds)
    label = "numba" if mine["numba_enabled"] else "pure"
    print(f"[{label}] {json.dumps(mine['workloads'], indent=2)}")

    if args.pure_only or not mine["numba_enabled"]:
        return

    env = dict(os.environ, HAPTIKIT_DISABLE_NUMBA="1")
    proc = subprocess.run(
        [sys.executable, __file__, "--seconds", str(args.seconds), "--pure-only"],
        env=env, capture_output=True, text=True, check=True)
    print(proc.stdout, end="")

    pure_line = proc.stdout[proc.stdout.index("{"):]
    pure = json.loads(pure_line)
    print("\nspeedup (pure wall / numba wall):")
    for name, stats in mine["workloads"].items():
        ratio = pure[name]["wall_s"] / stats["wall_s"]
        print(f"  {name:<16} {ratio:6.1f}x")


if __name__ == "__main__":
    main()
