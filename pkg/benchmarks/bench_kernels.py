#!/usr/bin/env python3
"""Compiled (numba) vs pure-numpy propagation kernels.

Each backend runs in its own interpreter because the backend is fixed at
import time by LMG_BATTERY_NUMBA. The numba timings exclude compilation
(one warm-up run first). Results agree to round-off; the script checks that.

    python3 benchmarks/bench_kernels.py --sizes 10 30 50 --periods 1
"""

import argparse
import json
import os
import subprocess
import sys

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
from lmg_battery import _kernels
from lmg_battery.model import BatteryParams
from lmg_battery.propagator import TimeGrid, evolve

sizes, periods, protocol, repeats = json.loads(sys.argv[1])
rows = []
for n in sizes:
    params = BatteryParams.build(n, -0.1, 5.0, 5.0, protocol)
    grid = TimeGrid.default_for(params.drive, periods=periods)
    warm = evolve(params, TimeGrid.default_for(params.drive, periods=0.05))
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        traj = evolve(params, grid)
        times.append(time.perf_counter() - start)
    rows.append({"n": n, "steps": grid.n_steps, "seconds": min(times),
                 "final": [[z.real, z.imag] for z in traj.states[-1]]})
print(json.dumps({"numba": _kernels.USING_NUMBA, "rows": rows}))
"""


def run_backend(numba_on, args):
    env = dict(os.environ, LMG_BATTERY_NUMBA="1" if numba_on else "0")
    payload = json.dumps([args.sizes, args.periods, args.protocol, args.repeats])
    out = subprocess.run([sys.executable, "-c", WORKER, payload], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[10, 30, 50])
    parser.add_argument("--periods", type=float, default=1.0)
    parser.add_argument("--protocol", default="sta", choices=["sinusoid", "sta"])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args()

    fast = run_backend(True, args)
    slow = run_backend(False, args)
    if not fast["numba"]:
        print("numba is not installed; both columns use numpy", file=sys.stderr)

    print(f"{'N':>4} {'steps':>7} {'numba [s]':>10} {'numpy [s]':>10} {'speed-up':>9} {'max |dpsi|':>11}")
    report = []
    for a, b in zip(fast["rows"], slow["rows"]):
        diff = np.max(np.abs(np.array(a["final"]) - np.array(b["final"])))
        speedup = b["seconds"] / a["seconds"]
        print(f"{a['n']:>4} {a['steps']:>7} {a['seconds']:>10.3f} {b['seconds']:>10.3f} "
              f"{speedup:>8.1f}x {diff:>11.1e}")
        report.append({"n": a["n"], "steps": a["steps"], "numba_s": a["seconds"],
                       "numpy_s": b["seconds"], "max_state_diff": float(diff)})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"protocol": args.protocol, "periods": args.periods, "rows": report}, fh,
                      indent=2)


if __name__ == "__main__":
    main()
