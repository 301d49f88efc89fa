"""Compare the compiled and pure-Python simulation backends.

    python3 benchmarks/bench_engine.py [--length N] [--repeat R]

Both backends run the same configurations; the script checks that their
metrics agree before reporting timings.
"""

from __future__ import annotations

import argparse
import time

from hmdsim import engine, policies, workload
from hmdsim._pyengine import PyTenant
from hmdsim.oracle import hungarian
from hmdsim.telemetry import TelemetryConfig

try:
    from hmdsim._kernel import CTenant, hungarian_max
except ImportError:  # pragma: no cover
    CTenant = hungarian_max = None


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if CTenant is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    trace = workload.gen_shifting(512, 64, 16_000, args.length, seed=1)
    tel = TelemetryConfig(marking_interval=1e-3)
    print(f"{'policy':<10} {'cython_s':>10} {'python_s':>10} {'speedup':>8}  match")
    for policy in (policies.NoMigration(), policies.StaticThreshold(1.0), policies.NetworkAdaptive(), policies.Bandit(2, 1.0), policies.Oracle()):
        cfg = engine.SimConfig(tenants=(engine.TenantConfig(trace, policy, 0.1),), telemetry=tel)
        tc, rc = best_of(lambda: engine.run(cfg, CTenant), args.repeat)
        tp, rp = best_of(lambda: engine.run(cfg, PyTenant), args.repeat)
        print(f"{policy.name:<10} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f}  {rc.metrics() == rp.metrics()}")

    import numpy as np

    rng = np.random.default_rng(0)
    for n in (32, 64, 128):
        w = rng.normal(size=(n, 2 * n))
        tc, cc = best_of(lambda: hungarian_max(np.ascontiguousarray(w)), args.repeat)
        tp, cp = best_of(lambda: hungarian(w.tolist()), args.repeat)
        same = np.isclose(w[np.arange(n), cc].sum(), w[np.arange(n), cp].sum())
        print(f"hungarian n={n:<4} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f}  {bool(same)}")


if __name__ == "__main__":
    main()
