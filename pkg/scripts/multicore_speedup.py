"""Weighted speedup of a multi-core mix over the long-bitline baseline."""
import argparse

from tldram.config import RunConfig
from tldram.experiments import compare

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--cores", type=int, default=4)
p.add_argument("--requests", type=int, default=200_000, help="per core")
args = p.parse_args()

common = {"cores.count": args.cores, "cores.max_outstanding": 2, "trace.n": args.requests,
          "trace.rows": 480, "trace.hot_rows": 32, "trace.bubble_mean": 10, "seed": 7}
base = RunConfig().replace(**common, **{"geometry.tier_cells": 512})
tl = RunConfig().replace(**common, **{"policy.kind": "benefit_based"})
c = compare(tl, base)
# each core's shared IPC is normalised by its IPC running alone on the baseline
print(f"weighted speedup {c.a.weighted_speedup:.3f} over {args.cores} cores")
print(f"energy savings {100 * c.savings:.2f}%, near fraction {c.a.near_fraction:.4f}")
