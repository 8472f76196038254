"""Every near-cache policy against the long-bitline baseline on one hot/cold trace."""
import argparse

from tldram.config import RunConfig
from tldram.experiments import compare

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--requests", type=int, default=1_000_000)
p.add_argument("--hot-fraction", type=float, default=0.9)
p.add_argument("--seed", type=int, default=2024)
args = p.parse_args()

common = {"trace.n": args.requests, "trace.rows": 480, "trace.hot_rows": 32,
          "trace.hot_fraction": args.hot_fraction, "seed": args.seed}
baseline = RunConfig().replace(**common, **{"geometry.tier_cells": 512})
print("policy,ipc,ipc_delta_pct,mean_latency,near_fraction,migrations,energy_savings_pct")
for kind in ("none", "simple", "wait_minimized", "benefit_based"):
    c = compare(RunConfig().replace(**common, **{"policy.kind": kind}), baseline)
    print(f"{kind},{c.a.ipc:.4f},{c.ipc_delta_pct:.2f},{c.a.mean_latency:.2f},"
          f"{c.a.near_fraction:.4f},{c.a.migrations},{100 * c.savings:.2f}")
