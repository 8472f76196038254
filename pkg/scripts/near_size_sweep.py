"""IPC, latency and near-service fraction as the near segment grows.

Each point moves cells from the far to the near segment and uses every near
row as a cache slot, so a larger near segment caches more rows but is slower.
"""
import argparse
import sys

from tldram.config import RunConfig, load
from tldram.experiments import sweep_csv, sweep_near_size

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--config", help="base config (default: hot/cold trace with benefit-based caching)")
p.add_argument("--sizes", default="16,32,64,128,256")
p.add_argument("--requests", type=int, default=1_000_000)
p.add_argument("--jobs", type=int, default=1)
args = p.parse_args()

cfg = load(args.config) if args.config else RunConfig().replace(**{
    "policy.kind": "benefit_based", "trace.hot_rows": 32, "trace.hot_fraction": 0.9, "seed": 2024})
cfg = cfg.replace(**{"trace.n": args.requests})
points = sweep_near_size(cfg, [int(s) for s in args.sizes.split(",")], jobs=args.jobs)
sys.stdout.write(sweep_csv(points))
