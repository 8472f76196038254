"""Latency, die size and activation power against bitline length."""
import argparse
import sys

from tldram.experiments import emit_tradeoff

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--cells", default="16,32,64,128,256,512,1024")
args = p.parse_args()
sys.stdout.write(emit_tradeoff(int(x) for x in args.cells.split(",")))
