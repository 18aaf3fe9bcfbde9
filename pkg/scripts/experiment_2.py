"""Two-feature trigger (TTL_max=66, TTL_min=61, 1% poisoning) across seeds.
Seed 1 is the one pinned by the acceptance test."""
from _sweep import dump, parse, run_seed

if __name__ == "__main__":
    args = parse(__doc__.split("\n\n")[0], range(6))
    dump([run_seed("experiment-2", s, args.out_dir) for s in args.seeds], f"{args.out_dir}/experiment-2.json")
