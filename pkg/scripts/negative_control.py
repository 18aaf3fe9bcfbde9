"""Clean-trained models through detection with the calibrated threshold;
any flagged cluster is a false alarm."""
from _sweep import dump, parse, run_seed

if __name__ == "__main__":
    args = parse(__doc__.split("\n\n")[0], range(5))
    rows = [run_seed("negative-control", s, args.out_dir, eliminate=False) for s in args.seeds]
    dump(rows, f"{args.out_dir}/negative-control.json")
    print("false alarms:", sum(bool(r["flagged"]) for r in rows), "of", len(rows))
