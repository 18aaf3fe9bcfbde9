"""Suspicion-score threshold from clean-trained runs.

Trains without a trigger on the calibration seeds, records the largest
suspicion score over all compared clusters, and prints 1.25 times the
overall maximum. That number goes into ``CALIBRATED_SUSPICION_THRESHOLD``.
The negative-control seeds (0-4) are deliberately not part of this set.
"""
from _sweep import dump, parse, run_seed

if __name__ == "__main__":
    args = parse(__doc__.split("\n\n")[0], range(100, 110))
    rows = [run_seed("negative-control", s, args.out_dir + "/calibration", eliminate=False, threshold=None)
            for s in args.seeds]
    dump(rows, f"{args.out_dir}/calibration/scores.json")
    top = max(r["max_score"] for r in rows)
    print(f"largest clean suspicion score {top!r}; threshold {1.25 * top!r}")
