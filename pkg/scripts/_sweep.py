"""Shared loop for the experiment scripts: run the CLI commands in-process
for a list of seeds and return one summary row per seed."""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from activepaths.harness import cli
from activepaths.harness.recipes import recipe, with_threshold


def parse(description: str, default_seeds) -> argparse.Namespace:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--seeds", type=int, nargs="+", default=list(default_seeds))
    p.add_argument("--out-dir", default="runs")
    return p.parse_args()


def run_seed(name: str, seed: int, out_root: str, eliminate: bool = True, threshold="recipe") -> dict:
    cfg = recipe(name, seed, str(Path(out_root) / f"{name}-seed{seed}"))
    if threshold != "recipe":
        cfg = with_threshold(cfg, threshold)
    t0 = time.perf_counter()
    train = cli.cmd_train(cfg)
    row = {"seed": seed, "clean_accuracy": train["evaluation"]["clean"]["accuracy"],
           "clean_malicious": train["evaluation"]["clean"]["malicious_accuracy"],
           "poison_accuracy": train["evaluation"]["poison_accuracy"]}
    det = cli.cmd_detect(cfg)
    scores = det["suspicion"]["scores"]
    row.update(n_clusters=det["n_clusters"], suspicious=det["suspicious_cluster"],
               ranked=[r["feature"] for r in det["ranked_features"][:3]],
               census=(det["census"].get("TTL_max") or {}).get(str(det["suspicious_cluster"])),
               max_score=max(scores.values()) if scores else 0.0,
               suspicious_score=scores.get(str(det["suspicious_cluster"])),
               flagged=det["suspicion"]["flagged"])
    if eliminate and det["suspicious_cluster"] is not None:
        el = cli.cmd_eliminate(cfg)
        row.update(removed=el["removed_weights"],
                   clean_after=el["after"]["clean"]["accuracy"],
                   poisoned_malicious_before=(el["before"]["poisoned"] or {}).get("malicious_accuracy"),
                   poisoned_malicious_after=(el["after"]["poisoned"] or {}).get("malicious_accuracy"))
    cli.cmd_report(cfg.out_dir)
    row["seconds"] = round(time.perf_counter() - t0, 1)
    return row


def dump(rows, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    for r in rows:
        print(json.dumps({k: v for k, v in r.items() if k != "flagged"}))
