"""Collate a run directory into ``report/summary.md`` plus plot-ready CSVs.

Numbers in the summary are copied from the JSON reports with ``json.dumps``
so they match the source files character for character.
"""
from __future__ import annotations

import csv
import io
import json
import shutil
from pathlib import Path

from ..io_utils import atomic_write_text, read_json

EXPECTED = (
    "config.json", "model.apnn", "encoder.json", "train_report.json",
    "detect_report.json", "embedding.csv", "cluster_diff.json", "ranked_features.csv",
    "plan.json", "model_eliminated.apnn", "eliminate_report.json",
)
GRID_HEADER = ["model", "dataset", "n", "accuracy", "benign_accuracy", "malicious_accuracy", "poison_accuracy"]


def _fmt(v) -> str:
    return json.dumps(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load(run: Path, name: str):
    p = run / name
    return read_json(p) if p.exists() else None


def accuracy_rows(label: str, ev: dict) -> list[list[str]]:
    rows = []
    for ds in ("clean", "poisoned"):
        m = ev.get(ds)
        if m is None:
            continue
        pa = ev.get("poison_accuracy") if ds == "poisoned" else None
        rows.append([label, ds, str(m["n"]), _fmt(m["accuracy"]), _fmt(m["benign_accuracy"]),
                     _fmt(m["malicious_accuracy"]), _fmt(pa)])
    return rows


def write_report(run_dir) -> Path:
    run = Path(run_dir)
    out = run / "report"
    present = [n for n in EXPECTED if (run / n).exists()]
    missing = [n for n in EXPECTED if n not in present]
    cfg = _load(run, "config.json")
    train = _load(run, "train_report.json")
    det = _load(run, "detect_report.json")
    elim = _load(run, "eliminate_report.json")
    diff = _load(run, "cluster_diff.json")

    grid = []
    if train is not None:
        grid += accuracy_rows("trained", train["evaluation"])
    if elim is not None:
        grid += accuracy_rows("before_elimination", elim["before"])
        grid += accuracy_rows("after_elimination", elim["after"])
    atomic_write_text(out / "accuracy_grid.csv", _csv(GRID_HEADER, grid))

    diff_rows = []
    if diff is not None and diff.get("compared_cluster_ids"):
        ids = diff["compared_cluster_ids"]
        for name, vals in zip(diff["feature_names"], diff["diff_contr_list"]):
            diff_rows.append([name, *(repr(float(v)) for v in vals)])
        header = ["feature", *(f"cluster_{c}" for c in ids)]
    else:
        header = ["feature"]
    atomic_write_text(out / "contribution_diff.csv", _csv(header, diff_rows))

    census_rows = []
    if det is not None:
        for feat, table in det["census"].items():
            for cl, vals in table.items():
                for value, n in vals.items():
                    census_rows.append([feat, cl, value, n])
    atomic_write_text(out / "census.csv", _csv(["feature", "cluster", "value", "count"], census_rows))
    if (run / "embedding.csv").exists():
        shutil.copyfile(run / "embedding.csv", out / "embedding.csv")

    lines = [f"# Run summary: {cfg['name'] if cfg else run.name}", ""]
    if cfg:
        lines += [f"- config hash: `{cfg['config_hash']}`", f"- seed: {cfg['seed']}",
                  f"- trigger: {_fmt(cfg['trigger']['assignments']) if cfg.get('trigger') else 'none'}", ""]
    if grid:
        lines += ["## Accuracy", "", "| model | dataset | n | accuracy | benign | malicious | poison accuracy |",
                  "|---|---|---|---|---|---|---|"]
        lines += ["| " + " | ".join(r) + " |" for r in grid]
        lines += ["", "Grid data: `report/accuracy_grid.csv`.", ""]
    if det is not None:
        lines += ["## Detection", "",
                  f"- predicted-benign samples clustered: {det['n_samples']}",
                  f"- clusters: {det['n_clusters']} (noise: {det['cluster_sizes'].get('-1', 0)})",
                  f"- largest cluster: {det['largest_cluster']}",
                  f"- suspicious cluster: {det['suspicious_cluster']}"
                  + (f" ({det['cluster_sizes'][str(det['suspicious_cluster'])]} samples)"
                     if det["suspicious_cluster"] is not None else ""),
                  f"- candidate features: {', '.join(det['candidate_features']) or 'none'}",
                  f"- suspicion threshold: {_fmt(det['suspicion']['threshold'])}; "
                  f"flagged clusters: {_fmt(det['suspicion']['flagged'])}",
                  f"- ({det['suspicion']['note']})", ""]
        if det["ranked_features"]:
            lines += ["| rank | feature | squared diff |", "|---|---|---|"]
            lines += [f"| {i + 1} | {r['feature']} | {_fmt(r['diff'])} |" for i, r in enumerate(det["ranked_features"][:10])]
            lines += [""]
        sc = det["suspicious_cluster"]
        for feat, table in det["census"].items():
            if sc is not None and str(sc) in table:
                lines += [f"Census of `{feat}` in the suspicious cluster: {_fmt(table[str(sc)])}"]
        lines += ["", "Embedding scatter data: `report/embedding.csv`; per-cluster differences: "
                  "`report/contribution_diff.csv`; census tables: `report/census.csv`.", ""]
    if elim is not None:
        lines += ["## Elimination", "",
                  f"- backdoor features: {', '.join(elim['backdoor_features'])}",
                  f"- path threshold T: {elim['threshold']}",
                  f"- removed first-layer weights: {elim['removed_weights']}",
                  f"- frequent paths (backdoor / reference): {elim['frequent_paths']['backdoor']} / "
                  f"{elim['frequent_paths']['reference']}"]
        if elim.get("warning"):
            lines += [f"- warning: {elim['warning']}"]
        lines += [""]
    lines += ["## Artifacts", ""] + [f"- `{n}`" for n in present] + [""]
    if missing:
        lines += ["## Missing", ""] + [f"- `{n}`" for n in missing] + [""]
    path = out / "summary.md"
    atomic_write_text(path, "\n".join(lines))
    return path
