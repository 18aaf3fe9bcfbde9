"""``activepaths`` command line.

Every command reads an experiment config (``--config`` file or ``--recipe``
name), applies ``--seed``/``--out-dir`` and ``ACTIVEPATHS_*`` environment
overrides, and writes its artifacts into the run directory. Data is
regenerated from the config on each call, which is deterministic.

Exit codes: 0 success, 2 usage or config error, 3 data or file error,
4 insufficient data, 5 internal failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from .. import nn
from ..data import Encoder, write_csv
from ..data.table import DataError
from ..io_utils import atomic_write_text, read_json, write_json
from . import pipeline as pl
from .config import ConfigError, ExperimentConfig, env_overrides, load_config
from .metrics import SCHEMA_VERSION, EvalReport
from .recipes import RECIPES, recipe
from .report import write_report

logger = logging.getLogger("activepaths")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INSUFFICIENT, EXIT_INTERNAL = 0, 2, 3, 4, 5

SCORE_NOTE = ("suspicion score = largest per-feature contribution difference / median difference; "
              "an addition to the clustering method, calibrated on clean runs")


def stamp(cfg: ExperimentConfig, kind: str, **body) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "config_hash": cfg.hash, "seed": cfg.seed, **body}


def write_csv_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _num(v: float) -> str:
    return repr(float(v))


class Run:
    """Paths inside one run directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out_dir)

    def __truediv__(self, name: str) -> Path:
        return self.dir / name

    def save_config(self) -> None:
        write_json(self / "config.json", {**self.cfg.to_dict(include_out_dir=False), "config_hash": self.cfg.hash})

    def load_model(self, path=None) -> nn.Network:
        path = Path(path) if path else self / "model.apnn"
        if not path.exists():
            raise FileNotFoundError(f"{path}: model not found (run 'train' first)")
        return nn.load(path)

    def load_encoder(self) -> Encoder:
        path = self / "encoder.json"
        if not path.exists():
            raise FileNotFoundError(f"{path}: encoder not found (run 'train' first)")
        return Encoder.from_dict(read_json(path)["encoder"])


# --------------------------------------------------------------------------
# commands

def cmd_synth(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    bundle_clean = pl.load_source(cfg)
    write_csv(bundle_clean, run / "data.csv")
    write_json(run / "schema.json", bundle_clean.schema.to_dict())
    out = {"rows": len(bundle_clean), "malicious": int(bundle_clean.labels.sum())}
    if cfg.trigger is not None:
        from ..data import inject_trigger

        poisoned, ids = inject_trigger(bundle_clean, cfg.trigger)
        write_csv(poisoned, run / "poisoned.csv")
        pos = bundle_clean.positions(ids)
        write_json(run / "poison_index.json", stamp(
            cfg, "poison_index", trigger=cfg.trigger.to_dict(), row_ids=[int(i) for i in ids],
            original_labels=[int(v) for v in bundle_clean.labels[pos]]))
        out["poisoned_rows"] = int(ids.size)
    run.save_config()
    return out


def cmd_train(cfg: ExperimentConfig) -> dict:
    run = Run(cfg)
    bundle = pl.prepare_data(cfg)
    net, history = pl.train_model(cfg, bundle)
    nn.save(net, run / "model.apnn")
    write_json(run / "encoder.json", stamp(cfg, "encoder", encoder=bundle.encoder.to_dict()))
    ev = pl.evaluate_model(net, bundle.encoder, bundle.clean_test, bundle.poisoned_test, cfg.hash, cfg.seed)
    report = stamp(
        cfg, "train_report",
        model_hash=pl.model_hash(net),
        layer_dims=list(net.layer_dims),
        standardized=cfg.data.standardize,
        rows={"train": len(bundle.train), "val": len(bundle.val), "test": len(bundle.clean_test)},
        poisoned_rows_total=int(bundle.poison_ids.size),
        poisoned_rows_train=int(np.isin(bundle.train.row_ids, bundle.poison_ids).sum()),
        best_epoch=history.best_epoch,
        train_loss=history.train_loss,
        val_loss=history.val_loss,
        evaluation=ev.to_dict(),
    )
    write_json(run / "train_report.json", report)
    run.save_config()
    return report


def cmd_evaluate(cfg: ExperimentConfig, model_path=None, name: str = "eval_report.json") -> EvalReport:
    run = Run(cfg)
    bundle = pl.prepare_data(cfg)
    net = run.load_model(model_path)
    ev = pl.evaluate_model(net, run.load_encoder(), bundle.clean_test, bundle.poisoned_test, cfg.hash, cfg.seed)
    write_json(run / name, ev.to_dict())
    return ev


def detection_report(cfg: ExperimentConfig, det: pl.DetectionResult, encoder: Encoder, model_hash: str,
                     poison_ids=None) -> dict:
    A, diff = det.assignment, det.diff
    names = encoder.encoded_names
    ranked = []
    if det.suspicious_cluster is not None:
        k = diff.compared_cluster_ids.index(det.suspicious_cluster)
        ranked = [{"feature": names[j], "diff": float(diff.diff_contr_list[j, k])}
                  for j in diff.sorted_contr_inds[:, k]]
    clusters = {str(c): n for c, n in sorted(A.sizes.items())}
    members = {}
    if diff is not None:
        members["largest"] = [int(i) for i in det.members(diff.largest_cluster_id)]
    if det.suspicious_cluster is not None:
        members["suspicious"] = [int(i) for i in det.members(det.suspicious_cluster)]
    body = dict(
        model_hash=model_hash,
        dataset="train split",
        params={"d": det.params.d, "min_cluster_size": det.params.min_cluster_size,
                "predicted_class": det.params.predicted_class, "candidate_ratio": det.params.candidate_ratio},
        n_samples=int(det.sample_ids.size),
        n_clusters=A.n_clusters,
        cluster_sizes=clusters,
        largest_cluster=None if diff is None else diff.largest_cluster_id,
        suspicious_cluster=det.suspicious_cluster,
        candidate_features=list(det.candidate_features),
        ranked_features=ranked,
        top_diff=ranked[0]["diff"] if ranked else 0.0,
        suspicion={"note": SCORE_NOTE, "threshold": det.params.suspicion_threshold,
                   "scores": {str(c): s for c, s in det.scores.items()},
                   "flagged": {str(c): f for c, f in det.flagged.items()}},
        census={f: {str(c): {str(v): n for v, n in vals.items()} for c, vals in tab.items()}
                for f, tab in det.census.items()},
        members=members,
        eigenvalues=[float(v) for v in det.embedding.explained_eigenvalues],
    )
    if poison_ids is not None and det.suspicious_cluster is not None:
        inside = np.isin(det.members(det.suspicious_cluster), poison_ids)
        body["suspicious_cluster_poisoned_share"] = float(inside.mean())
    if diff is None:
        body["note"] = "no non-noise clusters; nothing to compare"
    elif diff.n_compared == 0:
        body["note"] = "a single cluster; nothing to compare"
    return stamp(cfg, "detect_report", **body)


def cmd_detect(cfg: ExperimentConfig, model_path=None) -> dict:
    run = Run(cfg)
    bundle = pl.prepare_data(cfg)
    net = run.load_model(model_path)
    encoder = run.load_encoder()
    det = pl.detect(net, encoder, bundle.train, cfg.detect)
    report = detection_report(cfg, det, encoder, pl.model_hash(net),
                              bundle.poison_ids if cfg.trigger is not None else None)
    write_json(run / "detect_report.json", report)
    coords = det.embedding.coords
    write_csv_rows(run / "embedding.csv",
                   ["sample_id", *(f"coord_{i + 1}" for i in range(coords.shape[1])), "label"],
                   ([int(s), *map(_num, row), int(l)]
                    for s, row, l in zip(det.sample_ids, coords, det.assignment.labels)))
    diff = det.diff
    write_json(run / "cluster_diff.json", stamp(cfg, "cluster_diff", **({} if diff is None else diff.to_dict())))
    write_csv_rows(run / "ranked_features.csv", ["rank", "feature", "diff"],
                   ([i + 1, r["feature"], _num(r["diff"])] for i, r in enumerate(report["ranked_features"])))
    run.save_config()
    return report


def cmd_eliminate(cfg: ExperimentConfig, model_path=None, features=None) -> dict:
    run = Run(cfg)
    bundle = pl.prepare_data(cfg)
    net = run.load_model(model_path)
    encoder = run.load_encoder()
    rpath = run / "detect_report.json"
    if not rpath.exists():
        raise FileNotFoundError(f"{rpath}: detection report not found (run 'detect' first)")
    det = read_json(rpath)
    if det.get("suspicious_cluster") is None:
        raise pl.InsufficientDataError("insufficient data: detection found no cluster to compare")
    chosen = features or cfg.eliminate.features
    features = chosen or det["candidate_features"]
    prov = {"backdoor_cluster": det["suspicious_cluster"], "reference_cluster": det["largest_cluster"],
            "dataset": det["dataset"], "detect_config_hash": det["config_hash"],
            "features_from": "operator" if chosen else "detection"}
    res = pl.eliminate_backdoor(net, encoder, bundle.train, det["members"]["suspicious"],
                                det["members"]["largest"], features, cfg.eliminate, prov)
    out_model = run / "model_eliminated.apnn"
    nn.save(res.network, out_model)
    write_json(run / "plan.json", stamp(cfg, "elimination_plan", **res.plan.to_dict()))
    before = pl.evaluate_model(net, encoder, bundle.clean_test, bundle.poisoned_test, cfg.hash, cfg.seed)
    after = pl.evaluate_model(res.network, encoder, bundle.clean_test, bundle.poisoned_test, cfg.hash, cfg.seed)
    report = stamp(
        cfg, "eliminate_report",
        threshold=res.threshold,
        backdoor_features=list(res.plan.backdoor_features),
        removed_weights=res.plan.mask.n_selected(),
        empty_plan=res.plan.is_empty(),
        warning=res.warning,
        frequent_paths={"backdoor": res.usage.W1.n_frequent_paths, "backdoor_unique": res.usage.W1.n_unique_paths,
                        "reference": res.usage.W2.n_frequent_paths, "reference_unique": res.usage.W2.n_unique_paths},
        usage_diff={name: int(v) for name, v in zip(encoder.encoded_names, res.usage.usage_diff)},
        before=before.to_dict(),
        after=after.to_dict(),
    )
    write_json(run / "eliminate_report.json", report)
    return report


def cmd_report(run_dir) -> Path:
    return write_report(run_dir)


# --------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activepaths", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--config", help="experiment config JSON")
            g.add_argument("--recipe", choices=sorted(RECIPES), help="built-in experiment config")
            sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out-dir", help="run directory")
        return sp

    common(sub.add_parser("synth", help="write the synthetic table (and poisoned copy) as CSV"))
    common(sub.add_parser("train", help="train a model and evaluate it"))
    sp = common(sub.add_parser("detect", help="cluster contributions of predicted-benign training samples"))
    sp.add_argument("--model", help="model file (default: <out-dir>/model.apnn)")
    sp = common(sub.add_parser("eliminate", help="remove backdoor weights found by path comparison"))
    sp.add_argument("--model", help="model file (default: <out-dir>/model.apnn)")
    sp.add_argument("--features", nargs="+", help="backdoor features (default: detection candidates)")
    sp = common(sub.add_parser("evaluate", help="clean and triggered test accuracy of a model"))
    sp.add_argument("--model", help="model file (default: <out-dir>/model.apnn)")
    sp.add_argument("--name", default="eval_report.json", help="report file name inside the run directory")
    sp = common(sub.add_parser("run", help="train, detect, eliminate and report in one go"))
    common(sub.add_parser("report", help="collate a run directory into summary.md and CSVs"), needs_config=False)
    return p


def resolve_config(args, environ=None) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.recipe:
        cfg = recipe(args.recipe, args.seed)
    else:
        cfg = ExperimentConfig()
    overrides = env_overrides(environ)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    return cfg.with_overrides(overrides) if overrides else cfg


def dispatch(args, environ=None) -> int:
    if args.command == "report":
        print(cmd_report(args.out_dir or "."))
        return EXIT_OK
    cfg = resolve_config(args, environ)
    if args.command == "synth":
        out = cmd_synth(cfg)
        print(f"wrote {Path(cfg.out_dir) / 'data.csv'} ({out['rows']} rows)")
    elif args.command == "train":
        ev = cmd_train(cfg)["evaluation"]
        print(f"clean accuracy {ev['clean']['accuracy']:.4f}, poison accuracy {ev['poison_accuracy']}")
    elif args.command == "detect":
        rep = cmd_detect(cfg, args.model)
        print(f"{rep['n_clusters']} clusters; suspicious cluster {rep['suspicious_cluster']}; "
              f"candidates {rep['candidate_features']}; flagged {rep['suspicion']['flagged']}")
    elif args.command == "eliminate":
        rep = cmd_eliminate(cfg, args.model, args.features)
        b, a = rep["before"], rep["after"]
        print(f"removed {rep['removed_weights']} weights; poisoned malicious accuracy "
              f"{(b['poisoned'] or {}).get('malicious_accuracy')} -> {(a['poisoned'] or {}).get('malicious_accuracy')}")
    elif args.command == "evaluate":
        ev = cmd_evaluate(cfg, args.model, args.name)
        print(f"clean accuracy {ev.clean.accuracy:.4f}, poison accuracy {ev.poison_accuracy}")
    elif args.command == "run":
        cmd_train(cfg)
        rep = cmd_detect(cfg)
        if rep["suspicious_cluster"] is not None:
            cmd_eliminate(cfg)
        print(cmd_report(cfg.out_dir))
    return EXIT_OK


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return dispatch(args, environ)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pl.InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (DataError, OSError, nn.CorruptModelError, nn.ModelFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
