"""Command-line surface: generate, associate, evaluate, report.

Subcommands chain through newline-delimited scene and association files so
a whole benchmark run is four shell lines:

    mapassoc gen --config cfg.json --count 50 --seed 7 --out scenes.ndjson
    mapassoc associate --method hmm --scenes scenes.ndjson --out pred.ndjson
    mapassoc eval --metric association --pred pred.ndjson \
        --scenes scenes.ndjson --report hmm.json
    mapassoc report --reports hmm.json knn.json --csv summary.csv

Exit codes: 0 success, 2 validation/configuration error, 3 infeasible
computation (generation retries exhausted, no feasible decode), 1 anything
else.  MAPASSOC_THREADS caps per-scene worker parallelism (default: all
cores); outputs are order-preserving and bit-identical across thread
counts.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .baselines import HmmParams, distance_assoc_matrix, hmm_associate, knn_associate
from .decoder import DecoderConfig, decode_association
from .errors import ConfigError, GenerationError, MapAssocError, NoFeasiblePathError, ValidationError
from .io import AssocRecord, load_weights, read_assocs, read_scenes, write_assocs, write_scenes
from .mat import ModelConfig, desk_config, init_weights, mat_associate
from .metrics import MetricConfig, MetricReport, Prediction, association_pr, reachability_pr, report_table
from .scenegen import AugConfig, GenConfig, PerturbConfig, augment_scene, generate_scene, perturb_scene


def _threads() -> int:
    env = os.environ.get("MAPASSOC_THREADS")
    if env is None or env == "":
        return os.cpu_count() or 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"MAPASSOC_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"MAPASSOC_THREADS must be >= 1, got {n}")
    return n


def _map(fn, items) -> list:
    """Order-preserving map over items, parallel when MAPASSOC_THREADS allows."""
    items = list(items)
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _read_json(path: str, where: str) -> dict:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{where} {path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{where} {path}: expected a JSON object")
    return doc


def _config_from(cls, doc, where: str):
    """Build a config dataclass from a JSON object, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown fields: {', '.join(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen(args) -> int:
    doc = _read_json(args.config, "config") if args.config else {}
    unknown = sorted(set(doc) - {"gen", "perturb", "augment"})
    if unknown:
        raise ConfigError(f"config {args.config}: unknown sections: {', '.join(unknown)}")
    gen_cfg = _config_from(GenConfig, doc.get("gen", {}), "gen config")
    perturb_doc = doc.get("perturb")
    augment_doc = doc.get("augment")
    pcfg = _config_from(PerturbConfig, perturb_doc, "perturb config") if perturb_doc is not None else None
    acfg = _config_from(AugConfig, augment_doc, "augment config") if augment_doc is not None else None
    base = args.seed if args.seed is not None else gen_cfg.seed

    def one(i: int):
        scene = generate_scene(dataclasses.replace(gen_cfg, seed=base + i))
        if pcfg is not None:
            scene = perturb_scene(scene, dataclasses.replace(pcfg, seed=pcfg.seed + i))
        if acfg is not None:
            scene = augment_scene(scene, dataclasses.replace(acfg, seed=acfg.seed + i))
        return scene

    scenes = _map(one, range(args.count))
    write_scenes(scenes, args.out)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


def _cmd_associate(args) -> int:
    scenes = read_scenes(args.scenes)
    method = args.method
    mcfg = None
    weights = None
    if method == "mat":
        if args.model_config:
            mcfg = _config_from(ModelConfig, _read_json(args.model_config, "model config"), "model config")
        else:
            mcfg = desk_config()
        if args.weights:
            weights = load_weights(args.weights, mcfg)
        else:
            weights = init_weights(mcfg, seed=args.init_seed)
    dcfg = DecoderConfig(k=args.beam_k)

    def one(pair) -> AssocRecord:
        i, scene = pair
        if method == "mat":
            amat, _ = mat_associate(scene, mcfg, weights, curve_seed=args.curve_seed)
            assoc = amat.argmax_association()
        else:
            amat = distance_assoc_matrix(scene)
            assoc = knn_associate(scene) if method == "knn" else hmm_associate(scene)
        if args.post:
            assoc = decode_association(scene, amat, dcfg)
        return AssocRecord(
            method=(method + "+beam") if args.post else method,
            scene_ref=str(scene.meta.get("scene_id", f"scene-{i}")),
            assoc=assoc,
            probs=amat if args.store_probs else None,
        )

    records = _map(one, enumerate(scenes))
    write_assocs(records, args.out)
    print(f"wrote {len(records)} association records to {args.out}")
    return 0


def _pair_predictions(records, scenes, pred_path: str, scenes_path: str) -> list:
    if len(records) != len(scenes):
        raise ValidationError(
            f"{pred_path} has {len(records)} records but {scenes_path} has {len(scenes)} scenes"
        )
    preds = []
    for i, (rec, scene) in enumerate(zip(records, scenes)):
        sid = scene.meta.get("scene_id")
        if sid is not None and rec.scene_ref != str(sid):
            raise ValidationError(
                f"record {i} references scene {rec.scene_ref!r} but scene {i} is {str(sid)!r}"
            )
        preds.append(Prediction(assoc=rec.assoc))
    return preds


def _sum_reports(per_scene) -> MetricReport:
    first = per_scene[0]
    counts = first.counts.copy()
    for rep in per_scene[1:]:
        counts += rep.counts
    return MetricReport(thresholds=first.thresholds, buckets=first.buckets, counts=counts)


def _cmd_eval(args) -> int:
    scenes = read_scenes(args.scenes)
    if not scenes:
        raise ValidationError(f"{args.scenes}: no scenes in container")
    records = read_assocs(args.pred)
    preds = _pair_predictions(records, scenes, args.pred, args.scenes)
    kwargs = {"point_match_tau": args.tau, "chamfer_tau": args.chamfer_tau}
    if args.thresholds:
        try:
            kwargs["thresholds"] = tuple(float(t) for t in args.thresholds.split(","))
        except ValueError:
            raise ConfigError(f"--thresholds must be comma-separated numbers, got {args.thresholds!r}") from None
    cfg = MetricConfig(**kwargs)
    score = association_pr if args.metric == "association" else reachability_pr
    per_scene = _map(lambda pair: score([pair[0]], [pair[1]], cfg), zip(preds, scenes))
    report = _sum_reports(per_scene)

    name = args.name or (records[0].method if records else "pred")
    doc = {
        "name": name,
        "metric": args.metric,
        "scenes": len(scenes),
        "report": report.to_json(),
    }
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(report_table({name: report}))
    return 0


def _cmd_report(args) -> int:
    reports = {}
    rows = []
    for path in args.reports:
        doc = _read_json(path, "report")
        for key in ("name", "metric", "report"):
            if key not in doc:
                raise ValidationError(f"report {path}: missing field {key!r}")
        rep = MetricReport.from_json(doc["report"])
        name = str(doc["name"])
        reports[name] = rep
        prec, rec, f1 = rep.precision, rep.recall, rep.f1
        for j, th in enumerate(rep.thresholds):
            rows.append([name, doc["metric"], f"{th:g}", f"{prec[j]:.6f}", f"{rec[j]:.6f}", f"{f1[j]:.6f}"])
        rows.append([name, doc["metric"], "50:95", f"{rep.ap:.6f}", f"{rep.ar:.6f}", f"{rep.af1:.6f}"])
    with open(args.csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "metric", "threshold", "precision", "recall", "f1"])
        writer.writerows(rows)
    print(report_table(reports))
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapassoc",
        description="SD-HD map association: scene generation, baselines, transformer, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate scenes (generate + perturb + optional augment)")
    gen.add_argument("--config", help="JSON with optional gen/perturb/augment sections")
    gen.add_argument("--count", type=int, default=1, help="number of scenes")
    gen.add_argument("--seed", type=int, default=None, help="base seed; scene i uses seed+i")
    gen.add_argument("--out", required=True, help="output scene container")
    gen.set_defaults(fn=_cmd_gen)

    assoc = sub.add_parser("associate", help="run an association method over scenes")
    assoc.add_argument("--method", required=True, choices=("knn", "hmm", "mat"))
    assoc.add_argument("--post", action="store_true", help="beam-decode the probability matrix")
    assoc.add_argument("--weights", help="weights container for --method mat")
    assoc.add_argument("--model-config", help="JSON model configuration for --method mat")
    assoc.add_argument("--init-seed", type=int, default=0, help="random init seed when no weights given")
    assoc.add_argument("--curve-seed", type=int, default=0, help="seed for random curve scheduling")
    assoc.add_argument("--beam-k", type=int, default=5, help="beam width for --post")
    assoc.add_argument("--store-probs", action="store_true", help="keep full probability rows in the output")
    assoc.add_argument("--scenes", required=True, help="input scene container")
    assoc.add_argument("--out", required=True, help="output association container")
    assoc.set_defaults(fn=_cmd_associate)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--metric", required=True, choices=("association", "reachability"))
    ev.add_argument("--pred", required=True, help="association container to score")
    ev.add_argument("--scenes", required=True, help="scene container with ground truth")
    ev.add_argument("--tau", type=float, default=1.5, help="endpoint match radius (meters)")
    ev.add_argument("--chamfer-tau", type=float, default=1.0, help="reachability Chamfer tolerance (meters)")
    ev.add_argument("--thresholds", help="comma-separated overlap thresholds (default 0.5:0.05:0.95)")
    ev.add_argument("--name", help="row label in tables and CSV (default: method of first record)")
    ev.add_argument("--report", required=True, help="output JSON report")
    ev.set_defaults(fn=_cmd_eval)

    rep = sub.add_parser("report", help="merge JSON reports into a plot-ready CSV")
    rep.add_argument("--reports", required=True, nargs="+", help="JSON reports from eval")
    rep.add_argument("--csv", required=True, help="output CSV path")
    rep.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (GenerationError, NoFeasiblePathError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MapAssocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
