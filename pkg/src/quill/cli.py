"""Command-line pipeline: scan, encode, tune, train, predict, annotate.

One entry point, one subcommand per stage. Settings layer as defaults,
then a JSON config file, then flags; the resolved bundle rides along in
every artifact so a run can be reproduced from its outputs. Errors exit
1 with a single machine-parseable line on stderr; usage problems exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .common import FORMAT_VERSION, digest_of, read_json, read_jsonl, \
    write_json, write_jsonl
from .encoding import NapAst, PruneConfig, build_napast
from .errors import BadArtifact, QuillError
from .evaluate import (DEFAULT_WARNING_PATTERN, EvalReport, count_warnings,
                       data_fraction_study, score_sets, study_csv,
                       truth_signatures)
from .generator import GeneratorSpec, generate_corpus, write_corpus
from .ingest import (QualifierAliasTable, erase_annotations, parse_class,
                     scan_corpus)
from .learn import (GcnConfig, GtnConfig, ModelCheckpoint, SplitSpec, train)
from .predict import (DEFAULT_PAIR_CAP, DEFAULT_THRESHOLD, ModelRouter,
                      PredictionSet, ProjectIndex, conjoined_predict,
                      postprocess)
from .rewrite import (DEFAULT_ANNOTATION, EditPlan, apply_edits, diff_of,
                      erase_project, plan_edits)
from .tune import (ClusterModel, ablate_node_types, ablate_statement_types,
                   cluster_graphs, derive_drop_list, export_ablation_csv,
                   write_ablation)

_LEVELS = ("error", "warn", "info", "debug")
_GRAPHS_KIND = "napast-corpus"


@dataclass
class RunConfig:
    aliases: str | None = None
    prune: str | None = None
    model: str = "gtn"
    hidden_dim: int = 32
    rounds: int = 8
    seed: int = 0
    tau: float = DEFAULT_THRESHOLD
    pair_cap: int = DEFAULT_PAIR_CAP
    cap: int = 8000
    k_min: int = 1
    k_max: int = 8
    reps: int = 50
    checker_cmd: str | None = None
    warning_pattern: str = DEFAULT_WARNING_PATTERN
    annotation: str = DEFAULT_ANNOTATION
    jobs: int = 1
    dry_run: bool = False
    log_level: str = "info"

    def validate(self) -> None:
        if self.model not in ("gcn", "gtn"):
            raise QuillError(f"unknown model kind: {self.model}")
        if self.jobs < 1:
            raise QuillError("jobs must be at least 1")
        if self.log_level not in _LEVELS:
            raise QuillError(f"unknown log level: {self.log_level}")
        if not 1 <= self.k_min <= self.k_max:
            raise QuillError("cluster range must satisfy 1 <= k_min <= k_max")

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def provenance_json(self) -> dict:
        """Settings that shape artifact content; execution knobs left out."""
        skip = {"jobs", "dry_run", "log_level"}
        return {k: v for k, v in self.to_json().items() if k not in skip}

    def digest(self) -> str:
        return digest_of(self.provenance_json())

    @staticmethod
    def resolve(config_path: str | None, overrides: dict) -> "RunConfig":
        rc = RunConfig()
        if config_path:
            raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
            known = {f.name for f in fields(rc)}
            unknown = set(raw) - known - {"format_version"}
            if unknown:
                raise QuillError(f"unknown config keys: {sorted(unknown)}")
            rc = replace(rc, **{k: v for k, v in raw.items() if k in known})
        clean = {k: v for k, v in overrides.items() if v is not None}
        rc = replace(rc, **clean)
        rc.validate()
        return rc


def _log(rc: RunConfig, level: str, event: str, **kv) -> None:
    if _LEVELS.index(level) > _LEVELS.index(rc.log_level):
        return
    parts = [f"level={level}", f"event={event}"]
    parts += [f"{k}={json.dumps(v) if isinstance(v, str) else v}"
              for k, v in kv.items()]
    print(" ".join(parts), file=sys.stderr)


def _provenance(rc: RunConfig) -> dict:
    return {"run_config": rc.provenance_json(),
            "run_config_digest": rc.digest(), "seeds": [rc.seed]}


def _emit(rc: RunConfig, path: str | Path, payload: dict) -> None:
    doc = dict(payload)
    doc.setdefault("format_version", FORMAT_VERSION)
    doc.update(_provenance(rc))
    if rc.dry_run:
        _log(rc, "info", "dry-run-skip-write", path=str(path))
        return
    write_json(path, doc)
    _log(rc, "info", "wrote", path=str(path))


def _alias_table(rc: RunConfig) -> QualifierAliasTable | None:
    if not rc.aliases:
        return None
    entries = json.loads(Path(rc.aliases).read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise BadArtifact("alias file must hold a JSON list of names")
    return QualifierAliasTable(tuple(sorted(entries)))


def _prune_config(rc: RunConfig) -> PruneConfig:
    if not rc.prune:
        return PruneConfig()
    return PruneConfig.from_json(read_json(rc.prune))


def _model_config(rc: RunConfig):
    if rc.model == "gcn":
        return GcnConfig(hidden_dim=rc.hidden_dim, seed=rc.seed)
    return GtnConfig(hidden_dim=rc.hidden_dim, seed=rc.seed)


def write_graphs(rc: RunConfig, path: str | Path, naps: list[NapAst]) -> None:
    header = {"format_version": FORMAT_VERSION, "kind": _GRAPHS_KIND,
              "count": len(naps), **_provenance(rc)}
    if rc.dry_run:
        _log(rc, "info", "dry-run-skip-write", path=str(path))
        return
    write_jsonl(path, [header] + [nap.to_json() for nap in naps])
    _log(rc, "info", "wrote", path=str(path), graphs=len(naps))


def read_graphs(path: str | Path) -> list[NapAst]:
    rows = read_jsonl(path)
    if not rows or rows[0].get("kind") != _GRAPHS_KIND:
        raise BadArtifact(f"{path} is not a graph corpus artifact")
    return [NapAst.from_json(r) for r in rows[1:]]


def _parse_one(item: tuple[str, str, tuple[str, ...] | None]) -> dict:
    rel, text, entries = item
    table = QualifierAliasTable(entries) if entries else None
    raw = parse_class(text, table, path=rel)
    return {"rel": rel, "raw": raw}


def _project_files(root: str | Path) -> list[tuple[str, str]]:
    rootp = Path(root)
    if not rootp.is_dir():
        raise QuillError(f"not a directory: {root}")
    return [(p.relative_to(rootp).as_posix(), p.read_text(encoding="utf-8"))
            for p in sorted(rootp.rglob("*.java"))]


def _parse_project(rc: RunConfig, root: str | Path) -> list:
    table = _alias_table(rc)
    entries = table.entries if table else None
    items = [(rel, text, entries) for rel, text in _project_files(root)]
    if rc.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=rc.jobs) as pool:
            rows = list(pool.map(_parse_one, items, chunksize=8))
    else:
        rows = [_parse_one(it) for it in items]
    return [r["raw"] for r in rows]


def _load_router(rc: RunConfig, model_path: str,
                 cluster_path: str | None) -> ModelRouter:
    cluster = ClusterModel.load(cluster_path) if cluster_path else None
    p = Path(model_path)
    if p.is_dir():
        ckpts = {}
        for f in sorted(p.glob("*.json")):
            ck = ModelCheckpoint.load(f)
            cid = ck.cluster_id if ck.cluster_id is not None else 0
            ckpts[cid] = ck
        if not ckpts:
            raise QuillError(f"no checkpoints under {model_path}")
        return ModelRouter(checkpoints=ckpts, cluster=cluster)
    ck = ModelCheckpoint.load(p)
    if cluster is not None:
        cid = ck.cluster_id if ck.cluster_id is not None else 0
        return ModelRouter(checkpoints={cid: ck}, cluster=cluster)
    return ModelRouter.single(ck)


def cmd_scan(rc: RunConfig, args) -> int:
    manifest = scan_corpus(args.src, _alias_table(rc))
    _log(rc, "info", "scan", classes=len(manifest["classes"]))
    _emit(rc, args.out, manifest)
    return 0


def cmd_encode(rc: RunConfig, args) -> int:
    t0 = time.monotonic()
    cfg = _prune_config(rc)
    raws = _parse_project(rc, args.src)
    naps = [build_napast(raw, cfg, cap=rc.cap) for raw in raws]
    write_graphs(rc, args.out, naps)
    _log(rc, "info", "encode", classes=len(naps),
         elapsed=round(time.monotonic() - t0, 3))
    return 0


def cmd_ablate(rc: RunConfig, args) -> int:
    raws = _parse_project(rc, args.src)
    node_res = ablate_node_types(raws, reps=rc.reps, seed=rc.seed,
                                 cap=rc.cap)
    stmt_res = ablate_statement_types(raws, reps=rc.reps, seed=rc.seed,
                                      cap=rc.cap)
    if not rc.dry_run:
        write_ablation(args.out, node_res + stmt_res)
        _log(rc, "info", "wrote", path=args.out)
        if args.csv:
            export_ablation_csv(node_res + stmt_res, args.csv)
    if args.emit_prune:
        cfg = PruneConfig(
            phase2_drop_kinds=tuple(sorted(derive_drop_list(node_res))),
            phase3_prune_stmt_kinds=tuple(sorted(derive_drop_list(stmt_res))))
        _emit(rc, args.emit_prune, cfg.to_json())
    _log(rc, "info", "ablate", targets=len(node_res) + len(stmt_res))
    return 0


def cmd_cluster(rc: RunConfig, args) -> int:
    naps = read_graphs(args.graphs)
    model = cluster_graphs(naps, k_range=tuple(range(rc.k_min, rc.k_max + 1)),
                           seed=rc.seed)
    _emit(rc, args.out, model.to_json())
    _log(rc, "info", "cluster", k=model.k, graphs=len(naps))
    return 0


def cmd_train(rc: RunConfig, args) -> int:
    t0 = time.monotonic()
    naps = read_graphs(args.graphs)
    cfg = _model_config(rc)
    split = SplitSpec(seed=rc.seed)
    if args.cluster:
        cluster = ClusterModel.load(args.cluster)
        outdir = Path(args.out)
        if not rc.dry_run:
            outdir.mkdir(parents=True, exist_ok=True)
        groups: dict[int, list[NapAst]] = {}
        for nap in naps:
            groups.setdefault(cluster.route(nap), []).append(nap)
        for cid in sorted(groups):
            ckpt, report = train(groups[cid], split, cfg, cap=rc.cap,
                                 rounds=rc.rounds)
            ckpt = replace(ckpt, cluster_id=cid)
            _emit(rc, outdir / f"ckpt_{cid}.json", ckpt.to_json())
            _log(rc, "info", "train", cluster=cid,
                 classes=len(groups[cid]), test_f1=round(report.test_f1, 4))
    else:
        ckpt, report = train(naps, split, cfg, cap=rc.cap, rounds=rc.rounds)
        _emit(rc, args.out, ckpt.to_json())
        _log(rc, "info", "train", model=rc.model, classes=len(naps),
             test_f1=round(report.test_f1, 4),
             elapsed=round(time.monotonic() - t0, 3))
    if args.report and not rc.dry_run:
        write_json(args.report, {"format_version": FORMAT_VERSION,
                                 **report.to_json()})
    return 0


def cmd_predict(rc: RunConfig, args) -> int:
    naps = read_graphs(args.graphs)
    router = _load_router(rc, args.model_path, args.cluster)
    pset = conjoined_predict(naps, router, tau=rc.tau, pair_cap=rc.pair_cap,
                             cap=rc.cap)
    if not args.no_post:
        pset = postprocess(pset, ProjectIndex.build(naps))
    _emit(rc, args.out, pset.to_json())
    if args.csv and not rc.dry_run:
        pset.to_csv(args.csv)
    _log(rc, "info", "predict", sites=len(pset.entries),
         decided=len(pset.decided_signatures()), tau=rc.tau)
    return 0


def cmd_annotate(rc: RunConfig, args) -> int:
    pset = PredictionSet.load(args.predictions)
    sources = {rel: text for rel, text in _project_files(args.project)}
    plan = plan_edits(pset, sources, annotation_fq=rc.annotation,
                      alias_table=_alias_table(rc))
    if args.plan:
        _emit(rc, args.plan, plan.to_json())
    if rc.dry_run:
        sys.stdout.write(diff_of(plan, args.project))
        _log(rc, "info", "annotate-dry-run", files=len(plan.files),
             insertions=plan.insertion_count())
        return 0
    apply_edits(plan, args.project)
    _log(rc, "info", "annotate", files=len(plan.files),
         insertions=plan.insertion_count())
    return 0


def cmd_erase(rc: RunConfig, args) -> int:
    table = _alias_table(rc)
    if rc.dry_run:
        changed = 0
        for rel, text in _project_files(args.project):
            if erase_annotations(text, table, path=rel) != \
                    text.encode("utf-8"):
                changed += 1
        _log(rc, "info", "erase-dry-run", files_with_changes=changed)
        return 0
    changed = erase_project(args.project, table)
    _log(rc, "info", "erase", files_changed=changed)
    return 0


def _truth_from_manifest(path: str) -> set:
    doc = read_json(path)
    out: set[str] = set()
    for row in doc.get("classes", []):
        out.update(row.get("labels", row.get("truth", [])))
    return out


def cmd_eval(rc: RunConfig, args) -> int:
    report = EvalReport()
    if args.truth:
        truth = _truth_from_manifest(args.truth)
        if args.predictions:
            decided = PredictionSet.load(args.predictions) \
                .decided_signatures()
        elif args.project:
            decided = _truth_from_manifest_dir(rc, args.project)
        else:
            raise QuillError("eval with --truth needs --predictions "
                             "or --project")
        name = args.project or args.predictions
        report.projects[Path(name).stem or "project"] = \
            score_sets(decided, truth)
    if rc.checker_cmd and args.project:
        report.warnings_after = count_warnings(args.project, rc.checker_cmd,
                                               rc.warning_pattern)
        if args.baseline_project:
            report.warnings_baseline = count_warnings(
                args.baseline_project, rc.checker_cmd, rc.warning_pattern)
    t = report.totals()
    _log(rc, "info", "eval", precision=round(t.precision, 4),
         recall=round(t.recall, 4), f1=round(t.f1, 4),
         warnings_after=report.warnings_after,
         warnings_baseline=report.warnings_baseline)
    if args.out:
        _emit(rc, args.out, report.to_json())
    if args.csv and not rc.dry_run:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return 0


def _truth_from_manifest_dir(rc: RunConfig, project: str) -> set:
    manifest = scan_corpus(project, _alias_table(rc))
    return {sig for row in manifest["classes"] for sig in row["labels"]}


def cmd_study(rc: RunConfig, args) -> int:
    train_naps = read_graphs(args.train_graphs)
    eval_naps = read_graphs(args.eval_graphs)
    fractions = [float(x) for x in args.fractions.split(",") if x]
    rows = data_fraction_study(train_naps, eval_naps, fractions,
                               _model_config(rc), seed=rc.seed,
                               rounds=rc.rounds, tau=rc.tau,
                               pair_cap=rc.pair_cap, cap=rc.cap)
    if not rc.dry_run:
        Path(args.out).write_text(study_csv(rows), encoding="utf-8")
        _log(rc, "info", "wrote", path=args.out)
    for r in rows:
        _log(rc, "info", "study-point", fraction=r["fraction"],
             f1=round(r["f1"], 4))
    return 0


def cmd_gen(rc: RunConfig, args) -> int:
    weights = None
    if args.weights:
        weights = json.loads(Path(args.weights).read_text(encoding="utf-8")
                             if Path(args.weights).exists()
                             else args.weights)
    spec = GeneratorSpec(class_count=args.classes,
                         members_per_class=args.members,
                         seed=rc.seed, package=args.package)
    if weights:
        spec.weights = weights
    files, manifest = generate_corpus(spec)
    if not rc.dry_run:
        write_corpus(files, args.out)
    if args.manifest:
        _emit(rc, args.manifest, manifest)
    _log(rc, "info", "gen", classes=len(files), out=args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON settings file")
    shared.add_argument("--jobs", type=int, default=None)
    shared.add_argument("--dry-run", action="store_true", default=None)
    shared.add_argument("--log-level", choices=_LEVELS, default=None)
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--aliases", default=None,
                        help="JSON list of nullable annotation names")

    ap = argparse.ArgumentParser(
        prog="quill",
        description="Infer and insert @Nullable qualifiers in Java source.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[shared],
                       help="harvest labels into a corpus manifest")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("encode", parents=[shared],
                       help="parse and encode classes into graph artifacts")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--prune", default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", parents=[shared],
                       help="measure per-kind ablation F1 and derive prunes")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--emit-prune", default=None)

    p = sub.add_parser("cluster", parents=[shared],
                       help="fit a k-means router over graph features")
    p.add_argument("--graphs", required=True)
    p.add_argument("--k-min", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[shared],
                       help="train a model on encoded graphs")
    p.add_argument("--graphs", required=True)
    p.add_argument("--model", choices=("gcn", "gtn"), default=None)
    p.add_argument("--hidden-dim", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--cluster", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)

    p = sub.add_parser("predict", parents=[shared],
                       help="score graphs and decide qualifiers")
    p.add_argument("--graphs", required=True)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--cluster", default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--pair-cap", type=int, default=None)
    p.add_argument("--no-post", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("annotate", parents=[shared],
                       help="insert decided annotations into source")
    p.add_argument("--project", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--annotation", default=None)
    p.add_argument("--plan", default=None)

    p = sub.add_parser("erase", parents=[shared],
                       help="strip nullable annotations from source")
    p.add_argument("--project", required=True)

    p = sub.add_parser("eval", parents=[shared],
                       help="score predictions and count checker warnings")
    p.add_argument("--project", default=None)
    p.add_argument("--baseline-project", default=None)
    p.add_argument("--predictions", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--checker", dest="checker_cmd", default=None)
    p.add_argument("--warning-pattern", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("study", parents=[shared],
                       help="train on data fractions and chart the curve")
    p.add_argument("--train-graphs", required=True)
    p.add_argument("--eval-graphs", required=True)
    p.add_argument("--fractions", required=True,
                   help="comma list, e.g. 0.1,0.5,1.0")
    p.add_argument("--model", choices=("gcn", "gtn"), default=None)
    p.add_argument("--hidden-dim", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen", parents=[shared],
                       help="emit a synthetic corpus with known truth")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--members", type=int, default=3)
    p.add_argument("--weights", default=None,
                   help="JSON object or path to one")
    p.add_argument("--package", default="gen")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)
    return ap


_RC_FLAGS = ("aliases", "prune", "model", "hidden_dim", "rounds", "seed",
             "tau", "pair_cap", "cap", "k_min", "k_max", "reps",
             "checker_cmd", "warning_pattern", "annotation", "jobs",
             "dry_run", "log_level")

_HANDLERS = {"scan": cmd_scan, "encode": cmd_encode, "ablate": cmd_ablate,
             "cluster": cmd_cluster, "train": cmd_train,
             "predict": cmd_predict, "annotate": cmd_annotate,
             "erase": cmd_erase, "eval": cmd_eval, "study": cmd_study,
             "gen": cmd_gen}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = {k: getattr(args, k) for k in _RC_FLAGS
                     if hasattr(args, k)}
        rc = RunConfig.resolve(getattr(args, "config", None), overrides)
        return _HANDLERS[args.command](rc, args)
    except QuillError as e:
        print(f"error code={e.code} msg={json.dumps(str(e))}",
              file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error code=io msg={json.dumps(str(e))}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
