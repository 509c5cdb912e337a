"""Scoring decided qualifiers against ground truth, and warning counts.

Scores are set comparisons over canonical member signatures, aggregated
micro-style: totals come from summed TP/FP/FN, never from averaging
per-project ratios. Warning counts shell out to an external checker and
count matching output lines; the data-fraction study retrains on seeded
subsets of the corpus and reports one metric row per fraction.
"""

from __future__ import annotations

import csv
import io
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .common import FORMAT_VERSION, read_json, write_json
from .errors import (CheckerFailed, MissingChecker, QuillError,
                     SignatureMismatch)
from .learn import SplitSpec, train
from .predict import (DEFAULT_PAIR_CAP, DEFAULT_THRESHOLD, ModelRouter,
                      PredictionSet, ProjectIndex, conjoined_predict,
                      postprocess)
from .learn.training import NODE_CAP

DEFAULT_WARNING_PATTERN = r"warning:"
DEFAULT_CHECKER_TIMEOUT = 600.0


@dataclass
class ProjectScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall,
                "f1": self.f1}

    @staticmethod
    def from_json(d: dict) -> "ProjectScore":
        return ProjectScore(tp=d["tp"], fp=d["fp"], fn=d["fn"])


def _check_canonical(sigs, side: str) -> None:
    for s in sigs:
        if not isinstance(s, str) or "#" not in s:
            raise SignatureMismatch(f"{side} signature {s!r} is not a "
                                    "class#member form")


def score_sets(decided: set, truth: set) -> ProjectScore:
    _check_canonical(decided, "predicted")
    _check_canonical(truth, "truth")
    decided = set(decided)
    truth = set(truth)
    return ProjectScore(tp=len(decided & truth),
                        fp=len(decided - truth),
                        fn=len(truth - decided))


def score_predictions(pset: PredictionSet, truth: set) -> ProjectScore:
    return score_sets(pset.decided_signatures(), truth)


@dataclass
class EvalReport:
    projects: dict = field(default_factory=dict)
    warnings_baseline: int | None = None
    warnings_after: int | None = None
    runtime_seconds: float = 0.0

    def totals(self) -> ProjectScore:
        out = ProjectScore()
        for s in self.projects.values():
            out.tp += s.tp
            out.fp += s.fp
            out.fn += s.fn
        return out

    def reduction_pct(self) -> float | None:
        if not self.warnings_baseline:
            return None
        return 100.0 * (1.0 - self.warnings_after / self.warnings_baseline)

    def to_json(self) -> dict:
        red = self.reduction_pct()
        return {"format_version": FORMAT_VERSION,
                "projects": {k: self.projects[k].to_json()
                             for k in sorted(self.projects)},
                "totals": self.totals().to_json(),
                "warnings_baseline": self.warnings_baseline,
                "warnings_after": self.warnings_after,
                "reduction_pct": "-" if red is None else red,
                "runtime_seconds": self.runtime_seconds}

    @staticmethod
    def from_json(d: dict) -> "EvalReport":
        return EvalReport(
            projects={k: ProjectScore.from_json(v)
                      for k, v in d["projects"].items()},
            warnings_baseline=d.get("warnings_baseline"),
            warnings_after=d.get("warnings_after"),
            runtime_seconds=d.get("runtime_seconds", 0.0))

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_json())

    @staticmethod
    def load(path: str | Path) -> "EvalReport":
        return EvalReport.from_json(read_json(path,
                                              expect_version=FORMAT_VERSION))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["project", "tp", "fp", "fn",
                    "precision", "recall", "f1"])
        for name in sorted(self.projects):
            s = self.projects[name]
            w.writerow([name, s.tp, s.fp, s.fn,
                        f"{s.precision:.6f}", f"{s.recall:.6f}",
                        f"{s.f1:.6f}"])
        t = self.totals()
        w.writerow(["TOTAL", t.tp, t.fp, t.fn,
                    f"{t.precision:.6f}", f"{t.recall:.6f}",
                    f"{t.f1:.6f}"])
        return buf.getvalue()


def truth_signatures(naps) -> set:
    """Nullable-labeled site signatures harvested from a graph list."""
    out = set()
    for nap in naps:
        for node in nap.nodes:
            if node.anchor.sig and nap.label_vector[node.id] == "Nullable":
                out.add(node.anchor.sig)
    return out


def evaluate_corpus(naps, router: ModelRouter, truth: set | None = None,
                    tau: float = DEFAULT_THRESHOLD,
                    pair_cap: int = DEFAULT_PAIR_CAP,
                    cap: int = NODE_CAP, post: bool = True,
                    project: str = "corpus") -> tuple:
    """Predicts over one project's graphs and scores against truth."""
    t0 = time.monotonic()
    if truth is None:
        truth = truth_signatures(naps)
    pset = conjoined_predict(naps, router, tau=tau, pair_cap=pair_cap,
                             cap=cap)
    if post:
        pset = postprocess(pset, ProjectIndex.build(naps))
    score = score_predictions(pset, truth)
    report = EvalReport(projects={project: score},
                        runtime_seconds=time.monotonic() - t0)
    return pset, report


def count_warnings(project_dir: str | Path, checker_cmd: str,
                   warning_pattern: str = DEFAULT_WARNING_PATTERN,
                   timeout: float = DEFAULT_CHECKER_TIMEOUT) -> int:
    """Runs the checker command and counts matching output lines.

    The command template may reference {project_dir}; it is split into an
    argv (no shell). A nonzero exit is fine as long as the output parses,
    meaning at least one line matches the pattern.
    """
    if not checker_cmd or not checker_cmd.strip():
        raise MissingChecker("no checker command configured")
    cmd = checker_cmd.replace("{project_dir}", str(project_dir))
    argv = shlex.split(cmd)
    if not argv:
        raise MissingChecker("checker command is empty")
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=timeout)
    except FileNotFoundError as e:
        raise MissingChecker(f"checker not found: {argv[0]}") from e
    except subprocess.TimeoutExpired as e:
        raise CheckerFailed(f"checker timed out after {timeout}s") from e
    pat = re.compile(warning_pattern)
    text = proc.stdout + "\n" + proc.stderr
    n = sum(1 for line in text.splitlines() if pat.search(line))
    if proc.returncode != 0 and n == 0:
        tail = text.strip().splitlines()[-3:]
        raise CheckerFailed(f"checker exited {proc.returncode} with no "
                            f"matching output: {' | '.join(tail)}")
    return n


def sample_fraction(class_ids: list, fraction: float, seed: int) -> list:
    """Seeded, order-stable sample of round(fraction * n) classes."""
    ids = sorted(class_ids)
    if fraction >= 1.0:
        return ids
    k = max(1, round(fraction * len(ids)))
    rng = np.random.default_rng([seed, round(fraction * 10000)])
    picked = rng.choice(len(ids), size=k, replace=False)
    return [ids[i] for i in sorted(picked)]


def data_fraction_study(train_naps, eval_naps, fractions, cfg,
                        seed: int = 0, rounds: int = 1,
                        tau: float = DEFAULT_THRESHOLD,
                        pair_cap: int = DEFAULT_PAIR_CAP,
                        cap: int = NODE_CAP, post: bool = True) -> list:
    """Retrains on seeded subsets and scores each resulting model."""
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise QuillError(f"fraction {f} outside (0, 1]")
    by_id = {nap.class_id: nap for nap in train_naps}
    truth = truth_signatures(eval_naps)
    rows = []
    for f in sorted(set(fractions)):
        picked = sample_fraction(list(by_id), f, seed)
        subset = [by_id[cid] for cid in picked]
        model, _ = train(subset, SplitSpec(seed=seed), cfg, cap=cap,
                         rounds=rounds)
        router = ModelRouter.single(model)
        _, report = evaluate_corpus(eval_naps, router, truth=truth, tau=tau,
                                    pair_cap=pair_cap, cap=cap, post=post)
        s = report.totals()
        rows.append({"fraction": f, "train_classes": len(subset),
                     "precision": s.precision, "recall": s.recall,
                     "f1": s.f1})
    return rows


def study_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fraction", "train_classes", "precision", "recall", "f1"])
    for r in rows:
        w.writerow([f"{r['fraction']:.4f}", r["train_classes"],
                    f"{r['precision']:.6f}", f"{r['recall']:.6f}",
                    f"{r['f1']:.6f}"])
    return buf.getvalue()
