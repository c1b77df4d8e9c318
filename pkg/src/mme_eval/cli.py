"""Batch evaluation command line.

Exit codes: 0 success, 1 usage error, 2 evaluation failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .baseline import class_baselines
from .chart import SpiderChartSpec, write_svg
from .io import ReportDocument, ReportEntry, image_id, read_report, read_volume, write_report
from .mme import MMEParams, evaluate_pair
from .volume import check_same_grid

log = logging.getLogger("mme_eval")

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2
VOLUME_SUFFIXES = (".nii", ".nii.gz", ".txt")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    pairs: tuple
    classes: tuple = ()
    theta_tp: float = 0.0
    theta_fp: float = 1.0
    beta: float = 1.0
    connectivity: int = 26
    taus: tuple = (1.0, 5.0)
    out: str = "report.json"
    format: str = "json"
    jobs: int = 1
    mme: bool = True
    errors: tuple = field(default=())

    def __post_init__(self):
        if self.theta_tp < 0 or self.theta_fp < 0:
            raise UsageError("--theta-tp and --theta-fp must be >= 0")
        if not self.beta > 0:
            raise UsageError("--beta must be > 0")
        if any(t < 0 for t in self.taus):
            raise UsageError("--tau values must be >= 0")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")

    @property
    def params(self) -> MMEParams:
        return MMEParams(self.theta_tp, self.theta_fp, self.beta, self.connectivity)

    def params_dict(self) -> dict:
        return {
            "theta_tp": self.theta_tp,
            "theta_fp": self.theta_fp,
            "beta": self.beta,
            "connectivity": self.connectivity,
            "tau": list(self.taus),
        }


def _is_volume(path: Path) -> bool:
    return path.is_file() and path.name.lower().endswith(VOLUME_SUFFIXES)


def pair_inputs(gts, preds):
    """Match ground-truth and prediction inputs.

    Files pair by position; directories pair by identical file name.  Returns
    ``(pairs, errors)`` where errors record unmatched files.
    """
    if len(gts) != len(preds):
        raise UsageError("--gt and --pred must be given the same number of times")
    pairs, errors = [], []
    for g, p in zip(map(Path, gts), map(Path, preds)):
        if g.is_dir() != p.is_dir():
            raise UsageError(f"{g} and {p}: cannot pair a file with a directory")
        if not g.is_dir():
            pairs.append((str(g), str(p)))
            continue
        g_files = {f.name: f for f in sorted(g.iterdir()) if _is_volume(f)}
        p_files = {f.name: f for f in sorted(p.iterdir()) if _is_volume(f)}
        for name in sorted(g_files.keys() | p_files.keys()):
            if name in g_files and name in p_files:
                pairs.append((str(g_files[name]), str(p_files[name])))
            else:
                missing = "prediction" if name in g_files else "ground truth"
                errors.append({"image_id": image_id(name), "error": f"no matching {missing} for {name}"})
    if not pairs:
        raise UsageError("no ground-truth/prediction pairs found")
    return pairs, errors


def evaluate_files(gt_path: str, pred_path: str, config: RunConfig):
    """Evaluate one file pair for every requested class; returns (entries, errors)."""
    ident = image_id(gt_path)
    try:
        gt = read_volume(gt_path)
        pred = read_volume(pred_path)
        check_same_grid(gt, pred)
    except (OSError, ValueError) as exc:
        return [], [{"image_id": ident, "error": f"{type(exc).__name__}: {exc}"}]
    classes = config.classes or tuple(gt.classes())
    entries, errors = [], []
    for cid in classes:
        try:
            mme = evaluate_pair(gt, pred, cid, config.params) if config.mme else None
            base = class_baselines(gt, pred, cid, config.taus, config.beta)
        except Exception as exc:  # recorded per pair; the run continues
            errors.append({"image_id": ident, "class_id": cid, "error": f"{type(exc).__name__}: {exc}"})
            continue
        entries.append(ReportEntry(ident, int(cid), config.params_dict(), mme, base))
    return entries, errors


def _run_pair(args):
    return evaluate_files(*args)


def run(config: RunConfig) -> ReportDocument:
    work = [(g, p, config) for g, p in config.pairs]
    if config.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_pair, work))
    else:
        results = [_run_pair(w) for w in work]
    entries = [e for ents, _ in results for e in ents]
    errors = list(config.errors) + [e for _, errs in results for e in errs]
    return ReportDocument.build(entries, errors)


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _default_jobs() -> int:
    env = os.environ.get("MME_EVAL_JOBS")
    if not env:
        return 1
    try:
        return int(env)
    except ValueError:
        log.warning("ignoring non-integer MME_EVAL_JOBS=%r", env)
        return 1


def _add_run_args(p):
    p.add_argument("--gt", action="append", required=True, help="ground-truth file or directory (repeatable)")
    p.add_argument("--pred", action="append", required=True, help="prediction file or directory (repeatable)")
    p.add_argument("--classes", type=_ints, default=(), help="comma-separated class ids (default: all in GT)")
    p.add_argument("--theta-tp", type=float, default=0.0)
    p.add_argument("--theta-fp", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--connectivity", type=int, choices=(6, 18, 26), default=26)
    p.add_argument("--tau", type=_floats, default=(1.0, 5.0), help="NSD tolerances in mm, e.g. 1,5")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "csv"), help="default: from --out suffix")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (env MME_EVAL_JOBS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mme-eval", description="Segment-level evaluation of medical image segmentations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_run_args(sub.add_parser("evaluate", help="five-property evaluation plus baselines"))
    _add_run_args(sub.add_parser("baselines", help="Dice, IoU, VS, accuracy, Hausdorff and NSD only"))
    chart = sub.add_parser("chart", help="spider chart of one report entry")
    chart.add_argument("report", help="JSON report written by 'evaluate'")
    chart.add_argument("--image", required=True)
    chart.add_argument("--class", dest="class_id", type=int, required=True)
    chart.add_argument("--out", required=True)
    return parser


def config_from_args(args, mme: bool) -> RunConfig:
    pairs, errors = pair_inputs(args.gt, args.pred)
    fmt = args.format or ("csv" if args.out.lower().endswith(".csv") else "json")
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    return RunConfig(
        pairs=tuple(pairs), classes=args.classes, theta_tp=args.theta_tp, theta_fp=args.theta_fp,
        beta=args.beta, connectivity=args.connectivity, taus=args.tau, out=args.out, format=fmt,
        jobs=jobs, mme=mme, errors=tuple(errors),
    )


def cmd_evaluate(config: RunConfig) -> int:
    doc = run(config)
    write_report(doc, config.format, config.out)
    for err in doc.errors:
        log.error("%s: %s", err["image_id"], err["error"])
    return EXIT_FAILURE if doc.errors else EXIT_OK


cmd_baselines = cmd_evaluate


def cmd_chart(report: str, image: str, class_id: int, out: str) -> int:
    doc = read_report(report)
    try:
        entry = doc.find(image, class_id)
    except KeyError as exc:
        log.error("%s", exc.args[0])
        return EXIT_FAILURE
    if entry.mme is None:
        log.error("entry %s/%d has no property scores", image, class_id)
        return EXIT_FAILURE
    write_svg(SpiderChartSpec.from_result(entry.mme, f"{image} / class {class_id}"), out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "chart":
            return cmd_chart(args.report, args.image, args.class_id, args.out)
        config = config_from_args(args, mme=args.command == "evaluate")
    except UsageError as exc:
        print(f"mme-eval: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"mme-eval: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return cmd_evaluate(config)


if __name__ == "__main__":
    sys.exit(main())
