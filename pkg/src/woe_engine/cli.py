"""Command-line front door.

Subcommands: fit, classify, explain, select-instances, evaluate, serve,
export. Every subcommand has a machine-readable mode (``--format doc``)
whose output is a document the persistence module parses back.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback

import numpy as np

from . import metrics, persistence, service
from .dataset import CsvSchema, load_concepts, load_csv
from .errors import EngineError
from .evidence import (
    DEFAULT_SCALE,
    GLYPHS,
    SignificanceScale,
    condition_view,
)
from .model import DEFAULT_RIDGE, classify, fit, posterior, total_woe
from .persistence import Task, TaskPool, dumps, load_model, save_model, save_task_pool

HUMAN = "human"
DOC = "doc"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise _UsageError(f"{what} must be a comma-separated list of numbers") from None


def _emit(args, doc: dict, human_lines: list[str]) -> None:
    if args.format == DOC:
        print(dumps(doc))
    else:
        for line in human_lines:
            print(line)


def _render_report(doc: dict, indent: str = "  ") -> list[str]:
    lines = []
    hyp = doc.get("hypothesis")
    head = f"hypothesis: {hyp['name']} (id {hyp['id']})" if hyp else "hypothesis: [hidden]"
    lines.append(
        f"{head}   total WoE {doc['total_woe']:+.4f}   "
        f"weighted {doc['weighted_total_woe']:+.4f}"
    )
    width = max((len(it["feature_name"]) for it in doc["items"]), default=0)
    for it in doc["items"]:
        glyph = GLYPHS[it["category"]]
        lines.append(
            f"{indent}{it['feature_name']:<{width}}  {it['woe']:+10.4f}  "
            f"{glyph:<3}  {it['direction']}"
        )
    return lines


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load_table(args):
    if getattr(args, "concepts", None):
        if getattr(args, "data", None):
            raise _UsageError("--data and --concepts are mutually exclusive")
        return load_concepts(args.concepts)
    if not getattr(args, "data", None):
        raise _UsageError("one of --data or --concepts is required")
    return load_csv(args.data, CsvSchema(label_column=args.label_column))


def cmd_fit(args) -> int:
    table = _load_table(args)
    names = args.label_names.split(",") if args.label_names else None
    model = fit(table, assumption=args.assumption, ridge=args.ridge, label_names=names)
    scale = (
        SignificanceScale(thresholds=tuple(_parse_floats(args.thresholds, "--thresholds")))
        if args.thresholds
        else DEFAULT_SCALE
    )
    doc = persistence.model_to_doc(model, scale)
    if args.out:
        save_model(model, scale, args.out)
        human = [f"model written to {args.out}"]
        if args.format == DOC:
            print(dumps({"kind": "fit-result", "out": args.out, "classes": model.n_classes,
                         "features": model.n_features}))
        else:
            print(human[0])
        return 0
    _emit(args, doc, [dumps(doc)])
    return 0


def cmd_classify(args) -> int:
    model, _scale = load_model(args.model)
    x = _parse_floats(args.input, "--input")
    predicted = classify(model, x)
    post = posterior(model, x)
    totals = [total_woe(model, x, h) for h in range(model.n_classes)]
    doc = {
        "kind": "classification",
        "prediction": {"id": predicted.id, "name": predicted.name},
        "posterior": [float(p) for p in post],
        "total_woe": [
            {"id": lab.id, "name": lab.name, "value": totals[lab.id]}
            for lab in model.labels
        ],
    }
    human = [f"prediction: {predicted.name} (id {predicted.id})"]
    for lab in model.labels:
        human.append(
            f"  {lab.name}: posterior {post[lab.id]:.4f}  total WoE {totals[lab.id]:+.4f}"
        )
    _emit(args, doc, human)
    return 0


def cmd_explain(args) -> int:
    model, scale = load_model(args.model)
    x = _parse_floats(args.input, "--input")
    gamma = _parse_floats(args.gamma, "--gamma") if args.gamma else None
    view = condition_view(model, x, args.condition, gamma=gamma, scale=scale)
    doc = persistence.view_to_doc(view)
    human = [f"condition: {view.condition}"]
    if view.prediction is not None:
        human.append(f"prediction: {view.prediction.name} (id {view.prediction.id})")
    for rep_doc in doc["reports"]:
        human.extend(_render_report(rep_doc))
    _emit(args, doc, human)
    return 0


def cmd_select_instances(args) -> int:
    model, _scale = load_model(args.model)
    pool = _load_table(args)
    selection = metrics.select_instances(
        model, pool, low_t=args.low, high_t=args.high, per_category=args.per_category
    )
    doc = {
        "kind": "instance-selection",
        "low_threshold": selection.low_threshold,
        "high_threshold": selection.high_threshold,
        "categories": {
            cat: [
                {
                    "index": inst.index,
                    "entropy": inst.entropy,
                    "predicted_label": inst.predicted_label,
                    "true_label": inst.true_label,
                }
                for inst in insts
            ]
            for cat, insts in selection.by_category.items()
        },
        "shortfalls": list(selection.shortfalls),
    }
    human = []
    for cat, insts in selection.by_category.items():
        human.append(f"{cat}: {len(insts)} instance(s)")
        for inst in insts:
            human.append(
                f"  index={inst.index}  entropy={inst.entropy:.4f}  "
                f"predicted={inst.predicted_label}  true={inst.true_label}"
            )
    for cat in selection.shortfalls:
        human.append(f"shortfall: {cat}")
    if args.out_tasks:
        chosen = [inst for insts in selection.by_category.values() for inst in insts]
        tasks = tuple(
            Task(
                id=f"t{inst.index:04d}",
                values=tuple(float(v) for v in pool.rows[inst.index]),
                true_label=inst.true_label,
            )
            for inst in sorted(chosen, key=lambda i: i.index)
        )
        save_task_pool(TaskPool(feature_names=pool.feature_names, tasks=tasks), args.out_tasks)
        human.append(f"task pool written to {args.out_tasks}")
        doc["out_tasks"] = args.out_tasks
    _emit(args, doc, human)
    return 0


def cmd_evaluate(args) -> int:
    rows = []
    for path in args.exports:
        export = persistence.read_document(path)
        responses, traces = metrics.records_from_export(export)
        row = {
            "session": export.get("session", {}).get("id", path),
            "condition": "+".join(export.get("session", {}).get("condition", [])),
            "n_decisions": len(responses),
            "brier": metrics.brier(responses) if responses else None,
            "over_reliance": metrics.over_reliance(responses, traces) if responses else None,
            "under_reliance": metrics.under_reliance(responses, traces) if responses else None,
            "selected_hypotheses_pct": metrics.selected_pct_from_export(export),
            "mean_instance_seconds": (
                float(np.mean([r.duration for r in responses])) if responses else None
            ),
        }
        rows.append(row)
    doc = {"kind": "evaluation", "sessions": rows}

    def show(v) -> str:
        if v is None:
            return "undefined"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    columns = [
        "session", "condition", "n_decisions", "brier",
        "over_reliance", "under_reliance", "selected_hypotheses_pct",
        "mean_instance_seconds",
    ]
    cells = [[show(r[c]) for c in columns] for r in rows]
    widths = [
        max(len(col), *(len(row[i]) for row in cells)) if cells else len(col)
        for i, col in enumerate(columns)
    ]
    human = ["  ".join(col.ljust(widths[i]) for i, col in enumerate(columns))]
    for row in cells:
        human.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    _emit(args, doc, human)
    return 0


def cmd_serve(args) -> int:
    config = service.config_from_env(
        model_path=args.model,
        task_pool_path=args.tasks,
        policy=args.policy,
        condition=args.condition,
        seed=args.seed,
        log_dir=args.log_dir,
        bind=args.bind,
    )
    app = service.create_app(config)
    host, _, port = config.bind.partition(":")
    import uvicorn

    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8000"), log_level="warning")
    return 0


def cmd_export(args) -> int:
    doc = service.export_from_log(args.log, args.model, args.tasks)
    print(dumps(doc))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="woe-engine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p) -> None:
        p.add_argument("--format", choices=(HUMAN, DOC), default=HUMAN)

    p = sub.add_parser("fit", help="fit a model from a labeled CSV or concept file")
    p.add_argument("--data", default=None, help="labeled CSV")
    p.add_argument("--concepts", default=None, help="concept-activation file")
    p.add_argument("--label-column", default="label")
    p.add_argument("--assumption", choices=("dependent", "independent"), default="dependent")
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--label-names", default=None, help="comma-separated class names")
    p.add_argument("--thresholds", default=None, help="t1,t2,t3 significance thresholds")
    p.add_argument("--out", default=None, help="write the model document here")
    add_format(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="label + posterior + total WoE per hypothesis")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="comma-separated feature values")
    add_format(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("explain", help="evidence view for a condition")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="comma-separated feature values")
    p.add_argument("--condition", choices=("C1", "C2", "C3"), required=True)
    p.add_argument("--gamma", default=None, help="comma-separated importance weights")
    add_format(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("select-instances", help="categorize pool instances by correctness x uncertainty")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None, help="labeled CSV pool")
    p.add_argument("--concepts", default=None, help="concept-activation pool")
    p.add_argument("--label-column", default="label")
    p.add_argument("--low", type=float, default=0.3)
    p.add_argument("--high", type=float, default=0.7)
    p.add_argument("--per-category", type=int, default=None)
    p.add_argument("--out-tasks", default=None, help="write selected instances as a task pool")
    add_format(p)
    p.set_defaults(func=cmd_select_instances)

    p = sub.add_parser("evaluate", help="metric table from session exports")
    p.add_argument("exports", nargs="+", help="session-export JSON files")
    add_format(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the study HTTP service")
    p.add_argument("--model", default=None)
    p.add_argument("--tasks", default=None)
    p.add_argument("--policy", choices=service.POLICIES, default=None)
    p.add_argument("--condition", choices=("C1", "C2", "C3"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log-dir", default=None)
    p.add_argument("--bind", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="rebuild a session export from its log file")
    p.add_argument("--log", required=True, help="path to the session .jsonl log")
    p.add_argument("--model", required=True)
    p.add_argument("--tasks", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
