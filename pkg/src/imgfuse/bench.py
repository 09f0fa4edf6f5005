"""Benchmark harness: fuse a corpus with several methods, tabulate scores.

The corpus directory holds registered pairs named ``<pair>_a.png`` and
``<pair>_b.png``.  Each pair x method run writes the fused image, a CSV
metric row and a Markdown table; colour pairs get "n/a" metric cells.
Runs are seeded and deterministic, so two runs with the same weights and
config produce identical images and tables.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List

import torch

from imgfuse.backbone import BackboneHandle
from imgfuse.config import ToolConfig, save_config
from imgfuse.errors import FusionToolError
from imgfuse.images import load_image, save_image
from imgfuse.pipeline import FusionReport, method_spec, run_method

log = logging.getLogger("imgfuse.bench")


def discover_pairs(corpus_dir) -> List[str]:
    """Pair names with both `_a.png`/`_b.png` (or .jpg) present, sorted."""
    names = {}
    for entry in sorted(os.listdir(corpus_dir)):
        stem, ext = os.path.splitext(entry)
        if ext.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        if stem.endswith("_a") or stem.endswith("_b"):
            names.setdefault(stem[:-2], set()).add(stem[-1])
    return [n for n, sides in sorted(names.items()) if sides == {"a", "b"}]


def _pair_paths(corpus_dir, name):
    for ext in (".png", ".jpg", ".jpeg"):
        a = os.path.join(corpus_dir, f"{name}_a{ext}")
        b = os.path.join(corpus_dir, f"{name}_b{ext}")
        if os.path.exists(a) and os.path.exists(b):
            return a, b
    raise FusionToolError(f"pair {name!r} not found in {corpus_dir}")


def bench(handle: BackboneHandle, corpus_dir, methods, out_dir,
          config: ToolConfig = None) -> List[FusionReport]:
    """Run every method over every readable pair and write the result set.

    Outputs in ``out_dir``: fused images ``<pair>_<method>.png``,
    ``metrics.csv``, ``table.md``, ``reports.json`` and the replayable
    ``config.yaml`` snapshot.  Unreadable pairs are skipped with a warning
    and recorded in the report set.
    """
    config = config or ToolConfig()
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(config.seed)

    specs = [method_spec(m) for m in methods]
    pair_names = discover_pairs(corpus_dir)
    if not pair_names:
        raise FusionToolError(f"no `<pair>_a/_b` image pairs found in {corpus_dir}")

    snapshot = config.snapshot()
    opt_config = config.optimizer_config()
    reports: List[FusionReport] = []
    skipped = []

    def run_pair(name):
        try:
            path_a, path_b = _pair_paths(corpus_dir, name)
            i0 = load_image(path_a)
            i1 = load_image(path_b)
        except FusionToolError as exc:
            log.warning("skipping pair %s: %s", name, exc)
            return name, None
        pair_reports = []
        for spec in specs:
            fused, report = run_method(
                handle, spec, i0, i1, optimizer_config=opt_config,
                pair_id=name, config_snapshot=snapshot,
            )
            fused_path = os.path.join(out_dir, f"{name}_{spec.method_id}.png")
            save_image(fused, fused_path)
            report.fused_path = fused_path
            pair_reports.append(report)
        return name, pair_reports

    workers = max(1, int(config.workers))
    if workers == 1:
        results = [run_pair(name) for name in pair_names]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_pair, pair_names))

    for name, pair_reports in results:
        if pair_reports is None:
            skipped.append(name)
        else:
            reports.extend(pair_reports)

    _write_csv(reports, os.path.join(out_dir, "metrics.csv"))
    _write_markdown(reports, skipped, os.path.join(out_dir, "table.md"))
    with open(os.path.join(out_dir, "reports.json"), "w") as f:
        json.dump({"skipped_pairs": skipped,
                   "reports": [r.to_dict() for r in reports]}, f, indent=2)
    save_config(config, os.path.join(out_dir, "config.yaml"))
    return reports


def _metric_cells(report: FusionReport):
    if report.metrics is None:
        return "n/a", "n/a", "n/a"
    m = report.metrics
    return f"{m.q0:.4f}", f"{m.pe:.4f}", f"{m.q:.4f}"


def _write_csv(reports, path):
    with open(path, "w") as f:
        f.write("pair,method,q0,pe,q\n")
        for r in reports:
            q0, pe, q = _metric_cells(r)
            f.write(f"{r.pair_id},{r.method_id},{q0},{pe},{q}\n")


def _write_markdown(reports, skipped, path):
    lines = ["| Pair | Method | Q0 | Pe | Q |", "|---|---|---|---|---|"]
    for r in reports:
        q0, pe, q = _metric_cells(r)
        lines.append(f"| {r.pair_id} | {r.method_id.upper()} | {q0} | {pe} | {q} |")
    if skipped:
        lines.append("")
        lines.append(f"Skipped unreadable pairs: {', '.join(skipped)}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
