"""Command-line interface.

    imgfuse fuse --method fm0 --weights w.pt --input a.png b.png --output f.png
    imgfuse cam --weights w.pt --input a.png --output overlay.png
    imgfuse metrics --inputs a.png b.png --fused f.png --json
    imgfuse bench --weights w.pt --corpus pairs/ --methods fm0,fm3 --out results/
    imgfuse make-weights --out w.pt
    imgfuse make-corpus --out pairs/

Exit status is 0 on success; failures print a stage-tagged message and
return nonzero.
"""

import functools
import json
import sys

import click

from imgfuse import bench as bench_mod
from imgfuse.backbone import classify, load_backbone, save_initialised_checkpoint
from imgfuse.cam import class_relevance, render_overlay
from imgfuse.config import load_config, save_config
from imgfuse.corpus import write_corpus
from imgfuse.errors import FusionToolError
from imgfuse.images import load_image, save_image
from imgfuse.metrics import evaluate_pair
from imgfuse.optimize import write_trace_csv
from imgfuse.pipeline import method_spec, run_method


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FusionToolError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
def main():
    """Fuse image pairs through a frozen VGG19 and score the results."""


_config_option = click.option("--config", "config_path", type=click.Path(exists=True),
                              default=None, help="Flat YAML config file.")
_weights_option = click.option("--weights", type=click.Path(), default=None,
                               help="VGG19 checkpoint path (torchvision state-dict layout).")


def _load(config_path, **overrides):
    cfg = load_config(config_path, **overrides)
    if not cfg.weights:
        raise FusionToolError("no weights file configured; pass --weights or set it in the config")
    return cfg, load_backbone(cfg.weights)


@main.command()
@click.option("--method", type=click.Choice(["fm0", "fm1", "fm2", "fm3"]), required=True)
@click.option("--input", "inputs", nargs=2, type=click.Path(exists=True), required=True,
              metavar="A B", help="The two registered input images.")
@click.option("--output", type=click.Path(), required=True, help="Fused image path.")
@click.option("--rule", type=click.Choice(["psi0", "psi1"]), default=None,
              help="Override the feature combination rule for fm0/fm1.")
@click.option("--class0", type=int, default=None, help="Relevance class for image A.")
@click.option("--class1", type=int, default=None, help="Relevance class for image B.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the run report as JSON.")
@click.option("--trace-csv", type=click.Path(), default=None,
              help="Write per-epoch loss/learning-rate CSV.")
@click.option("--epochs", type=int, default=None)
@click.option("--iterations-per-epoch", type=int, default=None)
@click.option("--learning-rate", "initial_learning_rate", type=float, default=None)
@_weights_option
@_config_option
@_fail_cleanly
def fuse(method, inputs, output, rule, class0, class1, report_path, trace_csv,
         epochs, iterations_per_epoch, initial_learning_rate, weights, config_path):
    """Fuse two registered images into one."""
    cfg, handle = _load(
        config_path, weights=weights, epochs=epochs,
        iterations_per_epoch=iterations_per_epoch,
        initial_learning_rate=initial_learning_rate,
    )
    spec = method_spec(method)
    if rule is not None:
        if not spec.uses_optimiser:
            raise FusionToolError("--rule applies only to the optimisation methods")
        spec = type(spec)(spec.method_id, rule, spec.uses_cam, spec.uses_optimiser)
    i0 = load_image(inputs[0])
    i1 = load_image(inputs[1])
    fused, report = run_method(
        handle, spec, i0, i1, optimizer_config=cfg.optimizer_config(),
        class0=class0, class1=class1, pair_id=output,
        config_snapshot=cfg.snapshot(),
    )
    save_image(fused, output)
    report.fused_path = output
    if report_path:
        with open(report_path, "w") as f:
            json.dump(report.to_dict(), f, indent=2)
    if trace_csv and report.trace is not None:
        write_trace_csv(report.trace, trace_csv)
    click.echo(f"wrote {output}")


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--class", "class_id", type=int, default=None,
              help="Class to map; defaults to the image's top-1 class.")
@click.option("--output", type=click.Path(), required=True, help="Heat-map overlay PNG.")
@_weights_option
@_config_option
@_fail_cleanly
def cam(input_path, class_id, output, weights, config_path):
    """Write a class-relevance heat-map overlay for one image."""
    cfg, handle = _load(config_path, weights=weights)
    image = load_image(input_path)
    if class_id is None:
        pred = classify(handle, image)
        class_id = pred.class_id
        click.echo(f"top-1 class: {pred.class_label} ({pred.class_id}), "
                   f"p={pred.probability:.3f}")
    relevance = class_relevance(handle, image, class_id,
                                layers=cfg.cam_layer_names(),
                                degenerate_policy=cfg.degenerate_policy)
    if relevance.degenerate:
        click.echo("warning: relevance map degenerate (constant); using even weights", err=True)
    save_image(render_overlay(image, relevance), output)
    click.echo(f"wrote {output}")


@main.command()
@click.option("--inputs", nargs=2, type=click.Path(exists=True), required=True,
              metavar="A B")
@click.option("--fused", type=click.Path(exists=True), required=True)
@click.option("--json", "as_json", is_flag=True, help="Emit a JSON object.")
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Append a `pair,method,q0,pe,q` row to this file.")
@click.option("--luma", is_flag=True, help="Score colour images on their luma plane.")
@click.option("--pair-id", default="", help="Pair label for the CSV row.")
@_config_option
@_fail_cleanly
def metrics(inputs, fused, as_json, csv_path, luma, pair_id, config_path):
    """Score a fused image against its two inputs."""
    cfg = load_config(config_path)
    i0 = load_image(inputs[0])
    i1 = load_image(inputs[1])
    f = load_image(fused)
    report = evaluate_pair(i0, i1, f, window=cfg.metric_window,
                           constants=cfg.pe_constants(), pair_id=pair_id or fused,
                           allow_colour_luma=luma)
    if as_json:
        click.echo(json.dumps({"pair": report.pair_id, "q0": report.q0,
                               "pe": report.pe, "q": report.q}))
    else:
        click.echo(f"q0={report.q0:.4f} pe={report.pe:.4f} q={report.q:.4f}")
    if csv_path:
        import os
        new = not os.path.exists(csv_path)
        with open(csv_path, "a") as out:
            if new:
                out.write("pair,method,q0,pe,q\n")
            out.write(f"{report.pair_id},,{report.q0:.6f},{report.pe:.6f},{report.q:.6f}\n")


@main.command(name="bench")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--methods", default="fm0,fm1,fm2,fm3",
              help="Comma-separated subset of fm0,fm1,fm2,fm3.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--workers", type=int, default=None)
@click.option("--seed", type=int, default=None)
@_weights_option
@_config_option
@_fail_cleanly
def bench_cmd(corpus, methods, out_dir, workers, seed, weights, config_path):
    """Fuse a corpus of pairs with several methods and tabulate the scores."""
    cfg, handle = _load(config_path, weights=weights, workers=workers, seed=seed)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    reports = bench_mod.bench(handle, corpus, method_list, out_dir, config=cfg)
    click.echo(f"{len(reports)} runs -> {out_dir}")


@main.command(name="make-weights")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0)
@_fail_cleanly
def make_weights(out_path, seed):
    """Write a deterministic randomly initialised VGG19 checkpoint.

    Use this when no pretrained checkpoint is available; for meaningful
    class semantics supply an ImageNet-trained VGG19 state dict instead.
    """
    save_initialised_checkpoint(out_path, seed=seed)
    click.echo(f"wrote {out_path} (seed {seed})")


@main.command(name="make-corpus")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--pairs", type=int, default=4)
@click.option("--size", type=int, default=96)
@click.option("--seed", type=int, default=0)
@click.option("--colour-pairs", type=int, default=0,
              help="How many of the pairs are RGB instead of grayscale.")
@_fail_cleanly
def make_corpus(out_dir, pairs, size, seed, colour_pairs):
    """Generate a synthetic multi-focus pair corpus for the bench harness."""
    names = write_corpus(out_dir, n_pairs=pairs, size=size, seed=seed,
                         colour_pairs=colour_pairs)
    click.echo(f"wrote {len(names)} pairs to {out_dir}")


@main.command()
@click.option("--out", "out_path", type=click.Path(), required=True)
@_config_option
@_fail_cleanly
def init_config(out_path, config_path):
    """Write the effective configuration to a YAML file."""
    save_config(load_config(config_path), out_path)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
