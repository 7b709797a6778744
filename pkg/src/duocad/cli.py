"""Operator command line: validate, render, score, replay, import, split, eval, serve.

Exit codes: 0 success, 1 data or validation failure, 2 usage error.  All
subcommands are deterministic given their inputs, config, and seed flags;
``--json`` switches reports to one canonical object per line.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import ConfigError, GlobalConfig, load_config
from .core import parse_design, to_canonical_json
from .dataset import (
    build_splits,
    exclusion_filter,
    import_designs,
    load_designs,
    load_records,
    round_stats,
    save_designs,
    splits_to_manifest,
    stats_to_csv,
)
from .engine import rollout_to_json, verify_rollout
from .harness import baseline_agent, build_benchmark, evaluate, load_items
from .metric import chamfer
from .render import Scene, rasterize, save_png, scene_to_svg


class Context:
    def __init__(self, config: GlobalConfig, as_json: bool):
        self.config = config
        self.as_json = as_json


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, as_json: bool) -> None:
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    ctx.obj = Context(config, as_json)


def _load_design_file(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_design(json.load(fh))


def _emit(ctx: Context, obj: dict, text: str) -> None:
    click.echo(to_canonical_json(obj) if ctx.as_json else text)


@main.command()
@click.argument("records", nargs=-1, required=True, type=click.Path(exists=True))
@click.pass_obj
def validate(ctx: Context, records: tuple[str, ...]) -> None:
    """Schema and invariant check over rollout record files."""
    failures = 0
    total = 0
    for path in records:
        try:
            rollouts = load_records(path)
        except ValueError as exc:
            click.echo(str(exc), err=True)
            failures += 1
            continue
        for i, rollout in enumerate(rollouts):
            total += 1
            problems = verify_rollout(rollout)
            try:
                rollout.target.validate()
            except Exception as exc:  # noqa: BLE001
                problems.append(f"invalid target: {exc}")
            for problem in problems:
                click.echo(f"{path}: rollout {i}: {problem}", err=True)
                failures += 1
    _emit(ctx, {"records": total, "failures": failures}, f"checked {total} records, {failures} failures")
    if failures:
        sys.exit(1)


@main.command()
@click.argument("design", type=click.Path(exists=True))
@click.option("--svg", "fmt", flag_value="svg", default=True)
@click.option("--png", "fmt", flag_value="png")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def render(ctx: Context, design: str, fmt: str, out: str | None) -> None:
    """Render a design file to SVG (stdout or --out) or PNG (--out)."""
    scene = Scene(_load_design_file(design), style=ctx.config.render)
    if fmt == "svg":
        svg = scene_to_svg(scene)
        if out:
            Path(out).write_text(svg, encoding="utf-8")
        else:
            click.echo(svg)
    else:
        if not out:
            raise click.UsageError("--png needs --out")
        save_png(rasterize(scene), out)


@main.command()
@click.argument("design_a", type=click.Path(exists=True))
@click.argument("design_b", type=click.Path(exists=True))
@click.pass_obj
def score(ctx: Context, design_a: str, design_b: str) -> None:
    """Print the symmetric chamfer distance between two design files."""
    value = chamfer(_load_design_file(design_a), _load_design_file(design_b), ctx.config.metric)
    _emit(ctx, {"distance": value}, repr(value))


@main.command()
@click.argument("records", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--check", is_flag=True, help="fail on any replay mismatch")
@click.pass_obj
def replay(ctx: Context, records: tuple[str, ...], check: bool) -> None:
    """Re-apply every rollout's actions and verify chaining."""
    bad = 0
    total = 0
    for path in records:
        for i, rollout in enumerate(load_records(path)):
            total += 1
            for problem in verify_rollout(rollout):
                click.echo(f"{path}: rollout {i}: {problem}", err=True)
                bad += 1
    _emit(ctx, {"records": total, "mismatches": bad}, f"replayed {total} records, {bad} mismatches")
    if check and bad:
        sys.exit(1)


@main.command(name="import")
@click.argument("designs", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
@click.option("--rescale", type=float, default=None, help="uniform scale factor")
@click.option("--min-gap", type=float, default=1.0, show_default=True)
@click.option("--per-bucket/--no-per-bucket", default=True, help="keep one design per signature bucket")
@click.pass_obj
def import_cmd(
    ctx: Context,
    designs: str,
    out: str,
    rescale: float | None,
    min_gap: float,
    per_bucket: bool,
) -> None:
    """Normalize, dedup, and optionally rescale a design pool for play."""
    pool = load_designs(designs)
    result = import_designs(pool, rescale=rescale, min_gap=min_gap, one_per_bucket=per_bucket)
    save_designs(out, result.accepted)
    for index, reason in result.rejected:
        click.echo(f"{designs}:{index + 1}: rejected: {reason}", err=True)
    _emit(
        ctx,
        {"accepted": len(result.accepted), "rejected": len(result.rejected)},
        f"accepted {len(result.accepted)}, rejected {len(result.rejected)}",
    )


@main.command()
@click.argument("records", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
@click.option("--keep-excluded", is_flag=True, help="skip the exclusion filter")
@click.pass_obj
def split(ctx: Context, records: str, out: str, keep_excluded: bool) -> None:
    """Write the coverage/dense/very-dense split manifest for a record file."""
    rollouts = load_records(records)
    if not keep_excluded:
        rollouts, excluded = exclusion_filter(rollouts, metric=ctx.config.metric)
        for e in excluded:
            click.echo(f"excluded ({e.reason})", err=True)
    splits = build_splits(rollouts, metric=ctx.config.metric)
    Path(out).write_text(splits_to_manifest(splits), encoding="utf-8")
    counts: dict[str, int] = {}
    for s in splits:
        counts[s.split] = counts.get(s.split, 0) + 1
    _emit(
        ctx,
        {"designs": len(splits), **counts},
        f"{len(splits)} designs: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())),
    )


@main.command()
@click.argument("records", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def stats(ctx: Context, records: str, out: str | None) -> None:
    """Per-round message/accuracy statistics as CSV."""
    table = stats_to_csv(round_stats(load_records(records), ctx.config.metric))
    if out:
        Path(out).write_text(table, encoding="utf-8")
    else:
        click.echo(table, nl=False)


def _make_agent(spec: str, seed: int, ctx: Context):
    if spec.startswith("chat:"):
        from .bridge import ChatMaker, ReplayTransport

        # chat:<config>  or  chat:<config>@<transcript>  (replay, no network)
        arg = spec.split(":", 1)[1]
        transcript = None
        if "@" in arg:
            arg, transcript = arg.split("@", 1)
        config = load_config(arg) if arg else ctx.config
        transport = ReplayTransport.from_file(transcript) if transcript else None
        return ChatMaker(config.endpoint, config.prompt, transport=transport)
    try:
        return baseline_agent(spec, seed)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@main.command(name="eval")
@click.argument("source", type=click.Path(exists=True))
@click.option("--agent", "agent_spec", required=True, help="noop|oracle|random|replay|greedy:k|chat:<config>")
@click.option("--ablate", type=click.Choice(["text", "drawing"]), default=None)
@click.option("--report", type=click.Path(), default=None, help="item-level CSV output")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def eval_cmd(
    ctx: Context,
    source: str,
    agent_spec: str,
    ablate: str | None,
    report: str | None,
    seed: int,
) -> None:
    """Evaluate a maker agent on benchmark items built from SOURCE.

    SOURCE is either a rollout record file (the benchmark is assembled from
    it) or a prebuilt item file.
    """
    first = _peek_first_line(source)
    if first and "rollout_id" in first and "current" in first:
        items = load_items(source)
    else:
        rollouts, _ = exclusion_filter(load_records(source), metric=ctx.config.metric)
        items = build_benchmark(rollouts, metric=ctx.config.metric)
    if not items:
        click.echo("no benchmark items in source", err=True)
        sys.exit(1)
    agent = _make_agent(agent_spec, seed, ctx)
    ablation = {"text": "drop_text", "drawing": "drop_drawing", None: "none"}[ablate]
    result = evaluate(agent, items, ablation=ablation, seed=seed, metric=ctx.config.metric)
    if report:
        Path(report).write_text(result.to_csv(), encoding="utf-8")
    _emit(
        ctx,
        {
            "items": len(result.results),
            "generation_mean": result.generation_mean,
            "refinement_mean": result.refinement_mean,
            "failures": result.failure_count,
        },
        f"items={len(result.results)} generation={result.generation_mean:.4f} "
        f"refinement={result.refinement_mean:.4f} failures={result.failure_count}",
    )


def _peek_first_line(path: str) -> dict | None:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    return None
                return obj if isinstance(obj, dict) else None
    return None


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", type=click.Path(), default=None, help="persist rollouts here")
@click.pass_obj
def serve(ctx: Context, host: str, port: int, data_dir: str | None) -> None:
    """Run the turn-based game server."""
    from .server import ServerSettings, run_server

    settings = ServerSettings(data_dir=Path(data_dir) if data_dir else None)
    run_server(host=host, port=port, settings=settings)


@main.command(name="export-rollouts")
@click.argument("records", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True)
@click.pass_obj
def export_rollouts(ctx: Context, records: str, out: str) -> None:
    """Round-trip a record file through the canonical serializer."""
    rollouts = load_records(records)
    with open(out, "w", encoding="utf-8") as fh:
        for r in rollouts:
            fh.write(rollout_to_json(r))
            fh.write("\n")
    _emit(ctx, {"records": len(rollouts)}, f"wrote {len(rollouts)} records")


if __name__ == "__main__":
    main()
