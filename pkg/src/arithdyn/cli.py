"""Command-line front end: ``arithdyn <command> ...``."""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click

from .degree import alpha_ratio, alpha_root, canonical_height
from .errors import ArithDynError, ConfigError, NonGrowing, TooShort, Unavailable
from .experiments import ExperimentResult, load_json, ns_check_document, parse_map, parse_point, run_experiment
from .maps import DEFAULT_BIT_BUDGET, iterate_orbit


def _load_map(path: str):
    doc = load_json(path)
    if "map" in doc:
        return str(doc.get("id", Path(path).stem)), parse_map(doc["map"], "map")
    return Path(path).stem, parse_map(doc, "map")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_bytes(text.encode("utf-8"))
    else:
        click.echo(text, nl=False)


def _table(header, rows, fmt):
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit_result(result: ExperimentResult, fmt: str, out: str | None):
    _emit(result.json_text() if fmt == "json" or not result.header else result.csv_text(), out)
    if result.exit_code:
        sys.exit(result.exit_code)


point_opt = click.option("--point", "point", required=True, help="Point shorthand, e.g. 2:1 or 2,3.")
budget_opt = click.option("--bit-budget", type=int, default=DEFAULT_BIT_BUDGET, show_default=True)
format_opt = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
out_opt = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")
seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")
tol_opt = click.option("--tolerance", type=float, default=None, help="Override the verdict tolerance.")


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except ArithDynError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(3)


@click.group(cls=_Group)
def main():
    """Arithmetic and dynamical degrees of rational self-maps."""


@main.command()
@click.argument("map_file", type=click.Path(exists=True, dir_okay=False))
@format_opt
@out_opt
def delta(map_file, fmt, out):
    """Dynamical degree of a map."""
    map_id, f = _load_map(map_file)
    try:
        rows = [[map_id, f.kind, f"{f.delta:.12g}", "certified" if _has_action(f) else "known"]]
    except Unavailable as exc:
        raise click.ClickException(str(exc)) from None
    _emit(_table(["map_id", "kind", "delta", "source"], rows, fmt), out)


def _has_action(f) -> bool:
    try:
        f.ns_action()
        return True
    except Unavailable:
        return False


@main.command()
@click.argument("map_file", type=click.Path(exists=True, dir_okay=False))
@point_opt
@click.option("--n", "n", type=int, default=10, show_default=True)
@budget_opt
@format_opt
@out_opt
def orbit(map_file, point, n, bit_budget, fmt, out):
    """Forward orbit with heights."""
    _, f = _load_map(map_file)
    rec = iterate_orbit(f, parse_point(f, point), n, bit_budget)
    rows = [[str(k), str(P), f"{h.value:.12g}"] for k, (P, h) in enumerate(zip(rec.points, rec.heights))]
    _emit(_table(["n", "point", "height"], rows, fmt), out)
    click.echo(f"status: {rec.status}", err=True)


@main.command()
@click.argument("map_file", type=click.Path(exists=True, dir_okay=False))
@point_opt
@click.option("--n", "n", type=int, default=20, show_default=True)
@budget_opt
@format_opt
@out_opt
def alpha(map_file, point, n, bit_budget, fmt, out):
    """Arithmetic-degree estimates (ratio and root)."""
    _, f = _load_map(map_file)
    rec = iterate_orbit(f, parse_point(f, point), n, bit_budget)
    rows = []
    for estimator in (alpha_ratio, alpha_root):
        try:
            est = estimator(rec)
            rows.append([est.method.value, f"{est.value:.12g}", f"{est.error_bar:.12g}", str(est.n_used)])
        except (TooShort, NonGrowing) as exc:
            rows.append([estimator.__name__.split("_")[1], "", "", str(rec.n)])
            click.echo(f"{estimator.__name__}: {exc}", err=True)
    _emit(_table(["method", "value", "error_bar", "n_used"], rows, fmt), out)
    click.echo(f"status: {rec.status}", err=True)


@main.command()
@click.argument("map_file", type=click.Path(exists=True, dir_okay=False))
@point_opt
@click.option("--n", "n", type=int, default=30, show_default=True)
@budget_opt
@format_opt
@out_opt
def canonical(map_file, point, n, bit_budget, fmt, out):
    """Canonical height with a tail bound."""
    _, f = _load_map(map_file)
    h = canonical_height(f, f.delta, parse_point(f, point), n, bit_budget)
    rows = [[f"{h.value:.12g}", f"{h.tail_bound:.6g}", str(h.n_used), str(h.empirical).lower()]]
    _emit(_table(["hhat", "tail_bound", "n_used", "empirical"], rows, fmt), out)


def _experiment_command(name: str, doc: str):
    @click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
    @seed_opt
    @budget_opt
    @tol_opt
    @format_opt
    @out_opt
    def command(config_file, seed, bit_budget, tolerance, fmt, out):
        config = load_json(config_file)
        if config.get("experiment", name) != name:
            raise ConfigError(f"config is for {config['experiment']!r}, not {name!r}", "experiment")
        config["experiment"] = name
        overrides = {"seed": seed, "tolerance": tolerance}
        if bit_budget != DEFAULT_BIT_BUDGET:
            overrides["bit_budget"] = bit_budget
        _emit_result(run_experiment(config, overrides), fmt, out)

    command.__doc__ = doc
    return main.command(name)(command)


_experiment_command("verify-ks", "KS verdict sweep over (map, point) cells.")
_experiment_command("find-points", "Curve points with positive canonical height.")
_experiment_command("disjoint-orbits", "Points with pairwise disjoint orbit segments.")
_experiment_command("invariance-suite", "Monomial alpha estimates under both torus embeddings.")


@main.command("ns-check")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@out_opt
def ns_check(model_file, out):
    """Check an NS model and pullback action."""
    _emit_result(ns_check_document(load_json(model_file)), "json", out)


if __name__ == "__main__":
    main()
