"""Command-line interface: ``beam run``, ``beam bench``, ``beam audit``."""

from __future__ import annotations

import json
import sys

import click

from .bench import format_csv, format_table, load_manifest, run_manifest
from .compiler import compile_clause, format_code
from .manager import EngineError, run_query
from .oracle import TraceParseError, audit_trace
from .program import LoadError, classify_vars, parse_program

STATS_ORDER = ["splits", "reductions", "promotions", "and_compressions", "suspensions",
               "wakes", "pruned_boxes", "reclaimed_boxes", "answers", "steps"]


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def code_listing(db) -> str:
    out = []
    for pred in db.predicates.values():
        if not pred.clauses:
            continue
        out.append(f"% {pred.name}/{pred.arity}")
        for i, c in enumerate(pred.clauses, 1):
            if not c.classified:
                classify_vars(c)
            out.append(format_code(compile_clause(c, i)))
        out.append("")
    return "\n".join(out)


def format_answer(ans: dict) -> str:
    if not ans:
        return "yes"
    return ", ".join(f"{k} = {v}" for k, v in ans.items())


@click.group()
@click.version_option(package_name="beam")
def main():
    """BEAM: And-Or tree rewriting engine for a Prolog subset."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("-g", "--goal", help="Query to run, e.g. 'ancestor(a,Z)'.")
@click.option("--strategy", type=click.Choice(["lazy", "eager"]), default="lazy", show_default=True)
@click.option("--implicit-pruning", type=click.Choice(["leftmost", "full"]), default="leftmost",
              show_default=True)
@click.option("--first", is_flag=True, help="Stop after the first answer.")
@click.option("--stats", is_flag=True, help="Print the statistics block.")
@click.option("--trace-json", type=click.Path(dir_okay=False, writable=True),
              help="Write rule-application events as JSON lines.")
@click.option("--trace-level", type=click.Choice(["rule", "instr"]), default="rule",
              show_default=True)
@click.option("--dump-code", is_flag=True, help="Print the compiled code of every predicate.")
@click.option("--quiet", is_flag=True, help="Suppress write/nl output.")
@click.option("--max-steps", type=int, default=5_000_000, show_default=True)
def run(file, goal, strategy, implicit_pruning, first, stats, trace_json, trace_level,
        dump_code, quiet, max_steps):
    """Load FILE and run GOAL; exit 0 when done, 2 on deadlock, 3 on step bound."""
    try:
        db = parse_program(_read(file))
    except LoadError as exc:
        raise click.ClickException(str(exc))
    if dump_code:
        click.echo(code_listing(db), nl=False)
        if goal is None:
            return
    if goal is None:
        raise click.UsageError("missing -g/--goal")
    fh = open(trace_json, "w", encoding="utf-8") if trace_json else None

    def sink(ev):
        fh.write(json.dumps(ev) + "\n")

    try:
        res = run_query(db, goal, strategy=strategy, implicit_pruning=implicit_pruning,
                        first=first, max_steps=max_steps, quiet=quiet, out=sys.stdout,
                        trace=sink if fh else None, trace_level=trace_level)
    except (LoadError, EngineError) as exc:
        raise click.ClickException(str(exc))
    finally:
        if fh:
            fh.close()
    if res.output and not quiet and not res.output.endswith("\n"):
        click.echo()
    for ans in res.answers:
        click.echo(format_answer(ans))
    if not res.answers:
        click.echo("no")
    if stats:
        d = res.stats.as_dict()
        click.echo("% stats")
        for k in STATS_ORDER:
            click.echo(f"%   {k:<16} {d[k]}")
        click.echo(f"%   {'wall_time':<16} {d['wall_time'] * 1000:.1f} ms")
    if res.status != "ok":
        click.echo(f"% {res.status}: {res.diagnostic}", err=True)
    sys.exit(res.exit_code)


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, writable=True),
              help="Write the CSV report here instead of after the table.")
@click.option("--only", multiple=True, help="Run only the named entries.")
def bench(manifest, csv_path, only):
    """Run every entry of MANIFEST and compare split counts with the targets."""
    entries = load_manifest(manifest)
    rows = run_manifest(entries, only=set(only) or None)
    click.echo(format_table(rows), nl=False)
    text = format_csv(rows)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo()
        click.echo(text, nl=False)


@main.command()
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.argument("program", type=click.Path(exists=True, dir_okay=False))
def audit(trace, program):
    """Replay TRACE (JSON lines) against PROGRAM and report illegal steps."""
    try:
        rep = audit_trace(trace, _read(program))
    except TraceParseError as exc:
        raise click.ClickException(f"malformed trace: {exc}")
    except LoadError as exc:
        raise click.ClickException(str(exc))
    if rep.ok:
        click.echo(f"ok: {rep.events} events, {rep.splits} splits")
        return
    for v in rep.violations:
        click.echo(f"violation: {v}")
    sys.exit(1)


if __name__ == "__main__":
    main()
