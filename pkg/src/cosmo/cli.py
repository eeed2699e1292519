"""Command-line pipeline: ingest, discover, train, grid, simulate, report, serve.

Exit codes: 0 success, 1 usage error, 2 data error (bad input files or
parameters describing data), 3 runtime failure.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from . import __version__
from .condnet import (
    ConditionedNet,
    NetConfig,
    TrainConfig,
    Vocabulary,
    grid_search,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .condnet.training import fit_normalizers, write_metrics_jsonl
from .declare import (
    ConstraintUniverse,
    augment,
    check_consistency,
    fulfillment_vector,
    instantiate_universe,
)
from .artifacts import build_dfg, coverage_delta, coverage_delta_csv, export_dot
from .errors import CosmoError, DataError
from .eventlog import (
    CsvMapping,
    SplitSpec,
    clean,
    derive_times,
    export_jsonl,
    parse_csv,
    parse_jsonl,
    parse_xes,
    split,
)
from .simulator import (
    ConditionEdit,
    SeedEvent,
    SimulationConfig,
    generated_log_jsonl,
    simulate,
)

EDIT_PATTERN = re.compile(r"^\s*([A-Za-z0-9]+)\(([^)]*)\)\s*=\s*([01])\s*$")


def load_log(path: str, fmt: str | None = None,
             csv_mapping: CsvMapping | None = None):
    suffix = (fmt or Path(path).suffix.lstrip(".")).lower()
    if suffix == "xes":
        return parse_xes(path)
    if suffix == "csv":
        mapping = csv_mapping or CsvMapping("case_id", "activity", "timestamp")
        return parse_csv(path, mapping)
    if suffix == "jsonl":
        return parse_jsonl(path)
    raise DataError(f"cannot determine log format of {path!r}; "
                    "use --format xes|csv|jsonl")


def load_universe(path: str) -> ConstraintUniverse:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read universe file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid universe JSON: {exc}") from exc
    if isinstance(data, dict):  # wrapped form written by `discover`
        data = data["instances"]
    return ConstraintUniverse.from_json(data)


def save_universe(universe: ConstraintUniverse, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(
            {"fingerprint": universe.fingerprint, "instances": universe.to_json()},
            fh, sort_keys=True, indent=2,
        )


def parse_edit(universe: ConstraintUniverse, text: str) -> ConditionEdit:
    """Parse 'Template(A)=1' or 'Template(A,B)=0' against the universe."""
    m = EDIT_PATTERN.match(text)
    if not m:
        raise DataError(
            f"cannot parse edit {text!r}; expected Template(A)=1 or Template(A,B)=0"
        )
    template, args, target = m.group(1), m.group(2), int(m.group(3))
    parts = [p.strip() for p in args.split(",")]
    if len(parts) not in (1, 2) or any(not p for p in parts):
        raise DataError(f"edit {text!r} must name one or two activities")
    a = parts[0]
    b = parts[1] if len(parts) == 2 else None
    coord = universe.find(template, a, b)
    if coord is None:
        raise DataError(f"constraint {template}({args}) is not in the universe")
    return ConditionEdit(coord, target)


def _set_config_defaults(ctx: click.Context, param, value):
    if value is None:
        return None
    try:
        with open(value) as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config file {value}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{value}: invalid config JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise DataError(f"{value}: config must be a JSON object")
    known = {"ingest", "discover", "train", "grid", "simulate", "report", "serve"}
    if overrides and all(k in known and isinstance(v, dict)
                         for k, v in overrides.items()):
        ctx.default_map = overrides          # per-subcommand sections
    else:
        ctx.default_map = {k: overrides for k in known}  # flat: apply everywhere
    return value


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
@click.option("--config", type=click.Path(exists=False), default=None,
              callback=_set_config_defaults, expose_value=False, is_eager=True,
              help="JSON file whose entries override flag defaults.")
def cli():
    """Constraint-conditioned process simulation toolkit."""


@cli.command()
@click.argument("input_path", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Cleaned log destination (line-delimited JSON).")
@click.option("--format", "fmt", type=click.Choice(["xes", "csv", "jsonl"]),
              default=None, help="Input format; inferred from extension if omitted.")
@click.option("--case-col", default="case_id", show_default=True)
@click.option("--activity-col", default="activity", show_default=True)
@click.option("--timestamp-col", default="timestamp", show_default=True)
@click.option("--timestamp-format", default="%Y-%m-%d %H:%M:%S",
              show_default=True, help="strptime format for CSV timestamps.")
@click.option("--min-len", default=3, show_default=True,
              help="Drop traces shorter than this.")
@click.option("--max-len-percentile", default=0.90, show_default=True,
              help="Drop traces longer than this length percentile.")
@click.option("--no-clean", is_flag=True, help="Skip length filtering.")
def ingest(input_path, output, fmt, case_col, activity_col, timestamp_col,
           timestamp_format, min_len, max_len_percentile, no_clean):
    """Parse a raw event log, filter by length, derive per-event times."""
    mapping = CsvMapping(case_col, activity_col, timestamp_col, timestamp_format)
    log = load_log(input_path, fmt, mapping)
    total = len(log)
    if not no_clean:
        log = clean(log, min_len=min_len, max_len_percentile=max_len_percentile)
    log = derive_times(log)
    export_jsonl(log, output)
    click.echo(f"ingested {total} traces, kept {len(log)} "
               f"({len(log.activity_set)} activities) -> {output}")


@cli.command()
@click.argument("log_path", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Universe JSON destination.")
@click.option("--groups", default="E,C,PR,NR", show_default=True,
              help="Comma-separated template groups to ground.")
@click.option("--min-support", default=0.1, show_default=True,
              help="Minimum co-occurrence fraction for binary constraints.")
def discover(log_path, output, groups, min_support):
    """Ground constraint templates on a log's activities."""
    log = parse_jsonl(log_path)
    group_list = [g.strip() for g in groups.split(",") if g.strip()]
    universe = instantiate_universe(log, group_list, min_support)
    save_universe(universe, output)
    click.echo(f"{len(universe)} constraints "
               f"(fingerprint {universe.fingerprint}) -> {output}")


@cli.command(name="train")
@click.argument("log_path", type=click.Path())
@click.option("--universe", "universe_path", required=True, type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Checkpoint destination.")
@click.option("--metrics", type=click.Path(), default=None,
              help="Per-epoch metrics destination (line-delimited JSON).")
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--batch", default=32, show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--embed", default=32, show_default=True)
@click.option("--hidden", default=128, show_default=True)
@click.option("--layers", default=1, show_default=True)
@click.option("--lam-time", default=1.0, show_default=True,
              help="Weight of the remaining-time loss term.")
@click.option("--patience", default=None, type=int,
              help="Early-stop after this many non-improving validation epochs.")
@click.option("--val-ratio", default=0.2, show_default=True,
              help="Fraction of cases held out for validation (0 disables).")
@click.option("--seed", default=0, show_default=True)
def train_cmd(log_path, universe_path, output, metrics, lr, batch, epochs,
              embed, hidden, layers, lam_time, patience, val_ratio, seed):
    """Train the conditioned network and write a checkpoint."""
    log = parse_jsonl(log_path)
    universe = load_universe(universe_path)
    if val_ratio > 0:
        train_log, val_log = split(log, SplitSpec(ratio=1 - val_ratio, seed=seed))
        aug_val = augment(val_log, universe)
    else:
        train_log, aug_val = log, None
    aug_train = augment(train_log, universe)
    exec_norm, rem_norm = fit_normalizers(aug_train)
    net = ConditionedNet(
        NetConfig(embed_dim=embed, hidden_dim=hidden, n_layers=layers),
        Vocabulary(log.activity_set), len(universe), universe.fingerprint,
        exec_norm, rem_norm, seed=seed,
    )
    config = TrainConfig(learning_rate=lr, batch_size=batch, epochs=epochs,
                         seed=seed, lam_time=lam_time, patience=patience)

    def progress(epoch, row):
        parts = [f"epoch {epoch}", f"train_ce {row['train_ce']:.4f}"]
        if "val_ce" in row:
            parts.append(f"val_ce {row['val_ce']:.4f}")
        click.echo("  ".join(parts), err=True)

    history = train(net, aug_train, config, aug_val, progress=progress)
    save_checkpoint(net, output)
    if metrics:
        write_metrics_jsonl(history, metrics)
    click.echo(f"trained {epochs} epochs -> {output}")


@cli.command()
@click.argument("log_path", type=click.Path())
@click.option("--universe", "universe_path", required=True, type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Leaderboard JSON destination.")
@click.option("--space", type=click.Path(), default=None,
              help="JSON file mapping hyperparameter names to value lists.")
@click.option("--epochs", default=5, show_default=True)
@click.option("--budget", default=None, type=int,
              help="Evaluate at most this many configurations.")
@click.option("--val-ratio", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def grid(log_path, universe_path, output, space, epochs, budget, val_ratio, seed):
    """Hyperparameter grid search ranked by validation loss."""
    log = parse_jsonl(log_path)
    universe = load_universe(universe_path)
    train_log, val_log = split(log, SplitSpec(ratio=1 - val_ratio, seed=seed))
    aug_train = augment(train_log, universe)
    aug_val = augment(val_log, universe)
    search_space = None
    if space:
        with open(space) as fh:
            search_space = json.load(fh)
    best, leaderboard = grid_search(aug_train, aug_val, search_space,
                                    epochs=epochs, seed=seed, budget=budget)
    with open(output, "w") as fh:
        json.dump({"best": best, "leaderboard": leaderboard}, fh,
                  sort_keys=True, indent=2)
    click.echo(f"best config: {json.dumps(best, sort_keys=True)}")


@cli.command(name="simulate")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path())
@click.option("--universe", "universe_path", required=True, type=click.Path())
@click.option("--base-log", "base_log_path", required=True, type=click.Path(),
              help="Log providing the base fulfillment vector and seed events.")
@click.option("--base-case", default=None,
              help="Case id of the base trace; first trace if omitted.")
@click.option("--edit", "edits", multiple=True, required=True,
              help='Constraint edit, e.g. "Existence(A)=1"; repeatable.')
@click.option("--n", "n_traces", default=300, show_default=True)
@click.option("--max-len", default=50, show_default=True)
@click.option("--sampling", type=click.Choice(["multinomial", "argmax"]),
              default="multinomial", show_default=True)
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--seed-activity", "seed_activities", multiple=True,
              help="Seed event activity; repeatable, cycled across traces. "
                   "Defaults to the first activity of every base-log trace.")
@click.option("--workers", default=1, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Simulation report JSON destination.")
@click.option("--traces-out", type=click.Path(), default=None,
              help="Also write generated traces as a line-delimited JSON log.")
def simulate_cmd(checkpoint_path, universe_path, base_log_path, base_case,
                 edits, n_traces, max_len, sampling, temperature, seed,
                 seed_activities, workers, output, traces_out):
    """Generate traces conditioned on an edited constraint vector."""
    universe = load_universe(universe_path)
    net = load_checkpoint(checkpoint_path,
                          expected_universe_fingerprint=universe.fingerprint)
    base_log = parse_jsonl(base_log_path)
    if base_case is None:
        base_trace = base_log.traces[0]
    else:
        matches = [t for t in base_log.traces if t.case_id == base_case]
        if not matches:
            raise DataError(f"case {base_case!r} not found in {base_log_path}")
        base_trace = matches[0]
    base = fulfillment_vector(universe, base_trace)
    if seed_activities:
        seeds = tuple(SeedEvent(a) for a in seed_activities)
    else:
        seeds = tuple(SeedEvent(t.events[0].activity) for t in base_log.traces)
    config = SimulationConfig(
        n_traces=n_traces, max_len=max_len, sampling=sampling,
        temperature=temperature, seed=seed,
        edits=tuple(parse_edit(universe, e) for e in edits),
        seed_events=seeds, workers=workers,
    )
    report = simulate(net, base, config)
    with open(output, "wb") as fh:
        fh.write(report.to_json_bytes())
    if traces_out:
        with open(traces_out, "w") as fh:
            fh.write("\n".join(generated_log_jsonl(report)) + "\n")
    click.echo(f"{len(report.traces)} traces, "
               f"satisfaction rate {report.conformance.overall_rate:.3f} -> {output}")


@cli.command()
@click.argument("report_path", type=click.Path())
@click.option("-o", "--out-dir", required=True, type=click.Path(),
              help="Directory for figures and delimited outputs.")
@click.option("--original-log", type=click.Path(), default=None,
              help="Reference log for activity-coverage deltas.")
@click.option("--dfg-threshold", default=0.0, show_default=True,
              help="Prune graph edges below this fraction of the max count.")
def report(report_path, out_dir, original_log, dfg_threshold):
    """Render figures, coverage tables, and a process graph from a report."""
    from . import plots  # matplotlib import deferred to the one command using it

    try:
        with open(report_path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read report {report_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{report_path}: invalid report JSON: {exc}") from exc
    for key in ("traces", "conformance"):
        if key not in data:
            raise DataError(f"{report_path}: missing {key!r}; not a simulation report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sequences = [t["activities"] for t in data["traces"]]
    written = []

    plots.satisfaction_figure(data["conformance"], out / "satisfaction.png")
    written.append("satisfaction.png")
    if data["conformance"]["per_constraint"]:
        plots.constraint_rates_figure(data["conformance"]["per_constraint"],
                                      out / "constraint_rates.png")
        written.append("constraint_rates.png")

    rows = [{"constraint": r["instance"], "imposed": r["imposed"],
             "rate": r["rate"]} for r in data["conformance"]["per_constraint"]]
    with open(out / "conformance.csv", "w") as fh:
        fh.write("constraint,imposed,rate\n")
        for r in rows:
            fh.write(f"\"{r['constraint']}\",{r['imposed']},{r['rate']}\n")
    written.append("conformance.csv")

    dfg = build_dfg(sequences)
    (out / "generated.dot").write_text(export_dot(dfg, dfg_threshold))
    written.append("generated.dot")

    if original_log:
        original = build_dfg(parse_jsonl(original_log))
        delta_rows = coverage_delta(original, dfg)
        (out / "coverage_delta.csv").write_text(coverage_delta_csv(delta_rows))
        plots.coverage_delta_figure(delta_rows, out / "coverage_delta.png")
        written.extend(["coverage_delta.csv", "coverage_delta.png"])
    click.echo(f"wrote {', '.join(written)} to {out_dir}")


@cli.command()
@click.option("--addr", envvar="COSMO_ADDR", default="127.0.0.1:8000",
              show_default=True, help="host:port to bind (env COSMO_ADDR).")
@click.option("--workspace", envvar="COSMO_WORKSPACE", default="./cosmo-workspace",
              show_default=True, help="Artifact directory (env COSMO_WORKSPACE).")
@click.option("--workers", default=2, show_default=True,
              help="Background job worker threads.")
def serve(addr, workspace, workers):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    host, _, port = addr.partition(":")
    app = create_app(workspace=workspace, workers=workers)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help / --version
        return exc.exit_code
    except (click.UsageError, click.Abort) as exc:
        if isinstance(exc, click.UsageError):
            exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CosmoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failures outside the domain hierarchy
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
