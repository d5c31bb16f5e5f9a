"""``safectl`` command line.

Exit codes: 0 all checks passed, 1 counterexample or violation found,
2 usage or configuration error.
"""

from __future__ import annotations

import os
import sys
import tempfile
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import click

from safectl import analysis
from safectl.controller import MODELS
from safectl.hp import interp
from safectl.hp.parser import HpSyntaxError, parse_formula, parse_problem, parse_program
from safectl.hp.syntax import BoxProblem
from safectl.scenario import ScenarioError, dump_scenario, load_scenario, tomllib
from safectl.simulator import (
    EpisodeConfig, InitViolation, check_invariant_obligations, run_batch, run_episode,
)
from safectl.threat import AREQ_VARIANTS, SystemParams

EXIT_OK, EXIT_FOUND, EXIT_USAGE = 0, 1, 2
TRACE_COLUMNS = ("t", "x", "v", "a_n", "a_s", "x_c", "v_c", "intervened")


class UsageFailure(click.ClickException):
    exit_code = EXIT_USAGE


def write_atomic(path, text: str):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x) -> str:
    return format(float(x), ".17g")


def trace_csv(trace) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for r in trace:
        lines.append(",".join([_num(r.t), _num(r.state.x), _num(r.state.v), _num(r.a_n), _num(r.a_s),
                               _num(r.constraint.x_c), _num(r.constraint.v_c), str(int(r.intervened))]))
    return "\n".join(lines) + "\n"


def _parse_params(text: str) -> SystemParams:
    try:
        values = [float(x) for x in text.split(",")]
        return SystemParams(*values)
    except (TypeError, ValueError) as exc:
        raise UsageFailure(f"--params expects a_n_max,a_n_min,a_s_min,T: {exc}") from exc


@click.group()
@click.version_option(package_name="safectl")
def cli():
    """Verification workbench for longitudinal safety controllers."""


@cli.command()
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--out", "out", type=click.Path(dir_okay=False), help="Trace CSV output path.")
def simulate(scenario, out):
    """Run one episode described by a SCENARIO file and write its trace."""
    try:
        cfg = load_scenario(scenario).config
        trace, verdict = run_episode(cfg)
    except (ScenarioError, InitViolation, ValueError) as exc:
        raise UsageFailure(str(exc)) from exc
    text = trace_csv(trace)
    if out:
        write_atomic(out, text)
    else:
        click.echo(text, nl=False)
    last = trace[-1]
    click.echo(f"outcome = {verdict.outcome}; t = {_num(last.t)}; x = {_num(last.state.x)}; "
               f"v = {_num(last.state.v)}; seed = {cfg.seed}", err=True)
    sys.exit(EXIT_OK if verdict.is_safe else EXIT_FOUND)


@cli.command()
@click.option("--model", type=click.Choice(MODELS), required=True)
@click.option("--episodes", type=click.IntRange(min=1), default=10_000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--params", "params_text", default="2,3,5,0.5", show_default=True,
              help="a_n_max,a_n_min,a_s_min,T")
@click.option("--depth", type=click.IntRange(min=0), default=50, show_default=True)
@click.option("--dense", type=click.IntRange(min=2), default=20, show_default=True)
@click.option("--obligations", type=click.IntRange(min=0), default=10_000, show_default=True,
              help="Loop-invariant samples (0 skips).")
@click.option("--variant", type=click.Choice(AREQ_VARIANTS), default="as-written", show_default=True)
@click.option("--replay-out", type=click.Path(dir_okay=False), default="counterexample.toml",
              show_default=True, help="Where a violating episode is written as a scenario.")
def check(model, episodes, seed, params_text, depth, dense, obligations, variant, replay_out):
    """Batch guarantee check plus loop-invariant obligations for one model."""
    p = _parse_params(params_text)
    try:
        template = EpisodeConfig(model, p, depth=depth, dense=dense, seed=seed, variant=variant)
    except ValueError as exc:
        raise UsageFailure(str(exc)) from exc
    batch = run_batch(template, episodes)
    click.echo(f"model = {model}; seed = {seed}; episodes = {episodes}; violations = {batch.violations}; "
               f"aborted = {batch.aborted}")
    found = not batch.passed
    if found:
        first = batch.violating_indices[0]
        write_atomic(replay_out, dump_scenario(replace(template, episode_index=first)))
        click.echo(f"counterexample: episode {first}; replay with: safectl simulate {replay_out}")
    if obligations:
        ob = check_invariant_obligations(model, p, obligations, seed, variant=variant)
        click.echo(f"obligations: samples = {obligations}; failures = {ob.failures}")
        found = found or not ob.passed
        if ob.first_counterexample:
            click.echo(f"obligation counterexample: {ob.first_counterexample}")
    sys.exit(EXIT_FOUND if found else EXIT_OK)


def _load_ranges(path) -> analysis.ParamRanges:
    if path is None:
        return analysis.ParamRanges()
    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageFailure(f"{path}: {exc}") from exc
    allowed = {"a_s_min", "a_n_min", "a_n_max", "T", "v", "a_n"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise UsageFailure(f"{path}: unknown key(s): {', '.join(unknown)}")
    try:
        return analysis.ParamRanges(**{k: tuple(v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise UsageFailure(f"{path}: {exc}") from exc


@cli.command()
@click.option("--samples", type=click.IntRange(min=0), default=1_000_000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--ranges", "ranges_path", type=click.Path(dir_okay=False),
              help="TOML file of [lo, hi] pairs for a_s_min, a_n_min, a_n_max, T, v, a_n.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.option("--margins-csv", "csv_path", type=click.Path(dir_okay=False))
def compare(samples, seed, ranges_path, report_path, csv_path):
    """Check that the conservative and required-acceleration distances dominate."""
    ranges = _load_ranges(ranges_path)
    report = analysis.compare_metrics(ranges, samples, seed, keep_margins=csv_path is not None)
    text = report.to_text()
    if report_path:
        write_atomic(report_path, text)
    if csv_path:
        write_atomic(csv_path, analysis.margins_csv(report))
    click.echo(text, nl=False)
    sys.exit(EXIT_OK if report.passed else EXIT_FOUND)


# --- hybrid programs ----------------------------------------------------------

def _budget_options(f):
    for opt in reversed([
        click.option("--depth", type=click.IntRange(min=1), default=2, show_default=True),
        click.option("--samples", type=click.IntRange(min=1), default=3, show_default=True),
        click.option("--durations", type=click.IntRange(min=1), default=3, show_default=True),
        click.option("--dense", type=click.IntRange(min=1), default=4, show_default=True),
        click.option("--no-dense-monitor", is_flag=True, help="Disable probes inside ODEs."),
        click.option("--max-branches", type=click.IntRange(min=1), default=200_000, show_default=True),
        click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True),
    ]):
        f = opt(f)
    return f


def _budget(depth, samples, durations, dense, no_dense_monitor, max_branches, seed):
    return interp.ExplorationBudget(depth=depth, samples=samples, durations=durations, dense=dense,
                                    seed=seed, max_branches=max_branches,
                                    dense_monitor=not no_dense_monitor)


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def _parse_state(items) -> dict:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        try:
            if not sep:
                raise ValueError("expected NAME=VALUE")
            out[name.strip()] = Fraction(value.strip())
        except ValueError as exc:
            raise UsageFailure(f"bad --state {item!r}: {exc}") from exc
    return out


def _load_hp(path, init_text, post_text):
    """A problem file, or a bare program file with --init and --post formulas."""
    text = _read(path)
    try:
        if init_text is None and post_text is None:
            return parse_problem(text)
        if init_text is None or post_text is None:
            raise UsageFailure("--init and --post must be given together")
        return BoxProblem(parse_formula(init_text), parse_program(text), parse_formula(post_text))
    except HpSyntaxError as exc:
        raise UsageFailure(f"{path}: {exc}") from exc


def _program_of(text):
    """The program of a problem file, or a bare program; reports the furthest-reaching error."""
    try:
        return parse_problem(text).program
    except HpSyntaxError as as_problem:
        try:
            return parse_program(text)
        except HpSyntaxError as as_program:
            key = lambda e: (e.line, e.column)  # noqa: E731
            raise max(as_problem, as_program, key=key)


@cli.group()
def hp():
    """Run or falsify hybrid programs written in the DSL."""


@hp.command("run")
@click.argument("program", type=click.Path(dir_okay=False))
@click.option("--state", "state", multiple=True, help="Initial value NAME=VALUE (repeatable).")
@_budget_options
def hp_run(program, state, **budget_kw):
    """Explore the runs of a PROGRAM file from --state and print the outcomes.

    For a problem file the program inside the box is run.
    """
    try:
        prog = _program_of(_read(program))
        outcomes = interp.run(prog, _parse_state(state), _budget(**budget_kw))
    except HpSyntaxError as exc:
        raise UsageFailure(f"{program}: {exc}") from exc
    except (interp.HpRuntimeError, interp.BudgetExhausted) as exc:
        raise UsageFailure(str(exc)) from exc
    for o in outcomes:
        if isinstance(o, interp.Completed):
            vals = " ".join(f"{k}={interp.format_real(v)}" for k, v in sorted(o.valuation.items()))
            click.echo(f"completed {vals}")
        else:
            click.echo(f"aborted ({o.reason})")
    sys.exit(EXIT_OK)


@hp.command("check")
@click.argument("program", type=click.Path(dir_okay=False))
@click.option("--init", "init_text", help="Initial-condition formula (bare program files).")
@click.option("--post", "post_text", help="Post-condition formula (bare program files).")
@click.option("--state", "state", multiple=True,
              help="Initial value NAME=VALUE; replaces the setup block when given.")
@click.option("--replay-out", type=click.Path(dir_okay=False), default="counterexample.replay",
              show_default=True)
@_budget_options
def hp_check(program, init_text, post_text, state, replay_out, **budget_kw):
    """Search for a run violating ``init -> [program] post``."""
    problem = _load_hp(program, init_text, post_text)
    budget = _budget(**budget_kw)
    try:
        sampler = [_parse_state(state)] if state else None
        verdict = interp.check_problem(problem, budget, sampler)
    except (interp.HpRuntimeError, interp.BudgetExhausted, ValueError) as exc:
        raise UsageFailure(str(exc)) from exc
    click.echo(f"verdict = {verdict.outcome}; seed = {budget.seed}")
    if isinstance(verdict, interp.Counterexample):
        write_atomic(replay_out, interp.dump_replay(verdict))
        click.echo(f"replay file: {replay_out}")
        sys.exit(EXIT_FOUND)
    click.echo(f"initial states = {verdict.initial_states}; completed runs = {verdict.completed_runs}")
    if isinstance(verdict, interp.BudgetExhaustedVerdict):
        click.echo(f"budget exhausted: {verdict.detail}", err=True)
    else:
        click.echo("note: no counterexample within the budget; this is not a proof")
    sys.exit(EXIT_OK)


@hp.command("replay")
@click.argument("program", type=click.Path(dir_okay=False))
@click.argument("replay_file", type=click.Path(dir_okay=False))
@click.option("--post", "post_text", help="Post-condition for bare program files.")
def hp_replay(program, replay_file, post_text):
    """Re-execute a counterexample replay file; exit 1 if it still violates."""
    text = _read(program)
    try:
        if post_text is None:
            problem = parse_problem(text)
            prog, post = problem.program, problem.post
        else:
            prog, post = parse_program(text), parse_formula(post_text)
        cex = interp.load_replay(_read(replay_file))
        ok = interp.confirm(prog, cex, post)
    except (HpSyntaxError, interp.HpRuntimeError, ValueError) as exc:
        raise UsageFailure(str(exc)) from exc
    click.echo("replayed: violation confirmed" if ok else "replayed: no violation")
    sys.exit(EXIT_FOUND if ok else EXIT_OK)


# --- studies --------------------------------------------------------------------

@cli.group()
def study():
    """Falsification and monitoring studies."""


def _emit(report, report_path):
    text = report.to_text()
    if report_path:
        write_atomic(report_path, text)
    click.echo(text, nl=False)


@study.command("falsify")
@click.option("--episodes", type=click.IntRange(min=1), default=10_000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--model", type=click.Choice(MODELS), default="m3-wrong", show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
def study_falsify(episodes, seed, model, report_path):
    """Search for guarantee violations (exit 1 when any is found)."""
    report = analysis.falsify_wrong_msd(episodes, seed, model=model)
    _emit(report, report_path)
    sys.exit(EXIT_OK if report.passed else EXIT_FOUND)


@study.command("endstep")
@click.option("--members", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--model", type=click.Choice(MODELS), default="m3-wrong", show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
def study_endstep(members, seed, model, report_path):
    """Dense versus end-of-step monitoring on the witness family."""
    report = analysis.endstep_study(members, seed, model=model)
    _emit(report, report_path)
    sys.exit(EXIT_OK if report.passed else EXIT_FOUND)


@study.command("obligations")
@click.option("--model", type=click.Choice(MODELS), required=True)
@click.option("--ctrl", "ctrl_model", type=click.Choice(MODELS))
@click.option("--samples", type=click.IntRange(min=1), default=10_000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--variant", type=click.Choice(AREQ_VARIANTS), default="as-written", show_default=True)
@click.option("--ranges", "ranges_path", type=click.Path(dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
def study_obligations(model, ctrl_model, samples, seed, variant, ranges_path, report_path):
    """Loop-invariant obligations over sampled parameter tuples."""
    ranges = _load_ranges(ranges_path)
    report = analysis.obligation_study(model, ranges, samples, seed, ctrl_model, variant)
    _emit(report, report_path)
    sys.exit(EXIT_OK if report.passed else EXIT_FOUND)


def main(argv=None):
    cli.main(args=argv, prog_name="safectl")


if __name__ == "__main__":
    main()
