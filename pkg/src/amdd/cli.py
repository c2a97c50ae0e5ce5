"""``amdd`` command line: validate, prompt, generate, analyze, simulate, conform.

Exit codes: 0 ok, 1 input or validation error, 2 backend transport error,
3 runtime constraint violation, 4 conformance violation.

Without ``--config`` the command uses ``./amdd.toml`` when present, else the
packaged UV-fleet project (writing to ``./out``).
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

import click

from amdd.codegen.base import GenerationConfig, GenerationResult
from amdd.codegen.ir import program_from_json, program_to_json
from amdd.codegen.llm import generate_llm
from amdd.codegen.prompt import assemble_prompt
from amdd.codegen.template import generate_template
from amdd.complexity import (ComplexityReport, compare_reports, cyclomatic, export_cfg, extract_cfg,
                             import_cfg, render_reports, reports_to_json)
from amdd.config import ConfigError, ProjectConfig, load_config, load_pipeline, with_uv_count
from amdd.conformance import Verdict, check_trace, derive_expected
from amdd.errors import AmddError, ExtractionError, TransportError
from amdd.fixtures import uvf_path
from amdd.sim import render_sequence_diagram, run_mission, trace_from_jsonl, trace_to_jsonl

EXIT_OK, EXIT_INPUT, EXIT_TRANSPORT, EXIT_CONSTRAINT, EXIT_CONFORMANCE = 0, 1, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _fail(message: str, code: int = EXIT_INPUT) -> _Exit:
    click.echo(f"error: {message}", err=True)
    return _Exit(code)


def _guard(fn: Callable[[], int]) -> None:
    """Run a command body and translate failures into exit codes."""
    try:
        code = fn()
    except _Exit as exc:
        code = exc.code
    except (TransportError, ExtractionError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_TRANSPORT
    except (AmddError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_INPUT
    sys.exit(code)


def _project(config: Path | None, out: Path | None) -> ProjectConfig:
    if config is None:
        local = Path("amdd.toml")
        if local.is_file():
            cfg = load_config(local)
        else:
            cfg = load_config(uvf_path("amdd.toml"), default_output=Path("out").resolve())
    else:
        cfg = load_config(config)
    if out is not None:
        cfg = replace(cfg, output_dir=out)
    return cfg


def _ontology_flag(value: str | None, cfg: ProjectConfig) -> bool:
    return cfg.generation.include_ontology if value is None else value == "on"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


_config_opt = click.option("--config", "config", type=click.Path(dir_okay=False, path_type=Path),
                           help="Project TOML file.")
_out_opt = click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path),
                        help="Output directory (overrides the config).")
_ontology_opt = click.option("--ontology", type=click.Choice(["on", "off"]), default=None,
                             help="Include the communication ontology.")


@click.group()
@click.version_option(package_name="artifact", prog_name="amdd")
def main() -> None:
    """Model-driven agent generation and verification toolchain."""


@main.command()
@_config_opt
def validate(config: Path | None) -> None:
    """Parse and cross-check the model, constraints and ontology."""

    def body() -> int:
        cfg = _project(config, None)
        p = load_pipeline(cfg)
        click.echo(f"model: {len(p.model.classes)} classes, {len(p.model.relationships)} relationships, "
                   f"{len(p.model.state_machines)} state machines, {len(p.model.activities)} activities")
        click.echo(f"constraints: {len(p.bound)} bound")
        if p.registry is not None:
            click.echo(f"ontology: {len(p.registry.concepts)} concepts, {len(p.registry.predicates)} "
                       f"predicates, {len(p.registry.actions)} actions")
        click.echo("ok")
        return EXIT_OK

    _guard(body)


@main.command()
@_config_opt
@_out_opt
@_ontology_opt
def prompt(config: Path | None, out: Path | None, ontology: str | None) -> None:
    """Write the three-layer prompt bundle."""

    def body() -> int:
        cfg = _project(config, out)
        p = load_pipeline(cfg)
        gen = GenerationConfig(cfg.generation.dialect, _ontology_flag(ontology, cfg), "template",
                               cfg.generation.seed)
        bundle = assemble_prompt(p.model, p.bound, p.registry, gen)
        target = cfg.output_dir / "prompt"
        _write(target / "structural.txt", bundle.structural)
        _write(target / "behavioral.txt", bundle.behavioral)
        _write(target / "constraints.txt", bundle.constraints)
        _write(target / "bundle.txt", f"# checksum: {bundle.checksum}\n\n{bundle.text()}")
        click.echo(f"prompt written to {target} (checksum {bundle.checksum})")
        return EXIT_OK

    _guard(body)


def _write_template(result: GenerationResult, target: Path) -> list[ComplexityReport]:
    reports = []
    for program in result.programs:
        graph = extract_cfg(program)
        _write(target / f"{program.agent_name}.ir.json", program_to_json(program))
        _write(target / f"{program.agent_name}.dot", export_cfg(graph))
        reports.append(cyclomatic(graph))
    _write(target / "analysis.json", reports_to_json(reports))
    return reports


@main.command()
@_config_opt
@_out_opt
@_ontology_opt
@click.option("--backend", type=click.Choice(["template", "llm"]), default=None,
              help="Generation backend (default from config).")
@click.pass_context
def generate(ctx: click.Context, config: Path | None, out: Path | None, ontology: str | None,
             backend: str | None) -> None:
    """Generate agent programs.

    The template backend writes IR, CFG and analysis files per configuration;
    without --ontology it produces both configurations and their comparison.
    """
    obj = ctx.obj or {}

    def body() -> int:
        cfg = _project(config, out)
        p = load_pipeline(cfg)
        chosen = backend or cfg.generation.backend
        root = cfg.output_dir / "generate"
        if chosen == "template":
            variants = [ontology == "on"] if ontology else [False, True]
            columns = []
            for include in variants:
                gen = GenerationConfig(cfg.generation.dialect, include, "template", cfg.generation.seed)
                result = generate_template(p.model, p.bound, p.registry, gen)
                reports = _write_template(result, root / gen.variant)
                columns.append(reports)
                click.echo(f"[{gen.variant}]")
                click.echo(render_reports(reports), nl=False)
            if len(columns) == 2:
                table = compare_reports(*columns)
                _write(root / "comparison.json", json.dumps(table.to_dict(), indent=2) + "\n")
                click.echo("[comparison]")
                click.echo(table.render(), nl=False)
            return EXIT_OK
        if cfg.llm is None:
            raise _fail("the config has no [llm] section")
        include = _ontology_flag(ontology, cfg)
        gen = GenerationConfig(cfg.generation.dialect, include, "llm", cfg.generation.seed)
        bundle = assemble_prompt(p.model, p.bound, p.registry, gen)
        kwargs = {k: obj[k] for k in ("transport", "sleep") if k in obj}
        result = generate_llm(bundle, cfg.llm, gen, artifacts=cfg.output_dir / "artifacts", **kwargs)
        target = root / "llm"
        for unit in result.source_units or ():
            _write(target / unit.filename, unit.text)
        for program in result.programs:
            _write(target / f"{program.agent_name}.ir.json", program_to_json(program))
        _write(target / "backend.log", result.backend_log)
        click.echo(f"{len(result.source_units or ())} source file(s) written to {target}")
        return EXIT_OK

    _guard(body)


def _graphs_in(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.name.endswith((".dot", ".ir.json")))
    return [path]


def _report_for(path: Path) -> ComplexityReport:
    text = path.read_text(encoding="utf-8")
    if path.name.endswith(".ir.json"):
        graph = extract_cfg(program_from_json(text))
    else:
        graph = import_cfg(text, str(path))
    if not graph.label:
        graph = graph.relabel(path.name.split(".")[0])
    return cyclomatic(graph)


@main.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True, help="Print JSON instead of a table.")
def analyze(inputs: tuple[Path, ...], as_json: bool) -> None:
    """Cyclomatic complexity of DOT graphs or IR programs.

    Each input is a file or a directory of ``.dot`` / ``.ir.json`` files.
    Two directories are also compared label by label.
    """

    def body() -> int:
        groups: list[list[ComplexityReport]] = []
        failed = False
        for item in inputs:
            reports = []
            files = _graphs_in(item) if item.exists() else [item]
            for f in files:
                try:
                    reports.append(_report_for(f))
                except (AmddError, OSError, UnicodeDecodeError) as exc:
                    failed = True
                    click.echo(f"error: {f}: {exc}", err=True)
            groups.append(reports)
        dirs = [i for i in inputs if i.is_dir()]
        table = None
        if len(inputs) == 2 and len(dirs) == 2:
            table = compare_reports(*groups)
        if as_json:
            reports_json = []
            for item, reports in zip(inputs, groups):
                reports_json += [{"input": str(item), **r} for r in json.loads(reports_to_json(reports))]
            payload: dict = {"reports": reports_json}
            if table is not None:
                payload["comparison"] = table.to_dict()
            click.echo(json.dumps(payload, indent=2))
        else:
            for item, reports in zip(inputs, groups):
                click.echo(f"[{item}]")
                click.echo(render_reports(reports), nl=False)
            if table is not None:
                click.echo("[comparison]")
                click.echo(table.render(), nl=False)
        return EXIT_INPUT if failed else EXIT_OK

    _guard(body)


def _indices(value: str | None) -> tuple[int, ...]:
    if not value:
        return ()
    try:
        return tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma-separated UV numbers, e.g. 1,3") from None


@main.command()
@_config_opt
@_out_opt
@click.option("--uv-count", type=click.IntRange(min=0), default=None, help="Number of UVs in the fleet.")
@click.option("--seed", type=int, default=None, help="Seed for the score model.")
@click.option("--controlled", default=None,
              help="Comma-separated UV numbers that start already Controlled (fault injection).")
def simulate(config: Path | None, out: Path | None, uv_count: int | None, seed: int | None,
             controlled: str | None) -> None:
    """Run the mission and write the trace, sequence diagram and summary."""

    def body() -> int:
        cfg = _project(config, out)
        p = load_pipeline(cfg)
        if p.registry is None:
            raise _fail("simulation needs an ontology")
        sim_cfg = with_uv_count(cfg.simulation, uv_count, seed, _indices(controlled))
        trace = run_mission(sim_cfg, p.model, p.bound, p.registry)
        target = cfg.output_dir / "simulate"
        _write(target / "trace.jsonl", trace_to_jsonl(trace))
        _write(target / "sequence.puml", render_sequence_diagram(trace))
        summary = {"messages": len(trace), "outcome": trace.outcome, "aborted": trace.aborted,
                   "finalStates": trace.final_states, "halted": list(trace.halted)}
        _write(target / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        click.echo(f"{len(trace)} messages, outcome {trace.outcome}")
        for who, state in trace.final_states.items():
            if state is not None:
                click.echo(f"  {who}: {state}")
        if trace.aborted:
            click.echo("mission aborted: no available UV")
        if trace.halted:
            for v in trace.halted:
                click.echo(f"violation: {v.get('constraint', v.get('subject'))} on "
                           f"{', '.join(v.get('instances', [v.get('instance', '?')]))}", err=True)
            return EXIT_CONSTRAINT
        return EXIT_OK

    _guard(body)


@main.command()
@click.argument("trace_file", type=click.Path(dir_okay=False, path_type=Path))
@_config_opt
@click.option("--strict", is_flag=True, help="Treat novel events as violations.")
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
def conform(trace_file: Path, config: Path | None, strict: bool, as_json: bool) -> None:
    """Check a JSON-lines trace against the protocol derived from the activity flow."""

    def body() -> int:
        cfg = _project(config, None)
        p = load_pipeline(cfg)
        if not p.model.activities:
            raise _fail("the model has no activity diagram")
        try:
            text = trace_file.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"{trace_file}: {exc}") from None
        trace = trace_from_jsonl(text, str(trace_file))
        concepts = list(p.registry.concepts) if p.registry is not None else None
        expected = derive_expected(p.model.activities[0], concepts)
        for w in expected.warnings:
            click.echo(f"warning: {w}", err=True)
        report = check_trace(trace, expected, strict)
        click.echo(report.to_json() if as_json else report.render(), nl=False)
        return EXIT_CONFORMANCE if report.verdict is Verdict.VIOLATING else EXIT_OK

    _guard(body)

