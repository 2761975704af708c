"""Command-line front end.

Exit codes: 0 for a "no" answer or a successful command, 1 for a "yes" answer,
2 when the answer is inconclusive and 3 for input errors.
"""

from __future__ import annotations

import json
import logging
import os
import random
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

from . import wsks
from .checker import (INCONCLUSIVE, NO, YES, Caps, Verdict, check_deadlock_bounded, check_inductive_bounded,
                      check_reach_bounded, check_safe_bounded)
from .cl import (Spec, check_tight, desugar_stateless_atoms, infer_profiles, make_query, parse_spec,
                 validate_normal_form)
from .errors import ClverifyError, InputError, ProfileConflict, Unconstrained
from .model import ValidationIssue, ValidationReport, configuration_to_json, index_to_str, validate_signature
from .petri import build_net, enabled, fire, format_marking, is_deadlock
from .ptencode import encode_spec_text, parse_pt_program
from .rewriting import canonical_model, enumerate_trees, tree_id

logger = logging.getLogger(__name__)

SCHEMA = "clverify/1"
EXIT_NO, EXIT_YES, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3
_EXIT = {NO: EXIT_NO, YES: EXIT_YES, INCONCLUSIVE: EXIT_INCONCLUSIVE}


class CommandExit(Exception):
    def __init__(self, code: int):
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    spec_path: Optional[Path] = None
    sentence: Optional[str] = None
    max_nodes: int = 8
    mode: str = "exact"
    fmt: str = "text"
    out: Optional[Path] = None
    jobs: int = 1
    seed: int = 0
    caps: Caps = field(default_factory=Caps)


def _load_spec(path: Optional[Path]) -> Spec:
    if path is None:
        raise InputError("--spec is required")
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror}") from err
    return parse_spec(text)


def _default_sentence(spec: Spec, sentence: Optional[str]) -> str:
    if sentence:
        return sentence
    if len(spec.sentences) == 1:
        return next(iter(spec.sentences))
    if not spec.sentences and spec.sid.rules and not spec.sid.rules[0].params:
        return spec.sid.rules[0].head
    raise InputError("--sentence is required (the input declares no single sentence)")


def _emit(cfg: RunConfig, text: str, doc: dict) -> None:
    payload = json.dumps({"schema": SCHEMA, **doc}, indent=2) + "\n" if cfg.fmt == "json" else text
    if cfg.out is not None:
        Path(cfg.out).write_text(payload)
    else:
        click.echo(payload, nl=False)


def _config(**kw) -> RunConfig:
    caps = Caps(bfs=kw.pop("bfs_cap", Caps().bfs), mutex_places=kw.pop("mutex_cap", Caps().mutex_places))
    return RunConfig(caps=caps, **kw)


_spec_opt = click.option("--spec", "spec_path", type=click.Path(path_type=Path), help="Spec file.")
_sentence_opt = click.option("--sentence", help="Sentence name, nullary predicate or formula text.")
_nodes_opt = click.option("--max-nodes", default=8, show_default=True, type=click.IntRange(1),
                          help="Largest rewriting tree considered.")
_format_opt = click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
                           show_default=True)
_out_opt = click.option("--out", type=click.Path(path_type=Path), help="Write output to a file.")


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def cli(verbose: int) -> None:
    """Bounded verification of parametric component-based systems."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# -- validate ---------------------------------------------------------------


def validate_spec(spec: Spec) -> ValidationReport:
    report = validate_signature(spec.signature)
    sid = desugar_stateless_atoms(spec.sid, spec.signature)
    report += validate_normal_form(sid)
    try:
        prof = infer_profiles(sid, spec.signature)
    except (ProfileConflict, Unconstrained) as err:
        return report + ValidationReport((ValidationIssue("profile", str(err)),))
    report += check_tight(None, spec, prof, sid=sid)
    for name, f in spec.sentences.items():
        for issue in check_tight(f, spec, prof, sid=sid).issues:
            if issue.location == "sentence":
                report += ValidationReport((ValidationIssue(issue.code, issue.message, f"sentence {name}",
                                                            issue.severity),))
    return report


@cli.command()
@click.argument("path", required=False, type=click.Path(path_type=Path))
@_spec_opt
@_format_opt
@_out_opt
def validate(path, spec_path, fmt, out):
    """Check a spec (signature, normal form, profiles, tightness) or a .pt program."""
    cfg = _config(spec_path=spec_path or path, fmt=fmt, out=out)
    if cfg.spec_path is not None and Path(cfg.spec_path).suffix == ".pt":
        try:
            text = Path(cfg.spec_path).read_text()
        except OSError as err:
            raise InputError(f"cannot read {cfg.spec_path}: {err.strerror}") from err
        prog = parse_pt_program(text)
        _emit(cfg, f"OK: {len(prog)} statements\n", {"ok": True, "statements": len(prog)})
        return
    spec = _load_spec(cfg.spec_path)
    report = validate_spec(spec)
    lines = [str(i) for i in report.issues]
    lines.append("OK" if report.ok else f"{len(report.errors)} error(s)")
    _emit(cfg, "\n".join(lines) + "\n",
          {"ok": report.ok, "issues": [{"code": i.code, "message": i.message, "location": i.location,
                                        "severity": i.severity} for i in report.issues]})
    if not report.ok:
        raise CommandExit(EXIT_INPUT)


# -- enumerate / net / simulate ----------------------------------------------


@cli.command("enumerate")
@_spec_opt
@_sentence_opt
@_nodes_opt
@_format_opt
@_out_opt
def enumerate_cmd(spec_path, sentence, max_nodes, fmt, out):
    """List the rewriting trees of a sentence up to the node bound."""
    cfg = _config(spec_path=spec_path, sentence=sentence, max_nodes=max_nodes, fmt=fmt, out=out)
    spec = _load_spec(cfg.spec_path)
    name = _default_sentence(spec, cfg.sentence)
    trees = list(enumerate_trees(spec, name, cfg.max_nodes))
    text = "".join(f"{k}: {tree_id(t)}\n" for k, t in enumerate(trees, 1))
    text += f"{len(trees)} tree(s) with at most {cfg.max_nodes} nodes\n"
    _emit(cfg, text, {"sentence": name, "maxNodes": cfg.max_nodes, "count": len(trees),
                      "trees": [t.to_json() for t in trees]})


def _pick_instance(spec: Spec, name: str, max_nodes: int, instance: int):
    q = make_query(spec, name)
    for k, tree in enumerate(enumerate_trees(spec, name, max_nodes), 1):
        if k == instance:
            return q, tree, canonical_model(tree, q)
    raise InputError(f"instance {instance} does not exist with at most {max_nodes} nodes")


@cli.command()
@_spec_opt
@_sentence_opt
@_nodes_opt
@click.option("--instance", default=1, show_default=True, type=click.IntRange(1),
              help="1-based position of the tree in enumeration order.")
@_format_opt
@_out_opt
def net(spec_path, sentence, max_nodes, instance, fmt, out):
    """Print the Petri net of one canonical instance."""
    cfg = _config(spec_path=spec_path, sentence=sentence, max_nodes=max_nodes, fmt=fmt, out=out)
    spec = _load_spec(cfg.spec_path)
    name = _default_sentence(spec, cfg.sentence)
    q, tree, config = _pick_instance(spec, name, cfg.max_nodes, instance)
    pn = build_net(spec.signature, config.architecture)
    lines = [f"tree: {tree_id(tree)}", f"places ({len(pn.places)}): {format_marking(pn.places)}",
             f"transitions ({len(pn.transitions)}):"]
    for t in pn.transitions:
        lines.append(f"  {t}: {format_marking(pn.pre[t])} -> {format_marking(pn.post[t])}")
    lines.append(f"initial marking: {format_marking(config.marking)}")
    _emit(cfg, "\n".join(lines) + "\n",
          {"tree": tree.to_json(), "configuration": configuration_to_json(config), "net": pn.to_json()})


def _marking_json(m) -> list:
    return [[q, index_to_str(u)] for (q, u) in sorted(m, key=lambda p: (p[1], p[0]))]


def _norm(name: str) -> str:
    return "".join(name.split())


@cli.command()
@_spec_opt
@_sentence_opt
@_nodes_opt
@click.option("--instance", default=1, show_default=True, type=click.IntRange(1))
@click.option("--fire", "firings", multiple=True, help="Transition to fire, e.g. 'T[1, 1.1]'; repeatable.")
@click.option("--script", type=click.Path(path_type=Path), help="File with one transition per line.")
@click.option("--steps", default=0, type=click.IntRange(0), help="Random steps when no script is given.")
@click.option("--seed", default=0, show_default=True, type=int)
@_format_opt
@_out_opt
def simulate(spec_path, sentence, max_nodes, instance, firings, script, steps, seed, fmt, out):
    """Replay a firing script (or a seeded random run) on one canonical instance."""
    cfg = _config(spec_path=spec_path, sentence=sentence, max_nodes=max_nodes, fmt=fmt, out=out, seed=seed)
    spec = _load_spec(cfg.spec_path)
    name = _default_sentence(spec, cfg.sentence)
    _, tree, config = _pick_instance(spec, name, cfg.max_nodes, instance)
    pn = build_net(spec.signature, config.architecture)
    plan = list(firings)
    if script is not None:
        try:
            plan += [ln.strip() for ln in Path(script).read_text().splitlines()
                     if ln.strip() and not ln.lstrip().startswith("#")]
        except OSError as err:
            raise InputError(f"cannot read {script}: {err.strerror}") from err
    rng = random.Random(cfg.seed)
    m = config.marking
    trace = [{"fired": None, "marking": _marking_json(m)}]
    lines = [f"tree: {tree_id(tree)}", f"0: {format_marking(m)}"]
    step = 0
    for wanted in plan or [None] * steps:
        ready = enabled(pn, m)
        if wanted is None:
            if not ready:
                lines.append("deadlock reached")
                break
            t = rng.choice(ready)
        else:
            matches = [t for t in ready if _norm(str(t)) == _norm(wanted)]
            if not matches:
                raise InputError(f"step {step + 1}: {wanted} is not enabled")
            t = matches[0]
        m = fire(pn, m, t)
        step += 1
        lines.append(f"{step}: {t} -> {format_marking(m)}")
        trace.append({"fired": str(t), "marking": _marking_json(m)})
    if is_deadlock(pn, m):
        lines.append("final marking is a deadlock")
    _emit(cfg, "\n".join(lines) + "\n", {"tree": tree.to_json(), "trace": trace, "deadlock": is_deadlock(pn, m)})


# -- check ------------------------------------------------------------------


def _states(text: Optional[str]) -> list[str]:
    return [s.strip() for s in (text or "").split(",") if s.strip()]


def _verdict_text(v: Verdict) -> str:
    lines = [f"{v.query} on {v.sentence} ({v.mode} mode, {v.bound_note})"]
    for r in v.instances:
        extra = f" ({r.cause})" if r.cause else ""
        lines.append(f"  [{r.answer}] {tree_id(r.tree)}{extra}")
        if r.witness and "marking" in r.witness:
            lines.append("      marking: " + " ".join(f"{q}[{u}]" for q, u in r.witness["marking"]))
        if r.witness and r.witness.get("firing"):
            lines.append("      firing: " + " ".join(r.witness["firing"]))
    counts = v.counts()
    lines.append(f"instances: {len(v.instances)} ({', '.join(f'{k} {counts[k]}' for k in sorted(counts))})")
    lines.append(f"answer: {v.summary}")
    return "\n".join(lines) + "\n"


@cli.command()
@_spec_opt
@_sentence_opt
@click.option("--query", "query", type=click.Choice(["deadlock", "reach", "safe", "inductive"]),
              default="deadlock", show_default=True)
@click.option("--states", help="Comma-separated states for reach (a multiset).")
@click.option("--psi", help="Target sentence for the safe query.")
@_nodes_opt
@click.option("--mode", type=click.Choice(["exact", "invariant"]), default="exact", show_default=True)
@click.option("--bfs-cap", default=Caps().bfs, show_default=True, type=click.IntRange(1))
@click.option("--mutex-cap", default=Caps().mutex_places, show_default=True, type=click.IntRange(1))
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(1))
@_format_opt
@_out_opt
def check(spec_path, sentence, query, states, psi, max_nodes, mode, bfs_cap, mutex_cap, jobs, fmt, out):
    """Answer a bounded query over every canonical instance."""
    cfg = _config(spec_path=spec_path, sentence=sentence, max_nodes=max_nodes, mode=mode, fmt=fmt, out=out,
                  jobs=jobs, bfs_cap=bfs_cap, mutex_cap=mutex_cap)
    spec = _load_spec(cfg.spec_path)
    name = _default_sentence(spec, cfg.sentence)
    if query == "deadlock":
        v = check_deadlock_bounded(spec, name, cfg.max_nodes, cfg.mode, cfg.caps, cfg.jobs)
    elif query == "reach":
        wanted = _states(states)
        if not wanted:
            raise InputError("--states is required for reach")
        v = check_reach_bounded(spec, name, wanted, cfg.max_nodes, cfg.mode, cfg.caps, cfg.jobs)
    elif query == "safe":
        if not psi:
            raise InputError("--psi is required for safe")
        v = check_safe_bounded(spec, name, psi, cfg.max_nodes, cfg.caps, cfg.jobs)
    else:
        v = check_inductive_bounded(spec, name, cfg.max_nodes, cfg.caps, cfg.jobs)
    doc = v.to_json()
    doc.pop("schema", None)
    _emit(cfg, _verdict_text(v), doc)
    raise CommandExit(_EXIT[v.summary])


# -- emit -------------------------------------------------------------------


def run_solver(binary: str, path: Path) -> str:
    """Runs the external solver; returns yes (satisfiable), no (unsatisfiable) or inconclusive."""
    try:
        proc = subprocess.run([binary, str(path)], capture_output=True, text=True, timeout=3600)
    except (OSError, subprocess.TimeoutExpired) as err:
        logger.warning("solver failed: %s", err)
        return INCONCLUSIVE
    text = proc.stdout.lower()
    if "unsatisfiable" in text:
        return NO
    if "satisfiable" in text or "satisfying example" in text or "valid" in text:
        return YES
    logger.warning("unrecognised solver output: %s", proc.stdout[-400:])
    return INCONCLUSIVE


@cli.command()
@_spec_opt
@_sentence_opt
@click.option("--query", "query", type=click.Choice(["deadlock", "reach"]), default="deadlock",
              show_default=True)
@click.option("--states", help="Comma-separated states for reach.")
@click.option("--syntax", type=click.Choice(["mona", "sexpr"]), default="mona", show_default=True)
@_out_opt
def emit(spec_path, sentence, query, states, syntax, out):
    """Write the verification condition for an external solver.

    When SOLVER_BIN is set and --out is given, the solver is run on the file and its
    verdict decides the exit code (satisfiable means a counterexample may exist).
    """
    cfg = _config(spec_path=spec_path, sentence=sentence, out=out)
    spec = _load_spec(cfg.spec_path)
    name = _default_sentence(spec, cfg.sentence)
    q = make_query(spec, name)
    if query == "deadlock":
        f = wsks.deadlock_vc(q)
    else:
        wanted = _states(states)
        if not wanted:
            raise InputError("--states is required for reach")
        f = wsks.reach_vc(q, states=wanted)
    if syntax == "mona":
        text = wsks.export_solver(f, q.sid.kappa, title=f"{query} condition for {name}")
        wsks.check_solver_syntax(text)
    else:
        text = wsks.sexpr(f) + "\n"
    _emit(cfg, text, {})
    binary = os.environ.get("SOLVER_BIN")
    if binary and cfg.out is not None and syntax == "mona":
        answer = run_solver(binary, Path(cfg.out))
        click.echo(f"solver: {answer}")
        raise CommandExit(_EXIT[answer])


# -- pt-encode --------------------------------------------------------------


@cli.command("pt-encode")
@click.argument("program", type=click.Path(path_type=Path))
@click.option("--word", required=True, help="Input bit string (at least two letters).")
@click.option("--padding", type=click.IntRange(0), help="Zero cells on each side; unbounded if omitted.")
@_out_opt
def pt_encode(program, word, padding, out):
    """Compile a Post-Turing program and input word into a spec."""
    try:
        text = Path(program).read_text()
    except OSError as err:
        raise InputError(f"cannot read {program}: {err.strerror}") from err
    cfg = _config(out=out)
    _emit(cfg, encode_spec_text(word, parse_pt_program(text), padding), {})


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, prog_name="clverify", standalone_mode=False)
    except CommandExit as done:
        return done.code
    except click.exceptions.Exit as done:
        return done.exit_code
    except click.Abort:
        return EXIT_INPUT
    except click.ClickException as err:
        err.show()
        return EXIT_INPUT
    except InputError as err:
        click.echo(f"error: {err}", err=True)
        return EXIT_INPUT
    except ClverifyError as err:
        click.echo(f"error: {type(err).__name__}: {err}", err=True)
        return EXIT_INPUT
    return EXIT_NO


if __name__ == "__main__":
    sys.exit(main())
