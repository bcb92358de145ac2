"""Command-line front end: replay or interactively drive an observation
timeline against a plan library and query the belief state.

Script grammar, one command per line ('#' starts a comment):

    context <var>=<true|false>     pin a context fact (before any event)
    obs <action>                   the agent performed <action>
    intervene <action>             the system performed <action>
    query intend <task>
    query next
    query expansion <goal>
    query explain [<k>]

Exit codes: 0 success, 1 inexplicable observation, 2 parse/validation error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from . import fixtures
from .engine import (
    BeliefState,
    EmptyBeliefError,
    InexplicableObservationError,
    Observation,
    agent,
    context_fact,
    init_belief,
    intervention,
)
from .library import GOAL, PRIMITIVE, LibraryError, PlanLibrary, load_library
from .oracle import McResult, mc_estimate
from .report import QueryRecord, render_figures, render_posteriors, write_sidecar


class ScriptError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Command:
    kind: str
    args: tuple
    line: int


@dataclass(frozen=True)
class Script:
    commands: tuple[Command, ...]


_EVENT_KINDS = ("obs", "intervene")


def _parse_line(line: str, lineno: int) -> Command | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    tokens = text.split()
    head = tokens[0]
    if head == "context":
        if len(tokens) != 2 or "=" not in tokens[1]:
            raise ScriptError(lineno, "expected: context <var>=<true|false>")
        name, _, raw = tokens[1].partition("=")
        if raw not in ("true", "false") or not name:
            raise ScriptError(lineno, "expected: context <var>=<true|false>")
        return Command("context", (name, raw == "true"), lineno)
    if head in _EVENT_KINDS:
        if len(tokens) != 2:
            raise ScriptError(lineno, f"expected: {head} <action>")
        return Command(head, (tokens[1],), lineno)
    if head == "query":
        if len(tokens) == 3 and tokens[1] == "intend":
            return Command("intend", (tokens[2],), lineno)
        if len(tokens) == 2 and tokens[1] == "next":
            return Command("next", (), lineno)
        if len(tokens) == 3 and tokens[1] == "expansion":
            return Command("expansion", (tokens[2],), lineno)
        if len(tokens) in (2, 3) and tokens[1] == "explain":
            if len(tokens) == 2:
                return Command("explain", (None,), lineno)
            try:
                k = int(tokens[2])
            except ValueError:
                raise ScriptError(lineno, "explain count must be an integer") from None
            if k < 1:
                raise ScriptError(lineno, "explain count must be at least 1")
            return Command("explain", (k,), lineno)
        raise ScriptError(lineno, f"unknown query form: {text!r}")
    raise ScriptError(lineno, f"unknown command: {head!r}")


def parse_script(text: str) -> Script:
    commands: list[Command] = []
    events_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        cmd = _parse_line(line, lineno)
        if cmd is None:
            continue
        if cmd.kind in _EVENT_KINDS:
            events_seen = True
        elif cmd.kind == "context" and events_seen:
            raise ScriptError(lineno, "context facts must precede every obs/intervene")
        commands.append(cmd)
    return Script(tuple(commands))


def validate_script(script: Script, lib: PlanLibrary) -> None:
    """Resolve every name the script mentions before running anything."""
    for cmd in script.commands:
        try:
            if cmd.kind == "context":
                lib.context_var(cmd.args[0])
            elif cmd.kind in _EVENT_KINDS:
                if lib.task(cmd.args[0]).kind != PRIMITIVE:
                    raise LibraryError(f"'{cmd.args[0]}' is not a primitive action")
            elif cmd.kind == "intend":
                if not lib.task(cmd.args[0]).intendable:
                    raise LibraryError(f"task '{cmd.args[0]}' is not intendable")
            elif cmd.kind == "expansion":
                if lib.task(cmd.args[0]).kind != GOAL:
                    raise LibraryError(f"task '{cmd.args[0]}' is not a goal")
        except LibraryError as exc:
            raise ScriptError(cmd.line, str(exc)) from None


@dataclass
class Session:
    """Shared command loop behind script replay and the interactive mode."""

    lib: PlanLibrary
    belief: BeliefState
    mc_samples: int | None
    seed_seq: np.random.SeedSequence
    top_k: int
    out: TextIO
    timeline: list[Observation] = field(default_factory=list)
    records: list[QueryRecord] = field(default_factory=list)
    belief_trail: list[BeliefState] = field(default_factory=list)
    intend_tasks: list[str] = field(default_factory=list)
    last_next: dict[str | None, float] | None = None

    def __post_init__(self) -> None:
        self.belief_trail.append(self.belief)

    def _mc(self, query) -> McResult | None:
        if self.mc_samples is None:
            return None
        child = self.seed_seq.spawn(1)[0]
        return mc_estimate(self.lib, self.timeline, query, self.mc_samples, child)

    def _emit(self, records: list[QueryRecord]) -> None:
        self.records.extend(records)
        print(render_posteriors(records), file=self.out)
        print(file=self.out)

    def execute(self, cmd: Command) -> None:
        if cmd.kind == "context":
            name, value = cmd.args
            self.belief = self.belief.observe(context_fact(name, value))
            self.timeline.append(context_fact(name, value))
            self.belief_trail[0] = self.belief
            print(f"context {name}={'true' if value else 'false'}", file=self.out)
        elif cmd.kind == "obs":
            (action,) = cmd.args
            self.belief = self.belief.observe(agent(action))
            self.timeline.append(agent(action))
            self.belief_trail.append(self.belief)
            print(f"{action}@{self.belief.time}", file=self.out)
        elif cmd.kind == "intervene":
            (action,) = cmd.args
            self.belief = self.belief.observe(intervention(action))
            self.timeline.append(intervention(action))
            self.belief_trail.append(self.belief)
            print(f"I({action}@{self.belief.time})", file=self.out)
        elif cmd.kind == "intend":
            (task,) = cmd.args
            if task not in self.intend_tasks:
                self.intend_tasks.append(task)
            value = self.belief.posterior_intend(task)
            self._emit([QueryRecord(f"intend {task}", value, self._mc(("intend", task)))])
        elif cmd.kind == "next":
            dist = self.belief.predict_next()
            self.last_next = dist
            actions = sorted(
                (a for a in dist if a is not None), key=lambda a: (-dist[a], a)
            )
            records = [
                QueryRecord(f"next {a}", dist[a], self._mc(("next", a))) for a in actions
            ]
            records.append(
                QueryRecord("next none", dist[None], self._mc(("next", None)))
            )
            self._emit(records)
        elif cmd.kind == "expansion":
            (goal,) = cmd.args
            dist = self.belief.posterior_expansion(goal)
            records = [
                QueryRecord(f"expansion {goal} {c.name}", dist[c.name])
                for c in self.lib.tasks[goal].methods
            ]
            records.append(QueryRecord(f"expansion {goal} inactive", dist[None]))
            self._emit(records)
        elif cmd.kind == "explain":
            (k,) = cmd.args
            records = []
            for rank, expl in enumerate(self.belief.explanations(k or self.top_k), 1):
                intended = "{" + ", ".join(expl.intended) + "}"
                via = "{" + ", ".join(f"{g}:{m}" for g, m in expl.expansion) + "}"
                records.append(
                    QueryRecord(f"explain {rank} intended={intended} via={via}", expl.posterior)
                )
            self._emit(records)
        else:  # pragma: no cover - parser only produces the kinds above
            raise ValueError(f"unhandled command {cmd.kind!r}")

    def trajectories(self) -> dict[str, list[float]]:
        return {
            task: [b.posterior_intend(task) for b in self.belief_trail]
            for task in self.intend_tasks
        }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planrec",
        description="Exact plan recognition over an observation timeline.",
    )
    parser.add_argument("--library", required=True, help="plan library file (JSON)")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--script", help="observation/query script to replay")
    mode.add_argument("--interactive", action="store_true", help="read commands from stdin")
    parser.add_argument("--mc-check", type=int, metavar="N",
                        help="cross-check every query with N Monte-Carlo samples")
    parser.add_argument("--seed", type=int, default=0, help="seed for the MC cross-check")
    parser.add_argument("--out", help="write one JSON record per query to this file")
    parser.add_argument("--top-k", type=int, default=3,
                        help="explanations listed by a bare 'query explain'")
    parser.add_argument("--figures", metavar="DIR",
                        help="render posterior-trajectory/next-action figures into DIR")
    return parser


def _resolve_library(path: str) -> str:
    if not os.path.exists(path) and path in fixtures.NAMES:
        return str(fixtures.path(path))
    return path


def run(
    argv: Sequence[str] | None = None,
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
    stderr: TextIO | None = None,
) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr

    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.seed < 0:
        print("--seed must be a non-negative integer", file=stderr)
        return 2
    if args.mc_check is not None and args.mc_check < 1:
        print("--mc-check needs a positive sample count", file=stderr)
        return 2
    if args.top_k < 1:
        print("--top-k must be at least 1", file=stderr)
        return 2

    lib_path = _resolve_library(args.library)
    try:
        lib = load_library(lib_path)
    except OSError as exc:
        print(f"{args.library}: {exc}", file=stderr)
        return 2
    except LibraryError as exc:
        print(f"{args.library}: {exc}", file=stderr)
        return 2

    session = Session(
        lib=lib,
        belief=init_belief(lib),
        mc_samples=args.mc_check,
        seed_seq=np.random.SeedSequence(args.seed),
        top_k=args.top_k,
        out=stdout,
    )

    if args.script is not None:
        try:
            with open(args.script, "r", encoding="utf-8") as handle:
                script = parse_script(handle.read())
            validate_script(script, lib)
        except OSError as exc:
            print(f"{args.script}: {exc}", file=stderr)
            return 2
        except ScriptError as exc:
            print(f"{args.script}:{exc.line}: {exc}", file=stderr)
            return 2
        for cmd in script.commands:
            try:
                session.execute(cmd)
            except InexplicableObservationError as exc:
                print(f"{args.script}:{cmd.line}: {exc}", file=stderr)
                return 1
            except (EmptyBeliefError, ValueError) as exc:
                print(f"{args.script}:{cmd.line}: {exc}", file=stderr)
                return 2
    else:
        lineno = 0
        while True:
            print("planrec> ", end="", file=stderr, flush=True)
            line = stdin.readline()
            if not line:
                break
            lineno += 1
            try:
                cmd = _parse_line(line, lineno)
                if cmd is None:
                    continue
                if cmd.kind == "context" and session.belief.time > 0:
                    raise ScriptError(lineno, "context facts must precede every obs/intervene")
                validate_script(Script((cmd,)), lib)
                session.execute(cmd)
            except InexplicableObservationError as exc:
                print(f"line {lineno}: {exc}", file=stderr)
                return 1
            except (ScriptError, EmptyBeliefError, ValueError) as exc:
                print(f"line {lineno}: {exc}", file=stderr)

    if args.out is not None:
        write_sidecar(args.out, session.records)
    if args.figures is not None:
        for path in render_figures(
            args.figures, session.trajectories(), session.last_next
        ):
            print(f"figure: {path}", file=stdout)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
