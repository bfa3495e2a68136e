"""Command-line entry point.

    mashup compose --manifest pkg.mashup
    mashup emit    --manifest pkg.mashup [--emit report.txt]
    mashup check   --manifest pkg.mashup --model m.model
    mashup run     --manifest pkg.mashup --model m.model [--entry C.op]
    mashup bench   --manifest pkg.mashup --model m.model [--reps N]

Exit codes: 0 success, 1 parse error or unreadable file, 2 composition
error, 3 type or conformance error, 4 contract violation, 5 runtime fault.
Results go to stdout, diagnostics to stderr (MASHUP_COLOR=0 disables ANSI
colors).
"""

from __future__ import annotations

import argparse
import sys
import time

from .composer import (
    MashupManifest, WovenModel, compose, emit_report, load_manifest,
    resolve_requires, resolve_method_conflicts, validate_woven,
)
from .diagnostics import (
    CompositionError, ContractViolation, Diagnostic, EvalFault, TypecheckError,
    WorkbenchError, print_diagnostics,
)
from .runtime import (
    Environment, Interpreter, ModelInstance, ObjRef, check_model, load_model,
)
from .typecheck import typecheck_units


def _build(manifest_path: str) -> tuple[MashupManifest, WovenModel]:
    manifest = load_manifest(manifest_path)
    units = resolve_requires(manifest)
    woven = compose(units, manifest.package)
    problems = validate_woven(woven)
    for wc in woven.classes.values():
        problems.extend(resolve_method_conflicts(wc, woven))
    if problems:
        raise CompositionError(problems)
    type_problems = typecheck_units(units, woven)
    if type_problems:
        raise TypecheckError(type_problems)
    return manifest, woven


def _load_model(path: str, woven: WovenModel) -> ModelInstance:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise WorkbenchError([Diagnostic("UnitNotFound", f"cannot read model: {exc}", path)])
    return load_model(text, woven)


def _entry_point(args, manifest: MashupManifest) -> tuple[str, str]:
    if args.entry:
        cls, sep, op = args.entry.partition(".")
        if not sep or not cls or not op:
            raise EvalFault("Fault", f"--entry wants Class.operation, got {args.entry!r}")
        return cls, op
    if manifest.main:
        return manifest.main
    raise EvalFault("Fault", "no entry point: pass --entry or add a main to the manifest")


def _matching_roots(model: ModelInstance, cls: str) -> list[str]:
    return [
        oid for oid in model.roots
        if model.woven.conforms(model.objects[oid].class_name, cls)
    ]


def cmd_compose(args) -> int:
    _manifest, woven = _build(args.manifest)
    rich = sum(1 for name in woven.classes if woven.aspect_units.get(name))
    print(f"composed {woven.package}: {len(woven.classes)} classes, {rich} aspected")
    return 0


def cmd_emit(args) -> int:
    _manifest, woven = _build(args.manifest)
    report = emit_report(woven)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as handle:
            handle.write(report)
    else:
        sys.stdout.write(report)
    return 0


def cmd_check(args) -> int:
    _manifest, woven = _build(args.manifest)
    model = _load_model(args.model, woven)
    results = check_model(model)
    bad = 0
    for r in results:
        if r.status == "violated":
            print(f"VIOLATED {r.invariant} @ {r.obj_id}")
            bad += 1
        elif r.status == "error":
            print(f"ERROR {r.invariant} @ {r.obj_id} ({r.detail})")
            bad += 1
    print(f"checked {len(results)} invariant evaluation(s), {bad} problem(s)")
    return 4 if bad else 0


def cmd_run(args) -> int:
    manifest, woven = _build(args.manifest)
    model = _load_model(args.model, woven)
    cls, op = _entry_point(args, manifest)
    roots = _matching_roots(model, cls)
    if not roots:
        raise EvalFault("Fault", f"model has no root object of class {cls}")
    env = Environment(model, args.contracts)
    interp = Interpreter(env)
    code = 0
    try:
        for oid in roots:
            interp.invoke(ObjRef(oid), op, [])
    except EvalFault as fault:  # both faults and contract violations
        print_diagnostics([Diagnostic(fault.kind, fault.message, args.model)])
        code = fault.exit_code
    for event in env.trace:
        print(event.render())
    return code


def cmd_bench(args) -> int:
    manifest, woven = _build(args.manifest)
    base_model = _load_model(args.model, woven)
    cls, op = _entry_point(args, manifest)
    if not _matching_roots(base_model, cls):
        raise EvalFault("Fault", f"model has no root object of class {cls}")
    timings: list[float] = []
    for _rep in range(args.reps):
        model = base_model.clone()  # load/copy time stays outside the clock
        env = Environment(model, args.contracts)
        interp = Interpreter(env)
        roots = _matching_roots(model, cls)
        start = time.perf_counter()
        for oid in roots:
            interp.invoke(ObjRef(oid), op, [])
        timings.append(time.perf_counter() - start)
    mean = sum(timings) / len(timings)
    print(
        f"bench: reps={args.reps} mean={mean * 1000:.3f}ms "
        f"min={min(timings) * 1000:.3f}ms max={max(timings) * 1000:.3f}ms"
    )
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mashup",
        description="compose metamodel, constraint and behavior units into a DSL runtime",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "compose": (cmd_compose, False),
        "emit": (cmd_emit, False),
        "check": (cmd_check, True),
        "run": (cmd_run, True),
        "bench": (cmd_bench, True),
    }
    for name, (fn, needs_model) in specs.items():
        p = sub.add_parser(name)
        p.add_argument("--manifest", required=True, help="mashup manifest file")
        if needs_model:
            p.add_argument("--model", required=True, help="model document to load")
            p.add_argument("--entry", help="Class.operation entry point override")
            p.add_argument(
                "--contracts", choices=["off", "prepost", "full"], default="prepost",
                help="contract enforcement during execution",
            )
        if name == "emit":
            p.add_argument("--emit", help="write the report here instead of stdout")
        if name == "bench":
            p.add_argument("--reps", type=_positive_int, default=30,
                           help="repetitions over fresh model copies")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ContractViolation as violation:
        print_diagnostics([Diagnostic(violation.kind, violation.message, args.manifest)])
        return violation.exit_code
    except WorkbenchError as err:
        print_diagnostics(err.diagnostics)
        return err.exit_code
    except EvalFault as fault:
        print_diagnostics([Diagnostic(fault.kind, fault.message, args.manifest)])
        return fault.exit_code


if __name__ == "__main__":
    sys.exit(main())
