"""Abstract-syntax concern: the metamodel data model, its parser and validator.

A metamodel unit (``.mm``) declares packages of classes with attributes,
references (optionally containment and/or paired with an opposite), operation
signatures and multiple inheritance:

    metamodel fuml {
      abstract class ActivityNode {
        attr name: String;
        ref outgoing: ActivityEdge[*] opposite source;
      }
      class Activity { ref node: ActivityNode[*] containment; }
    }

Multiplicities are written ``[lower..upper]`` or ``[*]``; the upper bound is
1 or unbounded.  A feature without a multiplicity is ``[0..1]``.  Parsed
metamodels are immutable; all structural rules are enforced by
:func:`validate_metamodel`, which :func:`parse_metamodel` runs before
returning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import Diagnostic, DiagnosticSink, NOPOS, Pos, UnitParseError
from .exprs import parse_sem_type
from .lexer import Lexer
from .semtypes import PRIMITIVES, SemType, VOID


@dataclass(frozen=True)
class Bounds:
    lower: int
    upper: int | None  # None means unbounded

    @property
    def many(self) -> bool:
        return self.upper is None

    def render(self) -> str:
        return f"[{self.lower}..{'*' if self.upper is None else self.upper}]"


SINGLE_OPTIONAL = Bounds(0, 1)
MANY = Bounds(0, None)


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str  # one of PRIMITIVES
    bounds: Bounds = SINGLE_OPTIONAL
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Reference:
    name: str
    target: str
    bounds: Bounds = SINGLE_OPTIONAL
    containment: bool = False
    opposite: str | None = None
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    type: SemType


@dataclass(frozen=True)
class OperationSig:
    name: str
    params: tuple[Param, ...] = ()
    return_type: SemType = VOID
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class MetaClass:
    name: str
    is_abstract: bool = False
    supertypes: tuple[str, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    references: tuple[Reference, ...] = ()
    operations: tuple[OperationSig, ...] = ()
    origin: str = "base"  # 'base' | 'aspect'
    pos: Pos = field(default=NOPOS, compare=False)

    def features(self) -> tuple:
        return self.attributes + self.references


@dataclass(frozen=True)
class Metamodel:
    name: str
    classes: tuple[MetaClass, ...] = ()
    source_unit: str = "<mm>"

    def class_named(self, name: str) -> MetaClass | None:
        for c in self.classes:
            if c.name == name:
                return c
        return None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_bounds(lx: Lexer) -> Bounds:
    if not lx.accept("["):
        return SINGLE_OPTIONAL
    if lx.accept("*"):
        lx.expect("]")
        return MANY
    lo_tok = lx.peek()
    if lo_tok.kind != "int":
        raise lx.error("expected lower bound or '*'")
    lx.next()
    lx.expect("..")
    if lx.accept("*"):
        upper: int | None = None
    else:
        hi_tok = lx.peek()
        if hi_tok.kind != "int":
            raise lx.error("expected upper bound or '*'")
        lx.next()
        upper = int(hi_tok.value)
    lx.expect("]")
    return Bounds(int(lo_tok.value), upper)


def _parse_params(lx: Lexer) -> tuple[Param, ...]:
    params: list[Param] = []
    if not lx.at(")"):
        while True:
            name = lx.expect_ident("parameter name").value
            lx.expect(":")
            params.append(Param(name, parse_sem_type(lx)))
            if not lx.accept(","):
                break
    return tuple(params)


def parse_operation_sig(lx: Lexer) -> OperationSig:
    name_tok = lx.expect_ident("operation name")
    lx.expect("(")
    params = _parse_params(lx)
    lx.expect(")")
    ret = parse_sem_type(lx) if lx.accept(":") else VOID
    return OperationSig(name_tok.value, params, ret, name_tok.pos)


def _parse_class(lx: Lexer) -> MetaClass:
    is_abstract = lx.accept("abstract")
    lx.expect("class")
    name_tok = lx.expect_ident("class name")
    supers: list[str] = []
    if lx.accept("extends"):
        supers.append(lx.expect_ident("superclass name").value)
        while lx.accept(","):
            supers.append(lx.expect_ident("superclass name").value)
    lx.expect("{")
    attrs: list[Attribute] = []
    refs: list[Reference] = []
    ops: list[OperationSig] = []
    while not lx.at("}"):
        if lx.accept("attr"):
            a_tok = lx.expect_ident("attribute name")
            lx.expect(":")
            t_tok = lx.expect_ident("primitive type")
            if t_tok.value not in PRIMITIVES:
                raise lx.error(
                    f"attribute type must be one of {', '.join(PRIMITIVES)}", t_tok.pos
                )
            bounds = _parse_bounds(lx)
            lx.expect(";")
            attrs.append(Attribute(a_tok.value, t_tok.value, bounds, a_tok.pos))
        elif lx.accept("ref"):
            r_tok = lx.expect_ident("reference name")
            lx.expect(":")
            target = lx.expect_ident("target class").value
            bounds = _parse_bounds(lx)
            containment = lx.accept("containment")
            opposite = lx.expect_ident("opposite name").value if lx.accept("opposite") else None
            lx.expect(";")
            refs.append(Reference(r_tok.value, target, bounds, containment, opposite, r_tok.pos))
        elif lx.accept("op"):
            sig = parse_operation_sig(lx)
            lx.expect(";")
            ops.append(sig)
        else:
            raise lx.error("expected attr, ref, op or '}'")
    lx.expect("}")
    return MetaClass(
        name_tok.value, is_abstract, tuple(supers), tuple(attrs), tuple(refs),
        tuple(ops), "base", name_tok.pos,
    )


def parse_metamodel(text: str, unit: str = "<mm>") -> Metamodel:
    """Parse and validate a metamodel unit.

    Raises UnitParseError carrying positioned diagnostics for syntax errors
    and for any violated structural rule (dangling names, cycles, duplicate
    features, bad bounds).
    """
    lx = Lexer(text, unit)
    lx.expect("metamodel")
    name = lx.expect_ident("metamodel name").value
    lx.expect("{")
    classes: list[MetaClass] = []
    while not lx.at("}"):
        classes.append(_parse_class(lx))
    lx.expect("}")
    if not lx.at_eof():
        raise lx.error("trailing input after metamodel")
    mm = Metamodel(name, tuple(classes), unit)
    problems = validate_metamodel(mm)
    if problems:
        raise UnitParseError(problems)
    return mm


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def supertype_cycle(classes: dict[str, tuple[str, ...]]) -> list[str] | None:
    """Return one cycle through the supertype relation, if any."""
    WHITE, GREY, BLACK = 0, 1, 2
    state = {name: WHITE for name in classes}
    stack: list[str] = []

    def visit(name: str) -> list[str] | None:
        state[name] = GREY
        stack.append(name)
        for sup in classes.get(name, ()):
            if sup not in classes:
                continue
            if state[sup] == GREY:
                return stack[stack.index(sup):] + [sup]
            if state[sup] == WHITE:
                found = visit(sup)
                if found:
                    return found
        stack.pop()
        state[name] = BLACK
        return None

    for name in classes:
        if state[name] == WHITE:
            found = visit(name)
            if found:
                return found
    return None


def _check_bounds(b: Bounds, where: str, pos: Pos, sink: DiagnosticSink) -> None:
    if b.lower < 0:
        sink.add("BoundsError", f"{where}: lower bound must be >= 0", pos)
    if b.upper is not None and b.upper != 1:
        sink.add("BoundsError", f"{where}: upper bound must be 1 or *", pos)
    if b.upper is not None and b.lower > b.upper:
        sink.add("BoundsError", f"{where}: lower bound exceeds upper bound", pos)


def validate_metamodel(mm: Metamodel) -> list[Diagnostic]:
    """Check every structural rule; an empty list means the metamodel is sound."""
    sink = DiagnosticSink(mm.source_unit)
    by_name: dict[str, MetaClass] = {}
    for c in mm.classes:
        if c.name in by_name:
            sink.add("DuplicateClass", f"class {c.name} declared twice", c.pos)
        else:
            by_name[c.name] = c

    for c in mm.classes:
        for sup in c.supertypes:
            if sup not in by_name:
                sink.add("ResolutionError", f"class {c.name} extends unknown class {sup}", c.pos)
        seen: dict[str, Pos] = {}
        for f in c.features():
            if f.name in seen:
                sink.add(
                    "DuplicateFeature",
                    f"class {c.name} declares feature {f.name} more than once",
                    f.pos,
                )
            seen[f.name] = f.pos
        for a in c.attributes:
            _check_bounds(a.bounds, f"{c.name}.{a.name}", a.pos, sink)
        for r in c.references:
            _check_bounds(r.bounds, f"{c.name}.{r.name}", r.pos, sink)
            target = by_name.get(r.target)
            if target is None:
                sink.add(
                    "ResolutionError",
                    f"reference {c.name}.{r.name} targets unknown class {r.target}",
                    r.pos,
                )
                continue
            if r.opposite is not None:
                opp = next((o for o in target.references if o.name == r.opposite), None)
                if opp is None:
                    sink.add(
                        "ResolutionError",
                        f"opposite {r.target}.{r.opposite} of {c.name}.{r.name} does not exist",
                        r.pos,
                    )
                else:
                    if opp.opposite != r.name or opp.target != c.name:
                        sink.add(
                            "OppositeMismatch",
                            f"opposites are not mutual: {c.name}.{r.name} names "
                            f"{r.target}.{r.opposite}, whose opposite is "
                            f"{opp.opposite or 'unset'}",
                            r.pos,
                        )
                    if r.containment and opp.containment:
                        sink.add(
                            "ContainmentOpposite",
                            f"containment reference {c.name}.{r.name} has a containment opposite",
                            r.pos,
                        )
        for op in c.operations:
            names = [p.name for p in op.params]
            if len(names) != len(set(names)):
                sink.add(
                    "DuplicateParam",
                    f"operation {c.name}.{op.name} repeats a parameter name",
                    op.pos,
                )

    cycle = supertype_cycle({c.name: c.supertypes for c in mm.classes})
    if cycle:
        sink.add("CycleError", "supertype cycle: " + " -> ".join(cycle))
    return sink.items


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _render_type(t: SemType) -> str:
    return str(t)


def pretty_print(mm: Metamodel) -> str:
    """Render a metamodel back to source; parsing the result is an identity."""
    out = [f"metamodel {mm.name} {{"]
    for c in mm.classes:
        head = "  abstract class " if c.is_abstract else "  class "
        head += c.name
        if c.supertypes:
            head += " extends " + ", ".join(c.supertypes)
        out.append(head + " {")
        for a in c.attributes:
            out.append(f"    attr {a.name}: {a.type}{a.bounds.render()};")
        for r in c.references:
            line = f"    ref {r.name}: {r.target}{r.bounds.render()}"
            if r.containment:
                line += " containment"
            if r.opposite:
                line += f" opposite {r.opposite}"
            out.append(line + ";")
        for op in c.operations:
            params = ", ".join(f"{p.name}: {_render_type(p.type)}" for p in op.params)
            line = f"    op {op.name}({params})"
            if op.return_type != VOID:
                line += f": {_render_type(op.return_type)}"
            out.append(line + ";")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"
