"""The mashup engine: unit resolution, open-class weaving, linearization,
conflict handling and contract flattening.

Composition folds every ``aspect class`` contribution (from constraint and
behavior units alike) into its base metamodel class, producing one
:class:`WovenClass` per class with:

* a Scala-style linearization (last occurrence of a repeated superclass
  wins, the implicit reflection root ``Root`` is always final),
* a merged feature table (any two declarations of the same feature name in
  one linearization are a clash; features cannot be renamed),
* a method table in linearization order, rewritten by explicit renamings,
* flattened contracts: invariants accumulate down the hierarchy, effective
  preconditions are the disjunction of per-class groups, effective
  postconditions the conjunction of every clause.

Two base metamodel classes with the same name can never be mixed; that
composition is forbidden outright.  Aspect contributions to a name no
metamodel declares create an aspect-only class.

compose() is a pure function of its input units; the returned WovenModel is
never mutated afterwards and may be shared read-only across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

from .behavior import AspectClass, BehaviorModule, MethodDef, Renaming, parse_behavior
from .contracts import (
    ConditionDecl, ContractContribution, ContractModule, InvariantDecl, parse_contracts,
)
from .diagnostics import CompositionError, Diagnostic, DiagnosticSink, UnitParseError
from .lexer import Lexer
from .metamodel import (
    Attribute, MetaClass, Metamodel, OperationSig, Param, Reference,
    parse_metamodel, supertype_cycle,
)
from .semtypes import PRIMITIVES, SemType, STRING, VOID, class_type

ROOT_CLASS = "Root"

# Builtin operations every class inherits from the reflection root.
ROOT_BUILTINS: dict[str, OperationSig] = {
    "trace": OperationSig("trace", (Param("message", STRING),), VOID),
    "fault": OperationSig("fault", (Param("message", STRING),), VOID),
    "container": OperationSig("container", (), class_type(ROOT_CLASS)),
}

Unit = Metamodel | ContractModule | BehaviorModule


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MashupManifest:
    package: str
    requires: tuple[str, ...]
    main: tuple[str, str] | None = None
    source_unit: str = "<mashup>"
    source_dir: str = "."


def parse_manifest(text: str, unit: str = "<mashup>", source_dir: str = ".") -> MashupManifest:
    lx = Lexer(text, unit)
    lx.expect("package")
    package = lx.expect_ident("package name").value
    lx.expect(";")
    requires: list[str] = []
    while lx.accept("require"):
        requires.append(lx.expect_string("unit path").value)
        lx.expect(";")
    if not requires:
        raise lx.error("manifest needs at least one require")
    main = None
    if lx.accept("main"):
        cls = lx.expect_ident("class name").value
        lx.expect(".")
        op = lx.expect_ident("operation name").value
        lx.expect(";")
        main = (cls, op)
    if not lx.at_eof():
        raise lx.error("trailing input after manifest")
    if len(set(requires)) != len(requires):
        raise UnitParseError(
            [Diagnostic("DuplicateRequire", "manifest lists the same unit twice", unit)]
        )
    return MashupManifest(package, tuple(requires), main, unit, source_dir)


def load_manifest(path: str) -> MashupManifest:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise UnitParseError(
            [Diagnostic("UnitNotFound", f"cannot read manifest: {exc}", path)]
        ) from exc
    return parse_manifest(text, os.path.basename(path), os.path.dirname(path) or ".")


class UnitLoader:
    """Reads unit files from disk, resolving paths against the requiring unit."""

    def load(self, require_path: str, relative_to: str) -> tuple[str, str, str]:
        """Return (dedupe key, display name, text) for a required path."""
        resolved = os.path.normpath(os.path.join(relative_to, require_path))
        try:
            with open(resolved, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise UnitParseError(
                [Diagnostic("UnitNotFound", f"cannot read unit: {exc}", require_path)]
            ) from exc
        return os.path.abspath(resolved), os.path.basename(resolved), text


_PARSERS = {".mm": parse_metamodel, ".inv": parse_contracts, ".act": parse_behavior}


def resolve_requires(manifest: MashupManifest, loader: UnitLoader | None = None) -> list[Unit]:
    """Load and parse every required unit, transitively, each exactly once.

    Units appear in require order with dependencies first, so later aspect
    units see earlier ones.
    """
    loader = loader or UnitLoader()
    seen: set[str] = set()
    out: list[Unit] = []

    def visit(require_path: str, relative_to: str) -> None:
        key, display, text = loader.load(require_path, relative_to)
        if key in seen:
            return
        seen.add(key)
        ext = os.path.splitext(require_path)[1]
        parser = _PARSERS.get(ext)
        if parser is None:
            raise UnitParseError(
                [Diagnostic("UnknownUnitKind", f"no parser for {ext or 'extension-less'} unit",
                            require_path)]
            )
        unit = parser(text, display)
        for sub in getattr(unit, "requires", ()):
            visit(sub, os.path.dirname(key) or ".")
        out.append(unit)

    for path in manifest.requires:
        visit(path, manifest.source_dir)
    return out


# ---------------------------------------------------------------------------
# Composition cases
# ---------------------------------------------------------------------------


class CompositionCase(Enum):
    KMT_KMT = "aspect+aspect"
    ECORE_ECORE = "base+base"
    ECORE_KMT = "base+aspect"


def _is_base(definition) -> bool:
    return isinstance(definition, MetaClass) and definition.origin == "base"


def classify_pair(a, b) -> CompositionCase:
    """Classify two same-named class definitions for composition."""
    a_base, b_base = _is_base(a), _is_base(b)
    if a_base and b_base:
        return CompositionCase.ECORE_ECORE
    if not a_base and not b_base:
        return CompositionCase.KMT_KMT
    return CompositionCase.ECORE_KMT


# ---------------------------------------------------------------------------
# Aspect contribution merging (composition case 1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassContribution:
    """Everything the aspect units add to one class, with unit attribution."""

    class_name: str
    units: tuple[str, ...] = ()
    added_supertypes: tuple[str, ...] = ()
    attributes: tuple[tuple[Attribute, str], ...] = ()
    references: tuple[tuple[Reference, str], ...] = ()
    methods: tuple[tuple[MethodDef, str], ...] = ()
    renamings: tuple[tuple[Renaming, str], ...] = ()
    invariants: tuple[tuple[InvariantDecl, str], ...] = ()
    pre_conditions: tuple[tuple[ConditionDecl, str], ...] = ()
    post_conditions: tuple[tuple[ConditionDecl, str], ...] = ()


def contribution_of(aspect, unit: str) -> ClassContribution:
    """Lift one parsed aspect (behavior or contract) into a contribution."""
    if isinstance(aspect, AspectClass):
        return ClassContribution(
            class_name=aspect.class_name,
            units=(unit,),
            added_supertypes=aspect.added_supertypes,
            attributes=tuple((a, unit) for a in aspect.added_attributes),
            references=tuple((r, unit) for r in aspect.added_references),
            methods=tuple((m, unit) for m in aspect.methods),
            renamings=tuple((r, unit) for r in aspect.renamings),
        )
    assert isinstance(aspect, ContractContribution)
    return ClassContribution(
        class_name=aspect.class_name,
        units=(unit,),
        invariants=tuple((i, unit) for i in aspect.invariants),
        pre_conditions=tuple((p, unit) for p in aspect.pre_conditions),
        post_conditions=tuple((p, unit) for p in aspect.post_conditions),
    )


def _clash(kind: str, cls: str, member: str, first_unit: str, second_unit: str) -> CompositionError:
    return CompositionError(
        [Diagnostic(
            "FeatureClash",
            f"{kind} {cls}.{member} is contributed by both {first_unit} and {second_unit}",
        )]
    )


def merge_contributions(a: ClassContribution, b: ClassContribution) -> ClassContribution:
    """Fold two aspect contributions to the same class into one.

    Associative whenever no two contributions define the same member name;
    any overlap between units is a clash, never a silent override.
    """
    assert a.class_name == b.class_name
    a_features = {f.name: u for f, u in a.attributes + a.references}
    for f, u in b.attributes + b.references:
        if f.name in a_features:
            raise _clash("feature", a.class_name, f.name, a_features[f.name], u)
    a_methods = {m.sig.name: u for m, u in a.methods}
    for m, u in b.methods:
        if m.sig.name in a_methods:
            raise _clash("method", a.class_name, m.sig.name, a_methods[m.sig.name], u)
    a_invs = {i.name: u for i, u in a.invariants}
    for i, u in b.invariants:
        if i.name in a_invs:
            raise _clash("invariant", a.class_name, i.name, a_invs[i.name], u)
    a_conds = {(c.op_name, c.name): u for c, u in a.pre_conditions + a.post_conditions}
    for c, u in b.pre_conditions + b.post_conditions:
        if (c.op_name, c.name) in a_conds:
            raise _clash("condition", a.class_name, f"{c.name} on {c.op_name}",
                         a_conds[(c.op_name, c.name)], u)
    supers = list(a.added_supertypes)
    for s in b.added_supertypes:
        if s not in supers:
            supers.append(s)
    return ClassContribution(
        class_name=a.class_name,
        units=a.units + tuple(u for u in b.units if u not in a.units),
        added_supertypes=tuple(supers),
        attributes=a.attributes + b.attributes,
        references=a.references + b.references,
        methods=a.methods + b.methods,
        renamings=a.renamings + b.renamings,
        invariants=a.invariants + b.invariants,
        pre_conditions=a.pre_conditions + b.pre_conditions,
        post_conditions=a.post_conditions + b.post_conditions,
    )


# ---------------------------------------------------------------------------
# Linearization
# ---------------------------------------------------------------------------


def linearize(class_name: str, graph: dict[str, tuple[str, ...]]) -> tuple[str, ...]:
    """Scala-style linearization over a supertype DAG.

    The class comes first, followed by the linearizations of its declared
    supertypes concatenated in reverse declaration order; a class occurring
    several times keeps only its last (rightmost) occurrence.  ``Root`` is
    always final.
    """
    cycle = supertype_cycle(graph)
    if cycle:
        raise CompositionError(
            [Diagnostic("CycleError", "supertype cycle: " + " -> ".join(cycle))]
        )
    memo: dict[str, list[str]] = {}

    def raw(c: str) -> list[str]:
        if c in memo:
            return memo[c]
        out = [c]
        for sup in reversed(graph.get(c, ())):
            if sup == ROOT_CLASS:
                continue
            out.extend(raw(sup))
        memo[c] = out
        return out

    expanded = raw(class_name)
    seen: set[str] = set()
    result: list[str] = []
    for name in reversed(expanded):
        if name not in seen:
            seen.add(name)
            result.append(name)
    result.reverse()
    result.append(ROOT_CLASS)
    return tuple(result)


# ---------------------------------------------------------------------------
# Woven model
# ---------------------------------------------------------------------------


@dataclass
class WovenClass:
    name: str
    origin: str  # 'base' | 'aspect'
    is_abstract: bool
    supertypes: tuple[str, ...]
    linearization: tuple[str, ...]
    # feature/operation tables cover the whole linearization
    features: dict[str, tuple[Attribute | Reference, str]] = field(default_factory=dict)
    op_sigs: dict[str, tuple[OperationSig, str]] = field(default_factory=dict)
    base_sig_names: frozenset[str] = frozenset()  # ops declared by the base class itself
    # dispatch view after renamings; raw_definers keeps the unrenamed chains
    # in linearization order for super resolution
    method_table: dict[str, tuple[tuple[str, MethodDef], ...]] = field(default_factory=dict)
    raw_definers: dict[str, tuple[tuple[str, MethodDef], ...]] = field(default_factory=dict)
    ambiguous_ops: frozenset[str] = frozenset()
    flat_invariants: tuple[tuple[str, InvariantDecl], ...] = ()
    flat_pre: dict[str, tuple[tuple[str, tuple[ConditionDecl, ...]], ...]] = field(
        default_factory=dict
    )
    flat_post: dict[str, tuple[tuple[str, ConditionDecl], ...]] = field(default_factory=dict)


@dataclass
class WovenModel:
    package: str
    classes: dict[str, WovenClass]
    root_class: str = ROOT_CLASS
    base_units: tuple[str, ...] = ()
    aspect_units: dict[str, tuple[str, ...]] = field(default_factory=dict)
    provenance: dict[tuple[str, str, str], str] = field(default_factory=dict)

    def conforms(self, sub: str, sup: str) -> bool:
        if sup == self.root_class or sub == sup:
            return True
        wc = self.classes.get(sub)
        return wc is not None and sup in wc.linearization

    def feature(self, class_name: str, feature: str):
        wc = self.classes.get(class_name)
        if wc is None:
            return None
        return wc.features.get(feature)

    def op_sig(self, class_name: str, op: str):
        wc = self.classes.get(class_name)
        if wc is not None and op in wc.op_sigs:
            return wc.op_sigs[op]
        if op in ROOT_BUILTINS:
            return ROOT_BUILTINS[op], ROOT_CLASS
        return None


# ---------------------------------------------------------------------------
# Contract flattening
# ---------------------------------------------------------------------------


def flatten_contracts(
    linearization: tuple[str, ...],
    contracts_by_class: dict[str, ClassContribution],
):
    """Merge raw per-class contracts along one linearization.

    Invariants of every class in the linearization are kept (subtypes
    preserve supertype invariants).  For each operation, the preconditions
    declared at one class level form a group whose clauses conjoin; the
    effective precondition is the disjunction of the groups.  Effective
    postconditions conjoin every clause of every level.
    """
    flat_invs: list[tuple[str, InvariantDecl]] = []
    pre_groups: dict[str, list[tuple[str, tuple[ConditionDecl, ...]]]] = {}
    post_clauses: dict[str, list[tuple[str, ConditionDecl]]] = {}
    for cls in linearization:
        contrib = contracts_by_class.get(cls)
        if contrib is None:
            continue
        for inv, _unit in contrib.invariants:
            flat_invs.append((cls, inv))
        by_op: dict[str, list[ConditionDecl]] = {}
        for cond, _unit in contrib.pre_conditions:
            by_op.setdefault(cond.op_name, []).append(cond)
        for op, conds in by_op.items():
            pre_groups.setdefault(op, []).append((cls, tuple(conds)))
        for cond, _unit in contrib.post_conditions:
            post_clauses.setdefault(cond.op_name, []).append((cls, cond))
    return (
        tuple(flat_invs),
        {op: tuple(groups) for op, groups in pre_groups.items()},
        {op: tuple(clauses) for op, clauses in post_clauses.items()},
    )


# ---------------------------------------------------------------------------
# Method conflicts
# ---------------------------------------------------------------------------


def resolve_method_conflicts(wc: WovenClass, woven: WovenModel) -> list[Diagnostic]:
    """Report every operation that stays ambiguous after renamings.

    An operation is ambiguous when its winning definer (first in the
    linearization) does not override all other definers along its own
    inheritance chain.
    """
    sink = DiagnosticSink(wc.name)
    for op in sorted(wc.ambiguous_ops):
        owners = [owner for owner, _m in wc.method_table.get(op, ())]
        sink.add(
            "AmbiguousMethod",
            f"{wc.name}.{op} is defined by unrelated classes "
            f"{', '.join(owners)}; add an explicit renaming",
        )
    return sink.items


def _is_ambiguous(entries, lin_of: dict[str, tuple[str, ...]]) -> bool:
    if len(entries) < 2:
        return False
    first = entries[0][0]
    first_lin = lin_of[first]
    return any(owner not in first_lin for owner, _m in entries[1:])


# ---------------------------------------------------------------------------
# compose
# ---------------------------------------------------------------------------


def compose(units: list[Unit], package: str | None = None) -> WovenModel:
    """Weave parsed units into a WovenModel.

    Raises CompositionError for forbidden base/base mixes, member clashes,
    dangling names, supertype cycles and bad renamings.  Ambiguous methods
    do not abort composition; they are recorded on the class and reported by
    resolve_method_conflicts.
    """
    metamodels = [u for u in units if isinstance(u, Metamodel)]
    if not metamodels:
        raise CompositionError(
            [Diagnostic("NoMetamodel", "composition needs at least one metamodel unit")]
        )
    package = package or metamodels[0].name

    base: dict[str, tuple[MetaClass, str]] = {}
    for mm in metamodels:
        for cls in mm.classes:
            if cls.name in base:
                case = classify_pair(base[cls.name][0], cls)
                assert case is CompositionCase.ECORE_ECORE
                raise CompositionError(
                    [Diagnostic(
                        "ForbiddenComposition",
                        f"class {cls.name} is declared by both {base[cls.name][1]} "
                        f"and {mm.source_unit}; mixing two base classes is forbidden",
                        mm.source_unit, cls.pos,
                    )]
                )
            base[cls.name] = (cls, mm.source_unit)

    contribs: dict[str, ClassContribution] = {}
    for unit in units:
        aspects: tuple = ()
        if isinstance(unit, ContractModule):
            aspects = unit.contributions
        elif isinstance(unit, BehaviorModule):
            aspects = unit.aspects
        for aspect in aspects:
            cc = contribution_of(aspect, unit.source_unit)
            name = cc.class_name
            contribs[name] = merge_contributions(contribs[name], cc) if name in contribs else cc

    all_names = list(base)
    for name in contribs:
        if name not in all_names:
            all_names.append(name)
    if ROOT_CLASS in all_names:
        raise CompositionError(
            [Diagnostic("ReservedName", f"{ROOT_CLASS} is the implicit reflection root")]
        )

    sink = DiagnosticSink("<compose>")
    graph: dict[str, tuple[str, ...]] = {}
    for name in all_names:
        declared = base[name][0].supertypes if name in base else ()
        added = contribs[name].added_supertypes if name in contribs else ()
        supers = list(declared)
        for s in added:
            if s not in supers:
                supers.append(s)
        for s in supers:
            if s not in all_names:
                sink.add("ResolutionError", f"class {name} inherits unknown class {s}")
        graph[name] = tuple(supers)
    if sink:
        raise CompositionError(sink.items)

    lin_of = {name: linearize(name, graph) for name in all_names}

    # own (declared-at-this-class) members, with unit attribution
    own_features: dict[str, list[tuple[Attribute | Reference, str]]] = {}
    own_methods: dict[str, list[tuple[MethodDef, str]]] = {}
    own_sigs: dict[str, list[tuple[OperationSig, str]]] = {}
    for name in all_names:
        feats: list[tuple[Attribute | Reference, str]] = []
        sigs: list[tuple[OperationSig, str]] = []
        if name in base:
            cls, unit_name = base[name]
            feats.extend((f, unit_name) for f in cls.features())
            sigs.extend((s, unit_name) for s in cls.operations)
        if name in contribs:
            cc = contribs[name]
            feats.extend(cc.attributes)
            feats.extend(cc.references)
            own_methods[name] = list(cc.methods)
            sigs.extend((m.sig, unit) for m, unit in cc.methods)
        own_features[name] = feats
        own_sigs[name] = sigs

    woven = WovenModel(package, {}, ROOT_CLASS)
    woven.base_units = tuple(dict.fromkeys(mm.source_unit for mm in metamodels))
    for name in all_names:
        if name in contribs:
            woven.aspect_units[name] = contribs[name].units

    for name in all_names:
        lin = lin_of[name]
        features: dict[str, tuple[Attribute | Reference, str]] = {}
        for cls in lin:
            for feat, unit_name in own_features.get(cls, ()):
                if feat.name in features:
                    other_owner = features[feat.name][1]
                    raise CompositionError(
                        [Diagnostic(
                            "FeatureClash",
                            f"feature {feat.name} reaches {name} from both "
                            f"{other_owner} and {cls}",
                        )]
                    )
                features[feat.name] = (feat, cls)

        op_sigs: dict[str, tuple[OperationSig, str]] = {}
        for cls in lin:
            for sig, _unit in own_sigs.get(cls, ()):
                op_sigs.setdefault(sig.name, (sig, cls))

        definers: dict[str, list[tuple[str, MethodDef]]] = {}
        for cls in lin:
            for mdef, _unit in own_methods.get(cls, ()):
                definers.setdefault(mdef.sig.name, []).append((cls, mdef))

        table: dict[str, tuple[tuple[str, MethodDef], ...]] = {
            op: tuple(entries) for op, entries in definers.items()
        }
        for rename, unit_name in (contribs[name].renamings if name in contribs else ()):
            table = _apply_renaming(name, rename, unit_name, table, lin, lin_of, definers)
        for op, entries in table.items():
            if op not in op_sigs and entries:
                owner0, mdef0 = entries[0]
                renamed_sig = OperationSig(op, mdef0.sig.params, mdef0.sig.return_type,
                                           mdef0.sig.pos)
                op_sigs[op] = (renamed_sig, owner0)

        ambiguous = frozenset(
            op for op, entries in table.items() if _is_ambiguous(entries, lin_of)
        )

        wc = WovenClass(
            name=name,
            origin="base" if name in base else "aspect",
            is_abstract=base[name][0].is_abstract if name in base else False,
            supertypes=graph[name],
            linearization=lin,
            features=features,
            op_sigs=op_sigs,
            base_sig_names=frozenset(
                s.name for s in base[name][0].operations) if name in base else frozenset(),
            method_table=table,
            raw_definers={op: tuple(entries) for op, entries in definers.items()},
            ambiguous_ops=ambiguous,
        )
        wc.flat_invariants, wc.flat_pre, wc.flat_post = flatten_contracts(lin, contribs)
        woven.classes[name] = wc

    _record_provenance(woven, base, contribs)
    return woven


def _apply_renaming(
    class_name: str,
    rename: Renaming,
    unit_name: str,
    table: dict[str, tuple[tuple[str, MethodDef], ...]],
    lin: tuple[str, ...],
    lin_of: dict[str, tuple[str, ...]],
    definers: dict[str, list[tuple[str, MethodDef]]],
) -> dict[str, tuple[tuple[str, MethodDef], ...]]:
    source_lin = lin_of.get(rename.from_class)
    problem = None
    if rename.from_class not in lin[1:]:
        problem = f"{rename.from_class} is not a supertype of {class_name}"
    else:
        renamed_chain = tuple(
            (owner, mdef)
            for owner in source_lin
            for d_owner, mdef in definers.get(rename.op_name, ())
            if d_owner == owner
        )
        if not renamed_chain:
            problem = f"{rename.from_class} does not provide operation {rename.op_name}"
        elif rename.new_name in table:
            problem = f"{class_name} already has an operation named {rename.new_name}"
    if problem:
        raise CompositionError(
            [Diagnostic("RenameTargetMissing",
                        f"cannot rename {rename.op_name} from {rename.from_class} "
                        f"as {rename.new_name}: {problem}",
                        unit_name, rename.pos)]
        )
    table = dict(table)
    table[rename.new_name] = renamed_chain
    remaining = tuple(
        (owner, mdef) for owner, mdef in table[rename.op_name] if owner not in source_lin
    )
    if remaining:
        table[rename.op_name] = remaining
    else:
        del table[rename.op_name]
    return table


def _record_provenance(woven, base, contribs) -> None:
    for name, (cls, unit_name) in base.items():
        woven.provenance[("class", name, "")] = unit_name
        for f in cls.features():
            woven.provenance[("feature", name, f.name)] = unit_name
    for name, cc in contribs.items():
        woven.provenance.setdefault(("class", name, ""), cc.units[0] if cc.units else "")
        for f, unit_name in cc.attributes + cc.references:
            woven.provenance[("feature", name, f.name)] = unit_name
        for m, unit_name in cc.methods:
            woven.provenance[("method", name, m.sig.name)] = unit_name
        for inv, unit_name in cc.invariants:
            woven.provenance[("inv", name, inv.name)] = unit_name
        for c, unit_name in cc.pre_conditions:
            woven.provenance[("pre", name, f"{c.op_name}.{c.name}")] = unit_name
        for c, unit_name in cc.post_conditions:
            woven.provenance[("post", name, f"{c.op_name}.{c.name}")] = unit_name


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _named_types(t: SemType):
    if t.kind == "class":
        yield t.name
    elif t.kind == "coll" and t.elem is not None:
        yield from _named_types(t.elem)


def validate_woven(woven: WovenModel) -> list[Diagnostic]:
    """Closure and well-formedness checks over a composed model."""
    sink = DiagnosticSink("<woven>")
    known = set(woven.classes) | {woven.root_class}
    for name, wc in woven.classes.items():
        if not wc.linearization or wc.linearization[0] != name:
            sink.add("BadLinearization", f"linearization of {name} must start with itself")
        if wc.linearization[-1] != woven.root_class:
            sink.add("BadLinearization", f"linearization of {name} must end with the root")
        if len(set(wc.linearization)) != len(wc.linearization):
            sink.add("BadLinearization", f"linearization of {name} repeats a class")
        for sup in wc.supertypes:
            if wc.linearization.count(sup) != 1:
                sink.add(
                    "BadLinearization",
                    f"supertype {sup} of {name} must occur exactly once in the linearization",
                )
        for fname, (feat, _owner) in wc.features.items():
            if isinstance(feat, Reference):
                if feat.target not in known:
                    sink.add("ClosureError",
                             f"reference {name}.{fname} targets unknown class {feat.target}")
                    continue
                if feat.opposite is not None:
                    paired = woven.feature(feat.target, feat.opposite)
                    opp = paired[0] if paired else None
                    if not isinstance(opp, Reference) or opp.opposite != feat.name:
                        sink.add(
                            "OppositeMismatch",
                            f"opposites are not mutual for {name}.{fname}",
                        )
                    elif feat.containment and opp.containment:
                        sink.add(
                            "ContainmentOpposite",
                            f"containment reference {name}.{fname} has a containment opposite",
                        )
            elif feat.type not in PRIMITIVES:
                sink.add("ClosureError", f"attribute {name}.{fname} has unknown type {feat.type}")
        for op, (sig, _owner) in wc.op_sigs.items():
            for t in list(_named_types(sig.return_type)) + [
                n for p in sig.params for n in _named_types(p.type)
            ]:
                if t not in known:
                    sink.add("ClosureError",
                             f"operation {name}.{op} mentions unknown class {t}")
    return sink.items


# ---------------------------------------------------------------------------
# Composition report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RichEntry:
    class_name: str
    base_artifact: str
    aspect_traits: tuple[str, ...]
    factory_line: str | None
    conversions: tuple[str, ...]


@dataclass(frozen=True)
class CompositionReport:
    package: str
    base_units: tuple[str, ...]
    entries: tuple[RichEntry, ...]

    def render(self) -> str:
        out = ["composition report", f"package: {self.package}"]
        out.append("base units: " + (", ".join(self.base_units) or "(none)"))
        out.append(f"rich classes: {len(self.entries)}")
        for e in self.entries:
            out.append("")
            out.append(f"Rich{e.class_name} = {e.base_artifact} with " + " with ".join(e.aspect_traits))
            if e.factory_line:
                out.append(f"  factory: {e.factory_line}")
            for c in e.conversions:
                out.append(f"  convert: {c}")
        return "\n".join(out) + "\n"


def build_report(woven: WovenModel) -> CompositionReport:
    entries = []
    for name, wc in woven.classes.items():
        units = woven.aspect_units.get(name)
        if not units:
            continue
        rich = f"Rich{name}"
        base_artifact = f"{name}Base" if wc.origin == "base" else f"{woven.root_class}Base"
        traits = tuple(f"{name}Aspect<{u}>" for u in units)
        factory = None if wc.is_abstract else f"create{name} -> {rich}"
        conversions = (f"{name} <-> {rich}",) + tuple(f"{t} -> {rich}" for t in traits)
        entries.append(RichEntry(name, base_artifact, traits, factory, conversions))
    return CompositionReport(woven.package, woven.base_units, tuple(entries))


def emit_report(woven: WovenModel) -> str:
    """Deterministic, human-readable account of the weaving result."""
    return build_report(woven).render()
