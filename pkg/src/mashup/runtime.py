"""Execution engine: object graphs conforming to a woven model, the EMOF
assignment semantics, dispatch with contract enforcement, and persistence.

Assignment keeps both ends of bidirectional associations in sync and keeps
containment a forest: attaching an object removes it from its previous
container first, and an attachment that would close a containment cycle is
refused before anything is mutated.  Slot reads hand out copies of
collections, so expression evaluation can never alias live model state.

Models serialize to JSON with objects ordered by id and slot keys sorted,
so output is byte-stable.  Slots holding their type default (void single
references, empty collections, 0 / false / "") are omitted.

A model instance plus its environment belongs to one thread at a time; the
woven model they reference is shared read-only.  Independent instances may
execute concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .behavior import (
    Assign, EachLoop, ExprStmt, If, Loop, MethodDef, Return, SuperCall, VarDecl,
)
from .composer import ROOT_BUILTINS, WovenModel
from .contracts import InvariantDecl
from .diagnostics import (
    ContractViolation, Diagnostic, DiagnosticSink, EvalFault, TypecheckError,
    UnitParseError,
)
from .exprs import (
    BinOp, BoolLit, Coll, CollectionOp, EachBlock, FeatureNav, IfExpr, IntLit,
    New, Not, ObjRef, OpCall, SelfRef, StringLit, StringV, TypeTest, Value,
    VarRef, VoidLit, VoidV, BoolV, IntV, FALSE, TRUE, VOID_VALUE, make_coll,
    render_value,
)
from .metamodel import Attribute, Reference
from .semtypes import SemType

POLICY_OFF = "off"
POLICY_PREPOST = "prepost"
POLICY_FULL = "full"


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpEnter:
    obj_id: str
    op: str

    def render(self) -> str:
        return f"OpEnter\t{self.obj_id}.{self.op}"


@dataclass(frozen=True)
class OpExit:
    obj_id: str
    op: str
    result: str

    def render(self) -> str:
        return f"OpExit\t{self.obj_id}.{self.op}\t{self.result}"


@dataclass(frozen=True)
class ContractViolationEvent:
    kind: str  # 'pre' | 'post' | 'inv'
    name: str
    obj_id: str

    def render(self) -> str:
        return f"ContractViolation\t{self.kind} {self.name} @ {self.obj_id}"


@dataclass(frozen=True)
class NodeExecuted:
    label: str

    def render(self) -> str:
        return f"NodeExecuted\t{self.label}"


TraceEvent = OpEnter | OpExit | ContractViolationEvent | NodeExecuted


# ---------------------------------------------------------------------------
# Objects and model instances
# ---------------------------------------------------------------------------


class Obj:
    __slots__ = ("id", "class_name", "slots", "container")

    def __init__(self, oid: str, class_name: str):
        self.id = oid
        self.class_name = class_name
        self.slots: dict[str, Value] = {}
        self.container: tuple[str, str] | None = None  # (container id, feature)

    def __repr__(self) -> str:
        return f"Obj({self.id}:{self.class_name})"


def default_value(feat: Attribute | Reference) -> Value:
    if isinstance(feat, Attribute):
        if feat.bounds.many:
            return Coll("Sequence")
        return {"Int": IntV(0), "Bool": FALSE, "String": StringV("")}[feat.type]
    return Coll("OrderedSet") if feat.bounds.many else VOID_VALUE


class ModelInstance:
    """An object graph conforming to one woven model."""

    def __init__(self, woven: WovenModel):
        self.woven = woven
        self.objects: dict[str, Obj] = {}
        self.roots: list[str] = []
        self._next_id = 1

    def obj(self, oid: str) -> Obj:
        try:
            return self.objects[oid]
        except KeyError:
            raise EvalFault("UnknownObject", f"no object with id {oid}") from None

    def resolve(self, ref) -> Obj:
        if isinstance(ref, Obj):
            return ref
        if isinstance(ref, ObjRef):
            return self.obj(ref.id)
        return self.obj(ref)

    def fresh_id(self) -> str:
        while f"o{self._next_id}" in self.objects:
            self._next_id += 1
        oid = f"o{self._next_id}"
        self._next_id += 1
        return oid

    def _register(self, obj: Obj) -> None:
        self.objects[obj.id] = obj
        self.roots.append(obj.id)

    def _roots_add(self, oid: str) -> None:
        if oid not in self.roots:
            self.roots.append(oid)

    def _roots_remove(self, oid: str) -> None:
        if oid in self.roots:
            self.roots.remove(oid)

    def clone(self) -> "ModelInstance":
        out = ModelInstance(self.woven)
        out._next_id = self._next_id
        out.roots = list(self.roots)
        for oid, obj in self.objects.items():
            copy = Obj(oid, obj.class_name)
            copy.container = obj.container
            copy.slots = {
                k: Coll(v.kind, list(v.items)) if isinstance(v, Coll) else v
                for k, v in obj.slots.items()
            }
            out.objects[oid] = copy
        return out

    def fingerprint(self) -> str:
        parts = []
        for oid in sorted(self.objects):
            obj = self.objects[oid]
            slots = ";".join(f"{k}={render_value(obj.slots[k])}" for k in sorted(obj.slots))
            parts.append(f"{oid}:{obj.class_name}[{slots}]@{obj.container}")
        return "|".join(parts) + "//" + ",".join(self.roots)


def create_instance(model: ModelInstance, class_name: str) -> ObjRef:
    """Factory: a fresh object with every slot at its type default."""
    wc = model.woven.classes.get(class_name)
    if wc is None:
        raise EvalFault("UnknownClass", f"unknown class {class_name}")
    if wc.is_abstract:
        raise EvalFault("AbstractInstantiation", f"class {class_name} is abstract")
    obj = Obj(model.fresh_id(), class_name)
    for fname, (feat, _owner) in wc.features.items():
        obj.slots[fname] = default_value(feat)
    model._register(obj)
    return ObjRef(obj.id)


# ---------------------------------------------------------------------------
# EMOF assignment semantics
# ---------------------------------------------------------------------------

_PRIM_CLASSES = {"Int": IntV, "Bool": BoolV, "String": StringV}


def _feature_def(model: ModelInstance, obj: Obj, feature: str):
    entry = model.woven.feature(obj.class_name, feature)
    if entry is None:
        raise EvalFault("TypeFault", f"{obj.class_name} has no feature {feature}")
    return entry[0]


def _check_prim(feat: Attribute, value: Value) -> None:
    if not isinstance(value, _PRIM_CLASSES[feat.type]):
        raise EvalFault(
            "TypeFault", f"attribute {feat.name} expects {feat.type}, got {render_value(value)}"
        )


def _check_target(model: ModelInstance, feat: Reference, value: Value) -> None:
    if not isinstance(value, ObjRef):
        raise EvalFault(
            "TypeFault", f"reference {feat.name} expects an object, got {render_value(value)}"
        )
    target = model.obj(value.id)
    if not model.woven.conforms(target.class_name, feat.target):
        raise EvalFault(
            "TypeFault",
            f"reference {feat.name} expects {feat.target}, got {target.class_name}",
        )


def _check_containment_ok(model: ModelInstance, parent: Obj, child: ObjRef) -> None:
    cur: Obj | None = parent
    while cur is not None:
        if cur.id == child.id:
            raise EvalFault(
                "ContainmentCycle",
                f"attaching {child.id} under {parent.id} would close a containment cycle",
            )
        cur = model.obj(cur.container[0]) if cur.container else None


def _check_cycle_for_link(model: ModelInstance, src: Obj, feat: Reference, tgt: ObjRef) -> None:
    """Refuse a link that would close a containment cycle, looking through
    either end of the association (assigning the child side of a containment
    pair must be guarded too)."""
    if feat.containment:
        _check_containment_ok(model, src, tgt)
        return
    if feat.opposite is not None:
        t_obj = model.obj(tgt.id)
        entry = model.woven.feature(t_obj.class_name, feat.opposite)
        if entry is not None and entry[0].containment:
            _check_containment_ok(model, t_obj, ObjRef(src.id))


def _detach(model: ModelInstance, obj: Obj) -> None:
    if obj.container is None:
        return
    pid, fname = obj.container
    parent = model.obj(pid)
    _remove_link(model, parent, _feature_def(model, parent, fname), ObjRef(obj.id))


def _remove_link(model: ModelInstance, src: Obj, feat: Reference, tgt: ObjRef,
                 sync: bool = True) -> None:
    slot = src.slots[feat.name]
    if feat.bounds.many:
        if tgt in slot.items:
            slot.items.remove(tgt)
    elif slot == tgt:
        src.slots[feat.name] = VOID_VALUE
    if feat.containment:
        t_obj = model.obj(tgt.id)
        if t_obj.container == (src.id, feat.name):
            t_obj.container = None
            model._roots_add(tgt.id)
    if sync and feat.opposite:
        t_obj = model.obj(tgt.id)
        o_feat = _feature_def(model, t_obj, feat.opposite)
        _remove_link(model, t_obj, o_feat, ObjRef(src.id), sync=False)


def _add_link(model: ModelInstance, src: Obj, feat: Reference, tgt: ObjRef,
              sync: bool = True) -> None:
    if feat.containment:
        t_obj = model.obj(tgt.id)
        _detach(model, t_obj)
        t_obj.container = (src.id, feat.name)
        model._roots_remove(tgt.id)
    slot = src.slots[feat.name]
    if feat.bounds.many:
        if tgt not in slot.items:
            slot.items.append(tgt)
    else:
        old = slot
        if isinstance(old, ObjRef) and old != tgt:
            _remove_link(model, src, feat, old)
        src.slots[feat.name] = tgt
    if sync and feat.opposite:
        t_obj = model.obj(tgt.id)
        o_feat = _feature_def(model, t_obj, feat.opposite)
        _add_link(model, t_obj, o_feat, ObjRef(src.id), sync=False)


def set_feature(model: ModelInstance, obj, feature: str, value: Value) -> None:
    """Whole-slot assignment with bidirectional and containment upkeep."""
    obj = model.resolve(obj)
    feat = _feature_def(model, obj, feature)
    if isinstance(feat, Attribute):
        if feat.bounds.many:
            if not isinstance(value, Coll):
                raise EvalFault("TypeFault", f"attribute {feature} expects a collection")
            for x in value.items:
                _check_prim(feat, x)
            obj.slots[feature] = make_coll("Sequence", value.items)
        else:
            _check_prim(feat, value)
            obj.slots[feature] = value
        return
    if feat.bounds.many:
        if not isinstance(value, Coll):
            raise EvalFault("TypeFault", f"reference {feature} expects a collection")
        new = make_coll("OrderedSet", value.items)
        for x in new.items:
            _check_target(model, feat, x)
        for x in new.items:
            _check_cycle_for_link(model, obj, feat, x)
        for x in list(obj.slots[feature].items):
            _remove_link(model, obj, feat, x)
        for x in new.items:
            _add_link(model, obj, feat, x)
        return
    if isinstance(value, VoidV):
        old = obj.slots[feature]
        if isinstance(old, ObjRef):
            _remove_link(model, obj, feat, old)
        obj.slots[feature] = VOID_VALUE
        return
    _check_target(model, feat, value)
    _check_cycle_for_link(model, obj, feat, value)
    if obj.slots[feature] == value:
        return
    old = obj.slots[feature]
    if isinstance(old, ObjRef):
        _remove_link(model, obj, feat, old)
    _add_link(model, obj, feat, value)


def add_to_feature(model: ModelInstance, obj, feature: str, value: Value) -> None:
    """Element-wise add; duplicates on unique collections are a no-op."""
    obj = model.resolve(obj)
    feat = _feature_def(model, obj, feature)
    if isinstance(feat, Attribute):
        if not feat.bounds.many:
            raise EvalFault("TypeFault", f"cannot add to single-valued attribute {feature}")
        _check_prim(feat, value)
        obj.slots[feature].items.append(value)
        return
    if feat.bounds.many:
        _check_target(model, feat, value)
        _check_cycle_for_link(model, obj, feat, value)
        _add_link(model, obj, feat, value)
        return
    if not isinstance(obj.slots[feature], VoidV):
        raise EvalFault(
            "UpperBoundExceeded", f"feature {feature} of {obj.id} already holds a value"
        )
    set_feature(model, obj, feature, value)


def remove_from_feature(model: ModelInstance, obj, feature: str, value: Value) -> None:
    """Element-wise removal; absent elements are a no-op."""
    obj = model.resolve(obj)
    feat = _feature_def(model, obj, feature)
    if isinstance(feat, Attribute):
        if not feat.bounds.many:
            raise EvalFault("TypeFault", f"cannot remove from single-valued attribute {feature}")
        slot = obj.slots[feature]
        if value in slot.items:
            slot.items.remove(value)
        return
    if not isinstance(value, ObjRef):
        return
    if feat.bounds.many:
        if value in obj.slots[feature].items:
            _remove_link(model, obj, feat, value)
    elif obj.slots[feature] == value:
        _remove_link(model, obj, feat, value)


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------


class _ReturnSignal(Exception):
    def __init__(self, value: Value):
        self.value = value


class _Frame:
    __slots__ = ("self_obj", "scopes", "defining_class", "op_name")

    def __init__(self, self_obj: Obj, defining_class: str | None, op_name: str | None):
        self.self_obj = self_obj
        self.scopes: list[dict[str, Value]] = [{}]
        self.defining_class = defining_class
        self.op_name = op_name


class Environment:
    """Mutable execution state: model, contract policy and the event trace."""

    def __init__(self, model: ModelInstance, policy: str = POLICY_PREPOST):
        assert policy in (POLICY_OFF, POLICY_PREPOST, POLICY_FULL)
        self.model = model
        self.woven = model.woven
        self.policy = policy
        self.trace: list[TraceEvent] = []


class Interpreter:
    """Tree-walking evaluator for expressions and method bodies.

    In pure mode (constraint checking) operation calls, instantiation and
    feature mutation fault instead of executing, so invariants can never
    change the model they inspect.
    """

    def __init__(self, env: Environment, pure: bool = False):
        self.env = env
        self.pure = pure
        self.frames: list[_Frame] = []

    # -- dispatch ---------------------------------------------------------

    def invoke(self, recv: ObjRef, op: str, args: list[Value]) -> Value:
        env = self.env
        obj = env.model.obj(recv.id)
        wc = env.woven.classes.get(obj.class_name)
        if wc is None:
            raise EvalFault("UnknownClass", f"object {obj.id} has unknown class {obj.class_name}")
        if op in wc.ambiguous_ops:
            raise EvalFault(
                "AmbiguousMethod",
                f"{obj.class_name}.{op} is ambiguous; resolve it with a renaming",
            )
        entries = wc.method_table.get(op)
        if not entries:
            if op in ROOT_BUILTINS:
                return self._builtin(obj, op, args)
            raise EvalFault("NoSuchMethod", f"{obj.class_name} has no operation {op}")
        owner, mdef = entries[0]
        if len(args) != len(mdef.sig.params):
            raise EvalFault(
                "TypeFault",
                f"{op} expects {len(mdef.sig.params)} argument(s), got {len(args)}",
            )
        env.trace.append(OpEnter(obj.id, op))
        checked = env.policy != POLICY_OFF
        if checked:
            self._check_pre(wc, obj, op, mdef, args)
        result = self._execute_method(owner, mdef, obj, args)
        if checked:
            self._check_post(wc, obj, op, mdef, args, result)
            if env.policy == POLICY_FULL:
                self._check_invariants(wc, obj)
        env.trace.append(OpExit(obj.id, op, render_value(result)))
        return result

    def _execute_method(self, owner: str, mdef: MethodDef, obj: Obj, args) -> Value:
        frame = _Frame(obj, owner, mdef.sig.name)
        frame.scopes[0] = {p.name: a for p, a in zip(mdef.sig.params, args)}
        self.frames.append(frame)
        try:
            self.exec_block(mdef.body)
            return VOID_VALUE
        except _ReturnSignal as ret:
            return ret.value
        finally:
            self.frames.pop()

    def _builtin(self, obj: Obj, op: str, args: list[Value]) -> Value:
        sig = ROOT_BUILTINS[op]
        if len(args) != len(sig.params):
            raise EvalFault("TypeFault", f"{op} expects {len(sig.params)} argument(s)")
        if op == "trace":
            if not isinstance(args[0], StringV):
                raise EvalFault("TypeFault", "trace expects a String")
            self.env.trace.append(NodeExecuted(args[0].s))
            return VOID_VALUE
        if op == "fault":
            msg = args[0].s if isinstance(args[0], StringV) else render_value(args[0])
            raise EvalFault("Fault", msg)
        # container
        if obj.container is None:
            return VOID_VALUE
        return ObjRef(obj.container[0])

    # -- contracts ---------------------------------------------------------

    def _eval_rule(self, body, obj: Obj, scope: dict[str, Value]) -> Value:
        frame = _Frame(obj, None, None)
        frame.scopes[0] = scope
        self.frames.append(frame)
        was_pure = self.pure
        self.pure = True
        try:
            return self.eval(body)
        finally:
            self.pure = was_pure
            self.frames.pop()

    def _contract_scope(self, wc, op: str, mdef: MethodDef, args) -> dict[str, Value]:
        # bind positional arguments under every name the operation declares
        # anywhere in the chain, so inherited contracts see their own names
        scope = {p.name: a for p, a in zip(mdef.sig.params, args)}
        entry = wc.op_sigs.get(op)
        sigs = [entry[0]] if entry else []
        sigs.extend(m.sig for _owner, m in wc.raw_definers.get(op, ()))
        for sig in sigs:
            for p, a in zip(sig.params, args):
                scope.setdefault(p.name, a)
        return scope

    def _check_pre(self, wc, obj: Obj, op: str, mdef: MethodDef, args) -> None:
        groups = wc.flat_pre.get(op)
        if not groups:
            return
        scope = self._contract_scope(wc, op, mdef, args)
        for _owner, clauses in groups:
            if all(self._rule_holds(c.body, obj, scope) for c in clauses):
                return
        name = groups[0][1][0].name
        self.env.trace.append(ContractViolationEvent("pre", name, obj.id))
        raise ContractViolation("PreconditionViolation", name, obj.id)

    def _check_post(self, wc, obj: Obj, op: str, mdef: MethodDef, args, result: Value) -> None:
        clauses = wc.flat_post.get(op)
        if not clauses:
            return
        scope = self._contract_scope(wc, op, mdef, args)
        scope["result"] = result
        for _owner, clause in clauses:
            if not self._rule_holds(clause.body, obj, scope):
                self.env.trace.append(ContractViolationEvent("post", clause.name, obj.id))
                raise ContractViolation("PostconditionViolation", clause.name, obj.id)

    def _check_invariants(self, wc, obj: Obj) -> None:
        for _owner, inv in wc.flat_invariants:
            if not self._rule_holds(inv.body, obj, {}):
                self.env.trace.append(ContractViolationEvent("inv", inv.name, obj.id))
                raise ContractViolation("InvariantViolation", inv.name, obj.id)

    def _rule_holds(self, body, obj: Obj, scope: dict[str, Value]) -> bool:
        value = self._eval_rule(body, obj, dict(scope))
        if not isinstance(value, BoolV):
            raise EvalFault("TypeFault", "contract rule did not yield a Bool")
        return value.b

    # -- statements --------------------------------------------------------

    def exec_block(self, stmts) -> None:
        for stmt in stmts:
            _EXEC[type(stmt)](self, stmt)

    def _exec_vardecl(self, stmt: VarDecl) -> None:
        value = self.eval(stmt.init) if stmt.init is not None else _type_default(stmt.type)
        self.frames[-1].scopes[-1][stmt.name] = value

    def _exec_assign(self, stmt: Assign) -> None:
        value = self.eval(stmt.rhs)
        lv = stmt.lvalue
        if isinstance(lv, VarRef):
            for scope in reversed(self.frames[-1].scopes):
                if lv.name in scope:
                    scope[lv.name] = value
                    return
            raise EvalFault("UnboundVariable", f"unbound variable {lv.name}")
        recv = self.eval(lv.receiver)
        if not isinstance(recv, ObjRef):
            raise EvalFault("TypeFault", f"cannot assign feature {lv.feature} on void")
        self._mutation_guard()
        set_feature(self.env.model, recv, lv.feature, value)

    def _exec_exprstmt(self, stmt: ExprStmt) -> None:
        e = stmt.expr
        # statement-position add on a feature is the EMOF element-add
        if (
            isinstance(e, CollectionOp)
            and e.op_kind == "add"
            and isinstance(e.receiver, FeatureNav)
        ):
            recv = self.eval(e.receiver.receiver)
            if not isinstance(recv, ObjRef):
                raise EvalFault("TypeFault", f"cannot add to feature {e.receiver.feature} on void")
            value = self.eval(e.arg)
            self._mutation_guard()
            add_to_feature(self.env.model, recv, e.receiver.feature, value)
            return
        self.eval(e)

    def _exec_if(self, stmt: If) -> None:
        cond = self.eval(stmt.cond)
        if not isinstance(cond, BoolV):
            raise EvalFault("TypeFault", "if condition did not yield a Bool")
        frame = self.frames[-1]
        frame.scopes.append({})
        try:
            self.exec_block(stmt.then if cond.b else stmt.orelse)
        finally:
            frame.scopes.pop()

    def _exec_loop(self, stmt: Loop) -> None:
        frame = self.frames[-1]
        frame.scopes.append({})
        try:
            if stmt.init is not None:
                _EXEC[type(stmt.init)](self, stmt.init)
            while True:
                cond = self.eval(stmt.until)
                if not isinstance(cond, BoolV):
                    raise EvalFault("TypeFault", "loop condition did not yield a Bool")
                done = not cond.b if stmt.while_style else cond.b
                if done:
                    return
                frame.scopes.append({})
                try:
                    self.exec_block(stmt.body)
                finally:
                    frame.scopes.pop()
        finally:
            frame.scopes.pop()

    def _exec_eachloop(self, stmt: EachLoop) -> None:
        recv = self.eval(stmt.receiver)
        if isinstance(recv, VoidV):
            return
        if not isinstance(recv, Coll):
            raise EvalFault("TypeFault", "each expects a collection")
        frame = self.frames[-1]
        for item in list(recv.items):
            frame.scopes.append({stmt.param: item})
            try:
                self.exec_block(stmt.body)
            finally:
                frame.scopes.pop()

    def _exec_return(self, stmt: Return) -> None:
        raise _ReturnSignal(self.eval(stmt.value) if stmt.value is not None else VOID_VALUE)

    def _exec_super(self, stmt: SuperCall) -> None:
        frame = self.frames[-1]
        if frame.op_name is None or frame.defining_class is None:
            raise EvalFault("NoSuchMethod", "super outside of a method body")
        obj = frame.self_obj
        args = [self.eval(a) for a in stmt.args]
        if stmt.qualifier is not None:
            source = self.env.woven.classes.get(stmt.qualifier)
            chain = source.raw_definers.get(frame.op_name, ()) if source else ()
            if not chain:
                raise EvalFault(
                    "NoSuchMethod",
                    f"super[{stmt.qualifier}] provides no {frame.op_name}",
                )
            owner, mdef = chain[0]
        else:
            wc = self.env.woven.classes[obj.class_name]
            chain = wc.raw_definers.get(frame.op_name, ())
            owners = [o for o, _m in chain]
            try:
                idx = owners.index(frame.defining_class)
            except ValueError:
                raise EvalFault(
                    "NoSuchMethod", f"super lookup lost {frame.defining_class}"
                ) from None
            if idx + 1 >= len(chain):
                raise EvalFault(
                    "NoSuchMethod", f"{frame.op_name} has no definition above "
                    f"{frame.defining_class}",
                )
            owner, mdef = chain[idx + 1]
        if len(args) != len(mdef.sig.params):
            raise EvalFault("TypeFault", f"super {frame.op_name}: wrong argument count")
        self._execute_method(owner, mdef, obj, args)

    def _mutation_guard(self) -> None:
        if self.pure:
            raise EvalFault("TypeFault", "model mutation in a side-effect-free context")

    # -- expressions -------------------------------------------------------

    def eval(self, e) -> Value:
        return _EVAL[type(e)](self, e)

    def _eval_self(self, e: SelfRef) -> Value:
        return ObjRef(self.frames[-1].self_obj.id)

    def _eval_var(self, e: VarRef) -> Value:
        for scope in reversed(self.frames[-1].scopes):
            if e.name in scope:
                return scope[e.name]
        raise EvalFault("UnboundVariable", f"unbound variable {e.name}")

    def _eval_int(self, e: IntLit) -> Value:
        return IntV(e.value)

    def _eval_bool(self, e: BoolLit) -> Value:
        return TRUE if e.value else FALSE

    def _eval_string(self, e: StringLit) -> Value:
        return StringV(e.value)

    def _eval_void(self, e: VoidLit) -> Value:
        return VOID_VALUE

    def _eval_nav(self, e: FeatureNav) -> Value:
        recv = self.eval(e.receiver)
        if isinstance(recv, VoidV):
            return VOID_VALUE
        if not isinstance(recv, ObjRef):
            raise EvalFault("TypeFault", f"cannot navigate {e.feature} on {render_value(recv)}")
        obj = self.env.model.obj(recv.id)
        try:
            value = obj.slots[e.feature]
        except KeyError:
            raise EvalFault(
                "TypeFault", f"{obj.class_name} has no feature {e.feature}"
            ) from None
        if isinstance(value, Coll):
            return Coll(value.kind, list(value.items))
        return value

    def _eval_opcall(self, e: OpCall) -> Value:
        recv = self.eval(e.receiver)
        if isinstance(recv, VoidV):
            raise EvalFault("TypeFault", f"operation call {e.op} on void")
        if not isinstance(recv, ObjRef):
            raise EvalFault("TypeFault", f"operation call {e.op} on {render_value(recv)}")
        if self.pure:
            raise EvalFault("TypeFault", f"operation call {e.op} in a side-effect-free context")
        args = [self.eval(a) for a in e.args]
        return self.invoke(recv, e.op, args)

    def _eval_collop(self, e: CollectionOp) -> Value:
        recv = self.eval(e.receiver)
        if isinstance(recv, VoidV):
            return VOID_VALUE
        if not isinstance(recv, Coll):
            raise EvalFault("TypeFault", f"{e.op_kind} on non-collection {render_value(recv)}")
        kind = e.op_kind
        if kind == "isEmpty":
            return TRUE if not recv.items else FALSE
        if kind == "size":
            return IntV(len(recv.items))
        if kind == "first":
            return recv.items[0] if recv.items else VOID_VALUE
        if kind == "add":
            return make_coll(recv.kind, recv.items + [self.eval(e.arg)])
        if kind == "intersection":
            other = self.eval(e.arg)
            if not isinstance(other, Coll):
                raise EvalFault("TypeFault", "intersection expects a collection argument")
            return Coll(recv.kind, [x for x in recv.items if x in other.items])
        lam = e.lam
        frame = self.frames[-1]
        if kind == "collect":
            out = []
            for item in recv.items:
                frame.scopes.append({lam.param: item})
                try:
                    out.append(self.eval(lam.body))
                finally:
                    frame.scopes.pop()
            return make_coll(recv.kind, out)
        if kind in ("select", "reject"):
            keep = kind == "select"
            out = []
            for item in recv.items:
                frame.scopes.append({lam.param: item})
                try:
                    test = self.eval(lam.body)
                finally:
                    frame.scopes.pop()
                if not isinstance(test, BoolV):
                    raise EvalFault("TypeFault", f"{kind} lambda did not yield a Bool")
                if test.b == keep:
                    out.append(item)
            return Coll(recv.kind, out)
        if kind in ("forAll", "exists"):
            want_all = kind == "forAll"
            for item in recv.items:
                frame.scopes.append({lam.param: item})
                try:
                    test = self.eval(lam.body)
                finally:
                    frame.scopes.pop()
                if not isinstance(test, BoolV):
                    raise EvalFault("TypeFault", f"{kind} lambda did not yield a Bool")
                if want_all and not test.b:
                    return FALSE
                if not want_all and test.b:
                    return TRUE
            return TRUE if want_all else FALSE
        # each with an expression body: evaluate and discard
        for item in recv.items:
            frame.scopes.append({lam.param: item})
            try:
                self.eval(lam.body)
            finally:
                frame.scopes.pop()
        return VOID_VALUE

    def _eval_eachblock(self, e: EachBlock) -> Value:
        self._mutation_guard()
        self._exec_eachloop(EachLoop(e.receiver, e.param, e.body, e.pos))
        return VOID_VALUE

    def _eval_typetest(self, e: TypeTest) -> Value:
        recv = self.eval(e.receiver)
        if isinstance(recv, VoidV):
            return FALSE if e.test_kind == "oclIsKindOf" else VOID_VALUE
        if not isinstance(recv, ObjRef):
            raise EvalFault("TypeFault", f"{e.test_kind} on {render_value(recv)}")
        obj = self.env.model.obj(recv.id)
        conforms = self.env.woven.conforms(obj.class_name, e.target)
        if e.test_kind == "oclIsKindOf":
            return TRUE if conforms else FALSE
        if not conforms:
            raise EvalFault(
                "TypeFault", f"cannot cast {obj.class_name} object {obj.id} to {e.target}"
            )
        return recv

    def _eval_binop(self, e: BinOp) -> Value:
        op = e.op
        if op in ("and", "or"):
            lhs = self.eval(e.lhs)
            if not isinstance(lhs, BoolV):
                raise EvalFault("TypeFault", f"{op} expects Bool operands")
            if op == "and" and not lhs.b:
                return FALSE
            if op == "or" and lhs.b:
                return TRUE
            rhs = self.eval(e.rhs)
            if not isinstance(rhs, BoolV):
                raise EvalFault("TypeFault", f"{op} expects Bool operands")
            return rhs
        lhs = self.eval(e.lhs)
        rhs = self.eval(e.rhs)
        if op == "==":
            return TRUE if lhs == rhs else FALSE
        if op == "!=":
            return TRUE if lhs != rhs else FALSE
        if op == "+" and isinstance(lhs, StringV) and isinstance(rhs, StringV):
            return StringV(lhs.s + rhs.s)
        if not isinstance(lhs, IntV) or not isinstance(rhs, IntV):
            raise EvalFault(
                "TypeFault",
                f"{op} expects Int operands, got {render_value(lhs)} and {render_value(rhs)}",
            )
        a, b = lhs.i, rhs.i
        if op == "+":
            return IntV(a + b)
        if op == "-":
            return IntV(a - b)
        if op == "*":
            return IntV(a * b)
        if op == "/":
            if b == 0:
                raise EvalFault("DivisionByZero", "division by zero")
            q = a // b if (a < 0) == (b < 0) else -((-a) // b)
            return IntV(q)
        if op == "<":
            return TRUE if a < b else FALSE
        if op == "<=":
            return TRUE if a <= b else FALSE
        if op == ">":
            return TRUE if a > b else FALSE
        return TRUE if a >= b else FALSE

    def _eval_not(self, e: Not) -> Value:
        v = self.eval(e.operand)
        if not isinstance(v, BoolV):
            raise EvalFault("TypeFault", "not expects a Bool")
        return FALSE if v.b else TRUE

    def _eval_ifexpr(self, e: IfExpr) -> Value:
        cond = self.eval(e.cond)
        if not isinstance(cond, BoolV):
            raise EvalFault("TypeFault", "if condition did not yield a Bool")
        return self.eval(e.then if cond.b else e.orelse)

    def _eval_new(self, e: New) -> Value:
        if self.pure:
            raise EvalFault("TypeFault", "new in a side-effect-free context")
        return create_instance(self.env.model, e.class_name)


_EVAL = {
    SelfRef: Interpreter._eval_self,
    VarRef: Interpreter._eval_var,
    IntLit: Interpreter._eval_int,
    BoolLit: Interpreter._eval_bool,
    StringLit: Interpreter._eval_string,
    VoidLit: Interpreter._eval_void,
    FeatureNav: Interpreter._eval_nav,
    OpCall: Interpreter._eval_opcall,
    CollectionOp: Interpreter._eval_collop,
    EachBlock: Interpreter._eval_eachblock,
    TypeTest: Interpreter._eval_typetest,
    BinOp: Interpreter._eval_binop,
    Not: Interpreter._eval_not,
    IfExpr: Interpreter._eval_ifexpr,
    New: Interpreter._eval_new,
}

_EXEC = {
    VarDecl: Interpreter._exec_vardecl,
    Assign: Interpreter._exec_assign,
    ExprStmt: Interpreter._exec_exprstmt,
    If: Interpreter._exec_if,
    Loop: Interpreter._exec_loop,
    EachLoop: Interpreter._exec_eachloop,
    Return: Interpreter._exec_return,
    SuperCall: Interpreter._exec_super,
}


def _type_default(t: SemType) -> Value:
    if t.kind == "prim":
        return {"Int": IntV(0), "Bool": FALSE, "String": StringV("")}[t.name]
    if t.kind == "coll":
        return Coll(t.name)
    return VOID_VALUE


def eval_expr(e, env: Environment, self_obj, scope: dict[str, Value] | None = None,
              pure: bool = True) -> Value:
    """Evaluate one expression with self bound; pure by default."""
    interp = Interpreter(env, pure=pure)
    frame = _Frame(env.model.resolve(self_obj), None, None)
    frame.scopes[0] = dict(scope or {})
    interp.frames.append(frame)
    return interp.eval(e)


def invoke(model: ModelInstance, obj, op: str, args: list[Value] | None = None,
           policy: str = POLICY_PREPOST, env: Environment | None = None) -> tuple[Value, Environment]:
    """Dispatch one operation; returns the result and the environment (trace)."""
    env = env or Environment(model, policy)
    interp = Interpreter(env)
    ref = obj if isinstance(obj, ObjRef) else ObjRef(model.resolve(obj).id)
    result = interp.invoke(ref, op, list(args or []))
    return result, env


# ---------------------------------------------------------------------------
# Invariant checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    status: str  # 'holds' | 'violated' | 'error'
    invariant: str
    obj_id: str
    owner: str = ""
    detail: str = ""


def check_invariant(inv: InvariantDecl, obj, model: ModelInstance,
                    owner: str = "") -> CheckResult:
    """Evaluate one invariant on one object; faults become error results."""
    env = Environment(model, POLICY_OFF)
    obj = model.resolve(obj)
    try:
        value = eval_expr(inv.body, env, obj, pure=True)
    except EvalFault as fault:
        return CheckResult("error", inv.name, obj.id, owner, str(fault))
    if isinstance(value, BoolV) and value.b:
        return CheckResult("holds", inv.name, obj.id, owner)
    if isinstance(value, BoolV):
        return CheckResult("violated", inv.name, obj.id, owner)
    return CheckResult("error", inv.name, obj.id, owner, "invariant did not yield a Bool")


def check_model(model: ModelInstance) -> list[CheckResult]:
    """Every flattened invariant of every object, in deterministic order."""
    out: list[CheckResult] = []
    for oid in sorted(model.objects):
        obj = model.objects[oid]
        wc = model.woven.classes.get(obj.class_name)
        if wc is None:
            continue
        for owner, inv in wc.flat_invariants:
            out.append(check_invariant(inv, obj, model, owner))
    return out


# ---------------------------------------------------------------------------
# Conformance
# ---------------------------------------------------------------------------


def conformance_check(model: ModelInstance) -> list[Diagnostic]:
    """Structural validity: types, bounds, opposite listing, containment forest."""
    sink = DiagnosticSink("<model>")
    woven = model.woven
    for oid, obj in model.objects.items():
        wc = woven.classes.get(obj.class_name)
        if wc is None:
            sink.add("UnknownClass", f"object {oid} has unknown class {obj.class_name}")
            continue
        if wc.is_abstract:
            sink.add("AbstractInstance", f"object {oid} instantiates abstract {obj.class_name}")
        for fname, value in obj.slots.items():
            entry = wc.features.get(fname)
            if entry is None:
                sink.add("UnknownFeature", f"object {oid} has unknown slot {fname}")
                continue
            feat = entry[0]
            _check_slot(model, oid, feat, value, sink)
        for fname, (feat, _o) in wc.features.items():
            if fname not in obj.slots:
                sink.add("MissingSlot", f"object {oid} lacks slot {fname}")
    _check_opposites(model, sink)
    _check_containment(model, sink)
    return sink.items


def _check_slot(model, oid: str, feat, value, sink: DiagnosticSink) -> None:
    where = f"{oid}.{feat.name}"
    if feat.bounds.many:
        if not isinstance(value, Coll):
            sink.add("ConformanceError", f"{where} must hold a collection")
            return
        if len(value.items) < feat.bounds.lower:
            sink.add("ConformanceError",
                     f"{where} holds {len(value.items)} element(s), lower bound is "
                     f"{feat.bounds.lower}")
        for x in value.items:
            _check_element(model, where, feat, x, sink)
        return
    if isinstance(value, VoidV):
        if isinstance(feat, Reference):
            if feat.bounds.lower >= 1:
                sink.add("ConformanceError", f"required reference {where} is unset")
        else:
            sink.add("ConformanceError", f"attribute {where} cannot be void")
        return
    _check_element(model, where, feat, value, sink)


def _check_element(model, where: str, feat, value, sink: DiagnosticSink) -> None:
    if isinstance(feat, Attribute):
        if not isinstance(value, _PRIM_CLASSES[feat.type]):
            sink.add("ConformanceError", f"{where} expects {feat.type}")
        return
    if not isinstance(value, ObjRef):
        sink.add("ConformanceError", f"{where} expects an object reference")
        return
    target = model.objects.get(value.id)
    if target is None:
        sink.add("ConformanceError", f"{where} points at undeclared id {value.id}")
        return
    if not model.woven.conforms(target.class_name, feat.target):
        sink.add(
            "ConformanceError",
            f"{where} expects {feat.target}, found {target.class_name}",
        )


def _ref_items(obj: Obj, fname: str) -> list[ObjRef]:
    value = obj.slots.get(fname)
    if isinstance(value, Coll):
        return [x for x in value.items if isinstance(x, ObjRef)]
    if isinstance(value, ObjRef):
        return [value]
    return []


def _check_opposites(model: ModelInstance, sink: DiagnosticSink) -> None:
    woven = model.woven
    for oid, obj in model.objects.items():
        wc = woven.classes.get(obj.class_name)
        if wc is None:
            continue
        for fname, (feat, _o) in wc.features.items():
            if not isinstance(feat, Reference) or feat.opposite is None:
                continue
            for tgt in _ref_items(obj, fname):
                t_obj = model.objects.get(tgt.id)
                if t_obj is None:
                    continue
                back = _ref_items(t_obj, feat.opposite)
                if ObjRef(oid) not in back:
                    sink.add(
                        "OppositeMismatch",
                        f"{oid}.{fname} lists {tgt.id} but {tgt.id}.{feat.opposite} "
                        f"does not list {oid}",
                    )


def _check_containment(model: ModelInstance, sink: DiagnosticSink) -> None:
    woven = model.woven
    container_of: dict[str, tuple[str, str]] = {}
    for oid, obj in model.objects.items():
        wc = woven.classes.get(obj.class_name)
        if wc is None:
            continue
        for fname, (feat, _o) in wc.features.items():
            if not isinstance(feat, Reference) or not feat.containment:
                continue
            for tgt in _ref_items(obj, fname):
                if tgt.id in container_of:
                    sink.add(
                        "ContainmentError",
                        f"object {tgt.id} is contained both by {container_of[tgt.id][0]} "
                        f"and {oid}",
                    )
                else:
                    container_of[tgt.id] = (oid, fname)
    for oid, obj in model.objects.items():
        expected = container_of.get(oid)
        if obj.container != expected:
            sink.add(
                "ContainmentError",
                f"object {oid} records container {obj.container}, slots say {expected}",
            )
    # cycle detection over the container map
    for oid in model.objects:
        seen = set()
        cur = oid
        while cur in container_of:
            if cur in seen:
                sink.add("ContainmentError", f"containment cycle through {cur}")
                break
            seen.add(cur)
            cur = container_of[cur][0]
    if len(set(model.roots)) != len(model.roots):
        sink.add("ConformanceError", "roots list repeats an object")
    declared = set(model.roots)
    derived = {oid for oid in model.objects if oid not in container_of}
    for oid in sorted(declared - set(model.objects)):
        sink.add("ConformanceError", f"root {oid} is not an object of the model")
    for oid in sorted(declared & set(model.objects) - derived):
        sink.add("ConformanceError", f"root {oid} has a container")
    for oid in sorted(derived - declared):
        sink.add("ConformanceError", f"uncontained object {oid} is missing from roots")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def load_model(text: str, woven: WovenModel) -> ModelInstance:
    """Parse, resolve and conformance-check a JSON model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnitParseError(
            [Diagnostic("SyntaxError", f"bad model document: {exc}", "<model>")]
        ) from exc
    sink = DiagnosticSink("<model>")
    if not isinstance(doc, dict) or "objects" not in doc:
        raise UnitParseError(
            [Diagnostic("SyntaxError", "model document must be an object with 'objects'",
                        "<model>")]
        )
    if doc.get("conformsTo") != woven.package:
        sink.add(
            "ConformanceError",
            f"model conforms to {doc.get('conformsTo')!r}, composed package is "
            f"{woven.package!r}",
        )
    model = ModelInstance(woven)
    entries = doc.get("objects", [])
    for entry in entries:
        oid = entry.get("id")
        cls = entry.get("class")
        if not isinstance(oid, str) or not oid:
            sink.add("ConformanceError", "object without a string id")
            continue
        if oid in model.objects:
            sink.add("ConformanceError", f"duplicate object id {oid}")
            continue
        wc = woven.classes.get(cls)
        if wc is None:
            sink.add("UnknownClass", f"object {oid} has unknown class {cls}")
            continue
        obj = Obj(oid, cls)
        for fname, (feat, _o) in wc.features.items():
            obj.slots[fname] = default_value(feat)
        model.objects[oid] = obj
    if sink:
        raise TypecheckError(sink.items)

    for entry in entries:
        obj = model.objects[entry["id"]]
        wc = woven.classes[obj.class_name]
        for fname, raw in (entry.get("slots") or {}).items():
            f_entry = wc.features.get(fname)
            if f_entry is None:
                sink.add("UnknownFeature", f"object {obj.id} has unknown slot {fname}")
                continue
            value = _decode_slot(model, obj.id, f_entry[0], raw, sink)
            if value is not None:
                obj.slots[fname] = value
    if sink:
        raise TypecheckError(sink.items)

    # derive containers from containment slots
    for obj in model.objects.values():
        wc = woven.classes[obj.class_name]
        for fname, (feat, _o) in wc.features.items():
            if isinstance(feat, Reference) and feat.containment:
                for tgt in _ref_items(obj, fname):
                    child = model.objects.get(tgt.id)
                    if child is not None and child.container is None:
                        child.container = (obj.id, fname)
    roots = doc.get("roots", [])
    for r in roots:
        if not isinstance(r, str) or not r.startswith("@"):
            sink.add("ConformanceError", f"roots entries must be @id strings, found {r!r}")
        else:
            model.roots.append(r[1:])
    if sink:
        raise TypecheckError(sink.items)
    problems = conformance_check(model)
    if problems:
        raise TypecheckError(problems)
    return model


def _decode_slot(model, oid, feat, raw, sink: DiagnosticSink):
    where = f"{oid}.{feat.name}"
    if feat.bounds.many:
        if not isinstance(raw, list):
            sink.add("ConformanceError", f"{where} must be a list")
            return None
        items = []
        for x in raw:
            v = _decode_element(model, where, feat, x, sink)
            if v is not None:
                items.append(v)
        kind = "Sequence" if isinstance(feat, Attribute) else "OrderedSet"
        return make_coll(kind, items)
    if raw is None:
        if isinstance(feat, Attribute):
            sink.add("ConformanceError", f"attribute {where} cannot be null")
            return None
        return VOID_VALUE
    return _decode_element(model, where, feat, raw, sink)


def _decode_element(model, where, feat, raw, sink: DiagnosticSink):
    if isinstance(feat, Attribute):
        if feat.type == "Int" and isinstance(raw, int) and not isinstance(raw, bool):
            return IntV(raw)
        if feat.type == "Bool" and isinstance(raw, bool):
            return TRUE if raw else FALSE
        if feat.type == "String" and isinstance(raw, str):
            return StringV(raw)
        sink.add("ConformanceError", f"{where} expects a {feat.type} scalar, found {raw!r}")
        return None
    if not isinstance(raw, str) or not raw.startswith("@"):
        sink.add("ConformanceError", f"{where} expects an \"@id\" reference, found {raw!r}")
        return None
    tid = raw[1:]
    if tid not in model.objects:
        sink.add("ConformanceError", f"{where} points at undeclared id {tid}")
        return None
    return ObjRef(tid)


def _encode_value(value: Value):
    if isinstance(value, IntV):
        return value.i
    if isinstance(value, BoolV):
        return value.b
    if isinstance(value, StringV):
        return value.s
    if isinstance(value, ObjRef):
        return f"@{value.id}"
    if isinstance(value, Coll):
        return [_encode_value(x) for x in value.items]
    raise EvalFault("TypeFault", f"cannot serialize {render_value(value)}")


def save_model(model: ModelInstance) -> str:
    """Deterministic serialization; refuses nonconformant models."""
    problems = conformance_check(model)
    if problems:
        raise TypecheckError(problems)
    objects = []
    for oid in sorted(model.objects):
        obj = model.objects[oid]
        wc = model.woven.classes[obj.class_name]
        slots = {}
        for fname in obj.slots:
            feat = wc.features[fname][0]
            value = obj.slots[fname]
            if value == default_value(feat):
                continue
            slots[fname] = _encode_value(value)
        objects.append({"id": oid, "class": obj.class_name, "slots": slots})
    doc = {
        "conformsTo": model.woven.package,
        "objects": objects,
        "roots": [f"@{r}" for r in model.roots],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
