from __future__ import annotations

import json

import pytest

from helpers import MODELS, weave
from mashup.diagnostics import ContractViolation, EvalFault, TypecheckError
from mashup.exprs import BoolV, Coll, IntV, ObjRef, StringV, VoidV
from mashup.runtime import (
    ModelInstance, NodeExecuted, add_to_feature, check_model,
    conformance_check, create_instance, invoke, load_model,
    remove_from_feature, save_model, set_feature,
)

LIB_MM = """
metamodel lib {
  class Library {
    attr name: String;
    ref book: Book[*] containment opposite home;
    ref featured: Book[0..1];
  }
  class Book {
    attr title: String;
    ref home: Library[0..1] opposite book;
    ref author: Writer[0..1] opposite works;
  }
  class Writer {
    attr name: String;
    ref works: Book[*] opposite author;
    ref muse: Writer[0..1] opposite fan;
    ref fan: Writer[0..1] opposite muse;
  }
}
"""


@pytest.fixture(scope="module")
def lib_woven():
    return weave(mm=LIB_MM)


@pytest.fixture()
def lib(lib_woven):
    return ModelInstance(lib_woven)


# ---------------------------------------------------------------------------
# factory
# ---------------------------------------------------------------------------


def test_create_instance_initializes_defaults(fuml_woven):
    model = ModelInstance(fuml_woven)
    ref = create_instance(model, "Activity")
    obj = model.obj(ref.id)
    assert obj.slots["name"] == StringV("")
    assert obj.slots["node"] == Coll("OrderedSet", [])
    assert obj.slots["edge"] == Coll("OrderedSet", [])
    assert obj.slots["halted"] == BoolV(False)


def test_create_instance_rejects_abstract(fuml_woven):
    model = ModelInstance(fuml_woven)
    with pytest.raises(EvalFault) as exc:
        create_instance(model, "ActivityNode")
    assert exc.value.kind == "AbstractInstantiation"
    with pytest.raises(EvalFault) as exc:
        create_instance(model, "Ghost")
    assert exc.value.kind == "UnknownClass"


def test_created_ids_are_fresh(fuml_woven):
    model = ModelInstance(fuml_woven)
    a = create_instance(model, "Activity")
    b = create_instance(model, "Activity")
    assert a != b and a.id != b.id


# ---------------------------------------------------------------------------
# assignment semantics
# ---------------------------------------------------------------------------


def test_bidirectional_set_links_opposite(fuml_woven):
    model = ModelInstance(fuml_woven)
    n = create_instance(model, "ForkNode")
    e = create_instance(model, "ControlFlow")
    set_feature(model, e, "source", n)
    assert model.obj(n.id).slots["outgoing"].items == [e]
    # re-targeting unlinks the old end
    m = create_instance(model, "JoinNode")
    set_feature(model, e, "source", m)
    assert model.obj(n.id).slots["outgoing"].items == []
    assert model.obj(m.id).slots["outgoing"].items == [e]


def test_containment_add_reparents(lib):
    a = create_instance(lib, "Library")
    b = create_instance(lib, "Library")
    x = create_instance(lib, "Book")
    add_to_feature(lib, a, "book", x)
    assert lib.obj(x.id).container == (a.id, "book")
    assert lib.obj(x.id).slots["home"] == a
    add_to_feature(lib, b, "book", x)
    assert lib.obj(a.id).slots["book"].items == []
    assert lib.obj(x.id).container == (b.id, "book")
    assert lib.obj(x.id).slots["home"] == b
    assert lib.roots == [a.id, b.id]


def test_attribute_write_read(lib):
    w = create_instance(lib, "Writer")
    set_feature(lib, w, "name", StringV("Work"))
    assert lib.obj(w.id).slots["name"] == StringV("Work")


def test_single_single_opposite_displacement(lib):
    x = create_instance(lib, "Writer")
    y = create_instance(lib, "Writer")
    z = create_instance(lib, "Writer")
    set_feature(lib, z, "muse", y)
    assert lib.obj(y.id).slots["fan"] == z
    set_feature(lib, x, "muse", y)  # displaces z
    assert lib.obj(y.id).slots["fan"] == x
    assert isinstance(lib.obj(z.id).slots["muse"], VoidV)
    assert conformance_check(lib) == []


def test_set_void_unlinks(lib):
    w = create_instance(lib, "Writer")
    b = create_instance(lib, "Book")
    set_feature(lib, b, "author", w)
    assert lib.obj(w.id).slots["works"].items == [b]
    set_feature(lib, b, "author", VoidV())
    assert lib.obj(w.id).slots["works"].items == []


def test_add_on_full_single_feature_is_upper_bound_error(lib):
    b = create_instance(lib, "Book")
    w1 = create_instance(lib, "Writer")
    w2 = create_instance(lib, "Writer")
    add_to_feature(lib, b, "author", w1)
    with pytest.raises(EvalFault) as exc:
        add_to_feature(lib, b, "author", w2)
    assert exc.value.kind == "UpperBoundExceeded"


def test_remove_from_feature_unlinks_both_sides(lib):
    lib_obj = create_instance(lib, "Library")
    b = create_instance(lib, "Book")
    add_to_feature(lib, lib_obj, "book", b)
    remove_from_feature(lib, lib_obj, "book", b)
    assert lib.obj(b.id).container is None
    assert isinstance(lib.obj(b.id).slots["home"], VoidV)
    assert b.id in lib.roots


def test_containment_cycle_refused(lib_woven):
    # self-containment is impossible through a Library/Book pair, so use a
    # dedicated parent/child metamodel
    woven = weave(mm="""
metamodel t { class N { ref kids: N[*] containment; } }
""")
    model = ModelInstance(woven)
    a = create_instance(model, "N")
    b = create_instance(model, "N")
    add_to_feature(model, a, "kids", b)
    with pytest.raises(EvalFault) as exc:
        add_to_feature(model, b, "kids", a)
    assert exc.value.kind == "ContainmentCycle"
    with pytest.raises(EvalFault):
        add_to_feature(model, a, "kids", a)
    assert conformance_check(model) == []


TREE_MM = """
metamodel t {
  class N {
    attr tag: Int;
    ref kids: N[*] containment opposite parent;
    ref parent: N[0..1] opposite kids;
    ref friend: N[0..1];
  }
}
"""


def test_cycle_refused_through_the_parent_side():
    woven = weave(mm=TREE_MM)
    model = ModelInstance(woven)
    a = create_instance(model, "N")
    b = create_instance(model, "N")
    c = create_instance(model, "N")
    add_to_feature(model, a, "kids", b)
    add_to_feature(model, b, "kids", c)
    # assigning the child end of the containment pair must be guarded too
    with pytest.raises(EvalFault) as exc:
        set_feature(model, a, "parent", c)
    assert exc.value.kind == "ContainmentCycle"
    with pytest.raises(EvalFault):
        set_feature(model, a, "parent", a)
    assert conformance_check(model) == []
    # a legal re-parenting through the child side still works
    set_feature(model, c, "parent", a)
    assert model.obj(c.id).container == (a.id, "kids")
    assert conformance_check(model) == []


def test_randomized_tree_operations_keep_the_forest():
    import random

    woven = weave(mm=TREE_MM)
    model = ModelInstance(woven)
    rng = random.Random(31)
    nodes = [create_instance(model, "N") for _ in range(8)]
    refusals = 0
    for _step in range(800):
        x, y = rng.choice(nodes), rng.choice(nodes)
        action = rng.randrange(5)
        try:
            if action == 0:
                add_to_feature(model, x, "kids", y)
            elif action == 1:
                set_feature(model, x, "parent", y)
            elif action == 2:
                set_feature(model, x, "parent", VoidV())
            elif action == 3:
                remove_from_feature(model, x, "kids", y)
            else:
                set_feature(model, x, "friend", y)
        except EvalFault as fault:
            assert fault.kind in ("ContainmentCycle", "UpperBoundExceeded")
            refusals += 1
        problems = conformance_check(model)
        assert problems == [], [d.render() for d in problems]
    assert refusals > 0  # the workload really attempted cycles


def test_type_fault_on_wrong_target(lib):
    b = create_instance(lib, "Book")
    w = create_instance(lib, "Writer")
    with pytest.raises(EvalFault) as exc:
        set_feature(lib, b, "home", w)  # Writer is not a Library
    assert exc.value.kind == "TypeFault"
    with pytest.raises(EvalFault):
        set_feature(lib, b, "title", IntV(3))


def test_sequence_into_unique_slot_dedupes_first_occurrence(lib):
    l1 = create_instance(lib, "Library")
    b1 = create_instance(lib, "Book")
    b2 = create_instance(lib, "Book")
    set_feature(lib, l1, "book", Coll("Sequence", [b1, b2, b1, b2]))
    assert lib.obj(l1.id).slots["book"].items == [b1, b2]


# ---------------------------------------------------------------------------
# invocation
# ---------------------------------------------------------------------------


def test_invoke_dispatches_first_definer(fuml_woven):
    model = ModelInstance(fuml_woven)
    n = create_instance(model, "InitialNode")
    set_feature(model, n, "tokens", IntV(1))
    result, _env = invoke(model, n, "ready")
    assert result == BoolV(True)


def test_invoke_super_chain_and_trace_events(fuml_woven):
    model = load_model((MODELS / "worksession.model").read_text(), fuml_woven)
    result, env = invoke(model, ObjRef("o1"), "execute")
    assert isinstance(result, VoidV)
    labels = [e.label for e in env.trace if isinstance(e, NodeExecuted)]
    assert labels == ["Have a coffee", "Talk", "Work", "final"]
    enters = [e for e in env.trace if type(e).__name__ == "OpEnter"]
    exits = [e for e in env.trace if type(e).__name__ == "OpExit"]
    assert len(enters) == len(exits)


def test_dispatch_is_deterministic(fuml_woven):
    model = load_model((MODELS / "worksession.model").read_text(), fuml_woven)
    _r1, env1 = invoke(model.clone(), ObjRef("o1"), "execute")
    _r2, env2 = invoke(model.clone(), ObjRef("o1"), "execute")
    assert env1.trace == env2.trace


def test_precondition_false_at_every_level_raises():
    woven = weave(
        mm="metamodel m { class A { } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class A { operation m() : Void is do end }",
        inv='package m;\nrequire "m.mm";\naspect class A { pre never on m : false; }',
    )
    model = ModelInstance(woven)
    a = create_instance(model, "A")
    with pytest.raises(ContractViolation) as exc:
        invoke(model, a, "m")
    assert exc.value.kind == "PreconditionViolation" and exc.value.name == "never"


def test_super_precondition_acceptance_via_disjunction():
    woven = weave(
        mm="metamodel m { class Super { } class Sub extends Super { } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class Super { operation m(v : Int) : Int is do return v end }",
        inv='package m;\nrequire "m.mm";\n'
            "aspect class Super { pre ps on m : v >= 1; }\n"
            "aspect class Sub { pre pt on m : v >= 10; }",
    )
    model = ModelInstance(woven)
    sub = create_instance(model, "Sub")
    result, _ = invoke(model, sub, "m", [IntV(5)])  # fails sub, passes super
    assert result == IntV(5)
    with pytest.raises(ContractViolation):
        invoke(model, sub, "m", [IntV(0)])


def test_inherited_contract_sees_its_own_parameter_names():
    woven = weave(
        mm="metamodel m { class Super { } class Sub extends Super { } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class Super { operation m(v : Int) : Int is do return v end }\n"
            "aspect class Sub { method m(w : Int) : Int is do return w + 1 end }",
        inv='package m;\nrequire "m.mm";\n'
            "aspect class Super { pre ps on m : v >= 1; }",
    )
    model = ModelInstance(woven)
    sub = create_instance(model, "Sub")
    assert invoke(model, sub, "m", [IntV(2)])[0] == IntV(3)
    with pytest.raises(ContractViolation):
        invoke(model, sub, "m", [IntV(0)])


def test_postcondition_conjunction_rejects_any_level():
    woven = weave(
        mm="metamodel m { class Super { } class Sub extends Super { } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class Super { operation m(v : Int) : Int is do return v end }",
        inv='package m;\nrequire "m.mm";\n'
            "aspect class Super { post qs on m : result >= 2; }\n"
            "aspect class Sub { post qt on m : result >= 4; }",
    )
    model = ModelInstance(woven)
    sub = create_instance(model, "Sub")
    assert invoke(model, sub, "m", [IntV(9)])[0] == IntV(9)
    with pytest.raises(ContractViolation) as exc:
        invoke(model, sub, "m", [IntV(3)])  # passes super, fails sub
    assert exc.value.name == "qt"
    with pytest.raises(ContractViolation):
        invoke(model, sub, "m", [IntV(1)])


def test_invariant_policy_full_checks_after_op():
    woven = weave(
        mm="metamodel m { class A { attr x: Int; } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class A { operation poke() : Void is do self.x := self.x - 5 end }",
        inv='package m;\nrequire "m.mm";\naspect class A { inv pos : self.x >= 0; }',
    )
    model = ModelInstance(woven)
    a = create_instance(model, "A")
    invoke(model, a, "poke", policy="prepost")  # x becomes -5, unchecked
    with pytest.raises(ContractViolation) as exc:
        invoke(model, a, "poke", policy="full")
    assert exc.value.kind == "InvariantViolation" and exc.value.name == "pos"


def test_policy_off_skips_contracts():
    woven = weave(
        mm="metamodel m { class A { } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class A { operation m() : Void is do end }",
        inv='package m;\nrequire "m.mm";\naspect class A { pre never on m : false; }',
    )
    model = ModelInstance(woven)
    a = create_instance(model, "A")
    invoke(model, a, "m", policy="off")  # no violation raised


def test_no_such_method_and_arity_fault(fuml_woven):
    model = ModelInstance(fuml_woven)
    a = create_instance(model, "Activity")
    with pytest.raises(EvalFault) as exc:
        invoke(model, a, "ghost")
    assert exc.value.kind == "NoSuchMethod"
    with pytest.raises(EvalFault) as exc:
        invoke(model, a, "launch", [])
    assert exc.value.kind == "TypeFault"


def test_ambiguous_method_faults_at_runtime():
    woven = weave(
        mm="metamodel d { class B { } class C { } class D extends B, C { } }",
        act='package d;\nrequire "d.mm";\n'
            "aspect class B { operation run() : Void is do end }\n"
            "aspect class C { operation run() : Void is do end }",
        strict=False,
    )
    model = ModelInstance(woven)
    d = create_instance(model, "D")
    with pytest.raises(EvalFault) as exc:
        invoke(model, d, "run")
    assert exc.value.kind == "AmbiguousMethod"


def test_super_from_renamed_body_follows_the_linearization():
    # D extends B, C; both override A's run; C's branch is renamed. A super
    # call inside C's body continues at the next definer in lin(D) = B.
    woven = weave(
        mm="metamodel d { class A { } class B extends A { } class C extends A { } "
           "class D extends B, C { } }",
        act=[
            'package d;\nrequire "d.mm";\n'
            'aspect class A { operation run() : Void is do self.trace("A") end }\n'
            'aspect class B { method run() : Void is do super() self.trace("B") end }\n'
            'aspect class C { method run() : Void is do super() self.trace("C") end }',
            'package d;\nrequire "d.mm";\naspect class D { rename run from C as runC; }',
        ],
    )
    model = ModelInstance(woven)
    d = create_instance(model, "D")
    _r, env = invoke(model, d, "runC")
    labels = [e.label for e in env.trace if isinstance(e, NodeExecuted)]
    assert labels == ["A", "B", "C"]  # C -> super() -> B -> super() -> A, unwinding


def test_partially_renamed_diamond_stays_ambiguous():
    woven = weave(
        mm="metamodel t { class B { } class C { } class E { } "
           "class D extends B, C, E { } }",
        act=[
            'package t;\nrequire "t.mm";\n'
            "aspect class B { operation run() : Void is do end }\n"
            "aspect class C { operation run() : Void is do end }\n"
            "aspect class E { operation run() : Void is do end }",
            'package t;\nrequire "t.mm";\naspect class D { rename run from C as runC; }',
        ],
        strict=False,
    )
    d = woven.classes["D"]
    assert "run" in d.ambiguous_ops and "runC" not in d.ambiguous_ops


def test_builtin_fault_operation():
    woven = weave(
        mm="metamodel m { class A { } }",
        act='package m;\nrequire "m.mm";\n'
            'aspect class A { operation boom() : Void is do self.fault("nope") end }',
    )
    model = ModelInstance(woven)
    a = create_instance(model, "A")
    with pytest.raises(EvalFault) as exc:
        invoke(model, a, "boom")
    assert exc.value.kind == "Fault" and "nope" in exc.value.message


def test_loop_forms_compute():
    woven = weave(
        mm="metamodel m { class A { } }",
        act='package m;\nrequire "m.mm";\n'
            """
aspect class A {
  operation sumTo(n : Int) : Int is do
    var total : Int init 0
    from var i : Int init 1 until i > n loop
      total := total + i
      i := i + 1
    end
    return total
  end
  operation sumDown(n : Int) : Int is do
    var total : Int init 0
    while n > 0 loop
      total := total + n
      n := n - 1
    end
    return total
  end
  operation pick(flag : Bool) : Int is do
    return if flag then 1 else 2 end
  end
}
""",
    )
    model = ModelInstance(woven)
    a = create_instance(model, "A")
    assert invoke(model, a, "sumTo", [IntV(5)])[0] == IntV(15)
    assert invoke(model, a, "sumDown", [IntV(5)])[0] == IntV(15)
    assert invoke(model, a, "pick", [BoolV(True)])[0] == IntV(1)
    assert invoke(model, a, "pick", [BoolV(False)])[0] == IntV(2)


def test_new_and_containment_assignment_from_dsl_code():
    woven = weave(
        mm="metamodel z { class Box { ref item: Thing[0..1] containment; } class Thing { } }",
        act='package z;\nrequire "z.mm";\n'
            """
aspect class Box {
  operation fill() : Thing is do
    var t : Thing init Thing.new()
    self.item := t
    return t
  end
}
""",
    )
    model = ModelInstance(woven)
    box = create_instance(model, "Box")
    result, _env = invoke(model, box, "fill")
    assert isinstance(result, ObjRef)
    thing = model.obj(result.id)
    assert thing.container == (box.id, "item")
    assert model.roots == [box.id]


def test_each_loop_mutates_through_element_adds():
    woven = weave(
        mm="metamodel m { class Bag { ref item: Pebble[*]; } class Pebble { attr w: Int; } }",
        act='package m;\nrequire "m.mm";\n'
            """
aspect class Bag {
  operation weigh() : Int is do
    var total : Int init 0
    self.item.each { p | total := total + p.w }
    return total
  end
  operation lighten() : Void is do
    self.item := self.item.reject { p | p.w > 5 }
  end
}
""",
    )
    model = ModelInstance(woven)
    bag = create_instance(model, "Bag")
    for w in (2, 7, 4):
        pebble = create_instance(model, "Pebble")
        set_feature(model, pebble, "w", IntV(w))
        add_to_feature(model, bag, "item", pebble)
    assert invoke(model, bag, "weigh")[0] == IntV(13)
    invoke(model, bag, "lighten")
    assert invoke(model, bag, "weigh")[0] == IntV(6)


def test_aspect_only_class_is_executable():
    woven = weave(
        mm="metamodel m { class A { } }",
        act='package m;\nrequire "m.mm";\n'
            "aspect class Helper { operation double(x : Int) : Int is do return x + x end }",
    )
    model = ModelInstance(woven)
    helper = create_instance(model, "Helper")
    assert invoke(model, helper, "double", [IntV(21)])[0] == IntV(42)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_load_counts_fig_one_model(fuml_woven):
    model = load_model((MODELS / "worksession.model").read_text(), fuml_woven)
    activities = [o for o in model.objects.values() if o.class_name == "Activity"]
    assert len(activities) == 1
    activity = activities[0]
    assert len(activity.slots["node"].items) == 7
    assert len(activity.slots["edge"].items) == 7


def test_load_empty_object_list(fuml_woven):
    model = load_model('{"conformsTo": "fuml", "objects": [], "roots": []}', fuml_woven)
    assert model.objects == {} and model.roots == []


def test_load_rejects_unresolved_reference(fuml_woven):
    doc = {
        "conformsTo": "fuml",
        "objects": [{"id": "o1", "class": "ControlFlow", "slots": {"source": "@ghost"}}],
        "roots": ["@o1"],
    }
    with pytest.raises(TypecheckError) as exc:
        load_model(json.dumps(doc), fuml_woven)
    assert any("ghost" in d.message for d in exc.value.diagnostics)


def test_load_rejects_duplicate_ids(fuml_woven):
    doc = {
        "conformsTo": "fuml",
        "objects": [
            {"id": "x", "class": "Class", "slots": {}},
            {"id": "x", "class": "Class", "slots": {}},
        ],
        "roots": ["@x"],
    }
    with pytest.raises(TypecheckError) as exc:
        load_model(json.dumps(doc), fuml_woven)
    assert any("duplicate" in d.message for d in exc.value.diagnostics)


def test_load_rejects_wrong_package(fuml_woven):
    with pytest.raises(TypecheckError) as exc:
        load_model('{"conformsTo": "other", "objects": [], "roots": []}', fuml_woven)
    assert any("conforms" in d.message for d in exc.value.diagnostics)


def test_load_rejects_abstract_instance(fuml_woven):
    doc = {
        "conformsTo": "fuml",
        "objects": [{"id": "x", "class": "Action", "slots": {}}],
        "roots": ["@x"],
    }
    with pytest.raises(TypecheckError) as exc:
        load_model(json.dumps(doc), fuml_woven)
    assert any(d.code == "AbstractInstance" for d in exc.value.diagnostics)


def test_load_rejects_bad_slot_type(fuml_woven):
    doc = {
        "conformsTo": "fuml",
        "objects": [{"id": "o1", "class": "Activity", "slots": {"name": 3}}],
        "roots": ["@o1"],
    }
    with pytest.raises(TypecheckError):
        load_model(json.dumps(doc), fuml_woven)


def test_load_checks_required_reference(fuml_woven):
    doc = {
        "conformsTo": "fuml",
        "objects": [{"id": "e1", "class": "ControlFlow", "slots": {}}],
        "roots": ["@e1"],
    }
    with pytest.raises(TypecheckError) as exc:
        load_model(json.dumps(doc), fuml_woven)
    assert any("required reference" in d.message for d in exc.value.diagnostics)


def test_load_checks_one_sided_opposites(fuml_woven):
    base = json.loads((MODELS / "worksession.model").read_text())
    for obj in base["objects"]:
        if obj["id"] == "o2":
            obj["slots"]["outgoing"] = []  # drop one side of e1.source
    with pytest.raises(TypecheckError) as exc:
        load_model(json.dumps(base), fuml_woven)
    assert any(d.code == "OppositeMismatch" for d in exc.value.diagnostics)


def test_save_load_round_trip(fuml_woven):
    model = load_model((MODELS / "worksession.model").read_text(), fuml_woven)
    text = save_model(model)
    again = load_model(text, fuml_woven)
    assert again.fingerprint() == model.fingerprint()
    assert save_model(again) == text


def test_save_empty_model_is_canonical(fuml_woven):
    model = ModelInstance(fuml_woven)
    assert json.loads(save_model(model)) == {"conformsTo": "fuml", "objects": [], "roots": []}


def test_save_refuses_containment_cycle(fuml_woven):
    model = ModelInstance(fuml_woven)
    a = create_instance(model, "Activity")
    # hand-build a cycle behind the API's back
    obj = model.obj(a.id)
    obj.slots["node"].items.append(ObjRef(a.id))
    with pytest.raises(TypecheckError):
        save_model(model)


def test_check_model_results(fuml_woven):
    good = load_model((MODELS / "worksession.model").read_text(), fuml_woven)
    assert all(r.status == "holds" for r in check_model(good))
    bad = load_model((MODELS / "worksession_badclassifier.model").read_text(), fuml_woven)
    flagged = [r for r in check_model(bad) if r.status != "holds"]
    assert [(r.status, r.invariant, r.obj_id) for r in flagged] == [
        ("violated", "fUML_is_class", "o7")
    ]


def test_clone_is_independent(fuml_woven):
    model = load_model((MODELS / "worksession.model").read_text(), fuml_woven)
    copy = model.clone()
    set_feature(model, ObjRef("o1"), "name", StringV("changed"))
    assert copy.obj("o1").slots["name"] == StringV("WorkSessionActivity")
