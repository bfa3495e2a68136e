"""Generator for the recursive benchmark activity.

Level k of the structure is a fork that offers one branch to an action and
one to level k-1; both branches meet at a join.  Level 0 is a single
action.  The whole model is initial -> level(depth) -> join chain -> final,
so a depth-d model holds 3d+3 nodes, 4d+2 edges and one activity: 7d+6
elements in total, with d+2 traced node executions (d+1 actions plus the
final node).  Depth 102 gives 720 elements.
"""

from __future__ import annotations

import json


def recursive_model_stats(depth: int) -> dict[str, int]:
    return {
        "depth": depth,
        "nodes": 3 * depth + 3,
        "edges": 4 * depth + 2,
        "elements": 7 * depth + 6,
        "expected_node_executions": depth + 2,
    }


def build_recursive_model(depth: int, package: str = "fuml") -> tuple[str, dict[str, int]]:
    """Return (model document text, closed-form stats) for one depth."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    nodes: list[dict] = []
    edges: list[dict] = []
    counter = {"n": 0, "e": 0}

    def node(cls: str, name: str) -> str:
        counter["n"] += 1
        nid = f"n{counter['n']:04d}"
        nodes.append({"id": nid, "class": cls, "slots": {"name": name}})
        return nid

    def edge(src: str, tgt: str) -> None:
        counter["e"] += 1
        eid = f"e{counter['e']:04d}"
        edges.append({"id": eid, "class": "ControlFlow",
                      "slots": {"source": f"@{src}", "target": f"@{tgt}"}})

    def block(k: int) -> tuple[str, str]:
        """Build level k; returns its entry and exit node ids."""
        if k == 0:
            nid = node("CreateObjectAction", f"act{k}")
            return nid, nid
        fork = node("ForkNode", f"fork{k}")
        act = node("CreateObjectAction", f"act{k}")
        sub_entry, sub_exit = block(k - 1)
        join = node("JoinNode", f"join{k}")
        edge(fork, act)
        edge(act, join)
        edge(fork, sub_entry)
        edge(sub_exit, join)
        return fork, join

    init = node("InitialNode", "initial")
    entry, exit_ = block(depth)
    final = node("FinalNode", "final")
    edge(init, entry)
    edge(exit_, final)

    # wire the opposite ends so the document is fully two-sided
    outgoing: dict[str, list[str]] = {n["id"]: [] for n in nodes}
    incoming: dict[str, list[str]] = {n["id"]: [] for n in nodes}
    for e in edges:
        outgoing[e["slots"]["source"][1:]].append(f"@{e['id']}")
        incoming[e["slots"]["target"][1:]].append(f"@{e['id']}")
    for n in nodes:
        if outgoing[n["id"]]:
            n["slots"]["outgoing"] = outgoing[n["id"]]
        if incoming[n["id"]]:
            n["slots"]["incoming"] = incoming[n["id"]]

    activity = {
        "id": "a1",
        "class": "Activity",
        "slots": {
            "name": f"Recursive{depth}",
            "node": [f"@{n['id']}" for n in nodes],
            "edge": [f"@{e['id']}" for e in edges],
        },
    }
    doc = {
        "conformsTo": package,
        "objects": [activity] + nodes + edges,
        "roots": ["@a1"],
    }
    stats = recursive_model_stats(depth)
    assert stats["nodes"] == len(nodes) and stats["edges"] == len(edges)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n", stats
