"""Independent reference implementations and generated corpora used by the tests.

Nothing here calls the code under test to decide an expected value.
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass, replace
from collections import Counter, deque
from fractions import Fraction
from typing import Optional

from uitasker.actions import Action, ActionType
from uitasker.graph.model import AppGraph, ScreenDescription, ScreenNode, TargetLocator, TransitionEdge
from uitasker.sim import SimDevice
from uitasker.ui.fingerprint import ScreenFingerprint
from uitasker.ui.snapshot import Bounds, ScreenSnapshot, UiCapability, UiElement

# -- micro F1 ---------------------------------------------------------------
# (pred, gold, expected) worked out by hand: 2*|common| / (|pred| + |gold|).
F1_CASES = [
    (set(), set(), Fraction(1)),
    ({"PRESS"}, {"PRESS"}, Fraction(1)),
    (set(), {"PRESS"}, Fraction(0)),
    ({"PRESS"}, set(), Fraction(0)),
    ({"PRESS", "library"}, {"PRESS", "search"}, Fraction(1, 2)),
    ({"a"}, {"b"}, Fraction(0)),
    ({"a", "b"}, {"a"}, Fraction(2, 3)),
    ({"a"}, {"a", "b"}, Fraction(2, 3)),
    ({"a", "b", "c"}, {"a"}, Fraction(1, 2)),
    ({"a", "b", "c"}, {"a", "b"}, Fraction(4, 5)),
    ({"a", "b", "c"}, {"c", "d", "e"}, Fraction(1, 3)),
    ({"a", "b", "c", "d"}, {"a", "b", "c", "d"}, Fraction(1)),
    ({"a", "b", "c", "d"}, {"a"}, Fraction(2, 5)),
    ({"a", "b"}, {"c", "d"}, Fraction(0)),
    ({"a", "b", "c"}, {"a", "b", "d"}, Fraction(2, 3)),
    ({"x", "y", "z", "w", "v"}, {"x"}, Fraction(1, 3)),
    ({"x", "y", "z", "w", "v"}, {"x", "y", "z"}, Fraction(3, 4)),
    ({"1", "2", "3", "4", "5", "6"}, {"1", "2", "3", "4", "5", "7"}, Fraction(5, 6)),
    ({"ENTER_TEXT", "search box"}, {"ENTER_TEXT", "Search box"}, Fraction(1, 2)),
    ({"a", "b", "c", "d", "e", "f", "g"}, {"a", "b"}, Fraction(4, 9)),
]


# -- shortest paths ---------------------------------------------------------
def bfs_distance(adjacency: dict[int, set[int]], source: int, dest: int) -> Optional[int]:
    seen = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        if node == dest:
            return seen[node]
        for nxt in sorted(adjacency.get(node, ())):
            if nxt not in seen:
                seen[nxt] = seen[node] + 1
                queue.append(nxt)
    return None


def all_shortest_node_paths(adjacency: dict[int, set[int]], source: int, dest: int) -> list[tuple[int, ...]]:
    """Every minimum-length node sequence, by exhaustive depth-limited search."""
    limit = bfs_distance(adjacency, source, dest)
    if limit is None:
        return []
    found = []

    def walk(path: list[int]) -> None:
        if len(path) - 1 == limit:
            if path[-1] == dest:
                found.append(tuple(path))
            return
        for nxt in adjacency.get(path[-1], ()):
            if nxt not in path:
                walk(path + [nxt])

    walk([source])
    return found


def expected_path(graph: AppGraph, source: int, dest: int) -> Optional[list[TransitionEdge]]:
    """Reference tie-break: most traversals, then lowest node sequence, then edge sort order."""
    if source == dest:
        return []
    adjacency: dict[int, set[int]] = {}
    for e in graph.edges.values():
        adjacency.setdefault(e.source, set()).add(e.dest)
    candidates = []
    for nodes in all_shortest_node_paths(adjacency, source, dest):
        hops = []
        for a, b in zip(nodes, nodes[1:]):
            parallel = [e for e in graph.edges.values() if e.source == a and e.dest == b]
            best = max(e.traversal_count for e in parallel)
            hops.append(min((e for e in parallel if e.traversal_count == best), key=TransitionEdge.sort_key))
        total = sum(e.traversal_count for e in hops)
        candidates.append((-total, nodes, hops))
    if not candidates:
        return None
    return min(candidates, key=lambda c: (c[0], c[1]))[2]


def _node(node_id: int) -> ScreenNode:
    return ScreenNode(node_id, ScreenFingerprint(node_id * 7919, node_id), ScreenDescription(f"screen {node_id}"))


def random_graph(rng: random.Random, max_nodes: int = 20, max_edges: int = 60) -> AppGraph:
    """Random directed multigraph with traversal counts drawn from a small range (lots of ties)."""
    n = rng.randint(2, max_nodes)
    graph = AppGraph("com.example.random")
    for node_id in range(1, n + 1):
        graph.add_node(_node(node_id))
    for _ in range(rng.randint(0, max_edges)):
        a, b = rng.randint(1, n), rng.randint(1, n)
        if a == b:
            continue
        label = rng.choice(["ok", "next", "open", "more"])
        edge = TransitionEdge(
            a,
            b,
            Action.press(),
            TargetLocator(f"btn_{label}_{rng.randint(0, 3)}", label, (rng.randint(0, 7), rng.randint(0, 7), 8, 8)),
            rng.randint(1, 3),
        )
        if edge.key not in graph.edges:
            graph.add_edge(edge)
    return graph


def graph_structure(graph: AppGraph) -> tuple:
    nodes = sorted(
        (n.node_id, n.layout_signature, n.description, tuple(n.served_commands), tuple(n.feedback_notes))
        for n in graph.nodes.values()
    )
    edges = sorted((e.sort_key(), e.traversal_count) for e in graph.edges.values())
    return graph.package_name, tuple(nodes), tuple(edges)


# -- snapshots --------------------------------------------------------------
RESOLUTION = (1080, 1920)
CELL_W, CELL_H = RESOLUTION[0] // 8, RESOLUTION[1] // 8
CLASSES = ("button", "label", "icon", "image", "text-field", "checkbox")
WORDS = ("Home", "Search", "Play", "Library", "Settings", "Send", "Alice", "Tokyo", "Open", "Save")


def cell_tokens(snapshot: ScreenSnapshot) -> Counter:
    """Layout oracle: multiset of (class, grid cell box) over every element."""

    def snap(v: int, extent: int) -> int:
        return min(max(v * 8 // extent, 0), 8)

    w, h = snapshot.resolution
    out = Counter()
    for e in snapshot.root.iter_tree():
        b = e.bounds
        out[(e.widget_class, snap(b.x, w), snap(b.y, h), snap(b.x + b.w, w), snap(b.y + b.h, h))] += 1
    return out


def grid_snapshot(rng: random.Random, count: Optional[int] = None) -> ScreenSnapshot:
    """Leaf elements each filling a distinct grid cell: no overlap, nothing filtered."""
    cells = rng.sample([(c, r) for c in range(8) for r in range(8)], count or rng.randint(2, 12))
    children = []
    for i, (c, r) in enumerate(cells, start=1):
        cls = rng.choice(CLASSES)
        caps = {UiCapability.CLICKABLE} if cls in ("button", "icon", "checkbox") else set()
        if cls == "text-field":
            caps = {UiCapability.CLICKABLE, UiCapability.TEXT_EDITABLE}
        children.append(
            UiElement(
                id=i,
                widget_class=cls,
                bounds=Bounds(c * CELL_W, r * CELL_H, CELL_W, CELL_H),
                text=rng.choice(WORDS),
                allowed_actions=frozenset(caps),
            )
        )
    root = UiElement(0, "container", Bounds(0, 0, *RESOLUTION), children=tuple(children))
    return ScreenSnapshot(root, RESOLUTION, app_name="Gen", package_name="com.example.gen", activity_name=".Gen")


def _replace_child(snapshot: ScreenSnapshot, index: int, child: Optional[UiElement]) -> ScreenSnapshot:
    kids = list(snapshot.root.children)
    if child is None:
        del kids[index]
    else:
        kids[index] = child
    return snapshot.with_root(replace(snapshot.root, children=tuple(kids)))


def text_mutation(rng: random.Random, snapshot: ScreenSnapshot) -> ScreenSnapshot:
    out = snapshot
    for index in rng.sample(range(len(snapshot.root.children)), rng.randint(1, len(snapshot.root.children))):
        child = out.root.children[index]
        word = "".join(rng.choice(string.ascii_letters) for _ in range(rng.randint(3, 12)))
        out = _replace_child(out, index, replace(child, text=word, content_desc=rng.choice([None, word + " desc"])))
    return out


def layout_mutation(rng: random.Random, snapshot: ScreenSnapshot) -> ScreenSnapshot:
    """Move, re-class, drop or add one element; retried until the cell multiset really differs."""
    while True:
        kind = rng.choice(["move", "reclass", "drop", "add"])
        kids = snapshot.root.children
        index = rng.randrange(len(kids))
        child = kids[index]
        if kind == "move":
            c, r = rng.randrange(8), rng.randrange(8)
            out = _replace_child(snapshot, index, replace(child, bounds=Bounds(c * CELL_W, r * CELL_H, CELL_W, CELL_H)))
        elif kind == "reclass":
            out = _replace_child(snapshot, index, replace(child, widget_class=rng.choice(CLASSES)))
        elif kind == "drop" and len(kids) > 1:
            out = _replace_child(snapshot, index, None)
        else:
            extra = replace(child, id=max(e.id for e in snapshot.root.iter_tree()) + 1)
            out = snapshot.with_root(replace(snapshot.root, children=kids + (extra,)))
        if cell_tokens(out) != cell_tokens(snapshot):
            return out


# -- PII corpus ---------------------------------------------------------------
STREETS = ("Street", "St", "Avenue", "Ave", "Road", "Rd", "Boulevard", "Lane", "Drive")
STREET_NAMES = ("Main", "Oak", "Maple", "Collins", "Elizabeth", "Sunset", "Pine", "Harbour")


def luhn_check_digit(body: str) -> str:
    total = 0
    for i, ch in enumerate(reversed(body)):
        d = int(ch)
        if i % 2 == 0:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return str((10 - total % 10) % 10)


def _phone(rng: random.Random) -> str:
    style = rng.randrange(5)
    if style == 0:
        return f"+1 {rng.randint(200, 999)} 555 {rng.randint(1000, 9999)}"
    if style == 1:
        return f"({rng.randint(200, 999)}) 555-{rng.randint(1000, 9999)}"
    if style == 2:
        return f"+61 4{rng.randint(10, 99)} {rng.randint(100, 999)} {rng.randint(100, 999)}"
    if style == 3:
        return f"{rng.randint(200, 999)}.{rng.randint(200, 999)}.{rng.randint(1000, 9999)}"
    return f"0{rng.randint(2, 9)} {rng.randint(1000, 9999)} {rng.randint(1000, 9999)}"


def _email(rng: random.Random) -> str:
    user = "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(3, 9)))
    sep = rng.choice(["", ".", "_", "+"])
    if sep:
        user += sep + "".join(rng.choice(string.ascii_lowercase + string.digits) for _ in range(3))
    domain = rng.choice(["example.com", "mail.example.org", "uni.edu.au", "corp.co.uk"])
    return f"{user}@{domain}"


def _card(rng: random.Random) -> str:
    length = rng.choice([13, 15, 16, 16, 19])
    body = str(rng.choice([4, 5, 3, 6])) + "".join(str(rng.randrange(10)) for _ in range(length - 2))
    digits = body + luhn_check_digit(body)
    if rng.random() < 0.5 and length == 16:
        return " ".join(digits[i : i + 4] for i in range(0, 16, 4))
    if rng.random() < 0.3 and length == 16:
        return "-".join(digits[i : i + 4] for i in range(0, 16, 4))
    return digits


def _address(rng: random.Random) -> str:
    return f"{rng.randint(1, 9999)} {rng.choice(STREET_NAMES)} {rng.choice(STREETS)}"


TEMPLATES = (
    "Call {}",
    "Contact: {}",
    "{}",
    "Send receipts to {} please",
    "Saved: {} (default)",
    "Deliver to {}, ring twice",
)


def pii_corpus(seed: int = 2024, size: int = 200) -> list[tuple[str, str, str]]:
    """(sentence, pii value, tag) triples, a quarter of each kind."""
    rng = random.Random(seed)
    makers = [
        (_phone, "<phone number>"),
        (_email, "<email>"),
        (_card, "<payment card>"),
        (_address, "<address>"),
    ]
    out = []
    for i in range(size):
        make, tag = makers[i % 4]
        value = make(rng)
        out.append((rng.choice(TEMPLATES).format(value), value, tag))
    return out


# --------------------------------------------------------------------------
# Executor ground truth: the simulator's own state, never the screen pixels.


@dataclass(frozen=True)
class StepCase:
    app: str
    screen: str
    action: Action
    target: Optional[int]
    label: str


def sim_state(device: SimDevice) -> tuple:
    return (
        device.current_screen,
        tuple(sorted(device.params.items())),
        tuple(sorted(device.field_values.items())),
        device.popup_active,
    )


def step_matrix(apps: dict) -> list[StepCase]:
    """Every (screen, element, action) combination worth probing on the fixture apps.

    Each visible element gets a PRESS; editable ones also get an ENTER_TEXT
    and non-editable ones get an ENTER_TEXT that the device must reject.
    BACK on the launch screen (empty back stack) is included per app.
    """
    from uitasker.sim import render_screen

    cases = []
    for name in sorted(apps):
        app = apps[name]
        cases.append(StepCase(name, app.initial_screen, Action.back(), None, "BACK@root"))
        for screen in sorted(app.screens):
            snap = render_screen(app, screen)
            for element in snap.root.iter_tree():
                if element.id == 0:
                    continue
                cases.append(StepCase(name, screen, Action.press(), element.id, f"PRESS {element.id}"))
                payload = f"probe {name} {element.id}"
                cases.append(StepCase(name, screen, Action.enter_text(payload), element.id, f"ENTER {element.id}"))
    return cases


def run_step_case(case: StepCase, apps: dict):
    """(outcome, state_changed, payload_entered) for one matrix case on a fresh device."""
    from uitasker.executor import execute_step

    device = SimDevice(apps[case.app], use_spec_perturbations=False)
    device.goto(case.screen)
    before = sim_state(device)
    outcome = execute_step(device, case.action, case.target)
    after = sim_state(device)
    entered = False
    if case.action.kind is ActionType.ENTER_TEXT:
        entered = case.action.argument in device.field_values.values() or case.action.argument in device.params.values()
    return outcome, before != after, entered
