"""Typed dependency graph compiled from the workflow document.

Nodes are command, context, code and data artifacts; edges carry the
cross-layer relation that produced them. Compilation derives edges from
each stage's declared wiring:

* the command node points at the stage's context artifact;
* every consumed artifact points at every produced artifact (and at the
  context artifact) when the layer pair carries a dependency: context
  feeds code and later context, code feeds code and data, data feeds data
  and context;
* a stage's context artifact feeds the code it produces (the plan drives
  the generated script);
* code produced alongside data in one stage feeds that data (the script
  writes it).

The artifact subgraph and the stage-precedence relation must both be
acyclic; ordering is advisory and never enforced at runtime.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .commands import CommandSpec
from .errors import CycleDetected, UnknownCommand, UnknownNode
from .refs import Layer, is_glob, layer_for_path, resolve_pattern
from .workflow import WorkflowSpec


class Freshness(str, Enum):
    FRESH = "fresh"
    STALE = "stale"
    MISSING = "missing"


class EdgeKind(str, Enum):
    COMMAND_TO_CONTEXT = "command_to_context"
    CONTEXT_TO_CODE = "context_to_code"
    CODE_TO_DATA = "code_to_data"
    DATA_TO_CONTEXT = "data_to_context"
    CODE_TO_CODE = "code_to_code"
    # Same-layer flows the canonical workflow needs beyond the four
    # cross-layer relations: processed data feeding outputs, and earlier
    # documents feeding later ones.
    DATA_TO_DATA = "data_to_data"
    CONTEXT_TO_CONTEXT = "context_to_context"


_EDGE_LAYERS: dict[EdgeKind, tuple[Layer, Layer]] = {
    EdgeKind.COMMAND_TO_CONTEXT: (Layer.COMMAND, Layer.CONTEXT),
    EdgeKind.CONTEXT_TO_CODE: (Layer.CONTEXT, Layer.CODE),
    EdgeKind.CODE_TO_DATA: (Layer.CODE, Layer.DATA),
    EdgeKind.DATA_TO_CONTEXT: (Layer.DATA, Layer.CONTEXT),
    EdgeKind.CODE_TO_CODE: (Layer.CODE, Layer.CODE),
    EdgeKind.DATA_TO_DATA: (Layer.DATA, Layer.DATA),
    EdgeKind.CONTEXT_TO_CONTEXT: (Layer.CONTEXT, Layer.CONTEXT),
}

_KIND_BY_LAYERS = {layers: kind for kind, layers in _EDGE_LAYERS.items()}

# Layer pairs that carry no tracked dependency (e.g. data does not drive
# the code that reads it).
_UNTRACKED_PAIRS = {
    (Layer.DATA, Layer.CODE),
    (Layer.CODE, Layer.CONTEXT),
    (Layer.CONTEXT, Layer.DATA),
}


def edge_kind_for(from_layer: Layer, to_layer: Layer) -> EdgeKind | None:
    return _KIND_BY_LAYERS.get((from_layer, to_layer))


def edge_layers(kind: EdgeKind) -> tuple[Layer, Layer]:
    return _EDGE_LAYERS[kind]


@dataclass(frozen=True)
class GraphNode:
    id: str
    layer: Layer
    path: str
    freshness: Freshness = Freshness.MISSING


@dataclass(frozen=True, order=True)
class GraphEdge:
    src: str
    dst: str
    kind: EdgeKind


@dataclass(frozen=True)
class StageWiring:
    """How one stage hooks into the graph; preserved for ordering and
    staleness attribution."""

    name: str
    command_node: str
    context_node: str | None
    consumes: tuple[str, ...]
    produces: tuple[str, ...]
    optional: bool
    doc_index: int

    @property
    def outputs(self) -> tuple[str, ...]:
        if self.context_node is None:
            return self.produces
        return self.produces + (self.context_node,)


@dataclass(frozen=True, eq=False)
class DependencyGraph:
    nodes: dict[str, GraphNode]
    edges: frozenset[GraphEdge]
    stages: tuple[StageWiring, ...] = ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DependencyGraph):
            return NotImplemented
        return set(self.nodes.values()) == set(other.nodes.values()) and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((frozenset(self.nodes), self.edges))

    def successors(self, node_id: str) -> list[str]:
        return sorted(e.dst for e in self.edges if e.src == node_id)

    def adjacency(self) -> dict[str, list[str]]:
        cached = getattr(self, "_adjacency_cache", None)
        if cached is not None:
            return cached
        adj: dict[str, list[str]] = {node_id: [] for node_id in self.nodes}
        for edge in self.edges:
            adj[edge.src].append(edge.dst)
        for targets in adj.values():
            targets.sort()
        object.__setattr__(self, "_adjacency_cache", adj)
        return adj

    def stage(self, name: str) -> StageWiring | None:
        for wiring in self.stages:
            if wiring.name == name:
                return wiring
        return None

    @property
    def stage_names(self) -> list[str]:
        return [w.name for w in self.stages]

    def with_freshness(self, updates: dict[str, Freshness]) -> "DependencyGraph":
        """Graph values are immutable; freshness changes make a new one."""
        nodes = dict(self.nodes)
        for node_id, freshness in updates.items():
            if node_id not in nodes:
                raise UnknownNode(node_id)
            nodes[node_id] = replace(nodes[node_id], freshness=freshness)
        return DependencyGraph(nodes=nodes, edges=self.edges, stages=self.stages)


def command_node_id(command_name: str) -> str:
    return f"@{command_name}.md"


def _find_cycle(adj: dict[str, list[str]]) -> list[str] | None:
    """Return one cycle as a node list, or None. Iterative DFS."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in adj}
    parent: dict[str, str] = {}
    for start in sorted(adj):
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, idx = stack[-1]
            if idx < len(adj[node]):
                stack[-1] = (node, idx + 1)
                nxt = adj[node][idx]
                if color.get(nxt, BLACK) == GRAY:
                    cycle = [nxt, node]
                    cur = node
                    while cur != nxt:
                        cur = parent[cur]
                        cycle.append(cur)
                    cycle.reverse()
                    return cycle[:-1]
                if color.get(nxt, BLACK) == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return None


def compile_graph(
    spec: WorkflowSpec,
    commands: list[CommandSpec],
    project_root: Path | str | None = None,
) -> DependencyGraph:
    """Compile the workflow into a typed dependency graph.

    Every stage must resolve to a parsed command. When a project root is
    given, node freshness is read from disk; otherwise everything starts
    as missing.
    """
    by_name = {c.name: c for c in commands}
    nodes: dict[str, GraphNode] = {}
    edges: set[GraphEdge] = set()
    wirings: list[StageWiring] = []

    def ensure_artifact(pattern: str) -> str:
        layer = layer_for_path(pattern)
        node_id = pattern
        if node_id not in nodes:
            nodes[node_id] = GraphNode(id=node_id, layer=layer, path=pattern)
        return node_id

    def connect(src: str, dst: str) -> None:
        if src == dst:
            return
        kind = edge_kind_for(nodes[src].layer, nodes[dst].layer)
        if kind is None:
            return
        edges.add(GraphEdge(src=src, dst=dst, kind=kind))

    for stage in spec.stages:
        if stage.command not in by_name:
            raise UnknownCommand(
                f"stage @{stage.command}.md has no command artifact"
            )
        cmd_id = command_node_id(stage.command)
        nodes[cmd_id] = GraphNode(
            id=cmd_id, layer=Layer.COMMAND, path=f"commands/{stage.command}.md"
        )

        context_id: str | None = None
        if stage.context_artifact:
            context_id = ensure_artifact(stage.context_artifact)
        consumed = tuple(ensure_artifact(r.pattern) for r in stage.consumes)
        produced = tuple(ensure_artifact(r.pattern) for r in stage.produces)

        if context_id:
            edges.add(GraphEdge(src=cmd_id, dst=context_id, kind=EdgeKind.COMMAND_TO_CONTEXT))

        targets = produced + ((context_id,) if context_id else ())
        for src in consumed:
            for dst in targets:
                connect(src, dst)
        if context_id:
            for dst in produced:
                if nodes[dst].layer is Layer.CODE:
                    connect(context_id, dst)
        for src in produced:
            if nodes[src].layer is not Layer.CODE:
                continue
            for dst in produced:
                if nodes[dst].layer is Layer.DATA:
                    connect(src, dst)

        wirings.append(
            StageWiring(
                name=stage.command,
                command_node=cmd_id,
                context_node=context_id,
                consumes=consumed,
                produces=produced,
                optional=stage.optional,
                doc_index=stage.doc_index,
            )
        )

    graph = DependencyGraph(nodes=nodes, edges=frozenset(edges), stages=tuple(wirings))

    artifact_adj = {
        node_id: [t for t in targets if nodes[t].layer is not Layer.COMMAND]
        for node_id, targets in graph.adjacency().items()
        if nodes[node_id].layer is not Layer.COMMAND
    }
    cycle = _find_cycle(artifact_adj)
    if cycle:
        raise CycleDetected(
            "artifact dependencies form a cycle: " + " -> ".join(cycle + cycle[:1]),
            cycle=cycle,
        )
    stage_cycle = _find_cycle(_stage_adjacency(graph))
    if stage_cycle:
        raise CycleDetected(
            "stage dependencies form a cycle: " + " -> ".join(stage_cycle + stage_cycle[:1]),
            cycle=stage_cycle,
        )

    if project_root is not None:
        graph = refresh_freshness(graph, project_root)
    return graph


def _stage_adjacency(graph: DependencyGraph) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {w.name: [] for w in graph.stages}
    for upstream in graph.stages:
        outputs = set(upstream.outputs)
        for downstream in graph.stages:
            if downstream.name == upstream.name:
                continue
            if outputs.intersection(downstream.consumes):
                adj[upstream.name].append(downstream.name)
    for targets in adj.values():
        targets.sort()
    return adj


def recommended_order(graph: DependencyGraph) -> list[str]:
    """Advisory execution order: topological over stage dependencies,
    document order breaking ties. Raises CycleDetected on a cyclic
    hand-loaded graph; graphs from compile_graph always succeed."""
    doc_index = {w.name: w.doc_index for w in graph.stages}
    adj = _stage_adjacency(graph)
    indegree = {name: 0 for name in adj}
    for targets in adj.values():
        for t in targets:
            indegree[t] += 1

    heap = [(doc_index[name], name) for name, deg in indegree.items() if deg == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        _, name = heapq.heappop(heap)
        order.append(name)
        for t in adj[name]:
            indegree[t] -= 1
            if indegree[t] == 0:
                heapq.heappush(heap, (doc_index[t], t))
    if len(order) != len(adj):
        stuck = sorted(set(adj) - set(order))
        raise CycleDetected("stage dependencies form a cycle", cycle=stuck)
    return order


def stale_set(graph: DependencyGraph, changed: str) -> set[str]:
    """Forward-reachable closure of a changed node, excluding the node."""
    if changed not in graph.nodes:
        raise UnknownNode(f"node {changed!r} not in graph")
    adj = graph.adjacency()
    seen: set[str] = set()
    queue: deque[str] = deque(adj[changed])
    while queue:
        node = queue.popleft()
        if node in seen:
            continue
        seen.add(node)
        queue.extend(adj[node])
    seen.discard(changed)
    return seen


def stages_to_rerun(graph: DependencyGraph, stale_nodes: set[str]) -> list[str]:
    """Stages whose outputs include a stale artifact, in document order."""
    flagged = [
        w.name
        for w in sorted(graph.stages, key=lambda w: w.doc_index)
        if stale_nodes.intersection(w.outputs)
    ]
    return flagged


def mark_stale(graph: DependencyGraph, changed: str) -> tuple[DependencyGraph, set[str], list[str]]:
    """Apply staleness marking: returns the updated graph, the stale node
    closure, and the stages flagged for re-run."""
    stale = stale_set(graph, changed)
    updates = {
        node_id: Freshness.STALE
        for node_id in stale
        if graph.nodes[node_id].layer is not Layer.COMMAND
    }
    return graph.with_freshness(updates), stale, stages_to_rerun(graph, stale)


def refresh_freshness(graph: DependencyGraph, project_root: Path | str) -> DependencyGraph:
    """Re-read fresh/missing from disk; stale marks are logical and kept."""
    root = Path(project_root)
    updates: dict[str, Freshness] = {}
    for node in graph.nodes.values():
        if node.freshness is Freshness.STALE:
            continue
        target = root / node.path.rstrip("/")
        if is_glob(node.path):
            exists = bool(resolve_pattern(root, node.path))
        else:
            exists = target.exists()
        updates[node.id] = Freshness.FRESH if exists else Freshness.MISSING
    return graph.with_freshness(updates)


_DOT_SHAPES = {
    Layer.COMMAND: "box",
    Layer.CONTEXT: "note",
    Layer.CODE: "component",
    Layer.DATA: "cylinder",
}


def export_graph(graph: DependencyGraph, format: str = "json") -> str:
    """Render the graph as DOT (for graph viewers) or JSON (round-trips
    through load_graph_json)."""
    if format == "dot":
        lines = ["digraph workflow {"]
        for node in sorted(graph.nodes.values(), key=lambda n: n.id):
            lines.append(
                f'  "{node.id}" [label="{node.id}" shape={_DOT_SHAPES[node.layer]}'
                f' freshness="{node.freshness.value}"];'
            )
        for edge in sorted(graph.edges):
            lines.append(f'  "{edge.src}" -> "{edge.dst}" [label="{edge.kind.value}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    if format == "json":
        payload = {
            "nodes": [
                {
                    "id": n.id,
                    "layer": n.layer.value,
                    "path": n.path,
                    "freshness": n.freshness.value,
                }
                for n in sorted(graph.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "kind": e.kind.value}
                for e in sorted(graph.edges)
            ],
            "stages": [
                {
                    "name": w.name,
                    "command_node": w.command_node,
                    "context_node": w.context_node,
                    "consumes": list(w.consumes),
                    "produces": list(w.produces),
                    "optional": w.optional,
                    "doc_index": w.doc_index,
                }
                for w in graph.stages
            ],
        }
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown export format {format!r}")


def load_graph_json(text: str) -> DependencyGraph:
    payload = json.loads(text)
    nodes = {
        item["id"]: GraphNode(
            id=item["id"],
            layer=Layer(item["layer"]),
            path=item["path"],
            freshness=Freshness(item["freshness"]),
        )
        for item in payload["nodes"]
    }
    edges = frozenset(
        GraphEdge(src=item["from"], dst=item["to"], kind=EdgeKind(item["kind"]))
        for item in payload["edges"]
    )
    stages = tuple(
        StageWiring(
            name=item["name"],
            command_node=item["command_node"],
            context_node=item["context_node"],
            consumes=tuple(item["consumes"]),
            produces=tuple(item["produces"]),
            optional=item["optional"],
            doc_index=item["doc_index"],
        )
        for item in payload.get("stages", [])
    )
    return DependencyGraph(nodes=nodes, edges=edges, stages=stages)
