"""Statute documents, section trees, and norm extraction.

A source document is a pre-order list of nodes with depths.  Parsing builds a
tree (subsume edges) keyed by canonical ids and scans node content for
cross-references (refer edges).  A norm is the root-to-leaf concatenation of
one leaf's path; every leaf yields exactly one norm.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from ciforge.errors import (
    CiForgeError,
    DuplicateId,
    EmptyDocument,
    MalformedId,
    NetworkError,
)
from ciforge.ids import NormId, looks_like_id, scan_ids

log = logging.getLogger(__name__)


class NormType(str, Enum):
    DEFINITION = "Definition"
    PERMIT = "Permit"
    FORBID = "Forbid"
    EXCEPTION = "Exception"
    REQUIREMENT = "Requirement"
    OTHER = "Other"


@dataclass(frozen=True)
class SourceNode:
    id_text: str
    heading: str
    content: str
    depth: int


@dataclass(frozen=True)
class StatuteSourceDocument:
    law_name: str
    nodes: tuple[SourceNode, ...]

    @classmethod
    def from_json_obj(cls, obj: dict) -> StatuteSourceDocument:
        nodes = tuple(
            SourceNode(
                id_text=str(n["id"]),
                heading=str(n.get("heading", "")),
                content=str(n.get("content", "")),
                depth=int(n["depth"]),
            )
            for n in obj.get("nodes", [])
        )
        return cls(law_name=str(obj.get("law_name", "")), nodes=nodes)

    def to_json_obj(self) -> dict:
        return {
            "law_name": self.law_name,
            "nodes": [
                {
                    "id": n.id_text,
                    "heading": n.heading,
                    "content": n.content,
                    "depth": n.depth,
                }
                for n in self.nodes
            ],
        }


@dataclass
class StatuteNode:
    id: str
    heading: str
    content: str
    depth: int
    parent: str | None = None
    children: list[str] = field(default_factory=list)

    @property
    def norm_id(self) -> NormId | None:
        """The structured id for section-level nodes, None for labels."""
        if looks_like_id(self.id):
            return NormId.parse(self.id)
        return None


class StatuteGraph:
    """Section tree plus cross-reference metadata.

    Subsume edges are the child-to-parent links of the tree; refer edges are
    inert annotations extracted from content and never affect norm paths.
    Dangling refer targets are kept and listed separately.
    """

    def __init__(self, law_name: str):
        self.law_name = law_name
        self.nodes: dict[str, StatuteNode] = {}
        self.root: str | None = None
        self.refer_edges: list[tuple[str, str]] = []
        self.dangling_refer_targets: list[str] = []

    def subsume_edges(self) -> list[tuple[str, str]]:
        return [
            (node.id, node.parent)
            for node in self.nodes.values()
            if node.parent is not None
        ]

    def leaves(self) -> list[StatuteNode]:
        """Leaf nodes in document order."""
        return [n for n in self.nodes.values() if not n.children]

    def path_to_root(self, node_id: str) -> list[str]:
        path = [node_id]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path

    def validate(self) -> None:
        """Check the single-root tree property; raises on violations."""
        roots = [n.id for n in self.nodes.values() if n.parent is None]
        if len(roots) != 1 or roots[0] != self.root:
            raise CiForgeError(f"expected a single root, found {roots}")
        for node in self.nodes.values():
            cursor, hops = node.id, 0
            while cursor is not None:
                hops += 1
                if hops > len(self.nodes):
                    raise CiForgeError(f"cycle reached from {node.id}")
                cursor = self.nodes[cursor].parent
        for node in self.nodes.values():
            for child in node.children:
                if self.nodes[child].parent != node.id:
                    raise CiForgeError(f"broken parent link at {child}")

    def to_json_obj(self) -> dict:
        return {
            "law_name": self.law_name,
            "nodes": [
                {
                    "id": n.id,
                    "heading": n.heading,
                    "content": n.content,
                    "depth": n.depth,
                }
                for n in self.nodes.values()
            ],
            "refer_edges": [list(edge) for edge in self.refer_edges],
            "dangling_refer_targets": list(self.dangling_refer_targets),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> StatuteGraph:
        graph = parse_statute(StatuteSourceDocument.from_json_obj(obj))
        return graph


_PARAGRAPH_REF_RE = re.compile(
    r"paragraphs?\s+((?:\(\s*[A-Za-z0-9]+\s*\))+)", re.IGNORECASE
)
_SECTION_REF_RE = re.compile(
    r"§+\s*(\d+\.\d+(?:\s*\(\s*[A-Za-z0-9]+\s*\))*)"
)
_LABEL_RUN_RE = re.compile(r"\(\s*([A-Za-z0-9]+)\s*\)")


def _canonical_key(id_text: str) -> str:
    """Canonical node key: parsed id for sections, trimmed label otherwise."""
    if looks_like_id(id_text):
        return NormId.parse(id_text).canonical()
    key = id_text.strip()
    if not key:
        raise MalformedId("blank node id")
    return key


def parse_statute(doc: StatuteSourceDocument) -> StatuteGraph:
    """Build the section tree and extract cross-references.

    The root is the single shallowest node when it carries the law name;
    otherwise a synthetic root labeled with the law name is added above the
    top level.  Parents follow the pre-order depth structure: each node
    attaches to the nearest earlier node of smaller depth.
    """
    if not doc.nodes:
        raise EmptyDocument("source document has no nodes")

    graph = StatuteGraph(law_name=doc.law_name)
    min_depth = min(n.depth for n in doc.nodes)
    top_level = [n for n in doc.nodes if n.depth == min_depth]
    law = doc.law_name.strip()
    single_key = (
        _canonical_key(top_level[0].id_text) if len(top_level) == 1 else None
    )
    synthesize_root = single_key is None or (bool(law) and single_key != law)

    if synthesize_root:
        root_key = _canonical_key(law or "root")
        graph.nodes[root_key] = StatuteNode(
            id=root_key, heading=doc.law_name, content=doc.law_name, depth=0
        )
        graph.root = root_key
        stack: list[tuple[int, str]] = [(0, root_key)]
        depth_shift = 1 - min_depth
    else:
        stack = []
        depth_shift = -min_depth

    for source in doc.nodes:
        key = _canonical_key(source.id_text)
        if key in graph.nodes:
            raise DuplicateId(f"node id {key!r} appears twice")
        depth = source.depth + depth_shift
        node = StatuteNode(
            id=key,
            heading=source.heading,
            content=source.content,
            depth=depth,
        )
        while stack and stack[-1][0] >= depth:
            stack.pop()
        if stack:
            parent_key = stack[-1][1]
            node.parent = parent_key
            graph.nodes[parent_key].children.append(key)
        else:
            graph.root = key
        graph.nodes[key] = node
        stack.append((depth, key))

    _extract_refer_edges(graph)
    graph.validate()
    return graph


def _extract_refer_edges(graph: StatuteGraph) -> None:
    dangling: set[str] = set()
    seen: set[tuple[str, str]] = set()
    for node in graph.nodes.values():
        for target in _refer_targets(node):
            edge = (node.id, target)
            if edge[0] == edge[1] or edge in seen:
                continue
            seen.add(edge)
            graph.refer_edges.append(edge)
            if target not in graph.nodes:
                dangling.add(target)
    graph.dangling_refer_targets = sorted(dangling)
    if dangling:
        log.warning("refer targets missing from the graph: %s", sorted(dangling))


def _refer_targets(node: StatuteNode) -> list[str]:
    text = node.content
    if not text:
        return []
    targets: list[str] = []
    for raw in _SECTION_REF_RE.findall(text):
        try:
            targets.append(NormId.parse(raw).canonical())
        except MalformedId:
            continue
    # "paragraph (a)(5)(ii)" resolves against the section this node sits in.
    section = node.norm_id
    if section is not None:
        for run in _PARAGRAPH_REF_RE.findall(text):
            labels = tuple(l.lower() for l in _LABEL_RUN_RE.findall(run))
            if labels:
                targets.append(section.with_labels(labels).canonical())
    for norm_id in scan_ids(text):
        targets.append(norm_id.canonical())
    return targets


@dataclass
class Norm:
    """One leaf's rule text: the id-prefixed lines along its root path."""

    leaf_id: NormId
    path_ids: tuple[str, ...]
    full_text: str
    types: set[NormType] = field(default_factory=set)
    type_payloads: dict[NormType, str] = field(default_factory=dict)
    seed_polarity: NormType | None = None
    flagged: bool = False

    def to_json_obj(self) -> dict:
        return {
            "leaf_id": self.leaf_id.canonical(),
            "path_ids": list(self.path_ids),
            "full_text": self.full_text,
            "types": sorted(t.value for t in self.types),
            "type_payloads": {
                t.value: self.type_payloads[t]
                for t in sorted(self.type_payloads, key=lambda t: t.value)
            },
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> Norm:
        return cls(
            leaf_id=NormId.parse(obj["leaf_id"]),
            path_ids=tuple(obj["path_ids"]),
            full_text=obj["full_text"],
            types={NormType(t) for t in obj.get("types", [])},
            type_payloads={
                NormType(t): text
                for t, text in obj.get("type_payloads", {}).items()
            },
        )


def _segment(node: StatuteNode) -> str:
    # Structural nodes without content contribute their heading instead.
    return node.content if node.content else node.heading


def extract_norms(graph: StatuteGraph) -> list[Norm]:
    """One norm per leaf, in document order.

    full_text is the newline-joined "id: segment" lines from the root down,
    so every norm restates its ancestry before the operative leaf text.
    """
    norms = []
    for leaf in graph.leaves():
        norm_id = leaf.norm_id
        if norm_id is None:
            log.warning("skipping leaf %r without a section id", leaf.id)
            continue
        path = list(reversed(graph.path_to_root(leaf.id)))
        lines = [f"{node_id}: {_segment(graph.nodes[node_id])}" for node_id in path]
        norms.append(
            Norm(
                leaf_id=norm_id,
                path_ids=tuple(path),
                full_text="\n".join(lines),
            )
        )
    return norms


def save_norms(norms: list[Norm], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for norm in norms:
            handle.write(json.dumps(norm.to_json_obj(), ensure_ascii=False) + "\n")


def load_norms(path: str | Path) -> list[Norm]:
    norms = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                norms.append(Norm.from_json_obj(json.loads(line)))
    return norms


def load_document(path: str | Path) -> StatuteSourceDocument:
    obj = json.loads(Path(path).read_text("utf-8"))
    return StatuteSourceDocument.from_json_obj(obj)


def bundled_snapshot_path() -> Path:
    """Path of the packaged miniature HIPAA snapshot."""
    return Path(str(resources.files("ciforge.fixtures").joinpath("mini_hipaa.json")))


# --- federal regulations structure adapter --------------------------------


def _ecfr_node_key(identifier: str, label: str, kind: str) -> str:
    """Pick a node id parse_statute will accept.

    Section identifiers ("164.502") pass through; bare numeric identifiers
    (titles and parts come as "45", "164") fall back to the human label so
    they read as structural keys rather than malformed section ids.
    """
    candidate = identifier or label
    if looks_like_id(candidate):
        try:
            NormId.parse(candidate)
        except MalformedId:
            if label and not looks_like_id(label):
                return label
            return f"{kind or 'node'} {candidate}".strip()
    return candidate


def ecfr_to_document(structure: dict, law_name: str) -> StatuteSourceDocument:
    """Convert a regulations structure payload into a source document.

    The upstream shape is a nested tree of {identifier, label, label_description,
    children, type}; identifiers at section level follow the part.section
    grammar.  Text lives in label_description.
    """
    nodes: list[SourceNode] = []

    def walk(entry: dict, depth: int) -> None:
        identifier = str(entry.get("identifier", "")).strip()
        label = str(entry.get("label", "")).strip()
        description = str(entry.get("label_description", "")).strip()
        content = str(entry.get("text", "")).strip()
        nodes.append(
            SourceNode(
                id_text=_ecfr_node_key(identifier, label, str(entry.get("type", ""))),
                heading=label or description,
                content=content or description,
                depth=depth,
            )
        )
        for child in entry.get("children") or []:
            walk(child, depth + 1)

    walk(structure, 0)
    return StatuteSourceDocument(law_name=law_name, nodes=tuple(nodes))


def fetch_document(url: str, law_name: str) -> StatuteSourceDocument:
    """Fetch a statute structure over HTTP and convert it."""
    import requests

    try:
        response = requests.get(url, timeout=60)
        response.raise_for_status()
        payload = response.json()
    except requests.RequestException as exc:
        raise NetworkError(f"statute fetch failed: {exc}") from exc
    if "nodes" in payload:
        return StatuteSourceDocument.from_json_obj(payload)
    return ecfr_to_document(payload, law_name)
