"""Design versioning tree: lineage of generation rounds.

Every generation round attaches exactly three child designs to a parent
node.  Layout places depth along -y with siblings packed left-to-right on
x (leaves get unit slots, parents center over their children), giving a
deterministic, collision-free node-link diagram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

GENERATION_SIZE = 3
MIN_NODE_SPACING = 0.5


@dataclass(frozen=True)
class EditDescriptor:
    selected_parts: tuple[int, ...]
    adjectives: tuple[str, ...]
    generation_round: int

    def __post_init__(self):
        object.__setattr__(self, "selected_parts", tuple(int(i) for i in self.selected_parts))
        object.__setattr__(self, "adjectives", tuple(self.adjectives))
        if any(not (0 <= i <= 15) for i in self.selected_parts):
            raise ValueError("part indices must be in 0..15")
        if len(set(self.selected_parts)) != len(self.selected_parts):
            raise ValueError("duplicate part indices")
        if self.generation_round > 0 and not self.adjectives:
            raise ValueError("adjectives required for generation rounds > 0")

    def to_dict(self) -> dict:
        return {
            "selected_parts": list(self.selected_parts),
            "adjectives": list(self.adjectives),
            "generation_round": self.generation_round,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EditDescriptor":
        return cls(selected_parts=tuple(d["selected_parts"]),
                   adjectives=tuple(d["adjectives"]),
                   generation_round=int(d["generation_round"]))


@dataclass
class VersionNode:
    shape_id: str
    parent: Optional["VersionNode"] = None
    children: list["VersionNode"] = field(default_factory=list)
    edit: Optional[EditDescriptor] = None
    depth: int = 0


@dataclass
class VersionTree:
    roots: list[VersionNode] = field(default_factory=list)
    index: dict[str, VersionNode] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.index)

    def has(self, shape_id: str) -> bool:
        return shape_id in self.index

    def node(self, shape_id: str) -> VersionNode:
        return self.index[shape_id]


def add_root(tree: VersionTree, shape_id: str) -> VersionNode:
    if shape_id in tree.index:
        raise ValueError(f"shape {shape_id!r} is already in the tree")
    node = VersionNode(shape_id=shape_id)
    tree.roots.append(node)
    tree.index[shape_id] = node
    return node


def add_generation(tree: VersionTree, parent_shape_id: str,
                   children: list[str], edit: EditDescriptor) -> list[VersionNode]:
    """Attach one generation round: exactly 3 fresh children, in given order."""
    if len(children) != GENERATION_SIZE:
        raise ValueError(f"a generation round has exactly {GENERATION_SIZE} children, got {len(children)}")
    if parent_shape_id not in tree.index:
        raise ValueError(f"unknown parent shape {parent_shape_id!r}")
    if len(set(children)) != GENERATION_SIZE:
        raise ValueError("child ids must be distinct")
    for cid in children:
        if cid in tree.index:
            raise ValueError(f"child id {cid!r} already exists in the tree")
    parent = tree.index[parent_shape_id]
    nodes = []
    for cid in children:
        node = VersionNode(shape_id=cid, parent=parent, edit=edit, depth=parent.depth + 1)
        parent.children.append(node)
        tree.index[cid] = node
        nodes.append(node)
    return nodes


def layout(tree: VersionTree) -> list[tuple[str, tuple[float, float, float]]]:
    """Deterministic tidy layout: y = -depth, leaves on unit x slots,
    parents centered over children, root subtrees packed with a gap."""
    out: list[tuple[str, tuple[float, float, float]]] = []
    cursor = 0.0

    def walk(node: VersionNode) -> float:
        nonlocal cursor
        if not node.children:
            x = cursor
            cursor += 1.0
        else:
            xs = [walk(c) for c in node.children]
            x = sum(xs) / len(xs)
        out.append((node.shape_id, (x, -float(node.depth), 0.0)))
        return x

    for root in tree.roots:
        walk(root)
        cursor += 1.0  # gap keeps root subtrees' x-extents disjoint
    return out


def serialize(tree: VersionTree) -> dict:
    def node_dict(n: VersionNode) -> dict:
        return {
            "shape_id": n.shape_id,
            "edit": n.edit.to_dict() if n.edit else None,
            "children": [node_dict(c) for c in n.children],
        }

    return {"roots": [node_dict(r) for r in tree.roots]}


def deserialize(data: dict) -> VersionTree:
    tree = VersionTree()

    def walk(d: dict, parent: Optional[VersionNode], depth: int) -> VersionNode:
        sid = d["shape_id"]
        if sid in tree.index:
            raise ValueError(f"shape {sid!r} appears twice; tree must be acyclic with unique ids")
        edit = EditDescriptor.from_dict(d["edit"]) if d.get("edit") else None
        if parent is None and edit is not None:
            raise ValueError("root nodes cannot carry an edit")
        node = VersionNode(shape_id=sid, parent=parent, edit=edit, depth=depth)
        tree.index[sid] = node
        for cd in d.get("children", []):
            node.children.append(walk(cd, node, depth + 1))
        return node

    for rd in data.get("roots", []):
        tree.roots.append(walk(rd, None, 0))
    return tree
