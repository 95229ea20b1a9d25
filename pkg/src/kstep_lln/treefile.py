"""JSON tree files: probability trees with optional adapted values and losses.

Schema (all probabilities/values are plain JSON numbers; round-trip is
exact because floats are serialized with shortest-repr):

    {
      "depth": D,
      "nodes": [                      # one list per depth 1..D
        [{"parent": 0, "prob": 0.25}, {"parent": 0, "prob": 0.75}],
        ...
      ],
      "Y": [[...], ...],              # optional: values per depth 1..N
      "losses": {                     # optional: decision-problem tables
        "decisions": ["hold", "move"],
        "impact_horizon": 2,
        "tables": [                   # one entry per step n = 1..N
          [[...], [...]],             # per decision: values on depth-(n+K) nodes
          ...
        ]
      }
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decision import DecisionSpace, LossSpec
from .trees import AdaptedSequence, ProbabilityTree

__all__ = ["TreeFileError", "TreeBundle", "bundle_to_dict", "bundle_from_dict", "save_tree", "load_tree"]


class TreeFileError(ValueError):
    """Raised when a tree document is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class TreeBundle:
    tree: ProbabilityTree
    sequence: AdaptedSequence | None = None
    losses: LossSpec | None = None


def bundle_to_dict(bundle: TreeBundle) -> dict:
    tree = bundle.tree
    doc: dict = {
        "depth": tree.depth,
        "nodes": [
            [{"parent": int(p), "prob": float(q)} for p, q in zip(par, pr)]
            for par, pr in zip(tree.parents, tree.branch_probs)
        ],
    }
    if bundle.sequence is not None:
        doc["Y"] = [[float(v) for v in level] for level in bundle.sequence.values]
    if bundle.losses is not None:
        doc["losses"] = {
            "decisions": list(bundle.losses.space.labels),
            "impact_horizon": bundle.losses.horizon,
            "tables": [
                [[float(v) for v in tab] for tab in per_decision]
                for per_decision in bundle.losses.tables
            ],
        }
    return doc


def bundle_from_dict(doc: dict) -> TreeBundle:
    try:
        depth = doc["depth"]
        levels = doc["nodes"]
    except (KeyError, TypeError) as exc:
        raise TreeFileError(f"missing required field: {exc}") from exc
    if not isinstance(levels, list) or len(levels) != depth:
        raise TreeFileError(f"'nodes' must list {depth} levels, got {len(levels)!r}")
    try:
        parents = tuple(
            np.array([n["parent"] for n in level], dtype=np.int64) for level in levels
        )
        branch_probs = tuple(
            np.array([n["prob"] for n in level], dtype=np.float64) for level in levels
        )
    except (KeyError, TypeError) as exc:
        raise TreeFileError(f"malformed node record: {exc}") from exc
    try:
        tree = ProbabilityTree(parents=parents, branch_probs=branch_probs)
    except ValueError as exc:
        raise TreeFileError(f"invalid tree: {exc}") from exc

    sequence = None
    if doc.get("Y") is not None:
        try:
            sequence = AdaptedSequence(
                values=tuple(np.array(level, dtype=np.float64) for level in doc["Y"])
            )
        except (TypeError, ValueError) as exc:
            raise TreeFileError(f"invalid Y values: {exc}") from exc

    losses = None
    if doc.get("losses") is not None:
        block = doc["losses"]
        try:
            losses = LossSpec(
                space=DecisionSpace(labels=tuple(block["decisions"])),
                horizon=int(block["impact_horizon"]),
                tables=tuple(
                    tuple(np.array(tab, dtype=np.float64) for tab in per_decision)
                    for per_decision in block["tables"]
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeFileError(f"invalid losses block: {exc}") from exc
    return TreeBundle(tree=tree, sequence=sequence, losses=losses)


def save_tree(path: str | Path, bundle: TreeBundle) -> None:
    Path(path).write_text(json.dumps(bundle_to_dict(bundle), indent=1) + "\n")


def load_tree(path: str | Path) -> TreeBundle:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise TreeFileError(f"cannot read tree file {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeFileError(f"tree file {p} is not valid JSON: {exc}") from exc
    return bundle_from_dict(doc)
