"""JSON serialization of tree-ensemble models.

The document is schema-versioned; floats survive the round trip exactly
(shortest-repr encoding), so a deserialized model predicts bit-identically.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..errors import ParseError, VersionError
from .ensemble import GBDTParams, Tree, TreeEnsembleModel

SCHEMA_VERSION = 1


def _tree_to_nodes(tree: Tree) -> list[dict]:
    nodes = []
    for nid in range(len(tree.feature)):
        f = int(tree.feature[nid])
        if f < 0:
            nodes.append({"v": float(tree.value[nid])})
        elif tree.categories[nid] is not None:
            nodes.append({
                "f": f,
                "cats": [float(c) for c in tree.categories[nid]],
                "l": int(tree.left[nid]),
                "r": int(tree.right[nid]),
            })
        else:
            nodes.append({
                "f": f,
                "thr": float(tree.threshold[nid]),
                "l": int(tree.left[nid]),
                "r": int(tree.right[nid]),
            })
    return nodes


def _tree_from_nodes(nodes: list[dict]) -> Tree:
    m = len(nodes)
    feature = np.full(m, -1, dtype=np.int32)
    threshold = np.full(m, np.nan)
    left = np.full(m, -1, dtype=np.int32)
    right = np.full(m, -1, dtype=np.int32)
    value = np.zeros(m)
    categories: list = [None] * m
    for nid, node in enumerate(nodes):
        if "v" in node:
            value[nid] = float(node["v"])
        else:
            feature[nid] = int(node["f"])
            left[nid] = int(node["l"])
            right[nid] = int(node["r"])
            if "cats" in node:
                categories[nid] = np.array([float(c) for c in node["cats"]])
            else:
                threshold[nid] = float(node["thr"])
    return Tree(feature, threshold, tuple(categories), left, right, value)


def serialize_model(model: TreeEnsembleModel) -> str:
    doc = {
        "version": SCHEMA_VERSION,
        "mode": model.mode,
        "params": model.params.to_dict(),
        "base_score": float(model.base_score),
        "features": list(model.feature_names),
        "categorical": [bool(c) for c in model.categorical],
        "train_loss": [float(v) for v in model.train_loss],
        "trees": [{"nodes": _tree_to_nodes(t)} for t in model.trees],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def deserialize_model(text: str) -> TreeEnsembleModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise ParseError("model document lacks a version field")
    if doc["version"] != SCHEMA_VERSION:
        raise VersionError(
            f"document version {doc['version']} is not supported (reader version {SCHEMA_VERSION})"
        )
    try:
        params = GBDTParams(**doc["params"])
        trees = tuple(_tree_from_nodes(t["nodes"]) for t in doc["trees"])
        return TreeEnsembleModel(
            mode=doc["mode"],
            params=params,
            base_score=float(doc["base_score"]),
            trees=trees,
            feature_names=tuple(doc["features"]),
            categorical=tuple(bool(c) for c in doc["categorical"]),
            train_loss=tuple(float(v) for v in doc.get("train_loss", [])),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"model document is malformed: {exc!r}") from None


def model_fingerprint(model: TreeEnsembleModel) -> str:
    """Stable hex digest identifying a fitted model's exact structure."""
    return hashlib.sha256(serialize_model(model).encode()).hexdigest()
