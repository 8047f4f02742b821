"""One-vs-rest random forests over the 30 track features.

Trees are stored flat (parallel arrays indexed by node id, children of a
leaf set to -1) so prediction is a single kernel call per tree and the
model serialises to a fixed binary layout.
"""

from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BadModelFile, DegenerateData, DimensionMismatch

ROLES = ("melody", "bass", "harmony")

MAGIC = b"MTFOREST"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TreeArrays:
    feature: np.ndarray  # int64, -1 at leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int64
    right: np.ndarray  # int64
    value: np.ndarray  # float64, positive-class probability

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        return kernels.predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)

    def __eq__(self, other):
        if not isinstance(other, TreeArrays):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("feature", "threshold", "left", "right", "value")
        )


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    seed: int = 42
    max_features: int | None = None  # defaults to round(sqrt(n_features))


@dataclass(eq=False)
class ForestModel:
    role: str
    trees: list[TreeArrays]
    n_features: int
    params: ForestParams = field(default_factory=ForestParams)
    oob_accuracy: float = float("nan")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def max_depth(self) -> int:
        return self.params.max_depth

    @property
    def seed(self) -> int:
        return self.params.seed

    def __eq__(self, other):
        if not isinstance(other, ForestModel):
            return NotImplemented
        same_oob = (self.oob_accuracy == other.oob_accuracy) or (
            math.isnan(self.oob_accuracy) and math.isnan(other.oob_accuracy)
        )
        return (
            self.role == other.role
            and self.n_features == other.n_features
            and self.params == other.params
            and same_oob
            and self.trees == other.trees
        )

    def tree_outputs(self, X) -> np.ndarray:
        """Per-tree probabilities, shape ``(n_trees, n_rows)``."""
        X = _as_matrix(X, self.n_features)
        return np.array([t.predict(X) for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        outputs = self.tree_outputs(X)
        return outputs.sum(axis=0) / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X) > 0.5


def _as_matrix(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DimensionMismatch(f"expected {n_features} features, got shape {X.shape}")
    return np.ascontiguousarray(X)


def predict(model: ForestModel, features) -> float:
    """Probability that one feature vector belongs to the model's role."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 1:
        raise DimensionMismatch("predict takes a single feature vector")
    return float(model.predict_proba(features)[0])


def _grow_tree(X, y, rows, rng, max_depth, min_leaf, max_features) -> TreeArrays:
    n_features = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(node_rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[node_rows].sum()) / node_rows.size)
        return len(feature) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        pos = int(y[node_rows].sum())
        if depth >= max_depth or pos == 0 or pos == node_rows.size or node_rows.size < 2 * min_leaf:
            continue
        candidates = np.sort(rng.choice(n_features, size=max_features, replace=False)).astype(np.int64)
        f, thr, _ = kernels.best_split(X, y, node_rows, candidates, min_leaf)
        if f < 0:
            continue
        go_left = X[node_rows, f] <= thr
        left_rows, right_rows = node_rows[go_left], node_rows[~go_left]
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return TreeArrays(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


def train_forest(X, y, role: str, params: ForestParams = ForestParams(), n_jobs: int = 1) -> ForestModel:
    """Bootstrap-aggregated Gini trees for one binary role.

    Tree ``i`` draws its bootstrap sample and split candidates from the
    ``i``-th child of ``SeedSequence(seed)``, so the model does not depend
    on ``n_jobs``.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionMismatch("X must be (n_samples, n_features) matching y")
    if np.unique(y).size < 2:
        raise DegenerateData(f"role {role!r} needs both positive and negative examples")
    n, n_features = X.shape
    max_features = params.max_features or max(1, int(round(math.sqrt(n_features))))
    max_features = min(max_features, n_features)
    children = np.random.SeedSequence(params.seed).spawn(params.n_trees)

    def build(seq):
        rng = np.random.default_rng(seq)
        rows = np.sort(rng.integers(0, n, size=n))
        tree = _grow_tree(X, y, rows, rng, params.max_depth, params.min_leaf, max_features)
        return tree, rows

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            built = list(pool.map(build, children))
    else:
        built = [build(seq) for seq in children]

    # out-of-bag vote: each sample scored only by trees that never drew it
    votes = np.zeros(n)
    seen = np.zeros(n)
    for tree, rows in built:
        oob = np.ones(n, dtype=bool)
        oob[rows] = False
        if oob.any():
            votes[oob] += tree.predict(X[oob])
            seen[oob] += 1
    scored = seen > 0
    oob_acc = float(((votes[scored] / seen[scored] > 0.5) == (y[scored] == 1)).mean()) if scored.any() else float("nan")
    return ForestModel(role, [t for t, _ in built], n_features, params, oob_acc)


# ---------------------------------------------------------------- model files
#
# layout (little endian):
#   8s  magic "MTFOREST"
#   H   format version
#   H   role length, then role bytes (utf-8)
#   I   n_features, I n_trees, I max_depth, I min_leaf, Q seed, I max_features (0 = default)
#   d   out-of-bag accuracy (NaN when undefined)
#   per tree: I n_nodes, then feature[i8], threshold[f8], left[i8], right[i8], value[f8]


def save_model(model: ForestModel) -> bytes:
    buf = io.BytesIO()
    role = model.role.encode("utf-8")
    p = model.params
    buf.write(MAGIC)
    buf.write(struct.pack("<HH", FORMAT_VERSION, len(role)))
    buf.write(role)
    buf.write(struct.pack("<IIIIQI", model.n_features, model.n_trees, p.max_depth, p.min_leaf, p.seed, p.max_features or 0))
    buf.write(struct.pack("<d", model.oob_accuracy))
    for t in model.trees:
        buf.write(struct.pack("<I", t.n_nodes))
        buf.write(t.feature.astype("<i8").tobytes())
        buf.write(t.threshold.astype("<f8").tobytes())
        buf.write(t.left.astype("<i8").tobytes())
        buf.write(t.right.astype("<i8").tobytes())
        buf.write(t.value.astype("<f8").tobytes())
    return buf.getvalue()


def load_model(data: bytes) -> ForestModel:
    view = memoryview(data)
    try:
        if bytes(view[:8]) != MAGIC:
            raise BadModelFile("not a forest model file (bad magic)")
        version, role_len = struct.unpack_from("<HH", view, 8)
        if version != FORMAT_VERSION:
            raise BadModelFile(f"unsupported model format version {version}")
        pos = 12
        role = bytes(view[pos : pos + role_len]).decode("utf-8")
        pos += role_len
        n_features, n_trees, max_depth, min_leaf, seed, max_features = struct.unpack_from("<IIIIQI", view, pos)
        pos += struct.calcsize("<IIIIQI")
        (oob,) = struct.unpack_from("<d", view, pos)
        pos += 8
        trees = []
        for _ in range(n_trees):
            (n_nodes,) = struct.unpack_from("<I", view, pos)
            pos += 4
            arrays = []
            for dtype in ("<i8", "<f8", "<i8", "<i8", "<f8"):
                size = 8 * n_nodes
                if pos + size > len(view):
                    raise BadModelFile("model file truncated")
                arrays.append(np.frombuffer(view[pos : pos + size], dtype=dtype).copy())
                pos += size
            feat, thr, left, right, value = arrays
            # children always follow their parent, which also rules out cycles
            internal = feat >= 0
            ids = np.flatnonzero(internal)
            children_ok = (
                np.all((left[internal] > ids) & (left[internal] < n_nodes))
                and np.all((right[internal] > ids) & (right[internal] < n_nodes))
            )
            if n_nodes == 0 or np.any(feat >= n_features) or np.any((value < 0) | (value > 1)) or not children_ok:
                raise BadModelFile("model file holds out-of-range tree data")
            trees.append(
                TreeArrays(
                    feat.astype(np.int64), thr.astype(np.float64), left.astype(np.int64), right.astype(np.int64), value.astype(np.float64)
                )
            )
        if pos != len(view):
            raise BadModelFile("trailing bytes after model data")
    except UnicodeDecodeError:
        raise BadModelFile("model role name is not valid utf-8") from None
    except struct.error as exc:
        raise BadModelFile(f"model file truncated: {exc}") from None
    params = ForestParams(n_trees, max_depth, min_leaf, seed, max_features or None)
    return ForestModel(role, trees, n_features, params, oob)


def save_model_file(model: ForestModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


def load_model_file(path) -> ForestModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())

