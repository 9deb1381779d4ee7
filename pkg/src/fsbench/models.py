"""The three benchmark classifiers: KNN, random forest and a linear SVM.

All models are written against plain numpy so that every prediction is a
deterministic function of (data, hyperparameters, seed).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fsbench.data import Dataset
from fsbench.errors import InvalidConfig, SingleClassTrainingSet, WidthMismatch

log = logging.getLogger(__name__)

KNN = "knn"
RANDOM_FOREST = "rf"
LINEAR_SVM = "svm-linear"

MODEL_ALIASES = {
    "knn": KNN,
    "rf": RANDOM_FOREST,
    "randomforest": RANDOM_FOREST,
    "random_forest": RANDOM_FOREST,
    "svm": LINEAR_SVM,
    "svm-linear": LINEAR_SVM,
    "linearsvm": LINEAR_SVM,
}

MODEL_DESCRIPTIONS = {
    KNN: "k-nearest neighbours: k=5, Euclidean distance, score = malware fraction of the "
         "neighbours, equal distances resolved by lower training-row index.",
    RANDOM_FOREST: "Random forest: 100 Gini trees grown to purity on bootstrap samples, "
                   "ceil(sqrt(n_features)) candidate features per node, min 2 samples to split, "
                   "score = fraction of trees voting malware.",
    LINEAR_SVM: "Linear SVM (svm-linear): L2-regularised hinge loss, C=1.0, 50 epochs of seeded "
                "mini-batch subgradient descent, score = signed margin. This replaces the RBF "
                "kernel SVM of common library defaults for tractability and determinism.",
}

# name -> (type, default)
HYPERPARAMS: dict[str, dict[str, tuple[type, object]]] = {
    KNN: {"n_neighbors": (int, 5)},
    RANDOM_FOREST: {
        "n_trees": (int, 100),
        "max_features": (int, 0),  # 0 = ceil(sqrt(n_features))
        "max_depth": (int, 0),  # 0 = unlimited
        "min_samples_split": (int, 2),
        "bootstrap": (bool, True),
    },
    LINEAR_SVM: {"C": (float, 1.0), "epochs": (int, 50), "batch_size": (int, 16)},
}


def canonical_model(kind: str) -> str:
    try:
        return MODEL_ALIASES[kind.lower()]
    except KeyError:
        raise InvalidConfig(f"unknown model kind {kind!r} (known: {sorted(set(MODEL_ALIASES.values()))})") from None


def _parse_value(typ: type, raw, key: str):
    if typ is bool:
        if isinstance(raw, bool):
            return raw
        s = str(raw).lower()
        if s in ("1", "true", "yes"):
            return True
        if s in ("0", "false", "no"):
            return False
        raise InvalidConfig(f"hyperparameter {key}: {raw!r} is not a boolean")
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise InvalidConfig(f"hyperparameter {key}: cannot parse {raw!r}") from None


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparams: dict[str, str] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        kind = canonical_model(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.hyperparams) - set(HYPERPARAMS[kind])
        if unknown:
            raise InvalidConfig(f"{kind}: unknown hyperparameters {sorted(unknown)}")
        self.resolved()  # validate values eagerly

    def resolved(self) -> dict:
        out = {k: default for k, (_, default) in HYPERPARAMS[self.kind].items()}
        for k, raw in self.hyperparams.items():
            out[k] = _parse_value(HYPERPARAMS[self.kind][k][0], raw, k)
        return out


class _Model:
    threshold = 0.5

    def _check(self, rows) -> np.ndarray:
        X = np.asarray(rows, dtype=float)
        if X.size == 0:
            return np.empty((0, self.n_features))
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise WidthMismatch(f"expected {self.n_features} columns, got {X.shape[1]}")
        return X

    def score(self, rows) -> np.ndarray:
        X = self._check(rows)
        if len(X) == 0:
            return np.empty(0)
        return self._score(X)

    def predict(self, rows) -> np.ndarray:
        return (self.score(rows) >= self.threshold).astype(np.int64)


def _check_training(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet("training data must contain both classes")
    return X, y


# ---------------------------------------------------------------------------
# KNN

class KNNClassifier(_Model):
    def __init__(self, n_neighbors: int = 5):
        if n_neighbors < 1:
            raise InvalidConfig("n_neighbors must be >= 1")
        self.n_neighbors = n_neighbors

    def fit(self, X, y) -> "KNNClassifier":
        X, y = _check_training(X, y)
        self.X_ = X
        self.y_ = y.astype(float)
        self.sqnorm_ = np.einsum("ij,ij->i", X, X)
        self.n_features = X.shape[1]
        self.integral_ = bool(np.all(X == np.round(X)))
        return self

    def neighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows; ties go to the lower index."""
        n_train = len(self.X_)
        k = min(self.n_neighbors, n_train)
        out = np.empty((len(X), k), dtype=np.int64)
        chunk = max(1, 2_000_000 // max(n_train, 1))
        idx = np.arange(n_train)
        tie = idx / n_train
        for start in range(0, len(X), chunk):
            q = X[start:start + chunk]
            d2 = np.einsum("ij,ij->i", q, q)[:, None] + self.sqnorm_[None, :] - 2.0 * q @ self.X_.T
            if self.integral_ and np.all(q == np.round(q)):
                # integer inputs give exact integer distances; adding idx / n_train
                # makes equal distances resolve by the lower training index
                key = d2 + tie
                part = np.argpartition(key, k - 1, axis=1)[:, :k] if k < n_train else np.tile(idx, (len(q), 1))
                order = np.take_along_axis(key, part, axis=1).argsort(axis=1)
                out[start:start + chunk] = np.take_along_axis(part, order, axis=1)
            else:
                d2 = np.maximum(d2, 0.0)
                out[start:start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return out

    def _score(self, X):
        return self.y_[self.neighbors(X)].mean(axis=1)


# ---------------------------------------------------------------------------
# decision tree / random forest

class DecisionTree(_Model):
    """CART classification tree with Gini impurity and per-node feature sampling."""

    def __init__(self, max_features: int | None = None, min_samples_split: int = 2,
                 max_depth: int | None = None, rng: np.random.Generator | None = None):
        self.max_features = max_features
        self.min_samples_split = max(2, min_samples_split)
        self.max_depth = max_depth
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def fit(self, X, y) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, p = X.shape
        self.n_features = p
        m = self.max_features or max(1, math.ceil(math.sqrt(p)))
        m = min(m, p)
        if np.all((X == 0) | (X == 1)):
            self._fit_levelwise(X, y, m)
        else:
            self._fit_nodewise(X, y, m)
        return self

    def _store(self, feature, threshold, left, right, vote):
        self.feature_ = np.asarray(feature, dtype=np.int64)
        self.threshold_ = np.asarray(threshold, dtype=float)
        self.left_ = np.asarray(left, dtype=np.int64)
        self.right_ = np.asarray(right, dtype=np.int64)
        self.vote_ = np.asarray(vote, dtype=np.int64)

    def _fit_levelwise(self, X, y, m):
        """Grow a tree on 0/1 features one depth level at a time.

        Every node at a level draws its own random feature order; its split is
        the best one among the first block of ``m`` features (in that order)
        that contains a non-constant feature.
        """
        n, p = X.shape
        cap = 2 * n + 1
        feature = np.full(cap, -1, dtype=np.int64)
        left = np.full(cap, -1, dtype=np.int64)
        right = np.full(cap, -1, dtype=np.int64)
        vote = np.zeros(cap, dtype=np.int64)
        n_nodes = 1
        level_nodes = np.array([0])
        rows = np.arange(n)
        slot = np.zeros(n, dtype=np.int64)  # position of each row's node in level_nodes
        depth = 0
        while len(rows):
            order = np.argsort(slot, kind="stable")
            rows, slot = rows[order], slot[order]
            K = len(level_nodes)
            n_node = np.bincount(slot, minlength=K)
            pos_node = np.bincount(slot, weights=y[rows], minlength=K)
            vote[level_nodes] = 2 * pos_node > n_node
            splittable = (n_node >= self.min_samples_split) & (pos_node > 0) & (pos_node < n_node)
            if self.max_depth and depth >= self.max_depth:
                break
            if not splittable.any():
                break
            starts = np.concatenate([[0], np.cumsum(n_node)[:-1]])
            Xs = X[rows]
            n_right = np.add.reduceat(Xs, starts, axis=0)
            p_right = np.add.reduceat(Xs * y[rows][:, None], starts, axis=0)
            n_left = n_node[:, None] - n_right
            p_left = pos_node[:, None] - p_right
            valid = (n_right > 0) & (n_left > 0) & splittable[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                imp = (2 * p_left * (n_left - p_left) / n_left
                       + 2 * p_right * (n_right - p_right) / n_right)
            perm = np.argsort(self.rng.random((K, p)), axis=1)
            block = np.empty_like(perm)
            np.put_along_axis(block, perm, np.arange(p)[None, :] // m, axis=1)
            first_block = np.where(valid, block, p).min(axis=1)
            cand = valid & (block == first_block[:, None])
            imp = np.where(cand, imp, np.inf)
            best_in_perm = np.argmin(np.take_along_axis(imp, perm, axis=1), axis=1)
            best_feat = perm[np.arange(K), best_in_perm]
            do_split = cand.any(axis=1)
            split_at = np.flatnonzero(do_split)
            parents = level_nodes[split_at]
            kids = n_nodes + 2 * np.arange(len(split_at))
            feature[parents] = best_feat[split_at]
            left[parents], right[parents] = kids, kids + 1
            n_nodes += 2 * len(split_at)
            # child slots in the next level: 2*rank among split nodes (+1 for right)
            rank = np.cumsum(do_split) - 1
            keep = do_split[slot]
            rows, slot = rows[keep], slot[keep]
            go_right = X[rows, best_feat[slot]].astype(np.int64)
            slot = 2 * rank[slot] + go_right
            level_nodes = np.stack([kids, kids + 1], axis=1).ravel()
            depth += 1
        threshold = np.where(feature[:n_nodes] >= 0, 0.5, 0.0)
        self._store(feature[:n_nodes], threshold, left[:n_nodes], right[:n_nodes], vote[:n_nodes])

    def _fit_nodewise(self, X, y, m):
        n, p = X.shape
        feature, threshold, left, right, vote = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            vote.append(0)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            yn = y[idx]
            n1 = int(yn.sum())
            nn = len(idx)
            vote[node] = 1 if 2 * n1 > nn else 0
            if (nn < self.min_samples_split or n1 == 0 or n1 == nn
                    or (self.max_depth and depth >= self.max_depth)):
                continue
            split = self._best_split(X, yn, idx, n1, p, m)
            if split is None:
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            li, ri = new_node(), new_node()
            feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
            stack.append((ri, idx[~go_left], depth + 1))
            stack.append((li, idx[go_left], depth + 1))
        self._store(feature, threshold, left, right, vote)

    def _best_split(self, X, yn, idx, n1, p, m):
        perm = self.rng.permutation(p)
        for start in range(0, p, m):
            feats = perm[start:start + m]
            cand = self._sorted_split(X[np.ix_(idx, feats)], yn, n1)
            if cand:
                _, j, thr = cand[0]
                return int(feats[j]), thr
        return None

    @staticmethod
    def _sorted_split(Xc, yn, n1):
        nn, mm = Xc.shape
        order = np.argsort(Xc, axis=0, kind="stable")
        xs = np.take_along_axis(Xc, order, axis=0)
        ys = yn[order]
        cum_pos = np.cumsum(ys, axis=0)[:-1]  # positives in left part of size i+1
        n_left = np.arange(1, nn)[:, None].astype(float)
        n_right = nn - n_left
        p_left = cum_pos
        p_right = n1 - cum_pos
        imp = (2 * p_left * (n_left - p_left) / n_left
               + 2 * p_right * (n_right - p_right) / n_right)
        valid = xs[1:] > xs[:-1]
        imp = np.where(valid, imp, np.inf)
        out = []
        for j in range(mm):
            if not valid[:, j].any():
                continue
            i = int(np.argmin(imp[:, j]))
            out.append((float(imp[i, j]), j, float((xs[i, j] + xs[i + 1, j]) / 2)))
        out.sort(key=lambda t: t[0])
        return out[:1]

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            internal = self.left_[node] >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.maximum(self.feature_[node], 0)] <= self.threshold_[node]
            nxt = np.where(go_left, self.left_[node], self.right_[node])
            node = np.where(internal, nxt, node)

    def _score(self, X):
        return self.vote_[self.apply(X)].astype(float)


class RandomForestClassifier(_Model):
    def __init__(self, n_trees: int = 100, max_features: int | None = None, max_depth: int | None = None,
                 min_samples_split: int = 2, bootstrap: bool = True, seed: int = 0):
        if n_trees < 1:
            raise InvalidConfig("n_trees must be >= 1")
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y) -> "RandomForestClassifier":
        X, y = _check_training(X, y)
        n = len(X)
        self.n_features = X.shape[1]
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            rows = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_features, self.min_samples_split, self.max_depth, rng)
            self.trees_.append(tree.fit(X[rows], y[rows]))
        return self

    def _score(self, X):
        votes = np.zeros(len(X))
        for t in self.trees_:
            votes += t._score(X)
        return votes / len(self.trees_)


# ---------------------------------------------------------------------------
# linear SVM

class LinearSVM(_Model):
    """Soft-margin linear SVM, objective 0.5*|w|^2 + C * sum(hinge).

    Trained with seeded mini-batch Pegasos steps on the equivalent scaled
    objective. The bias is folded in as a constant input column. After each
    epoch the iterate with the lowest full objective so far is kept, so the
    returned weights never get worse from one epoch to the next.
    """

    threshold = 0.0

    def __init__(self, C: float = 1.0, epochs: int = 50, batch_size: int = 16, seed: int = 0):
        if C <= 0:
            raise InvalidConfig("C must be > 0")
        self.C = C
        self.epochs = epochs
        self.batch_size = max(1, batch_size)
        self.seed = seed

    def objective(self, w: np.ndarray, Xa: np.ndarray, s: np.ndarray) -> float:
        margins = 1.0 - s * (Xa @ w)
        return 0.5 * float(w @ w) + self.C * float(np.maximum(margins, 0.0).sum())

    def fit(self, X, y) -> "LinearSVM":
        X, y = _check_training(X, y)
        n, p = X.shape
        self.n_features = p
        Xa = np.hstack([X, np.ones((n, 1))])
        s = np.where(y == 1, 1.0, -1.0)
        lam = 1.0 / (self.C * n)
        radius = 1.0 / math.sqrt(lam)
        rng = np.random.default_rng(self.seed)
        w = np.zeros(p + 1)
        best_w, best_obj = w.copy(), self.objective(w, Xa, s)
        self.objective_history_ = [best_obj]
        t = 0
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                b = order[start:start + self.batch_size]
                t += 1
                eta = 1.0 / (lam * t)
                viol = s[b] * (Xa[b] @ w) < 1.0
                w *= 1.0 - eta * lam
                if viol.any():
                    w += (eta / len(b)) * (s[b][viol] @ Xa[b][viol])
                norm = math.sqrt(float(w @ w))
                if norm > radius:
                    w *= radius / norm
            obj = self.objective(w, Xa, s)
            if obj < best_obj:
                best_w, best_obj = w.copy(), obj
            self.objective_history_.append(best_obj)
        self.coef_ = best_w[:-1].copy()
        self.intercept_ = float(best_w[-1])
        return self

    def _score(self, X):
        return X @ self.coef_ + self.intercept_


# ---------------------------------------------------------------------------

def build(spec: ModelSpec) -> _Model:
    hp = spec.resolved()
    if spec.kind == KNN:
        return KNNClassifier(hp["n_neighbors"])
    if spec.kind == RANDOM_FOREST:
        return RandomForestClassifier(
            n_trees=hp["n_trees"],
            max_features=hp["max_features"] or None,
            max_depth=hp["max_depth"] or None,
            min_samples_split=hp["min_samples_split"],
            bootstrap=hp["bootstrap"],
            seed=spec.seed,
        )
    return LinearSVM(C=hp["C"], epochs=hp["epochs"], batch_size=hp["batch_size"], seed=spec.seed)


def fit_arrays(spec: ModelSpec, X, y) -> _Model:
    model = build(spec)
    X = np.asarray(X, dtype=float)
    if spec.kind in (KNN, LINEAR_SVM) and not np.all((X == 0) | (X == 1)):
        log.info("%s: non-binary feature values detected; no scaling applied", spec.kind)
    return model.fit(X, y)


def fit(spec: ModelSpec, d: Dataset) -> _Model:
    return fit_arrays(spec, d.features, d.labels)


def predict(m: _Model, rows) -> np.ndarray:
    return m.predict(rows)


def score(m: _Model, rows) -> np.ndarray:
    return m.score(rows)
