"""Binary link classifiers: multi-tower feed-forward networks and the
logistic baseline.

An architecture is an expression tree over named inputs: `fcN(x)` stacks N
dense layers on x, `had(...)` multiplies equal-width branches elementwise,
`cat(...)` concatenates. The tree's output feeds a dense head ending in one
sigmoid unit. Forward, backprop and Adam are written out by hand so the
gradients can be checked against finite differences.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


# -- architecture expressions ----------------------------------------------------------

@dataclass(frozen=True)
class InputRef:
    name: str


@dataclass(frozen=True)
class StackNode:
    child: "ArchNode"
    widths: tuple[int, ...]


@dataclass(frozen=True)
class CombineNode:
    op: str  # "hadamard" or "concat"
    children: tuple["ArchNode", ...]


ArchNode = InputRef | StackNode | CombineNode

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*|\(|\)|,)")


def parse_arch(text: str, tower_width: int = 64) -> ArchNode:
    """Parse an architecture expression.

    Grammar: expr := NAME | fcN(expr) | had(expr, expr, ...) | cat(expr, ...).
    Each fcN stacks N dense layers of tower_width units.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"bad architecture syntax at: {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    cursor = 0

    def peek():
        return tokens[cursor] if cursor < len(tokens) else None

    def take(expected=None):
        nonlocal cursor
        if cursor >= len(tokens):
            raise ValueError("architecture expression ended unexpectedly")
        tok = tokens[cursor]
        if expected is not None and tok != expected:
            raise ValueError(f"expected {expected!r}, found {tok!r}")
        cursor += 1
        return tok

    def expr() -> ArchNode:
        name = take()
        if name in ("(", ")", ","):
            raise ValueError(f"expected a name, found {name!r}")
        fc = re.fullmatch(r"fc(\d+)", name)
        if fc is not None and peek() == "(":
            take("(")
            child = expr()
            take(")")
            depth = int(fc.group(1))
            if depth < 1:
                raise ValueError("fc0 is not a layer stack")
            return StackNode(child, (tower_width,) * depth)
        if name in ("had", "cat") and peek() == "(":
            take("(")
            children = [expr()]
            while peek() == ",":
                take(",")
                children.append(expr())
            take(")")
            if len(children) < 2:
                raise ValueError(f"{name}() needs at least two operands")
            op = "hadamard" if name == "had" else "concat"
            return CombineNode(op, tuple(children))
        return InputRef(name)

    root = expr()
    if cursor != len(tokens):
        raise ValueError(f"trailing tokens in architecture: {tokens[cursor:]}")
    return root


def arch_to_text(node: ArchNode) -> str:
    if isinstance(node, InputRef):
        return node.name
    if isinstance(node, StackNode):
        return f"fc{len(node.widths)}({arch_to_text(node.child)})"
    inner = ",".join(arch_to_text(c) for c in node.children)
    return ("had" if node.op == "hadamard" else "cat") + f"({inner})"


@dataclass
class TowerSpec:
    """Named inputs, the tower/combiner tree, and the dense head."""

    inputs: dict[str, int]
    root: ArchNode
    head_widths: tuple[int, ...] = (64, 16)
    activation: str = "relu"
    layers: list[tuple[str, int, int]] = field(init=False)  # (name, fan_in, fan_out)

    def __post_init__(self):
        if self.activation not in ("relu", "elu"):
            raise ValueError("activation must be relu or elu")
        if not self.inputs:
            raise ValueError("at least one named input is required")
        for name, dim in self.inputs.items():
            if dim < 0:
                raise ValueError(f"input {name} has negative width")
        self.head_widths = tuple(int(w) for w in self.head_widths)
        if any(w < 1 for w in self.head_widths):
            raise ValueError("head widths must be positive")
        layers: list[tuple[str, int, int]] = []
        counter = 0
        used: set[str] = set()

        def dim_of(node: ArchNode) -> int:
            nonlocal counter
            if isinstance(node, InputRef):
                if node.name not in self.inputs:
                    raise ValueError(f"unknown input {node.name!r}")
                used.add(node.name)
                return self.inputs[node.name]
            if isinstance(node, StackNode):
                d = dim_of(node.child)
                for w in node.widths:
                    if w < 1:
                        raise ValueError("tower width must be positive")
                    layers.append((f"t{counter}", d, w))
                    counter += 1
                    d = w
                return d
            dims = [dim_of(c) for c in node.children]
            if node.op == "hadamard":
                if len(set(dims)) != 1:
                    raise ValueError(
                        f"hadamard operands differ in width: {dims}")
                return dims[0]
            return sum(dims)

        out_dim = dim_of(self.root)
        unused = set(self.inputs) - used
        if unused:
            raise ValueError(f"inputs never referenced: {sorted(unused)}")
        if out_dim < 1:
            raise ValueError("tree output has zero width")
        d = out_dim
        for i, w in enumerate(self.head_widths):
            layers.append((f"h{i}", d, w))
            d = w
        layers.append(("out", d, 1))
        self.layers = layers

    @property
    def total_input_dim(self) -> int:
        return sum(self.inputs.values())


def assign_widths(root: ArchNode, layer_dims: list[tuple[int, int]]) -> ArchNode:
    """Rebuild stack widths from a saved layer table (DFS order)."""
    it = iter(layer_dims)

    def walk(node: ArchNode) -> ArchNode:
        if isinstance(node, InputRef):
            return node
        if isinstance(node, StackNode):
            child = walk(node.child)
            widths = tuple(next(it)[1] for _ in node.widths)
            return StackNode(child, widths)
        return CombineNode(node.op, tuple(walk(c) for c in node.children))

    return walk(root)


# -- parameters -------------------------------------------------------------------------

@dataclass
class ModelParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    names: list[str]

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights],
                           [b.copy() for b in self.biases],
                           list(self.names))

    def check_finite(self):
        for w, b in zip(self.weights, self.biases):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite model parameters")


def init_params(spec: TowerSpec, seed: int) -> ModelParams:
    """He-scaled normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases, names = [], [], []
    for name, fan_in, fan_out in spec.layers:
        std = math.sqrt(2.0 / max(fan_in, 1))
        weights.append(rng.normal(0.0, std, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
        names.append(name)
    return ModelParams(weights, biases, names)


# -- forward / backward ------------------------------------------------------------------

def _act(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    return np.where(pre > 0, pre, np.expm1(np.minimum(pre, 0.0)))


def _act_grad(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (pre > 0).astype(pre.dtype)
    return np.where(pre > 0, 1.0, np.exp(np.minimum(pre, 0.0)))


def split_inputs(spec: TowerSpec, X: np.ndarray) -> dict[str, np.ndarray]:
    """Slice a stacked feature matrix into the named inputs, declaration order."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.total_input_dim:
        raise ValueError(f"feature matrix has {X.shape[1]} columns, "
                         f"spec wants {spec.total_input_dim}")
    named = {}
    start = 0
    for name, dim in spec.inputs.items():
        named[name] = X[:, start:start + dim]
        start += dim
    return named


def _forward_tree(params, spec, named, node, cursor, cache):
    if isinstance(node, InputRef):
        return named[node.name], ("input",)
    if isinstance(node, StackNode):
        z, child_cache = _forward_tree(params, spec, named, node.child,
                                       cursor, cache)
        steps = []
        for _ in node.widths:
            idx = cursor[0]
            cursor[0] += 1
            pre = z @ params.weights[idx] + params.biases[idx]
            steps.append((idx, z, pre))
            z = _act(pre, spec.activation)
        return z, ("stack", child_cache, steps)
    outs, caches = [], []
    for child in node.children:
        out, c = _forward_tree(params, spec, named, child, cursor, cache)
        outs.append(out)
        caches.append(c)
    if node.op == "hadamard":
        val = outs[0].copy()
        for o in outs[1:]:
            val = val * o
    else:
        val = np.concatenate(outs, axis=1)
    return val, ("combine", node.op, caches, outs)


def _forward_logits(params: ModelParams, spec: TowerSpec,
                    named: dict[str, np.ndarray]):
    """Returns (logits, cache) for a batch of named inputs."""
    cursor = [0]
    z, tree_cache = _forward_tree(params, spec, named, spec.root, cursor, None)
    head_steps = []
    for i in range(len(spec.head_widths)):
        idx = cursor[0]
        cursor[0] += 1
        pre = z @ params.weights[idx] + params.biases[idx]
        head_steps.append((idx, z, pre))
        z = _act(pre, spec.activation)
    idx = cursor[0]
    logits = z @ params.weights[idx] + params.biases[idx]
    head_steps.append((idx, z, logits))
    return logits[:, 0], (tree_cache, head_steps)


def _backward_tree(params, spec, node, cache, grad, gw, gb):
    kind = cache[0]
    if kind == "input":
        return
    if kind == "stack":
        _, child_cache, steps = cache
        for idx, z_in, pre in reversed(steps):
            grad = grad * _act_grad(pre, spec.activation)
            gw[idx] += z_in.T @ grad
            gb[idx] += grad.sum(axis=0)
            grad = grad @ params.weights[idx].T
        _backward_tree(params, spec, node.child, child_cache, grad, gw, gb)
        return
    _, op, caches, outs = cache
    if op == "hadamard":
        for i, child in enumerate(node.children):
            g = grad.copy()
            for j, o in enumerate(outs):
                if j != i:
                    g = g * o
            _backward_tree(params, spec, child, caches[i], g, gw, gb)
    else:
        start = 0
        for child, c, o in zip(node.children, caches, outs):
            width = o.shape[1]
            _backward_tree(params, spec, child, c,
                           grad[:, start:start + width], gw, gb)
            start += width


def forward(params: ModelParams, spec: TowerSpec,
            inputs: dict[str, np.ndarray]) -> np.ndarray | float:
    """Predicted probability of the positive class.

    Accepts single vectors or batches per named input; a single example
    returns a plain float.
    """
    named = {}
    single = False
    for name, dim in spec.inputs.items():
        if name not in inputs:
            raise ValueError(f"missing named input {name!r}")
        x = np.asarray(inputs[name], dtype=np.float64)
        if x.ndim == 1:
            single = True
            x = x[None, :]
        if x.shape[1] != dim:
            raise ValueError(f"input {name!r} has width {x.shape[1]}, "
                             f"spec wants {dim}")
        named[name] = x
    logits, _ = _forward_logits(params, spec, named)
    probs = 1.0 / (1.0 + np.exp(-logits))
    return float(probs[0]) if single and len(probs) == 1 else probs


def loss_and_grads(params: ModelParams, spec: TowerSpec, X: np.ndarray,
                   y: np.ndarray):
    """Mean binary cross-entropy and its gradients w.r.t. every layer."""
    named = split_inputs(spec, X)
    y = np.asarray(y, dtype=np.float64)
    logits, (tree_cache, head_steps) = _forward_logits(params, spec, named)
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))

    gw = [np.zeros_like(w) for w in params.weights]
    gb = [np.zeros_like(b) for b in params.biases]
    grad = ((1.0 / (1.0 + np.exp(-logits)) - y) / n)[:, None]

    idx, z_in, _ = head_steps[-1]
    gw[idx] += z_in.T @ grad
    gb[idx] += grad.sum(axis=0)
    grad = grad @ params.weights[idx].T
    for idx, z_in, pre in reversed(head_steps[:-1]):
        grad = grad * _act_grad(pre, spec.activation)
        gw[idx] += z_in.T @ grad
        gb[idx] += grad.sum(axis=0)
        grad = grad @ params.weights[idx].T
    _backward_tree(params, spec, spec.root, tree_cache, grad, gw, gb)
    return loss, gw, gb


# -- training ----------------------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 30
    patience: int = 5  # early-stop patience on validation F1
    val_fraction: float = 0.1  # 0 disables the validation split
    seed: int = 0

    def __post_init__(self):
        if (self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1
                or self.patience < 1):
            raise ValueError("training hyperparameters must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_f1: float | None


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int


def _metrics_from_predictions(pred: np.ndarray, y: np.ndarray) -> Metrics:
    y = y.astype(bool)
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    accuracy = (tp + tn) / len(y)
    return Metrics(precision, recall, f1, accuracy, tp, fp, tn, fn)


def evaluate(params: ModelParams, spec: TowerSpec, X: np.ndarray,
             y: np.ndarray) -> Metrics:
    """Threshold the predicted probability at 0.5 (inclusive) and count."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    named = split_inputs(spec, X)
    logits, _ = _forward_logits(params, spec, named)
    return _metrics_from_predictions(logits >= 0.0, y)


def train(spec: TowerSpec, X: np.ndarray, y: np.ndarray,
          cfg: TrainConfig | None = None
          ) -> tuple[ModelParams, list[EpochStats]]:
    """Mini-batch Adam on binary cross-entropy.

    A val_fraction slice of the data is held out; training stops once
    validation F1 has not improved for `patience` epochs and the best
    parameters seen are returned. Deterministic for a fixed seed.
    """
    cfg = cfg or TrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(X) != len(y):
        raise ValueError("feature and label counts differ")
    if len(y) == 0:
        raise ValueError("cannot train on an empty dataset")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(y))
    n_val = int(round(cfg.val_fraction * len(y)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise ValueError("validation split consumed every sample")
    X_tr, y_tr = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    params = init_params(spec, cfg.seed)
    m_w = [np.zeros_like(w) for w in params.weights]
    v_w = [np.zeros_like(w) for w in params.weights]
    m_b = [np.zeros_like(b) for b in params.biases]
    v_b = [np.zeros_like(b) for b in params.biases]
    t = 0

    history: list[EpochStats] = []
    best_f1 = -1.0
    best_params = params.copy()
    stale = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(y_tr))
        total_loss = 0.0
        for start in range(0, len(perm), cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_grads(params, spec, X_tr[batch], y_tr[batch])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}; "
                    "reduce the learning rate")
            total_loss += loss * len(batch)
            t += 1
            corr1 = 1.0 - ADAM_BETA1 ** t
            corr2 = 1.0 - ADAM_BETA2 ** t
            for i in range(len(params.weights)):
                m_w[i] = ADAM_BETA1 * m_w[i] + (1 - ADAM_BETA1) * gw[i]
                v_w[i] = ADAM_BETA2 * v_w[i] + (1 - ADAM_BETA2) * gw[i] ** 2
                params.weights[i] -= (cfg.learning_rate * (m_w[i] / corr1)
                                      / (np.sqrt(v_w[i] / corr2) + ADAM_EPS))
                m_b[i] = ADAM_BETA1 * m_b[i] + (1 - ADAM_BETA1) * gb[i]
                v_b[i] = ADAM_BETA2 * v_b[i] + (1 - ADAM_BETA2) * gb[i] ** 2
                params.biases[i] -= (cfg.learning_rate * (m_b[i] / corr1)
                                     / (np.sqrt(v_b[i] / corr2) + ADAM_EPS))
        train_loss = total_loss / len(y_tr)

        val_f1 = None
        if n_val > 0:
            val_f1 = evaluate(params, spec, X_val, y_val).f1
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_params = params.copy()
                stale = 0
            else:
                stale += 1
        history.append(EpochStats(epoch, train_loss, val_f1))
        if n_val > 0 and stale >= cfg.patience:
            break
    final = best_params if n_val > 0 else params
    final.check_finite()
    return final, history


def logistic_spec(dim: int) -> TowerSpec:
    """Degenerate tower: the input feeds the sigmoid unit directly."""
    return TowerSpec(inputs={"X": dim}, root=InputRef("X"), head_widths=())


def train_logistic(X: np.ndarray, y: np.ndarray,
                   cfg: TrainConfig | None = None) -> ModelParams:
    """Logistic-regression baseline; same trainer on the degenerate spec."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    params, _ = train(logistic_spec(X.shape[1]), X, y, cfg)
    return params


# -- standardization -----------------------------------------------------------------

@dataclass
class Standardizer:
    """Column-wise mean/variance scaling fit on the training split only."""

    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def fit(self, X: np.ndarray) -> "Standardizer":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.mean is None:
            raise ValueError("standardizer not fitted")
        return (np.atleast_2d(np.asarray(X, dtype=np.float64)) - self.mean) / self.std

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)


# -- persistence -----------------------------------------------------------------------

def save_model(path, spec: TowerSpec, params: ModelParams,
               scaler: Standardizer | None = None,
               extra: dict | None = None) -> None:
    """Text artifact: architecture block, then per-layer dims and values.

    `extra` adds provenance lines (`key value`) to the metadata block; the
    loader keeps unknown keys without interpreting them.
    """
    reserved = {"arch", "inputs", "activation", "head_widths",
                "scaler_mean", "scaler_std", "layers", "layer"}
    if extra and reserved & set(extra):
        raise ValueError("extra metadata key collides with a structural key")
    with open(path, "w") as fh:
        fh.write(f"arch {arch_to_text(spec.root)}\n")
        fh.write("inputs " + " ".join(f"{k}:{v}" for k, v in spec.inputs.items())
                 + "\n")
        fh.write(f"activation {spec.activation}\n")
        fh.write("head_widths" +
                 "".join(f" {w}" for w in spec.head_widths) + "\n")
        if scaler is not None and scaler.mean is not None:
            fh.write("scaler_mean " +
                     " ".join(f"{x:.17g}" for x in scaler.mean) + "\n")
            fh.write("scaler_std " +
                     " ".join(f"{x:.17g}" for x in scaler.std) + "\n")
        for key in sorted(extra or {}):
            fh.write(f"{key} {extra[key]}\n")
        fh.write(f"layers {len(params.weights)}\n")
        for name, w, b in zip(params.names, params.weights, params.biases):
            fh.write(f"layer {name} {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
            fh.write(" ".join(f"{x:.17g}" for x in b) + "\n")


def load_model(path) -> tuple[TowerSpec, ModelParams, Standardizer | None]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    meta = {}
    i = 0
    while i < len(lines) and not lines[i].startswith("layers "):
        key, _, value = lines[i].partition(" ")
        meta[key] = value
        i += 1
    if i == len(lines):
        raise ValueError("model file has no layer table")
    n_layers = int(lines[i].split()[1])
    i += 1

    names, weights, biases, dims = [], [], [], []
    for _ in range(n_layers):
        parts = lines[i].split()
        if parts[0] != "layer":
            raise ValueError(f"expected a layer header, found {lines[i]!r}")
        name, fan_in, fan_out = parts[1], int(parts[2]), int(parts[3])
        i += 1
        w = np.array([[float(x) for x in lines[i + r].split()]
                      for r in range(fan_in)])
        w = w.reshape(fan_in, fan_out)
        i += fan_in
        b = np.array([float(x) for x in lines[i].split()])
        i += 1
        names.append(name)
        weights.append(w)
        biases.append(b)
        dims.append((fan_in, fan_out))

    inputs = {}
    for item in meta["inputs"].split():
        k, _, v = item.partition(":")
        inputs[k] = int(v)
    root = assign_widths(parse_arch(meta["arch"]), dims)
    head = tuple(int(x) for x in meta.get("head_widths", "").split())
    spec = TowerSpec(inputs=inputs, root=root, head_widths=head,
                     activation=meta.get("activation", "relu"))
    params = ModelParams(weights, biases, names)
    expected = [(fi, fo) for _, fi, fo in spec.layers]
    if expected != dims:
        raise ValueError("layer table does not match the architecture")

    scaler = None
    if "scaler_mean" in meta:
        scaler = Standardizer(
            mean=np.array([float(x) for x in meta["scaler_mean"].split()]),
            std=np.array([float(x) for x in meta["scaler_std"].split()]))
    return spec, params, scaler


def metrics_to_text(metrics: Metrics, extra: dict | None = None) -> str:
    """Flat key=value lines in fixed order; extras appended sorted."""
    lines = [f"precision={metrics.precision:.17g}",
             f"recall={metrics.recall:.17g}",
             f"f1={metrics.f1:.17g}",
             f"accuracy={metrics.accuracy:.17g}",
             f"tp={metrics.tp}", f"fp={metrics.fp}",
             f"tn={metrics.tn}", f"fn={metrics.fn}"]
    for key in sorted(extra or {}):
        lines.append(f"{key}={extra[key]}")
    return "\n".join(lines) + "\n"


def save_metrics(path, metrics: Metrics, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(metrics_to_text(metrics, extra))


def load_metrics(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key] = value
    return out
