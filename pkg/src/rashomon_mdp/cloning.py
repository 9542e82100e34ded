"""Behavioral cloning of table policies into small neural networks.

The expert dataset pairs every state of a model with the expert's
action.  Clones are two-hidden-layer ReLU networks trained by plain
minibatch SGD on softmax cross-entropy, with all randomness (weight
init, epoch shuffling) drawn from the package's own seeded generator,
so a (seed, dataset, config) triple always yields bit-identical
weights.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Iterator, TextIO, Union

import numpy as np

from rashomon_mdp.checker import TablePolicy
from rashomon_mdp.mdp import ExplicitMdp, FeatureSchema, ModelFormatError, StateVector
from rashomon_mdp.rng import Xoshiro256StarStar

# substreams of one experiment seed
_STREAM_INIT = 0
_STREAM_SHUFFLE = 1


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters; the defaults match the reference experiment."""

    seed: int = 0
    epochs: int = 3000
    learning_rate: float = 0.05
    batch_size: int = 32
    hidden: tuple[int, int] = (64, 64)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if len(self.hidden) != 2 or any(h < 1 for h in self.hidden):
            raise ValueError("hidden must be two positive layer widths")


@dataclass(eq=False)
class ExpertDataset:
    """State/action supervision: `features[i]` is labeled `labels[i]`."""

    schema: FeatureSchema
    features: np.ndarray
    labels: np.ndarray
    num_actions: int

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[1] != self.schema.dim:
            raise ValueError(f"features must be (n, {self.schema.dim})")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with features")
        if self.num_actions < 1:
            raise ValueError("need at least one action")
        if self.labels.size and not (
            0 <= self.labels.min() and self.labels.max() < self.num_actions
        ):
            raise ValueError("label outside the action range")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def pairs(self) -> Iterator[tuple[StateVector, int]]:
        for row, label in zip(self.features, self.labels):
            yield tuple(int(v) for v in row), int(label)


def extract_expert_dataset(m: ExplicitMdp, policy: TablePolicy) -> ExpertDataset:
    """Label every state of `m` with the policy's action, in state order."""
    if len(policy) != m.n_states:
        raise ValueError(
            f"policy covers {len(policy)} states, model has {m.n_states}"
        )
    features = np.asarray(m.states, dtype=np.int64)
    labels = np.asarray(policy.actions, dtype=np.int64)
    if labels.size and not (0 <= labels.min() and labels.max() < len(m.actions)):
        raise ValueError("policy action outside the model's action range")
    return ExpertDataset(
        schema=m.schema,
        features=features,
        labels=labels,
        num_actions=len(m.actions),
    )


@dataclass(eq=False)
class MlpPolicy:
    """ReLU network policy [d -> h1 -> h2 -> actions] over normalized features.

    Weight matrices are (fan_out, fan_in); inputs divide by per-feature
    `divisors` before the first layer.  Action choice is the argmax of
    the output logits, ties to the lowest action index.
    """

    seed: int
    schema: FeatureSchema
    num_actions: int
    weights: tuple[np.ndarray, np.ndarray, np.ndarray]
    biases: tuple[np.ndarray, np.ndarray, np.ndarray]
    divisors: np.ndarray = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if self.divisors is None:
            self.divisors = np.asarray(self.schema.normal_divisors(), dtype=np.float64)
        w1, w2, w3 = self.weights
        b1, b2, b3 = self.biases
        d = self.schema.dim
        if w1.shape[1] != d or w2.shape[1] != w1.shape[0] or w3.shape[1] != w2.shape[0]:
            raise ValueError("weight shapes do not chain")
        if w3.shape[0] != self.num_actions:
            raise ValueError("output layer does not match the action count")
        for w, b in zip((w1, w2, w3), (b1, b2, b3)):
            if b.shape != (w.shape[0],):
                raise ValueError("bias shape does not match its layer")

    @property
    def layer_sizes(self) -> tuple[int, int, int, int]:
        return (
            self.schema.dim,
            self.weights[0].shape[0],
            self.weights[1].shape[0],
            self.num_actions,
        )

    def normalize(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) / self.divisors

    def logits(self, normalized: np.ndarray) -> np.ndarray:
        w1, w2, w3 = self.weights
        b1, b2, b3 = self.biases
        h1 = np.maximum(normalized @ w1.T + b1, 0.0)
        h2 = np.maximum(h1 @ w2.T + b2, 0.0)
        return h2 @ w3.T + b3

    def select_action(self, state: StateVector) -> int:
        """Greedy action for one state; ties go to the lowest index."""
        if len(state) != self.schema.dim:
            raise ValueError(
                f"state has {len(state)} features, policy expects {self.schema.dim}"
            )
        row = self.normalize(np.asarray(state, dtype=np.float64))
        return int(np.argmax(self.logits(row[None, :])[0]))

    def select_actions(self, features: np.ndarray) -> np.ndarray:
        """Greedy actions for an (n, d) feature matrix."""
        return np.argmax(self.logits(self.normalize(features)), axis=1)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for arr in (*self.weights, *self.biases, self.divisors):
            digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return digest.hexdigest()


def select_action(policy: MlpPolicy, state: StateVector) -> int:
    return policy.select_action(state)


def init_policy(
    schema: FeatureSchema, num_actions: int, cfg: TrainConfig
) -> MlpPolicy:
    """Fresh network with uniform +-sqrt(6 / (fan_in + fan_out)) weights.

    Draw order is fixed (layer by layer, row-major); biases start at
    zero.  All draws come from the init substream of `cfg.seed`.
    """
    if num_actions < 1:
        raise ValueError("need at least one action")
    gen = Xoshiro256StarStar(cfg.seed, stream=_STREAM_INIT)
    sizes = (schema.dim, cfg.hidden[0], cfg.hidden[1], num_actions)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
        flat = gen.uniform(-limit, limit, fan_out * fan_in)
        weights.append(flat.reshape(fan_out, fan_in))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpPolicy(
        seed=cfg.seed,
        schema=schema,
        num_actions=num_actions,
        weights=tuple(weights),
        biases=tuple(biases),
    )


@dataclass(frozen=True)
class TrainReport:
    """Outcome of one training run."""

    epochs_run: int
    final_loss: float
    final_accuracy: float
    early_stopped: bool


def dataset_accuracy(policy: MlpPolicy, data: ExpertDataset) -> float:
    """Fraction of dataset states where the policy picks the expert action."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    predictions = policy.select_actions(data.features)
    return float(np.mean(predictions == data.labels))


def _dataset_loss(policy: MlpPolicy, xn: np.ndarray, labels: np.ndarray) -> float:
    logits = policy.logits(xn)
    shifted = logits - logits.max(axis=1, keepdims=True)
    total = np.exp(shifted).sum(axis=1)
    rows = np.arange(xn.shape[0])
    return float(np.mean(np.log(total) - shifted[rows, labels]))


def _batch_grads(policy, xn, labels):
    """Cross-entropy loss and parameter gradients for one minibatch."""
    w1, w2, w3 = policy.weights
    b1, b2, b3 = policy.biases
    z1 = xn @ w1.T + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2.T + b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ w3.T + b3

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    n = xn.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(np.log(total[rows, 0]) - shifted[rows, labels]))

    g3 = exp / total
    g3[rows, labels] -= 1.0
    g3 /= n
    dw3 = g3.T @ a2
    db3 = g3.sum(axis=0)
    g2 = (g3 @ w3) * (z2 > 0.0)
    dw2 = g2.T @ a1
    db2 = g2.sum(axis=0)
    g1 = (g2 @ w2) * (z1 > 0.0)
    dw1 = g1.T @ xn
    db1 = g1.sum(axis=0)
    return loss, (dw1, dw2, dw3), (db1, db2, db3)


def train(
    policy: MlpPolicy, data: ExpertDataset, cfg: TrainConfig
) -> tuple[MlpPolicy, TrainReport]:
    """Minibatch SGD on softmax cross-entropy; stops early at accuracy 1.

    The input policy is not modified.  Epoch order reshuffles from the
    shuffle substream of `cfg.seed`; batches sweep the permutation in
    order, with a final short batch when the dataset size is not a
    multiple of the batch size.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.schema.names != policy.schema.names:
        raise ValueError("dataset schema does not match the policy")
    if data.num_actions != policy.num_actions:
        raise ValueError("dataset action count does not match the policy")
    trained = MlpPolicy(
        seed=policy.seed,
        schema=policy.schema,
        num_actions=policy.num_actions,
        weights=tuple(w.copy() for w in policy.weights),
        biases=tuple(b.copy() for b in policy.biases),
        divisors=policy.divisors.copy(),
    )
    xn_all = trained.normalize(data.features)
    labels_all = data.labels
    n = len(data)
    lr = cfg.learning_rate
    shuffler = Xoshiro256StarStar(cfg.seed, stream=_STREAM_SHUFFLE)

    epoch_loss = _dataset_loss(trained, xn_all, labels_all)
    accuracy = dataset_accuracy(trained, data)
    epochs_run = 0
    early = accuracy == 1.0
    if not early:
        for _ in range(cfg.epochs):
            perm = shuffler.permutation(n)
            loss_sum = 0.0
            for lo in range(0, n, cfg.batch_size):
                pick = perm[lo : lo + cfg.batch_size]
                loss, dws, dbs = _batch_grads(trained, xn_all[pick], labels_all[pick])
                loss_sum += loss * pick.size
                for w, dw in zip(trained.weights, dws):
                    w -= lr * dw
                for b, db in zip(trained.biases, dbs):
                    b -= lr * db
            epochs_run += 1
            epoch_loss = loss_sum / n
            accuracy = dataset_accuracy(trained, data)
            if accuracy == 1.0:
                early = True
                break
    report = TrainReport(
        epochs_run=epochs_run,
        final_loss=float(epoch_loss),
        final_accuracy=float(accuracy),
        early_stopped=early,
    )
    return trained, report


def save_policy(
    policy: MlpPolicy, destination: Union[str, os.PathLike, TextIO, None] = None
) -> str:
    """Serialize to the MLP text format; optionally write it out.

    Header `MLP <seed> <d> <h1> <h2> <actions>` is followed by one line
    per weight-matrix row and per bias vector, layer by layer, with 17
    significant digits (exact float round-trip).
    """
    d, h1, h2, na = policy.layer_sizes
    lines = [f"MLP {policy.seed} {d} {h1} {h2} {na}"]
    for w, b in zip(policy.weights, policy.biases):
        for row in w:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in b))
    text = "\n".join(lines) + "\n"
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    return text


def load_policy(
    source: Union[str, os.PathLike, TextIO], schema: FeatureSchema
) -> MlpPolicy:
    """Parse the MLP text format; the schema supplies names and divisors."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("MLP"):
        raise ModelFormatError("missing MLP header")
    head = lines[0].split()
    if len(head) != 6:
        raise ModelFormatError("MLP header needs seed and four layer sizes")
    try:
        seed, d, h1, h2, na = (int(v) for v in head[1:])
    except ValueError:
        raise ModelFormatError("non-integer MLP header fields") from None
    if d != schema.dim:
        raise ModelFormatError(
            f"policy expects {d} features, schema has {schema.dim}"
        )
    if min(d, h1, h2, na) < 1:
        raise ModelFormatError("layer sizes must be positive")
    sizes = (d, h1, h2, na)
    expected = sum(fan_out + 1 for fan_out in sizes[1:])
    if len(lines) - 1 != expected:
        raise ModelFormatError(
            f"expected {expected} value lines, found {len(lines) - 1}"
        )
    cursor = 1

    def take(count: int, width: int) -> np.ndarray:
        nonlocal cursor
        rows = []
        for _ in range(count):
            parts = lines[cursor].split()
            if len(parts) != width:
                raise ModelFormatError(
                    f"line {cursor + 1}: expected {width} values, found {len(parts)}"
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise ModelFormatError(f"line {cursor + 1}: non-numeric value") from None
            cursor += 1
        return np.asarray(rows, dtype=np.float64)

    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(take(fan_out, fan_in))
        biases.append(take(1, fan_out)[0])
    return MlpPolicy(
        seed=seed,
        schema=schema,
        num_actions=na,
        weights=tuple(weights),
        biases=tuple(biases),
    )


def write_dataset(
    data: ExpertDataset, destination: Union[str, os.PathLike, TextIO, None] = None
) -> str:
    """Serialize a dataset with its schema so it reloads standalone."""
    lines = [
        f"DATASET {len(data)} {data.schema.dim} {data.num_actions}",
        "SCHEMA "
        + " ".join(
            f"{name}:{lo}:{hi}"
            for name, (lo, hi) in zip(data.schema.names, data.schema.bounds)
        ),
    ]
    for row, label in zip(data.features, data.labels):
        lines.append(" ".join(str(int(v)) for v in row) + f" -> {int(label)}")
    text = "\n".join(lines) + "\n"
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    return text


def read_dataset(source: Union[str, os.PathLike, TextIO]) -> ExpertDataset:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2 or not lines[0].startswith("DATASET"):
        raise ModelFormatError("missing DATASET header")
    head = lines[0].split()
    if len(head) != 4:
        raise ModelFormatError("DATASET header needs count, dim and action count")
    try:
        count, dim, num_actions = (int(v) for v in head[1:])
    except ValueError:
        raise ModelFormatError("non-integer DATASET header fields") from None
    schema_parts = lines[1].split()
    if schema_parts[0] != "SCHEMA":
        raise ModelFormatError("expected a SCHEMA line after the header")
    names = []
    bounds = []
    for item in schema_parts[1:]:
        pieces = item.split(":")
        if len(pieces) != 3:
            raise ModelFormatError(f"bad feature spec {item!r}")
        names.append(pieces[0])
        bounds.append((int(pieces[1]), int(pieces[2])))
    schema = FeatureSchema(tuple(names), tuple(bounds))
    if schema.dim != dim:
        raise ModelFormatError("schema does not match the declared dimension")
    if len(lines) - 2 != count:
        raise ModelFormatError(f"expected {count} rows, found {len(lines) - 2}")
    features = np.empty((count, dim), dtype=np.int64)
    labels = np.empty(count, dtype=np.int64)
    for i, line in enumerate(lines[2:]):
        parts = line.split()
        if len(parts) != dim + 2 or parts[dim] != "->":
            raise ModelFormatError(f"row {i}: expected '<features> -> <action>'")
        try:
            features[i] = [int(v) for v in parts[:dim]]
            labels[i] = int(parts[dim + 1])
        except ValueError:
            raise ModelFormatError(f"row {i}: non-integer value") from None
    return ExpertDataset(
        schema=schema, features=features, labels=labels, num_actions=num_actions
    )
