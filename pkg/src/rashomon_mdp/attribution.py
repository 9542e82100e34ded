"""Gradient-based feature attributions for network policies.

The saliency of a feature at a state is the absolute partial derivative
of the selected action's pre-softmax logit with respect to the
normalized input.  Averaging saliency over a dataset and ranking
features by descending mean yields a global ranking; equal means break
toward the lower feature index, so rankings are total and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rashomon_mdp.cloning import ExpertDataset, MlpPolicy
from rashomon_mdp.mdp import StateVector


@dataclass(frozen=True)
class FeatureRanking:
    """Permutation of ranks: `ranks[i]` is the rank of feature i, 1 = most salient."""

    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.ranks) != list(range(1, len(self.ranks) + 1)):
            raise ValueError("ranks must be a permutation of 1..d")

    def order(self) -> tuple[int, ...]:
        """Feature indices from most to least salient."""
        return tuple(int(i) for i in np.argsort(self.ranks, kind="stable"))


def _forward(policy: MlpPolicy, xn: np.ndarray):
    w1, w2, w3 = policy.weights
    b1, b2, b3 = policy.biases
    z1 = xn @ w1.T + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2.T + b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ w3.T + b3
    return z1, z2, logits


def saliency_batch(policy: MlpPolicy, features: np.ndarray) -> np.ndarray:
    """(n, d) matrix of absolute logit gradients w.r.t. normalized inputs.

    Row i differentiates the logit of the action the policy selects at
    row i (argmax, ties to the lowest index).
    """
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[1] != policy.schema.dim:
        raise ValueError(f"expected an (n, {policy.schema.dim}) feature matrix")
    xn = policy.normalize(features)
    z1, z2, logits = _forward(policy, xn)
    selected = np.argmax(logits, axis=1)
    w1, w2, w3 = policy.weights
    # backpropagate a one-hot on the selected logit through the ReLUs
    g2 = w3[selected] * (z2 > 0.0)
    g1 = (g2 @ w2) * (z1 > 0.0)
    return np.abs(g1 @ w1)


def saliency(policy: MlpPolicy, state: StateVector) -> np.ndarray:
    """Absolute gradient of the selected action's logit at one state."""
    if len(state) != policy.schema.dim:
        raise ValueError(
            f"state has {len(state)} features, policy expects {policy.schema.dim}"
        )
    return saliency_batch(policy, np.asarray(state, dtype=np.int64)[None, :])[0]


def global_ranking(policy: MlpPolicy, data: ExpertDataset) -> FeatureRanking:
    """Rank features by mean saliency over the dataset, 1 = most salient.

    Equal means rank the lower feature index first, so the result is a
    total order even for degenerate networks.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.schema.names != policy.schema.names:
        raise ValueError("dataset schema does not match the policy")
    means = saliency_batch(policy, data.features).mean(axis=0)
    order = np.argsort(-means, kind="stable")
    ranks = np.empty(means.size, dtype=np.int64)
    ranks[order] = np.arange(1, means.size + 1)
    return FeatureRanking(ranks=tuple(int(r) for r in ranks))


def rankings_equal(a: FeatureRanking, b: FeatureRanking) -> bool:
    if len(a.ranks) != len(b.ranks):
        raise ValueError("rankings cover different feature counts")
    return a.ranks == b.ranks


def group_by_ranking(rankings: Sequence[FeatureRanking]) -> list[list[int]]:
    """Partition positions into maximal equal-ranking groups.

    Groups appear in order of first occurrence; positions inside a group
    keep their input order.
    """
    groups: dict[tuple[int, ...], list[int]] = {}
    for pos, ranking in enumerate(rankings):
        groups.setdefault(ranking.ranks, []).append(pos)
    return list(groups.values())
