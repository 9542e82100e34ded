"""Behavioral equivalence, Rashomon sets and shift stress-tests.

Two policies are behaviorally equivalent on a model and target when
their induced Markov chains coincide; since induced chains copy
probabilities verbatim out of one shared model, the comparison is exact
(no tolerance).  Within an equivalence class, a Rashomon set keeps one
representative per distinct feature-ranking signature: policies that
act identically yet explain themselves differently.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from rashomon_mdp.attribution import FeatureRanking
from rashomon_mdp.checker import (
    DEFAULT_TOL,
    ReachabilityResult,
    TablePolicy,
    max_reach_mdp,
    min_reach_mdp,
    reach_prob_dtmc,
)
from rashomon_mdp.cloning import MlpPolicy
from rashomon_mdp.mdp import (
    ExplicitDtmc,
    ExplicitMdp,
    StateCapError,
    StateVector,
    model_fingerprint,
)
from rashomon_mdp.proplang import (
    BoundPredicate,
    Predicate,
    bind_predicate,
    format_predicate,
)
from rashomon_mdp.taxi import TaxiParams, build_taxi, taxi_schema

DEFAULT_INDUCED_CAP = 2_000_000

Policy = Union[TablePolicy, MlpPolicy, "MajorityEnsemble"]


def policy_id_key(pid: str) -> tuple[int, str]:
    """Sort key putting decimal ids in numeric order ("2" before "10")."""
    return (len(pid), pid)


@dataclass(eq=False)
class InducedDtmc:
    """Markov chain a policy induces on a model, tagged with provenance."""

    chain: ExplicitDtmc
    policy_id: str
    target_text: str
    mdp_fingerprint: str


@dataclass(frozen=True)
class MajorityEnsemble:
    """Majority vote over member policies; ties go to the lowest action index."""

    members: tuple[MlpPolicy, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        first = self.members[0]
        for m in self.members[1:]:
            if m.schema.names != first.schema.names:
                raise ValueError("ensemble members disagree on the schema")
            if m.num_actions != first.num_actions:
                raise ValueError("ensemble members disagree on the action count")

    def select_action(self, state: StateVector) -> int:
        votes: dict[int, int] = {}
        for member in self.members:
            a = member.select_action(state)
            votes[a] = votes.get(a, 0) + 1
        best_count = max(votes.values())
        return min(a for a, c in votes.items() if c == best_count)


@dataclass(frozen=True)
class PermissivePolicy:
    """Union of member action choices: permits every action some member picks."""

    members: tuple[MlpPolicy, ...]
    member_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("permissive policy needs at least one member")
        if len(self.members) != len(self.member_ids):
            raise ValueError("one id per member required")
        first = self.members[0]
        for m in self.members[1:]:
            if m.schema.names != first.schema.names:
                raise ValueError("members disagree on the schema")
            if m.num_actions != first.num_actions:
                raise ValueError("members disagree on the action count")

    def action_set(self, state: StateVector) -> tuple[int, ...]:
        """Sorted distinct actions the members choose at `state`."""
        return tuple(sorted({m.select_action(state) for m in self.members}))


def _action_chooser(policy: Policy) -> Callable[[ExplicitMdp, int], int]:
    if isinstance(policy, TablePolicy):
        return lambda m, i: policy.actions[i]
    return lambda m, i: policy.select_action(m.states[i])


def build_induced_dtmc(
    m: ExplicitMdp,
    policy: Policy,
    target: Predicate | BoundPredicate,
    policy_id: str = "",
    cap: int = DEFAULT_INDUCED_CAP,
) -> InducedDtmc:
    """Restrict the model to the policy's choices, reachably from the initial state.

    States satisfying the target are not expanded; they become absorbing
    self-loops, since reachability probabilities do not depend on what
    happens after the target is hit.  Probabilities are copied verbatim
    from the model, so two equal-behavior policies give float-identical
    chains.  State 0 of the chain is the model's initial state and
    discovery is breadth-first, making indices deterministic.
    """
    if isinstance(policy, TablePolicy) and len(policy) != m.n_states:
        raise ValueError(f"policy covers {len(policy)} states, model has {m.n_states}")
    if isinstance(policy, (MlpPolicy, MajorityEnsemble)):
        names = (
            policy.schema.names
            if isinstance(policy, MlpPolicy)
            else policy.members[0].schema.names
        )
        if names != m.schema.names:
            raise ValueError("policy schema does not match the model")
    bound = target if isinstance(target, BoundPredicate) else bind_predicate(target, m.schema)
    from rashomon_mdp.checker import _states_matrix

    tmask = bound.mask(_states_matrix(m))
    choose = _action_chooser(policy)

    new_index: dict[int, int] = {m.initial: 0}
    order: list[int] = [m.initial]
    rows: list[tuple[tuple[int, float], ...]] = []
    queue = deque((0,))
    while queue:
        k = queue.popleft()
        i = order[k]
        if tmask[i]:
            rows.append(((k, 1.0),))
            continue
        action = choose(m, i)
        available = m.transitions[i]
        if not (0 <= action < len(available)) or available[action] is None:
            raise ValueError(
                f"policy picked unavailable action {action} in state {i}"
            )
        row = []
        for dst, prob in available[action]:
            j = new_index.get(dst)
            if j is None:
                j = len(order)
                if j >= cap:
                    raise StateCapError(f"induced chain exceeds cap of {cap} states")
                new_index[dst] = j
                order.append(dst)
                queue.append(j)
            row.append((j, prob))
        rows.append(tuple(row))
    chain = ExplicitDtmc(
        schema=m.schema,
        states=tuple(m.states[i] for i in order),
        transitions=tuple(rows),
        initial=0,
    )
    return InducedDtmc(
        chain=chain,
        policy_id=policy_id,
        target_text=format_predicate(bound.predicate),
        mdp_fingerprint=model_fingerprint(m),
    )


def canonical_chain_bytes(chain: ExplicitDtmc) -> bytes:
    """Index-free canonical encoding: equal bytes iff chains are isomorphic
    under the feature-vector relabeling, with float-exact probabilities."""
    cached = getattr(chain, "_canonical", None)
    if cached is not None:
        return cached
    lines = []
    for i in range(chain.n_states):
        fv = chain.states[i]
        succ = sorted(
            (chain.states[dst], prob) for dst, prob in chain.transitions[i]
        )
        body = ";".join(f"{s}:{prob.hex()}" for s, prob in succ)
        lines.append(f"{fv}|{body}")
    lines.sort()
    lines.append(f"init={chain.states[chain.initial]}")
    out = "\n".join(lines).encode("utf-8")
    object.__setattr__(chain, "_canonical", out)
    return out


def dtmc_equivalent(a: InducedDtmc, b: InducedDtmc) -> bool:
    """Exact behavioral equality of two induced chains.

    Requires the same underlying model and target; compares canonical
    encodings, so state numbering is irrelevant but probabilities must
    match bit for bit.
    """
    if a.chain.schema.names != b.chain.schema.names:
        raise ValueError("chains disagree on the feature schema")
    if a.mdp_fingerprint != b.mdp_fingerprint:
        raise ValueError("chains were induced on different models")
    if a.target_text != b.target_text:
        raise ValueError("chains were induced for different targets")
    return canonical_chain_bytes(a.chain) == canonical_chain_bytes(b.chain)


@dataclass(eq=False)
class EquivalenceClass:
    """One behavioral class: member ids, a representative chain, its value."""

    policy_ids: tuple[str, ...]
    representative: InducedDtmc
    value: float
    check_iterations: int
    check_residual: float


@dataclass(eq=False)
class EquivalenceClasses:
    """Partition of policies by induced-chain equality.

    Classes are ordered by size (largest first), then by lowest member
    id; ids inside a class are sorted.  The representative is the
    member with the lowest id.
    """

    classes: list[EquivalenceClass]
    target_text: str
    mdp_fingerprint: str

    @property
    def sizes(self) -> list[int]:
        return [len(c.policy_ids) for c in self.classes]

    def class_of(self, policy_id: str) -> int:
        for idx, c in enumerate(self.classes):
            if policy_id in c.policy_ids:
                return idx
        raise KeyError(f"unknown policy id {policy_id!r}")


def partition_induced(
    induced: Sequence[InducedDtmc], tol: float = DEFAULT_TOL
) -> EquivalenceClasses:
    """Group prebuilt induced chains by canonical equality and check each
    class's reachability value once, on the representative."""
    if not induced:
        raise ValueError("nothing to partition")
    fingerprints = {d.mdp_fingerprint for d in induced}
    if len(fingerprints) != 1:
        raise ValueError("chains were induced on different models")
    targets = {d.target_text for d in induced}
    if len(targets) != 1:
        raise ValueError("chains were induced for different targets")
    ids = [d.policy_id for d in induced]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate policy ids")

    by_key: dict[bytes, list[InducedDtmc]] = {}
    for d in induced:
        by_key.setdefault(canonical_chain_bytes(d.chain), []).append(d)

    classes = []
    target_text = next(iter(targets))
    for group in by_key.values():
        group = sorted(group, key=lambda d: policy_id_key(d.policy_id))
        rep = group[0]
        pred = bind_predicate_text(rep.target_text, rep.chain)
        result = reach_prob_dtmc(rep.chain, pred, tol=tol)
        classes.append(
            EquivalenceClass(
                policy_ids=tuple(d.policy_id for d in group),
                representative=rep,
                value=result.at_initial,
                check_iterations=result.iterations,
                check_residual=result.residual,
            )
        )
    classes.sort(key=lambda c: (-len(c.policy_ids), policy_id_key(c.policy_ids[0])))
    return EquivalenceClasses(
        classes=classes,
        target_text=target_text,
        mdp_fingerprint=next(iter(fingerprints)),
    )


def bind_predicate_text(text: str, chain: ExplicitDtmc) -> BoundPredicate:
    from rashomon_mdp.proplang import parse_predicate

    return bind_predicate(parse_predicate(text), chain.schema)


def partition_classes(
    m: ExplicitMdp,
    policies: Mapping[str, Policy],
    target: Predicate | BoundPredicate,
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_INDUCED_CAP,
) -> EquivalenceClasses:
    """Induce a chain per policy and partition by behavioral equality."""
    induced = [
        build_induced_dtmc(m, policies[pid], target, policy_id=pid, cap=cap)
        for pid in sorted(policies, key=policy_id_key)
    ]
    return partition_induced(induced, tol=tol)


def build_rashomon_set(
    class_ids: Sequence[str], rankings: Mapping[str, FeatureRanking]
) -> tuple[str, ...]:
    """One representative (lowest id) per distinct ranking in the class.

    The result is sorted; its length is the number of distinct ranking
    signatures among behaviorally identical policies.
    """
    if not class_ids:
        raise ValueError("empty equivalence class")
    missing = [pid for pid in class_ids if pid not in rankings]
    if missing:
        raise ValueError(f"no ranking for policy ids {missing}")
    best: dict[tuple[int, ...], str] = {}
    for pid in class_ids:
        key = rankings[pid].ranks
        if key not in best or policy_id_key(pid) < policy_id_key(best[key]):
            best[key] = pid
    return tuple(sorted(best.values(), key=policy_id_key))


def majority_ensemble(members: Sequence[MlpPolicy]) -> MajorityEnsemble:
    return MajorityEnsemble(members=tuple(members))


def union_permissive(
    members: Sequence[MlpPolicy], member_ids: Sequence[str]
) -> PermissivePolicy:
    return PermissivePolicy(members=tuple(members), member_ids=tuple(member_ids))


def build_induced_mdp(
    m: ExplicitMdp,
    tau: PermissivePolicy,
    target: Predicate | BoundPredicate,
    cap: int = DEFAULT_INDUCED_CAP,
) -> ExplicitMdp:
    """Sub-MDP keeping, in each reachable state, the actions `tau` permits.

    Target states are absorbing (one self-loop per permitted action);
    elsewhere rows are copied verbatim for permitted actions and left
    missing for the rest.  With a single member this is the member's
    induced chain written as a one-choice-per-state MDP.
    """
    if tau.members[0].schema.names != m.schema.names:
        raise ValueError("policy schema does not match the model")
    bound = target if isinstance(target, BoundPredicate) else bind_predicate(target, m.schema)
    from rashomon_mdp.checker import _states_matrix

    tmask = bound.mask(_states_matrix(m))
    n_actions = len(m.actions)

    new_index: dict[int, int] = {m.initial: 0}
    order: list[int] = [m.initial]
    rows: list[tuple[Optional[tuple[tuple[int, float], ...]], ...]] = []
    queue = deque((0,))
    while queue:
        k = queue.popleft()
        i = order[k]
        permitted = tau.action_set(m.states[i])
        per_state: list[Optional[tuple[tuple[int, float], ...]]] = [None] * n_actions
        if tmask[i]:
            for action in permitted:
                per_state[action] = ((k, 1.0),)
            rows.append(tuple(per_state))
            continue
        available = m.transitions[i]
        for action in permitted:
            if not (0 <= action < n_actions) or available[action] is None:
                raise ValueError(
                    f"policy permits unavailable action {action} in state {i}"
                )
            row = []
            for dst, prob in available[action]:
                j = new_index.get(dst)
                if j is None:
                    j = len(order)
                    if j >= cap:
                        raise StateCapError(
                            f"induced sub-MDP exceeds cap of {cap} states"
                        )
                    new_index[dst] = j
                    order.append(dst)
                    queue.append(j)
                row.append((j, prob))
            per_state[action] = tuple(row)
        rows.append(tuple(per_state))
    return ExplicitMdp(
        schema=m.schema,
        states=tuple(m.states[i] for i in order),
        actions=m.actions,
        transitions=tuple(rows),
        initial=0,
    )


@dataclass(eq=False)
class ShiftReport:
    """Completion probabilities across a range of job counts.

    All lists are indexed like `job_counts`.  `member_values` maps each
    member id to its per-count values; `members_diverge[j]` flags job
    counts where the members stop being behaviorally identical.  Sizes
    pair (states, transitions) of the full model and of the permissive
    policy's induced sub-MDP.
    """

    job_counts: tuple[int, ...]
    member_ids: tuple[str, ...]
    member_values: dict[str, list[float]]
    member_mean: list[float]
    ensemble_values: list[float]
    permissive_max: list[float]
    permissive_min: list[float]
    optimal_values: list[float]
    members_diverge: list[bool]
    full_sizes: list[tuple[int, int]]
    induced_sizes: list[tuple[int, int]]


def _shift_target(num_jobs: int) -> Predicate:
    from rashomon_mdp.proplang import And, Atom

    return And(Atom("jobs_done", "=", num_jobs), Atom("done", "=", 1))


def shift_eval(
    params: TaxiParams,
    job_counts: Sequence[int],
    members: Mapping[str, MlpPolicy],
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_INDUCED_CAP,
) -> ShiftReport:
    """Re-verify members, their ensemble and their permissive union while
    the required job count grows past the training value.

    For each count J the taxi model is rebuilt with `num_jobs=J` and the
    target becomes `jobs_done=J & done=1`.  Member policies transfer
    because the feature layout is unchanged; each keeps its original
    normalization divisors.
    """
    if not job_counts:
        raise ValueError("need at least one job count")
    counts = tuple(int(j) for j in job_counts)
    if any(j < 1 for j in counts):
        raise ValueError("job counts must be positive")
    if len(set(counts)) != len(counts):
        raise ValueError("duplicate job counts")
    if not members:
        raise ValueError("need at least one member policy")
    ids = tuple(sorted(members, key=policy_id_key))
    member_list = [members[pid] for pid in ids]
    for pid, member in zip(ids, member_list):
        if member.schema.names != taxi_schema(params).names:
            raise ValueError(f"member {pid!r} was trained on a different schema")

    ensemble = MajorityEnsemble(members=tuple(member_list))
    permissive = PermissivePolicy(members=tuple(member_list), member_ids=ids)

    member_values: dict[str, list[float]] = {pid: [] for pid in ids}
    member_mean: list[float] = []
    ensemble_values: list[float] = []
    permissive_max: list[float] = []
    permissive_min: list[float] = []
    optimal_values: list[float] = []
    members_diverge: list[bool] = []
    full_sizes: list[tuple[int, int]] = []
    induced_sizes: list[tuple[int, int]] = []

    for count in counts:
        shifted = replace(params, num_jobs=count)
        model = build_taxi(shifted, cap=cap)
        target = bind_predicate(_shift_target(count), model.schema)
        full_sizes.append((model.n_states, model.n_transitions))

        keys = set()
        values_here = []
        for pid, member in zip(ids, member_list):
            induced = build_induced_dtmc(model, member, target, policy_id=pid, cap=cap)
            keys.add(canonical_chain_bytes(induced.chain))
            value = reach_prob_dtmc(induced.chain, target, tol=tol).at_initial
            member_values[pid].append(value)
            values_here.append(value)
        members_diverge.append(len(keys) > 1)
        member_mean.append(float(np.mean(values_here)))

        induced_e = build_induced_dtmc(
            model, ensemble, target, policy_id="ensemble", cap=cap
        )
        ensemble_values.append(
            reach_prob_dtmc(induced_e.chain, target, tol=tol).at_initial
        )

        sub = build_induced_mdp(model, permissive, target, cap=cap)
        induced_sizes.append((sub.n_states, sub.n_transitions))
        sub_target = bind_predicate(_shift_target(count), sub.schema)
        best, _ = max_reach_mdp(sub, sub_target, tol=tol)
        worst, _ = min_reach_mdp(sub, sub_target, tol=tol)
        permissive_max.append(best.at_initial)
        permissive_min.append(worst.at_initial)

        opt, _ = max_reach_mdp(model, target, tol=tol)
        optimal_values.append(opt.at_initial)

    return ShiftReport(
        job_counts=counts,
        member_ids=ids,
        member_values=member_values,
        member_mean=member_mean,
        ensemble_values=ensemble_values,
        permissive_max=permissive_max,
        permissive_min=permissive_min,
        optimal_values=optimal_values,
        members_diverge=members_diverge,
        full_sizes=full_sizes,
        induced_sizes=induced_sizes,
    )
