"""Reachability probabilities for explicit DTMCs and MDPs.

DTMC values solve the linear fixpoint by Gauss-Seidel sweeps after a
graph precomputation pins unreachable-to-target states to exactly 0 and
target states to exactly 1.  MDP extrema use value iteration with the
matching qualitative precomputation, and return a greedy table policy
whose induced chain attains the extremum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rashomon_mdp import _kernels
from rashomon_mdp.mdp import ExplicitDtmc, ExplicitMdp
from rashomon_mdp.proplang import BoundPredicate, Predicate, PropertyQuery, bind_predicate

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 100_000

# verdicts compare against the bound after rounding to this many decimals,
# so solver noise below the tolerance cannot flip a tight threshold
VERDICT_DECIMALS = 12


class ConvergenceError(RuntimeError):
    """Raised when a fixed-point solve exceeds its sweep budget."""


@dataclass(frozen=True)
class TablePolicy:
    """Deterministic memoryless policy: one action index per state."""

    actions: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, state: int) -> int:
        return self.actions[state]


@dataclass(frozen=True)
class ReachabilityResult:
    """Solved reachability query.

    `values[i]` is the probability from state i, `at_initial` the value
    at the model's initial state; `iterations` counts solver sweeps and
    `residual` is the final convergence measure.
    """

    values: np.ndarray
    at_initial: float
    iterations: int
    residual: float


def _bound(target, schema) -> BoundPredicate:
    if isinstance(target, BoundPredicate):
        if target.schema != schema:
            raise ValueError("predicate bound against a different schema")
        return target
    return bind_predicate(target, schema)


def _dtmc_csr(d: ExplicitDtmc):
    cached = getattr(d, "_csr", None)
    if cached is not None:
        return cached
    n = d.n_states
    counts = np.fromiter((len(row) for row in d.transitions), dtype=np.int64, count=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    nnz = int(indptr[-1])
    indices = np.empty(nnz, dtype=np.int64)
    data = np.empty(nnz, dtype=np.float64)
    k = 0
    for row in d.transitions:
        for dst, prob in row:
            indices[k] = dst
            data[k] = prob
            k += 1
    cached = (indptr, indices, data)
    object.__setattr__(d, "_csr", cached)
    return cached


def _mdp_stacked(m: ExplicitMdp):
    """Stack all available action rows; rows of one state stay adjacent in
    ascending action order so greedy tie-breaks pick the lowest index."""
    cached = getattr(m, "_stacked", None)
    if cached is not None:
        return cached
    n = m.n_states
    state_ptr = np.zeros(n + 1, dtype=np.int64)
    row_sizes: list[int] = []
    row_action: list[int] = []
    for i, per_state in enumerate(m.transitions):
        rows_here = 0
        for a, row in enumerate(per_state):
            if row is None:
                continue
            rows_here += 1
            row_sizes.append(len(row))
            row_action.append(a)
        state_ptr[i + 1] = state_ptr[i] + rows_here
    n_rows = len(row_sizes)
    row_indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.asarray(row_sizes, dtype=np.int64), out=row_indptr[1:])
    nnz = int(row_indptr[-1])
    indices = np.empty(nnz, dtype=np.int64)
    data = np.empty(nnz, dtype=np.float64)
    k = 0
    for per_state in m.transitions:
        for row in per_state:
            if row is None:
                continue
            for dst, prob in row:
                indices[k] = dst
                data[k] = prob
                k += 1
    cached = (
        row_indptr,
        indices,
        data,
        state_ptr,
        np.asarray(row_action, dtype=np.int64),
    )
    object.__setattr__(m, "_stacked", cached)
    return cached


def _transpose_edges(indices: np.ndarray, srcs: np.ndarray, n: int):
    """CSR of reversed edges: row j lists all i with an edge i -> j."""
    counts = np.bincount(indices, minlength=n)
    t_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=t_indptr[1:])
    order = np.argsort(indices, kind="stable")
    return t_indptr, srcs[order]


def _states_matrix(model) -> np.ndarray:
    cached = getattr(model, "_states_matrix", None)
    if cached is None:
        cached = np.asarray(model.states, dtype=np.int64)
        object.__setattr__(model, "_states_matrix", cached)
    return cached


def reach_prob_dtmc(
    d: ExplicitDtmc,
    target: Predicate | BoundPredicate,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> ReachabilityResult:
    """Probability of eventually reaching states satisfying `target`.

    Target states hold exactly 1.0 and states with no path to the target
    exactly 0.0; the remaining states are solved by Gauss-Seidel sweeps
    in ascending state order until the residual drops below `tol`.
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    bound = _bound(target, d.schema)
    tmask = np.ascontiguousarray(bound.mask(_states_matrix(d)))
    indptr, indices, data = _dtmc_csr(d)
    srcs = np.repeat(np.arange(d.n_states, dtype=np.int64), np.diff(indptr))
    t_indptr, t_indices = _transpose_edges(indices, srcs, d.n_states)
    can_reach = _kernels.backward_reachable(t_indptr, t_indices, tmask)
    free = can_reach & ~tmask

    x = np.zeros(d.n_states, dtype=np.float64)
    x[tmask] = 1.0
    iterations = 0
    residual = _kernels.max_residual(indptr, indices, data, x, free)
    while residual > tol:
        if iterations >= max_sweeps:
            raise ConvergenceError(
                f"residual {residual:g} after {iterations} sweeps (tol {tol:g})"
            )
        _kernels.gauss_seidel_sweep(indptr, indices, data, x, free)
        iterations += 1
        residual = _kernels.max_residual(indptr, indices, data, x, free)
    np.clip(x, 0.0, 1.0, out=x)
    return ReachabilityResult(
        values=x,
        at_initial=float(x[d.initial]),
        iterations=iterations,
        residual=float(residual),
    )


def _reach_mdp(
    m: ExplicitMdp,
    target: Predicate | BoundPredicate,
    maximize: bool,
    tol: float,
    max_sweeps: int,
) -> tuple[ReachabilityResult, TablePolicy]:
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    bound = _bound(target, m.schema)
    tmask = np.ascontiguousarray(bound.mask(_states_matrix(m)))
    row_indptr, indices, data, state_ptr, row_action = _mdp_stacked(m)

    if maximize:
        # prob-0 states cannot reach the target under any resolution
        row_of_entry = (
            np.searchsorted(row_indptr, np.arange(indices.size), side="right") - 1
        )
        srcs = (
            np.searchsorted(state_ptr, row_of_entry, side="right").astype(np.int64) - 1
        )
        t_indptr, t_indices = _transpose_edges(indices, srcs, m.n_states)
        can_reach = _kernels.backward_reachable(t_indptr, t_indices, tmask)
        zero = ~can_reach
    else:
        zero = _kernels.min_prob0_mask(row_indptr, indices, state_ptr, tmask)
        zero &= ~tmask

    fixed = tmask | zero
    x = np.zeros(m.n_states, dtype=np.float64)
    x[tmask] = 1.0
    out = np.empty_like(x)
    iterations = 0
    while True:
        diff = _kernels.vi_sweep(
            row_indptr, indices, data, state_ptr, fixed, maximize, x, out
        )
        x, out = out, x
        iterations += 1
        if diff <= tol:
            break
        if iterations >= max_sweeps:
            raise ConvergenceError(
                f"change {diff:g} after {iterations} sweeps (tol {tol:g})"
            )
    np.clip(x, 0.0, 1.0, out=x)
    if maximize:
        # q-greedy alone can stall on value-preserving self-loops; insist
        # on progress toward the target within the optimal-action subsystem
        kept = _kernels.optimal_row_mask(
            row_indptr, indices, data, state_ptr, x, max(10.0 * tol, 1e-9)
        )
        actions = _kernels.attractor_actions(
            row_indptr, indices, state_ptr, row_action, kept, tmask
        )
    else:
        # any q-greedy policy attains the minimum once prob-0 states are
        # pinned, so the plain lowest-index tie-break is sound here
        actions = _kernels.vi_greedy(
            row_indptr, indices, data, state_ptr, row_action, maximize, x
        )
    result = ReachabilityResult(
        values=x,
        at_initial=float(x[m.initial]),
        iterations=iterations,
        residual=float(diff),
    )
    return result, TablePolicy(actions=tuple(int(a) for a in actions))


def max_reach_mdp(
    m: ExplicitMdp,
    target: Predicate | BoundPredicate,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> tuple[ReachabilityResult, TablePolicy]:
    """Maximal reachability probability and a greedy optimal policy.

    Value iteration from below; action ties resolve to the lowest index,
    so the returned policy is unique for a given model and target.
    """
    return _reach_mdp(m, target, True, tol, max_sweeps)


def min_reach_mdp(
    m: ExplicitMdp,
    target: Predicate | BoundPredicate,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> tuple[ReachabilityResult, TablePolicy]:
    """Minimal reachability probability and a greedy pessimal policy."""
    return _reach_mdp(m, target, False, tol, max_sweeps)


def check_threshold(query: PropertyQuery, value: float) -> str:
    """Verdict "satisfied" or "violated" for a threshold query.

    The solved value is rounded to 12 decimals before comparison so that
    solver noise well below the tolerance cannot flip the verdict.
    """
    if query.mode != "threshold":
        raise ValueError("verdicts need a threshold query, not a quantitative one")
    rounded = round(value, VERDICT_DECIMALS)
    ok = {
        "<": rounded < query.bound,
        "<=": rounded <= query.bound,
        ">": rounded > query.bound,
        ">=": rounded >= query.bound,
    }[query.op]
    return "satisfied" if ok else "violated"
