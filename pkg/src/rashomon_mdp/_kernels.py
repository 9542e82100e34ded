"""Numba kernels for sparse reachability solving.

All kernels operate on CSR-like integer/float arrays prepared by
`checker`.  They avoid fastmath so float results are identical across
runs and machines that follow IEEE 754.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def gauss_seidel_sweep(indptr, indices, data, x, free) -> None:
    """One in-place Gauss-Seidel sweep over free states in ascending order.

    Solves x_i = sum_j P_ij x_j with fixed entries folded in through x;
    the diagonal is moved to the left-hand side.
    """
    for i in range(free.size):
        if not free[i]:
            continue
        acc = 0.0
        diag = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag = data[k]
            else:
                acc += data[k] * x[j]
        x[i] = acc / (1.0 - diag)


@njit(cache=True)
def max_residual(indptr, indices, data, x, free) -> float:
    """Residual max_i |x_i - (P x)_i| over free states."""
    worst = 0.0
    for i in range(free.size):
        if not free[i]:
            continue
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        d = abs(x[i] - acc)
        if d > worst:
            worst = d
    return worst


@njit(cache=True)
def backward_reachable(t_indptr, t_indices, seed) -> np.ndarray:
    """States that reach the seed set (seed included) via transposed edges."""
    n = seed.size
    reached = seed.copy()
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        if reached[i]:
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        for k in range(t_indptr[i], t_indptr[i + 1]):
            j = t_indices[k]
            if not reached[j]:
                reached[j] = True
                stack[top] = j
                top += 1
    return reached


@njit(cache=True)
def vi_sweep(row_indptr, indices, data, state_ptr, fixed, maximize, x, out) -> float:
    """One Jacobi value-iteration sweep; returns the max absolute change."""
    diff = 0.0
    for s in range(state_ptr.size - 1):
        if fixed[s] or state_ptr[s] == state_ptr[s + 1]:
            out[s] = x[s]
            continue
        if maximize:
            best = -1.0
        else:
            best = 2.0
        for r in range(state_ptr[s], state_ptr[s + 1]):
            q = 0.0
            for k in range(row_indptr[r], row_indptr[r + 1]):
                q += data[k] * x[indices[k]]
            if maximize:
                if q > best:
                    best = q
            else:
                if q < best:
                    best = q
        out[s] = best
        d = abs(best - x[s])
        if d > diff:
            diff = d
    return diff


@njit(cache=True)
def vi_greedy(row_indptr, indices, data, state_ptr, row_action, maximize, x) -> np.ndarray:
    """Per-state action attaining the extremum of q(s, a) = sum P x.

    Strict improvement keeps the first row, so ties resolve to the
    lowest available action index.  States without rows get action 0.
    """
    n = state_ptr.size - 1
    actions = np.zeros(n, dtype=np.int64)
    for s in range(n):
        r0, r1 = state_ptr[s], state_ptr[s + 1]
        if r0 == r1:
            continue
        best_q = 0.0
        best_a = np.int64(-1)
        for r in range(r0, r1):
            q = 0.0
            for k in range(row_indptr[r], row_indptr[r + 1]):
                q += data[k] * x[indices[k]]
            if best_a < 0:
                best_q = q
                best_a = row_action[r]
            elif maximize:
                if q > best_q:
                    best_q = q
                    best_a = row_action[r]
            else:
                if q < best_q:
                    best_q = q
                    best_a = row_action[r]
        actions[s] = best_a
    return actions


@njit(cache=True)
def optimal_row_mask(row_indptr, indices, data, state_ptr, x, tie_tol) -> np.ndarray:
    """Rows whose q-value ties the best q of their state within tie_tol."""
    n_rows = row_indptr.size - 1
    kept = np.zeros(n_rows, dtype=np.bool_)
    for s in range(state_ptr.size - 1):
        r0, r1 = state_ptr[s], state_ptr[s + 1]
        if r0 == r1:
            continue
        best = -1.0
        for r in range(r0, r1):
            q = 0.0
            for k in range(row_indptr[r], row_indptr[r + 1]):
                q += data[k] * x[indices[k]]
            if q > best:
                best = q
        for r in range(r0, r1):
            q = 0.0
            for k in range(row_indptr[r], row_indptr[r + 1]):
                q += data[k] * x[indices[k]]
            if q >= best - tie_tol:
                kept[r] = True
    return kept


@njit(cache=True)
def attractor_actions(
    row_indptr, indices, state_ptr, row_action, kept, target
) -> np.ndarray:
    """Proper optimal actions: among kept (value-optimal) rows, pick the
    lowest-indexed one that strictly decreases the BFS distance to the
    target inside the kept-action subsystem.

    Greedy choice by q-value alone can stall on value-preserving
    self-loops; insisting on distance progress yields a policy whose
    induced chain attains the optimum.  States with infinite distance
    (value 0) and target states fall back to their first available row.
    """
    n = state_ptr.size - 1
    inf = np.int64(1) << 62
    dist = np.empty(n, dtype=np.int64)
    for i in range(n):
        dist[i] = 0 if target[i] else inf
    changed = True
    while changed:
        changed = False
        for s in range(n):
            if target[s]:
                continue
            best = inf
            for r in range(state_ptr[s], state_ptr[s + 1]):
                if not kept[r]:
                    continue
                dmin = inf
                for k in range(row_indptr[r], row_indptr[r + 1]):
                    dj = dist[indices[k]]
                    if dj < dmin:
                        dmin = dj
                if dmin < inf and dmin + 1 < best:
                    best = dmin + 1
            if best < dist[s]:
                dist[s] = best
                changed = True
    actions = np.zeros(n, dtype=np.int64)
    for s in range(n):
        r0, r1 = state_ptr[s], state_ptr[s + 1]
        if r0 == r1:
            continue
        actions[s] = row_action[r0]
        if target[s] or dist[s] == 0 or dist[s] >= inf:
            continue
        for r in range(r0, r1):
            if not kept[r]:
                continue
            dmin = inf
            for k in range(row_indptr[r], row_indptr[r + 1]):
                dj = dist[indices[k]]
                if dj < dmin:
                    dmin = dj
            if dmin == dist[s] - 1:
                actions[s] = row_action[r]
                break
    return actions


@njit(cache=True)
def min_prob0_mask(row_indptr, indices, state_ptr, target) -> np.ndarray:
    """States where the minimizing player forces reach-probability zero.

    Greatest fixpoint of: s stays in Z iff s is not a target and some
    action keeps all successors inside Z.
    """
    n = target.size
    zero = np.empty(n, dtype=np.bool_)
    for i in range(n):
        zero[i] = not target[i]
    changed = True
    while changed:
        changed = False
        for s in range(n):
            if not zero[s]:
                continue
            # a state with no rows is stuck and trivially avoids the target
            keeps = state_ptr[s] == state_ptr[s + 1]
            for r in range(state_ptr[s], state_ptr[s + 1]):
                inside = True
                for k in range(row_indptr[r], row_indptr[r + 1]):
                    if not zero[indices[k]]:
                        inside = False
                        break
                if inside:
                    keeps = True
                    break
            if not keeps:
                zero[s] = False
                changed = True
    return zero
