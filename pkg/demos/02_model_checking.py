"""Reachability probabilities on hand-built chains and a tiny MDP.

Three warm-ups with known answers, then a two-action MDP where the best
and worst policies bracket everything in between.
"""

import numpy as np

from rashomon_mdp import (
    ExplicitDtmc,
    ExplicitMdp,
    FeatureSchema,
    check_threshold,
    max_reach_mdp,
    min_reach_mdp,
    parse_predicate,
    parse_property,
    reach_prob_dtmc,
)


def line_schema(n: int) -> FeatureSchema:
    return FeatureSchema(names=("s",), bounds=((0, n),))


def gambler(n: int) -> ExplicitDtmc:
    """Fair coin flips between absorbing ruin (0) and fortune (n)."""
    rows = [((0, 1.0),)]
    for i in range(1, n):
        rows.append(((i - 1, 0.5), (i + 1, 0.5)))
    rows.append(((n, 1.0),))
    return ExplicitDtmc(
        schema=line_schema(n),
        states=tuple((i,) for i in range(n + 1)),
        transitions=tuple(rows),
        initial=n // 2,
    )


def main() -> None:
    # closed form: starting at i, P(hit N before 0) = i/N
    n = 8
    res = reach_prob_dtmc(gambler(n), parse_predicate(f"s={n}"))
    print(f"gambler's ruin, N={n}:")
    for i in (1, 4, 7):
        print(f"  from s={i}: computed {res.values[i]:.10f}, exact {i / n:.10f}")
    print(f"  solver: {res.iterations} sweeps, residual {res.residual:.1e}")

    # geometric retry: succeed 1/3, restart 2/3, never a dead end
    retry = ExplicitDtmc(
        schema=line_schema(2),
        states=((0,), (1,), (2,)),
        transitions=(
            ((1, 1 / 3), (0, 2 / 3)),
            ((1, 1.0),),
            ((2, 1.0),),
        ),
        initial=0,
    )
    v = reach_prob_dtmc(retry, parse_predicate("s=1")).at_initial
    print(f"\ngeometric retry reaches the goal with probability {v:.10f}")

    # a two-action MDP: action a is a fair coin, action b is a biased one
    m = ExplicitMdp(
        schema=line_schema(3),
        states=((0,), (1,), (2,), (3,)),
        actions=("a", "b"),
        transitions=(
            (((1, 0.5), (2, 0.5)), ((1, 0.2), (2, 0.8))),
            (((1, 1.0),), None),
            (((2, 1.0),), None),
            (((3, 1.0),), None),
        ),
        initial=0,
    )
    goal = parse_predicate("s=1")
    best, pi_max = max_reach_mdp(m, goal)
    worst, pi_min = min_reach_mdp(m, goal)
    print(f"\ntwo-action MDP: max {best.at_initial}, min {worst.at_initial}")
    print(f"  best picks  {m.actions[pi_max.actions[0]]!r} at the start")
    print(f"  worst picks {m.actions[pi_min.actions[0]]!r} at the start")

    # threshold queries compare the solved value against the bound
    for text in ("P>=0.5 [ F s=1 ]", "P>0.5 [ F s=1 ]", "P<=0.1 [ F s=1 ]"):
        query = parse_property(text)
        verdict = check_threshold(query, best.at_initial)
        print(f"  {text:22s} under the best policy: {verdict}")

    # values are probabilities, so they stay inside [0, 1]
    assert np.all(best.values >= 0) and np.all(best.values <= 1)


if __name__ == "__main__":
    main()
