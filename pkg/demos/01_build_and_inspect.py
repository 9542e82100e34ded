"""Build the stochastic taxi MDP and poke around in it.

A taxi drives on a small grid, ferrying passengers between four depots.
Every move burns one unit of fuel (wall bumps included); running dry ends
the episode as a failure.  Dropping a passenger at an intermediate depot
respawns a fresh job uniformly at random, which is where the stochasticity
comes from.
"""

import io

from rashomon_mdp import (
    TaxiParams,
    build_taxi,
    read_explicit,
    successor_distribution,
    validate_mdp,
    write_explicit,
)


def main() -> None:
    params = TaxiParams()
    print(f"grid {params.width}x{params.height}, fuel {params.fuel_capacity}, "
          f"jobs to finish {params.num_jobs}")
    print(f"depots: {params.depots}")

    m = build_taxi(params)
    n_trans = sum(
        len(row) for by_action in m.transitions for row in by_action if row
    )
    print(f"\nreachable states: {m.n_states}, transitions: {n_trans}")
    print(f"feature vector: {m.schema.names}")
    print(f"initial state:  {m.states[m.initial]} (index {m.initial})")

    violations = validate_mdp(m)
    print(f"validation violations: {len(violations)}")

    # one-step dynamics straight from the rules, no model needed
    s = m.states[m.initial]
    print("\nsuccessors of the initial state:")
    for action in m.actions:
        for succ, prob in successor_distribution(s, action, params):
            print(f"  {action:8s} -> p={prob:.4f} {succ}")

    # the intermediate drop is the only branching transition
    drop_state = next(st for st in m.states if st[7] == 1)
    print(f"\na state holding a passenger: {drop_state}")

    # text round trip: the on-disk format is newline-delimited and exact
    buf = io.StringIO()
    write_explicit(m, buf)
    again = read_explicit(io.StringIO(buf.getvalue()))
    print(f"serialized size: {len(buf.getvalue()) / 1e6:.1f} MB")
    print(f"round trip identical: {again == m}")


if __name__ == "__main__":
    main()
