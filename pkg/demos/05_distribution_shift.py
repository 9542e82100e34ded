"""Stress the clones: more jobs than they were trained for.

Every member was cloned on the 5-job task.  Raising the job count keeps
the local rules identical but grows the state space, so the clones walk
into territory no training example covered.  Members are re-verified
individually, as a majority ensemble, and as a permissive union whose
max/min bracket every conceivable way of mixing member decisions.

Two things to watch.  First, completion probability falls off a cliff
once the fuel budget stops covering the extra jobs; that is a property
of the task, and the optimal row falls with it.  Second, members start
to disagree on states outside the training set, yet the permissive
envelope stays tight around the optimum: the disagreements turn out to
be value-neutral, and model checking the one permissive sub-MDP proves
it for every member at once, far cheaper than checking the full model.

Runtime is about a minute.
"""

from rashomon_mdp import (
    TaxiParams,
    TrainConfig,
    build_taxi,
    extract_expert_dataset,
    init_policy,
    max_reach_mdp,
    parse_predicate,
    shift_eval,
    train,
)

SEEDS = (1, 2, 8)
JOB_COUNTS = (5, 6, 7, 8)


def main() -> None:
    params = TaxiParams()
    m = build_taxi(params)
    target = parse_predicate(f"jobs_done={params.num_jobs} & done=1")
    _, expert = max_reach_mdp(m, target)
    data = extract_expert_dataset(m, expert)

    members = {}
    for seed in SEEDS:
        cfg = TrainConfig(seed=seed)
        policy, _ = train(init_policy(m.schema, data.num_actions, cfg), data, cfg)
        members[str(seed)] = policy
    print(f"cloned {len(members)} members on the {params.num_jobs}-job task")

    report = shift_eval(params, JOB_COUNTS, members)

    label = "jobs".ljust(16)
    print(f"\n{label}" + "".join(f"{j:>14d}" for j in report.job_counts))
    for pid in report.member_ids:
        row = "".join(f"{v:14.6f}" for v in report.member_values[pid])
        print(f"{('member ' + pid).ljust(16)}{row}")
    for name, values in (
        ("member mean", report.member_mean),
        ("ensemble", report.ensemble_values),
        ("permissive max", report.permissive_max),
        ("permissive min", report.permissive_min),
        ("optimal", report.optimal_values),
    ):
        row = "".join(f"{v:14.6f}" for v in values)
        print(f"{name.ljust(16)}{row}")

    print("\nstate-space cost of verifying every member at once:")
    for j, diverge, full, sub in zip(
        report.job_counts, report.members_diverge, report.full_sizes, report.induced_sizes
    ):
        note = "members diverge" if diverge else "members agree"
        print(
            f"  J={j}: permissive sub-MDP {sub[0]} states / {sub[1]} transitions"
            f" vs full model {full[0]} / {full[1]} ({note})"
        )


if __name__ == "__main__":
    main()
