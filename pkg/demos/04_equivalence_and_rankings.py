"""Same behavior, different explanations: the Rashomon effect.

Six clones of the same expert are grouped into behavioral equivalence
classes by comparing their induced Markov chains exactly.  Clones that
act identically on every reachable state still disagree about which
input features matter, which a saliency ranking makes visible.

Runtime is about a minute.
"""

from rashomon_mdp import (
    TaxiParams,
    TrainConfig,
    build_rashomon_set,
    build_taxi,
    extract_expert_dataset,
    global_ranking,
    init_policy,
    max_reach_mdp,
    parse_predicate,
    partition_classes,
    train,
)

SEEDS = (1, 2, 3, 4, 5, 6)


def main() -> None:
    params = TaxiParams()
    m = build_taxi(params)
    target = parse_predicate(f"jobs_done={params.num_jobs} & done=1")
    _, expert = max_reach_mdp(m, target)
    data = extract_expert_dataset(m, expert)

    policies = {}
    for seed in SEEDS:
        cfg = TrainConfig(seed=seed)
        policy, report = train(init_policy(m.schema, data.num_actions, cfg), data, cfg)
        policies[str(seed)] = policy
        print(f"trained seed {seed}: accuracy {report.final_accuracy:.4f}")

    classes = partition_classes(m, policies, target)
    print(f"\nbehavioral equivalence classes: {len(classes.classes)}")
    for k, cls in enumerate(classes.classes):
        print(f"  class {k}: members {list(cls.policy_ids)}, value {cls.value}")

    # identical behavior, now look at the explanations
    rankings = {pid: global_ranking(policies[pid], data) for pid in policies}
    print("\nfeature ranking per policy (rank 1 = most salient):")
    header = "  policy  " + "  ".join(f"{n:>15s}" for n in m.schema.names)
    print(header)
    for pid, ranking in rankings.items():
        cells = "  ".join(f"{r:15d}" for r in ranking.ranks)
        print(f"  {pid:>6s}  {cells}")

    top = classes.classes[0]
    rashomon = build_rashomon_set(top.policy_ids, rankings)
    print(f"\nlargest class has {len(top.policy_ids)} members and "
          f"{len(rashomon)} distinct rankings")
    print(f"Rashomon set (one policy per ranking): {list(rashomon)}")


if __name__ == "__main__":
    main()
