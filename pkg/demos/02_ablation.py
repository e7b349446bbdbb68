"""Ablation walk-through: what part of the feedback loop does the work?

`ablate` expands one config into the five controller modes:

  adaptive        the full loop -- query, accumulate, re-render every step
  static          the adaptive runs' union token list, fixed from step 0
  replay-per-seed each seed replays its own adaptive final ledger
  replay-cross    each seed replays a *different* seed's final ledger
  no-accumulation only the latest answer is used, nothing accumulates

The ordering to look for: adaptive beats no-accumulation and cross-seed
replay on unknown rate and relative typicality -- per-trajectory, timed
feedback matters, not merely "some list of negative words".

Run from the repository root:  python3 demos/02_ablation.py
"""

from negsteer.harness import RunConfig, ablate, compare

config = RunConfig.from_dict(
    {
        "world": "pet",
        "category": "pet",
        "label_category": "pet_known",
        "questions": ["subcategory"],
        "w": 2.0,
        "window": {"start": 0, "stop": 15, "frequency": 1},
        "seeds": {"start": 0, "count": 30},
        "out": "demo_runs",
    }
)

print("running all five modes on 30 seeds (under a minute)...")
runs = ablate(config)

print("\n" + compare(runs).render())
print("\n(30 seeds is demo-sized; the orderings above are only stable in")
print("the median over larger batches -- see tests/test_acceptance.py.)")
