#!/usr/bin/env python3
"""Generate the guard-parity fixture replayed by the frontend test suite.

Simulates an analyst clicking through the toggle board: 200 random tri-state
toggle interactions against real base vectors. After every click the
cumulative edit set is submitted to the backend's edit validator, and the
verdict (accepted with resulting vector and mask, or rejected with
violations) is recorded. The frontend guard must reproduce every verdict.

Run from the repository root:

    python3 frontend/scripts/generate_guard_fixture.py
"""

import json
import random
from pathlib import Path

from cosmo.declare import (
    ConstraintInstance,
    ConstraintUniverse,
    fulfillment_vector,
)
from cosmo.errors import ConsistencyError
from cosmo.simulator import ConditionEdit, build_phi_s

N_INTERACTIONS = 200
SEED = 2024


def build_universe() -> ConstraintUniverse:
    acts = ["A", "B", "C", "D"]
    instances = []
    for a in acts:
        for t in ("Existence", "Absence", "Exactly1"):
            instances.append(ConstraintInstance(t, a))
    for a in acts:
        for b in acts:
            if a != b:
                for t in ("Response", "Precedence", "AlternateResponse",
                          "ChainResponse", "NotSuccession", "NotChainSuccession"):
                    instances.append(ConstraintInstance(t, a, b))
    for i, a in enumerate(acts):
        for b in acts[i + 1:]:
            for t in ("Choice", "ExclusiveChoice", "NotCoExistence"):
                instances.append(ConstraintInstance(t, a, b))
    return ConstraintUniverse(tuple(sorted(instances)))


def main() -> None:
    rng = random.Random(SEED)
    universe = build_universe()
    base_traces = [["A", "B", "C"], ["B", "D", "A", "C"], ["C", "C"],
                   ["A", "B", "A", "B", "D"]]
    bases = [list(fulfillment_vector(universe, t).bits) for t in base_traces]

    interactions = []
    edits: dict[int, int] = {}  # insertion-ordered, like the board's EditMap
    base_index = 0
    for _ in range(N_INTERACTIONS):
        action = rng.random()
        if action < 0.18:
            edits = {}
            interactions.append({"type": "reset"})
        elif action < 0.28:
            base_index = rng.randrange(len(bases))
            edits = {}
            interactions.append({"type": "select-base", "base": base_index})
        else:
            k = rng.randrange(len(universe))
            # tri-state cycle: inherit -> impose 1 -> impose 0 -> inherit
            if k not in edits:
                edits[k] = 1
            elif edits[k] == 1:
                edits[k] = 0
            else:
                del edits[k]
            interactions.append({"type": "toggle", "coordinate": k})

        if not edits:
            verdict = {"runnable": False}
        else:
            vector = fulfillment_vector(universe, base_traces[base_index])
            try:
                phi_s, mask, adjustments = build_phi_s(
                    vector, [ConditionEdit(k, v) for k, v in edits.items()])
            except ConsistencyError as exc:
                verdict = {
                    "runnable": False,
                    "rejected": True,
                    "violations": [str(v) for v in exc.violations],
                }
            else:
                verdict = {
                    "runnable": True,
                    "bits": list(phi_s.bits),
                    "mask": list(mask),
                    "adjustments": {str(k): v for k, v in adjustments.items()},
                }
        interactions[-1]["verdict"] = verdict

    fixture = {
        "seed": SEED,
        "instances": universe.to_json(),
        "bases": bases,
        "interactions": interactions,
    }
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    target = out / "guard-session.json"
    target.write_text(json.dumps(fixture, indent=1, sort_keys=True))
    rejected = sum(1 for i in interactions
                   if i["verdict"].get("rejected"))
    runnable = sum(1 for i in interactions if i["verdict"]["runnable"])
    print(f"wrote {target}: {len(interactions)} interactions, "
          f"{runnable} runnable, {rejected} rejected")


if __name__ == "__main__":
    main()
