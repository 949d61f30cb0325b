#!/usr/bin/env python3
"""Writes synthetic prediction files for the fixture corpus.

Usage: tools/make_predictions.py [FIXTURE_DIR]

constant_e.jsonl predicts entailment everywhere. noisy_oracle.tsv copies
the gold label with probability 0.8 (otherwise a uniformly chosen wrong
label), carries probabilities, and omits every 40th dev id so that
coverage falls below one.
"""

import json
import random
import sys
from pathlib import Path

LABELS = ["entailment", "contradiction", "neutral"]


def ids_and_gold(path):
    with open(path) as f:
        for line in f:
            if line.strip():
                row = json.loads(line)
                yield row["pairID"], row["gold_label"]


def main():
    d = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/cli/tests/fixtures")
    rows = list(ids_and_gold(d / "dev.jsonl"))
    for name in ("adv_soswap.jsonl", "adv_addamod.jsonl"):
        rows += list(ids_and_gold(d / name))
    rng = random.Random(7)
    with open(d / "constant_e.jsonl", "w") as f:
        for pid, _ in rows:
            f.write(json.dumps({"pairID": pid, "label": "entailment"}) + "\n")
    with open(d / "noisy_oracle.tsv", "w") as f:
        f.write("pairID\tlabel\tpE\tpC\tpN\n")
        for i, (pid, gold) in enumerate(rows):
            if i % 40 == 39:
                continue
            g = gold if gold in LABELS else rng.choice(LABELS)
            label = g if rng.random() < 0.8 else rng.choice([l for l in LABELS if l != g])
            probs = [0.1, 0.1, 0.1]
            probs[LABELS.index(label)] = 0.8
            f.write(f"{pid}\t{label}\t" + "\t".join(f"{p}" for p in probs) + "\n")


if __name__ == "__main__":
    main()
