#!/usr/bin/env python3
"""Writes fixtures/labeled_field.json, the small labeled field used by `mpmedit analyze`."""

import argparse
import json
import random


def build(seed: int, n: int, classes: int = 6, prompts: int = 2) -> dict:
    rng = random.Random(seed)
    positions, parts = [], []
    for i in range(n):
        part = i % 2
        x = rng.uniform(-0.5, -0.05) if part == 0 else rng.uniform(0.05, 0.5)
        positions.append([x, rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)])
        parts.append(part)
    part_class = {0: 0, 1: 5}  # elastic body, rigid handle
    labels = [part_class[p] for p in parts]
    class_logits = [[rng.gauss(0.0, 1.0) + (2.0 if c == labels[i] else 0.0) for c in range(classes)]
                    for i in range(n)]
    part_mean = {0: [0.2, 0.5, -0.3], 1: [1.2, -0.8, 0.9]}
    pred = [[part_mean[p][k] + rng.gauss(0.0, 0.3) for k in range(3)] for p in parts]
    target = [[part_mean[p][k] + rng.gauss(0.0, 0.05) for k in range(3)] for p in parts]
    raw = [[rng.gauss(0.0, 0.1) + (0.1 if k == parts[i] else 0.0) for k in range(prompts)] for i in range(n)]
    triplets = []
    while len(triplets) < 24:
        a, p, q = rng.randrange(n), rng.randrange(n), rng.randrange(n)
        if a != p and parts[a] == parts[p] and parts[q] != parts[a]:
            triplets.append([a, p, q])
    return {
        "format": "mpmedit.analysis_fixture",
        "positions": positions,
        "class_logits": class_logits,
        "pred_params": pred,
        "raw_logits": raw,
        "targets": {
            "class_labels": labels,
            "params": target,
            "part_labels": parts,
            "prompt_of_part": {"0": 0, "1": 1},
        },
        "triplets": triplets,
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("-o", "--output", default="fixtures/labeled_field.json")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("-n", type=int, default=40)
    args = ap.parse_args()
    with open(args.output, "w") as f:
        json.dump(build(args.seed, args.n), f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
