#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Recounts the survey fixture with plain Python, independently of the C++ code.

Usage: fixture_counts.py <fixture_dir> [dataset.jsonl]

Prints set sizes and per-subset entry counts as JSON. With a dataset file
produced by `surveysim build-data`, compares every target distribution and
exits non-zero on any mismatch.
"""
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

INVALID = {"not applicable", "refuse to answer"}


def recount(fixture):
    config = json.loads((fixture / "config.json").read_text())
    codebook = json.loads((fixture / "codebook.json").read_text())
    with open(fixture / "microdata.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))

    respondents = defaultdict(int)
    for row in rows:
        respondents[row["country"]] += 1
    minimum = config["data"]["min_respondents"]
    kept = sorted(c for c, n in respondents.items() if n > minimum)

    ignore = set(codebook["ignore_codes"])
    skipped = ignored = 0
    questions = {}
    dists = {}
    for q in codebook["questions"]:
        codes = [o["code"] for o in q["options"]]
        labels = [o["label"] for o in q["options"]]
        if len(codes) < 2:
            continue
        tallies = defaultdict(lambda: [0] * len(codes))
        for row in rows:
            code = row[q["column"]].strip()
            if code in codes:
                tallies[row["country"]][codes.index(code)] += 1
            elif code in ignore:
                ignored += 1
            elif code:
                skipped += 1
        keep = [i for i, lab in enumerate(labels) if lab.strip().lower() not in INVALID]
        if len(keep) < 2:
            continue
        questions[q["id"]] = [labels[i] for i in keep]
        for country, counts in tallies.items():
            if country not in kept:
                continue
            sub = [counts[i] for i in keep]
            total = sum(sub)
            if total == 0:
                continue
            dists[(country, q["id"])] = [v / total for v in sub]

    splits = config["splits"]
    c2, c3 = splits["C2"], splits["C3"]
    countries_with_data = sorted({c for c, _ in dists})
    c1 = [c for c in countries_with_data if c not in c2 and c not in c3]
    q2, q3 = splits["Q2"], splits["Q3"]
    excluded = set(splits.get("exclude_questions", []))
    q1 = [q for q in sorted(questions) if q not in q2 and q not in q3 and q not in excluded]
    sets = {"C1": c1, "C2": c2, "C3": c3, "Q1": q1, "Q2": q2, "Q3": q3}
    assignments = [("train", "C1", "Q1"), ("valid", "C1", "Q2"), ("C1-Q3", "C1", "Q3"), ("C2-Q1", "C2", "Q1"),
                   ("C2-Q3", "C2", "Q3"), ("C3-Q1", "C3", "Q1"), ("C3-Q3", "C3", "Q3")]
    subsets = {}
    for name, cs, qs in assignments:
        subsets[name] = [(c, q) for c in sorted(sets[cs]) for q in sorted(sets[qs]) if (c, q) in dists]
    return {
        "countries_retained": len(kept),
        "skipped_answers": skipped,
        "ignored_answers": ignored,
        "sets": {k: len(v) for k, v in sets.items()},
        "entries": {k: len(v) for k, v in subsets.items()},
    }, subsets, dists


def main():
    fixture = Path(sys.argv[1])
    summary, subsets, dists = recount(fixture)
    print(json.dumps(summary, indent=2, sort_keys=True))
    if len(sys.argv) < 3:
        return 0
    seen = defaultdict(list)
    with open(sys.argv[2], encoding="utf-8") as f:
        for line in f:
            row = json.loads(line)
            seen[row["subset"]].append((row["country"], row["question_id"], row["target_probs"]))
    bad = 0
    for name, pairs in subsets.items():
        got = seen.get(name, [])
        if [(c, q) for c, q, _ in got] != pairs:
            print(f"subset {name}: entry list differs", file=sys.stderr)
            bad += 1
            continue
        for c, q, probs in got:
            want = dists[(c, q)]
            if len(probs) != len(want) or any(abs(a - b) > 1e-12 for a, b in zip(probs, want)):
                print(f"{name} {c} Q{q}: {probs} != {want}", file=sys.stderr)
                bad += 1
    extra = set(seen) - set(subsets)
    if extra:
        print(f"unexpected subsets {sorted(extra)}", file=sys.stderr)
        bad += 1
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
