"""Independent reference for attack-level classification and metrics.

Regenerates tests/fixtures/metric_oracle.jsonl: 500 random instances
(at most 50 attacks over at most 200 CVEs) with their expected outcome
classes, counts, precision/recall/F1 under each disjoint policy, per-attack
accuracies and numpy box-plot statistics. Run from the repository root:

    python3 tests/oracles/metric_oracle.py
"""
import json
import random

import numpy as np

INSTANCES = 500
SEED = 20240501


def outcome(det, act):
    if det & act:
        return "TP"
    if det and not act:
        return "FP"
    if act and not det:
        return "FN"
    if not det and not act:
        return "TN"
    return "Disjoint"


def prf(counts, policy):
    tp = counts["TP"]
    fp = counts["FP"] + (counts["Disjoint"] if policy in ("fp", "fp-and-fn") else 0)
    fn = counts["FN"] + (counts["Disjoint"] if policy == "fp-and-fn" else 0)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return [p, r, f]


def box(values, excluded):
    if not values:
        return {"count": 0, "excluded": excluded}
    a = np.array(values, dtype=np.float64)
    q1, med, q3 = np.percentile(a, [25, 50, 75])  # linear interpolation
    iqr = q3 - q1
    inside = a[(a >= q1 - 1.5 * iqr) & (a <= q3 + 1.5 * iqr)]
    return {
        "count": len(values), "excluded": excluded,
        "min": float(a.min()), "q1": float(q1), "median": float(med), "q3": float(q3),
        "max": float(a.max()), "mean": float(a.mean()),
        "lower_whisker": float(inside.min()), "upper_whisker": float(inside.max()),
        "outliers": int(len(a) - len(inside)),
    }


def random_set(rng, universe):
    shape = rng.random()
    if shape < 0.25:
        return set()
    k = rng.randint(1, min(15, universe))
    return set(rng.sample(range(universe), k))


def instance(rng):
    attacks = rng.randint(1, 50)
    universe = rng.randint(1, 200)
    rows = []
    for a in range(attacks):
        det = random_set(rng, universe)
        # Correlate some rows so that TP is common.
        if rng.random() < 0.4 and det:
            act = set(rng.sample(sorted(det), rng.randint(1, len(det)))) | random_set(rng, universe)
        else:
            act = random_set(rng, universe)
        rows.append((f"T{1000 + a}", sorted(det), sorted(act)))

    classes, jac, mapa, deta = [], [], [], []
    for _, det, act in rows:
        d, m = set(det), set(act)
        classes.append(outcome(d, m))
        inter, union = len(d & m), len(d | m)
        jac.append(inter / union if union else None)
        mapa.append(inter / len(m) if m else None)
        deta.append(inter / len(d) if d else None)
    counts = {k: classes.count(k) for k in ("TP", "FP", "FN", "TN", "Disjoint")}

    def defined(xs):
        return [x for x in xs if x is not None]

    return {
        "attacks": [{"id": i, "detected": d, "actual": m} for i, d, m in rows],
        "classes": classes,
        "counts": counts,
        "prf": {p: prf(counts, p) for p in ("fp", "fp-and-fn", "exclude")},
        "jaccard": jac,
        "mapping_accuracy": mapa,
        "detection_accuracy": deta,
        "summary": {
            "jaccard": box(defined(jac), jac.count(None)),
            "mapping_accuracy": box(defined(mapa), mapa.count(None)),
            "detection_accuracy": box(defined(deta), deta.count(None)),
        },
    }


def main():
    rng = random.Random(SEED)
    with open("tests/fixtures/metric_oracle.jsonl", "w", encoding="utf-8") as out:
        for _ in range(INSTANCES):
            out.write(json.dumps(instance(rng), separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
