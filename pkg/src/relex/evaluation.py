"""Official-metric scoring: macro-averaged F1 over the nine directional
relation families, excluding Other.

Directionality counts toward correctness: a prediction is a true positive
for its family only when family AND direction both match the gold label.
Per family, precision divides by every prediction of that family (either
direction) and recall by every gold instance of that family, so wrong
directions and Other-confusions hurt the score without entering the
average. The final score is the unweighted mean over the nine families;
Other is never averaged in.

Worked example (gold vs predicted):
    gold: CE(e1,e2)  CE(e2,e1)  CW(e1,e2)  Other      MT(e1,e2)  CE(e1,e2)
    pred: CE(e1,e2)  CE(e1,e2)  CW(e1,e2)  CE(e1,e2)  Other      CE(e1,e2)
Cause-Effect: TP=2 (records 1 and 6), predicted=4, gold=3 ->
P=1/2, R=2/3, F1=4/7. Component-Whole: P=R=F1=1. Message-Topic: F1=0.
All other families 0. Macro-F1 = (4/7 + 1) / 9 = 0.17460...
"""

from __future__ import annotations

import json

import numpy as np

from .dataset import DEFAULT_SCHEMA, RelationSchema


class ConfusionTally:
    """Counts of (gold, predicted) class pairs over the full label set."""

    def __init__(self, n_classes: int):
        self.counts = np.zeros((n_classes, n_classes), dtype=np.int64)

    def add(self, gold: int, pred: int):
        self.counts[gold, pred] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(gold, pred, schema: RelationSchema = DEFAULT_SCHEMA) -> ConfusionTally:
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} labels, predictions {len(pred)}")
    tally = ConfusionTally(len(schema))
    for g, p in zip(gold, pred):
        tally.add(int(g), int(p))
    return tally


def macro_f1(gold, pred, schema: RelationSchema = DEFAULT_SCHEMA):
    """(score, per-family report) with official directional semantics."""
    tally = confusion(gold, pred, schema)
    families = schema.families()

    fam_gold = {f: 0 for f in families}
    fam_pred = {f: 0 for f in families}
    fam_tp = {f: 0 for f in families}
    for g in range(len(schema)):
        g_fam, _ = schema.family_of(g)
        for p in range(len(schema)):
            count = int(tally.counts[g, p])
            if count == 0:
                continue
            p_fam, _ = schema.family_of(p)
            if g_fam in fam_gold:
                fam_gold[g_fam] += count
            if p_fam in fam_pred:
                fam_pred[p_fam] += count
            if g == p and g_fam in fam_tp:
                fam_tp[g_fam] += count

    per_family = {}
    for fam in families:
        tp, npred, ngold = fam_tp[fam], fam_pred[fam], fam_gold[fam]
        precision = tp / npred if npred > 0 else 0.0
        recall = tp / ngold if ngold > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_family[fam] = {"P": precision, "R": recall, "F1": f1}

    score = sum(per_family[fam]["F1"] for fam in families) / len(families)
    return score, per_family


def accuracy(gold, pred) -> float:
    gold = np.asarray(list(gold))
    pred = np.asarray(list(pred))
    if gold.shape != pred.shape:
        raise ValueError("gold and predictions disagree in length")
    if gold.size == 0:
        return 0.0
    return float((gold == pred).mean())


def write_predictions(ids, pred, path, schema: RelationSchema = DEFAULT_SCHEMA) -> None:
    """One ``<id>\\t<relation-name>`` line per example, official format."""
    ids = list(ids)
    pred = list(pred)
    if len(ids) != len(pred):
        raise ValueError("ids and predictions disagree in length")
    with open(path, "w", encoding="utf-8") as fh:
        for rec_id, label in zip(ids, pred):
            fh.write(f"{rec_id}\t{schema.name_of(int(label))}\n")


def score_report(gold, pred, schema: RelationSchema = DEFAULT_SCHEMA) -> dict:
    gold = list(gold)
    pred = list(pred)
    score, per_family = macro_f1(gold, pred, schema)
    return {
        "macroF1": score,
        "perFamily": per_family,
        "accuracy": accuracy(gold, pred),
        "count": len(gold),
    }


def write_score_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
