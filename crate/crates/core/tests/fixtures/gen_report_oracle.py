"""Independent scorer for report_fixture.json.

Enumerates every order-preserving matching per step, keeps the unique best
one whose pairs all have positive similarity, then tallies confusion
matrices per attribute. Writes report_oracle.json.
"""
import itertools
import json
import math
import os
from collections import Counter, defaultdict

HERE = os.path.dirname(os.path.abspath(__file__))


def toks(a):
    if a["action_type"] == "KeyboardAction":
        if a["keyboard_action_type"] == "press":
            return a["keyboard_key"].split("+")
        return a["keyboard_text"].split()
    if a["action_type"] == "PlanAction":
        return a["element"].split()
    return []


def bleu1(ref, hyp):
    if not hyp:
        return 0.0
    rc = Counter(ref)
    clipped = sum(min(c, rc[t]) for t, c in Counter(hyp).items())
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1 - len(ref) / len(hyp))
    return clipped / len(hyp) * bp


def pos(a):
    p = a.get("mouse_position")
    return None if p is None else (p["width"], p["height"])


def hit(g, p):
    gp = pos(g)
    if gp is None:
        return 1
    pp = pos(p)
    if pp is None:
        return 0
    b = g.get("bbox")
    if b is None:
        return int(gp == pp)
    return int(b["left"] <= pp[0] <= b["right"] and b["top"] <= pp[1] <= b["bottom"])


def sim(g, p):
    if g["action_type"] != p["action_type"]:
        return 0.0
    t = g["action_type"]
    if t == "MouseAction":
        mt = int(g["mouse_action_type"] == p["mouse_action_type"])
        btn = 1 if "mouse_button" not in g else int(g["mouse_button"] == p.get("mouse_button"))
        return (1 + mt + btn + hit(g, p)) / 4
    if t in ("KeyboardAction", "PlanAction"):
        return (1 + bleu1(toks(g), toks(p))) / 2
    if t == "EvaluateSubTaskAction":
        return (1 + int(g["situation"] == p["situation"])) / 2
    return 1.0


def matchings(n, m):
    for k in range(min(n, m) + 1):
        for gi in itertools.combinations(range(n), k):
            for pj in itertools.combinations(range(m), k):
                yield list(zip(gi, pj))


def best(gold, pred):
    s = [[sim(g, p) for p in pred] for g in gold]
    scored = []
    for mt in matchings(len(gold), len(pred)):
        if all(s[i][j] > 0 for i, j in mt):
            scored.append((sum(s[i][j] for i, j in mt), mt))
    top = max(t for t, _ in scored)
    winners = [mt for t, mt in scored if abs(t - top) < 1e-12]
    assert len(winners) == 1, winners
    return top, winners[0], s


def macro_f1(pairs):
    tp, fp, fn = defaultdict(int), defaultdict(int), defaultdict(int)
    for g, p in pairs:
        if g is not None and g == p:
            tp[g] += 1
            continue
        if p is not None:
            fp[p] += 1
        if g is not None:
            fn[g] += 1
    classes = set(tp) | set(fp) | set(fn)
    if not classes:
        return None
    return sum(2 * tp[c] / (2 * tp[c] + fp[c] + fn[c]) for c in classes) / len(classes)


def main():
    steps = json.load(open(os.path.join(HERE, "report_fixture.json")))
    cc, matched = [], 0
    atype, mtype, button, situation = [], [], [], []
    plan, keyboard, position = [], [], []

    def kind(a):
        return None if a["action_type"] == "EvaluateSubTaskAction" else a["action_type"]

    def mouse(a, key):
        return a.get(key) if a["action_type"] == "MouseAction" else None

    def sit(a):
        return a.get("situation")

    for st in steps:
        gold, pred = st["gold"], st["pred"]
        total, mt, s = best(gold, pred)
        cc.append(total / len(gold))
        matched += len(mt)
        gi = {i for i, _ in mt}
        pj = {j for _, j in mt}
        for i, j in mt:
            g, p = gold[i], pred[j]
            atype.append((kind(g), kind(p)))
            situation.append((sit(g), sit(p)))
            if g["action_type"] == "MouseAction":
                mtype.append((mouse(g, "mouse_action_type"), mouse(p, "mouse_action_type")))
                button.append((mouse(g, "mouse_button"), mouse(p, "mouse_button")))
                if pos(g) is not None:
                    position.append(hit(g, p))
            elif g["action_type"] == "KeyboardAction":
                keyboard.append(bleu1(toks(g), toks(p)))
            elif g["action_type"] == "PlanAction":
                plan.append(bleu1(toks(g), toks(p)))
        for i, g in enumerate(gold):
            if i not in gi:
                atype.append((kind(g), None))
                situation.append((sit(g), None))
                mtype.append((mouse(g, "mouse_action_type"), None))
                button.append((mouse(g, "mouse_button"), None))
        for j, p in enumerate(pred):
            if j not in pj:
                atype.append((None, kind(p)))
                situation.append((None, sit(p)))
                mtype.append((None, mouse(p, "mouse_action_type")))
                button.append((None, mouse(p, "mouse_button")))

    def avg(xs):
        return sum(xs) / len(xs) if xs else None

    out = {
        "cc_score": avg(cc),
        "plan_bleu": avg(plan),
        "action_type_f1": macro_f1(atype),
        "mouse_action_type_f1": macro_f1(mtype),
        "mouse_button_f1": macro_f1(button),
        "mouse_position_accuracy": avg(position),
        "keyboard_bleu": avg(keyboard),
        "reflecting_situation_f1": macro_f1(situation),
        "matched_pairs": matched,
        "step_cc_scores": cc,
    }
    json.dump(out, open(os.path.join(HERE, "report_oracle.json"), "w"), indent=2)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
