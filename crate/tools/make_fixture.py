#!/usr/bin/env python3
"""Writes the synthetic NLI fixture corpora and dependency parses.

Usage: tools/make_fixture.py [OUT_DIR]   (default crates/cli/tests/fixtures)

Output is a pure function of SEED. Sentences come from a small grammar so
that PTB parses, CoNLL-U trees and labels are all known by construction.
"""

import json
import random
import sys
from pathlib import Path

SEED = 20181101

ANIMATE = ["man", "woman", "boy", "girl", "dog", "child", "player", "cat"]
THINGS = ["ball", "car", "bike", "horse", "guitar", "book", "kite", "apple", "umbrella"]
HYPERNYM = {
    "man": "person", "woman": "person", "boy": "child", "girl": "child",
    "dog": "animal", "cat": "animal", "child": "person", "player": "person",
}
ADJS = ["red", "small", "young", "old", "tall", "happy", "black", "wooden", "orange", "big"]
TRANSITIVE = ["chases", "kicks", "holds", "rides", "watches", "throws", "carries", "pets", "pushes", "follows"]
INTRANSITIVE = ["sleeps", "runs", "sits", "jumps", "smiles"]
COMPOUNDS = [("soccer", "ball"), ("toy", "car"), ("mountain", "bike")]
PROPER = ["John", "Mary"]
PRONOUNS = [("He", "PRP"), ("She", "PRP"), ("They", "PRP")]
NEUTRAL_TAILS = [["for", "fun"], ["for", "a", "friend"], ["after", "school"]]


def lemma(verb):
    for suf in ("ches", "shes", "sses", "rries"):
        if verb.endswith(suf):
            return verb[:-2] if suf != "rries" else verb[:-3] + "y"
    return verb[:-1] if verb.endswith("s") else verb


def article(word, definite):
    if definite:
        return "the"
    return "an" if word[0] in "aeiou" else "a"


class NP:
    """det? adj* compound* head, or a pronoun / proper noun."""

    def __init__(self, head, adjs=(), compound=None, definite=False, kind="common"):
        self.head = head
        self.adjs = list(adjs)
        self.compound = compound
        self.definite = definite
        self.kind = kind

    def tokens(self):
        if self.kind == "pronoun":
            return [(self.head[0], self.head[1], "PRON", "head")]
        if self.kind == "proper":
            return [(self.head, "NNP", "PROPN", "head")]
        first = self.adjs[0] if self.adjs else (self.compound or self.head)
        out = [(article(first, self.definite), "DT", "DET", "det")]
        out += [(a, "JJ", "ADJ", "amod") for a in self.adjs]
        if self.compound:
            out.append((self.compound, "NN", "NOUN", "compound"))
        out.append((self.head, "NN", "NOUN", "head"))
        return out


class Sentence:
    def __init__(self, subj, verb, obj=None, tail=None, pp=None):
        self.subj = subj
        self.verb = verb
        self.obj = obj
        self.tail = tail or []
        self.pp = pp

    def layout(self):
        """Rows of (form, xpos, upos, role, group) in surface order."""
        rows = [(f, x, u, r, "subj") for f, x, u, r in self.subj.tokens()]
        rows.append((self.verb, "VBZ", "VERB", "verb", "verb"))
        if self.obj:
            rows += [(f, x, u, r, "obj") for f, x, u, r in self.obj.tokens()]
        if self.pp:
            prep, np = self.pp
            rows.append((prep, "IN", "ADP", "case", "pp"))
            rows += [(f, x, u, r, "pp") for f, x, u, r in np.tokens()]
        for i, w in enumerate(self.tail):
            x, u = ("IN", "ADP") if i == 0 else ("NN", "NOUN") if w not in ("a",) else ("DT", "DET")
            rows.append((w, x, u, "tail", "tail"))
        rows.append((".", ".", "PUNCT", "punct", "punct"))
        return rows

    def words(self):
        rows = self.layout()
        out = [r[0] for r in rows]
        out[0] = out[0][0].upper() + out[0][1:]
        return out, [r[1] for r in rows]

    def text(self):
        w, _ = self.words()
        return " ".join(w[:-1]) + "."

    def ptb(self):
        words, tags = self.words()
        rows = self.layout()
        groups = {}
        order = []
        for (w, t), r in zip(zip(words, tags), rows):
            g = r[4]
            if g not in groups:
                groups[g] = []
                order.append(g)
            groups[g].append(f"({t} {w})")
        def np(g):
            return f"(NP {' '.join(groups[g])})"
        vp = [groups["verb"][0]]
        if "obj" in groups:
            vp.append(np("obj"))
        if "pp" in groups:
            vp.append(f"(PP {groups['pp'][0]} (NP {' '.join(groups['pp'][1:])}))")
        if "tail" in groups:
            t = groups["tail"]
            vp.append(f"(PP {t[0]} (NP {' '.join(t[1:])}))")
        return f"(ROOT (S {np('subj')} (VP {' '.join(vp)}) {groups['punct'][0]}))"

    def conllu(self, pair_id, rng):
        words, _ = self.words()
        rows = self.layout()
        idx = {g: [i + 1 for i, r in enumerate(rows) if r[4] == g] for g in {r[4] for r in rows}}
        heads = {}
        for g in ("subj", "obj", "pp"):
            if g in idx:
                heads[g] = [i + 1 for i, r in enumerate(rows) if r[4] == g and r[3] == "head"][0]
        verb = idx["verb"][0]
        obj_rel = "dobj" if rng.random() < 0.2 else "obj"
        lines = [f"# pair_id = {pair_id}", f"# text = {self.text()}"]
        for i, (r, w) in enumerate(zip(rows, words), start=1):
            form, xpos, upos, role, group = r
            if role == "verb":
                head, rel = 0, "root"
            elif role == "punct":
                head, rel = verb, "punct"
            elif role == "tail" and i == idx["tail"][-1]:
                head, rel = verb, "obl"
            elif role == "tail":
                head, rel = idx["tail"][-1], "case" if xpos == "IN" else "det"
            elif role == "head":
                head, rel = verb, {"subj": "nsubj", "obj": obj_rel, "pp": "obl"}[group]
            elif role == "case":
                head, rel = heads["pp"], "case"
            else:
                head, rel = heads[group], role
            lem = lemma(form) if upos == "VERB" else form.lower()
            lines.append("\t".join([str(i), w, lem, upos, xpos, "_", str(head), rel, "_", "_"]))
        return "\n".join(lines) + "\n"


def rand_np(rng, pool, definite=None, adj_p=0.3, compound_p=0.0):
    if compound_p and rng.random() < compound_p:
        c, h = rng.choice(COMPOUNDS)
        return NP(h, compound=c, definite=rng.random() < 0.5)
    adjs = [rng.choice(ADJS)] if rng.random() < adj_p else []
    return NP(rng.choice(pool), adjs, definite=rng.random() < 0.5 if definite is None else definite)


def premise(rng):
    r = rng.random()
    if r < 0.55:
        s = rand_np(rng, ANIMATE)
        o = rand_np(rng, ANIMATE + THINGS, compound_p=0.15)
        while o.head == s.head and o.kind == "common" and rng.random() < 0.9:
            o = rand_np(rng, ANIMATE + THINGS)
        return Sentence(s, rng.choice(TRANSITIVE), o)
    if r < 0.65:
        return Sentence(NP(rng.choice(PRONOUNS), kind="pronoun"), rng.choice(TRANSITIVE), rand_np(rng, THINGS))
    if r < 0.72:
        return Sentence(NP(rng.choice(PROPER), kind="proper"), rng.choice(TRANSITIVE), rand_np(rng, THINGS))
    if r < 0.77:
        n = rng.choice(ANIMATE)
        return Sentence(NP(n, definite=False), rng.choice(TRANSITIVE), NP(n, definite=True))
    s = rand_np(rng, ANIMATE, adj_p=0.5)
    return Sentence(s, rng.choice(INTRANSITIVE), pp=("in", NP("park", definite=True)))


def hypothesis(rng, p, label):
    subj = p.subj
    if label == "entailment":
        if subj.kind == "common" and subj.head in HYPERNYM:
            subj = NP(HYPERNYM[subj.head], definite=subj.definite)
        return Sentence(subj, p.verb, p.obj and NP(p.obj.head, compound=p.obj.compound, definite=p.obj.definite,
                                                   kind=p.obj.kind), pp=p.pp)
    if label == "contradiction":
        if p.obj and p.subj.kind == "common" and p.obj.kind == "common" and rng.random() < 0.35:
            return Sentence(p.obj, p.verb, p.subj)
        if p.verb in INTRANSITIVE:
            other = rng.choice([v for v in INTRANSITIVE if v != p.verb])
            return Sentence(subj, other, pp=p.pp)
        return Sentence(NP("Nobody", kind="proper"), p.verb, p.obj)
    tail = rng.choice(NEUTRAL_TAILS)
    if subj.kind == "common" and not subj.adjs and rng.random() < 0.5:
        subj = NP(subj.head, [rng.choice(["sad", "tired", "famous"])], definite=subj.definite)
        tail = []
    return Sentence(subj, p.verb, p.obj, tail=tail, pp=p.pp)


def annotators(rng, gold, n):
    labels = ["entailment", "contradiction", "neutral"]
    if gold == "-":
        a, b = rng.sample(labels, 2)
        votes = [a, a, b, b, rng.choice([l for l in labels if l not in (a, b)])]
        rng.shuffle(votes)
        return votes
    votes = [gold]
    for _ in range(n - 1):
        votes.append(gold if rng.random() < 0.85 else rng.choice([l for l in labels if l != gold]))
    return votes


def example(rng, pair_id, p, annotated):
    label = rng.choice(["entailment", "contradiction", "neutral"])
    h = hypothesis(rng, p, label)
    gold = "-" if annotated and rng.random() < 0.05 else label
    ann = annotators(rng, gold, 5 if annotated else 1)
    if annotated and gold != "-" and ann.count(gold) < 3:
        gold = "-"
    return {
        "annotator_labels": ann,
        "captionID": f"{pair_id.split('#')[0]}#0",
        "gold_label": gold,
        "pairID": pair_id,
        "sentence1": p.text(),
        "sentence1_binary_parse": "",
        "sentence1_parse": p.ptb(),
        "sentence2": h.text(),
        "sentence2_binary_parse": "",
        "sentence2_parse": h.ptb(),
    }


def corpus(rng, prefix, n, annotated):
    rows, trees = [], []
    for i in range(n):
        pid = f"{prefix}{i:04d}#r1"
        p = premise(rng)
        rows.append(example(rng, pid, p, annotated))
        trees.append(p.conllu(pid, rng))
    return rows, trees


MALFORMED = [
    "# pair_id = bad-cycle\n1\tA\ta\tDET\tDT\t_\t2\tdet\t_\t_\n2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_\n"
    "3\truns\trun\tVERB\tVBZ\t_\t2\troot\t_\t_\n",
    "# pair_id = bad-head\n1\tA\ta\tDET\tDT\t_\tx\tdet\t_\t_\n2\tcat\tcat\tNOUN\tNN\t_\t0\troot\t_\t_\n",
    "# pair_id = bad-roots\n1\tDogs\tdog\tNOUN\tNNS\t_\t0\troot\t_\t_\n2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t_\t_\n",
]


def write_jsonl(path, rows):
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/cli/tests/fixtures")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    train, train_trees = corpus(rng, "t", 200, annotated=False)
    dev, dev_trees = corpus(rng, "d", 200, annotated=True)
    for k in (17, 123):
        dev[k].pop("sentence1_parse")
        dev[k].pop("sentence2_parse")
    for k in range(0, 200, 40):
        dev[k]["genre"] = "captions"
    write_jsonl(out / "train.jsonl", train)
    write_jsonl(out / "dev.jsonl", dev)
    # one premise parse is corrupted so that its example stays unaligned
    dev_trees[60] = MALFORMED[0].replace("bad-cycle", dev[60]["pairID"])
    (out / "dev.conllu").write_text("\n".join(dev_trees))
    mixed = train_trees[:97]
    for k, bad in zip((10, 50, 90), MALFORMED):
        mixed.insert(k, bad)
    (out / "sample100.conllu").write_text("\n".join(mixed))


if __name__ == "__main__":
    main()
