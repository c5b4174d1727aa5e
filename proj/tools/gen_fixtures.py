#!/usr/bin/env python3
"""Writes the small synthetic corpora under fixtures/corpora.

Utterances are stitched from neutral filler. A turn carries its label's cue
word (fixtures/synthetic_cues.json) only part of the time, which is what lets
the synthetic model's rationales add information.
"""
import argparse
import json
import random
import re
from pathlib import Path

OWN_CUE = 0.45
DISTRACTOR = 0.08

ERC_WEIGHTS = {"neutral": 35, "joy": 15, "sadness": 10, "surprise": 12,
               "fear": 6, "disgust": 6, "anger": 10, "other": 6}
RES_WEIGHTS = {"Not a resistance strategy": 40, "Source Derogation": 8, "Counter Argument": 9,
               "Personal Choice": 9, "Information Inquiry": 10, "Self Pity": 8,
               "Hesitance": 9, "Self-assertion": 7}

ERC_OPENERS = ["Well,", "So", "Look,", "Hey,", "Honestly,", "Wait,", "Oh,", "Listen,", "Yeah,", "Right,"]
ERC_BODIES = [
    "we were at the coffee place all afternoon", "I just got back from the museum",
    "the new apartment has a tiny kitchen", "my sister called about the wedding",
    "the duck got out of the bathroom again", "somebody took my seat on the couch",
    "the interview was moved to Thursday", "I left my keys at the restaurant",
    "they are repainting the hallway", "the guitar lessons start next week",
    "the cab driver took the long way", "my boss wants the report by noon",
    "the neighbors are moving to Ohio", "I found a letter from my grandmother",
    "we are out of milk and cereal", "the play closes on Saturday",
    "the dinosaur exhibit opens tomorrow", "I saw your ex at the bakery",
    "the laundry room flooded last night", "my audition went long",
    "the ugly naked guy bought a lamp", "there is a spider in the shower",
    "the tickets cost more than we thought", "I ran into the landlord downstairs",
]
ERC_TAILS = ["", "you know?", "right now.", "again.", "this morning.", "if you can believe it.",
             "for the third time.", "apparently.", "I guess.", "as usual."]

RES_BODIES = {
    "Persuadee": [
        "I usually give to the food bank", "I have heard of Save the Children before",
        "my budget is tight this month", "the bonus payment is pretty small",
        "I donated to a school fundraiser last year", "I need to think about the amount",
        "the website looks very polished", "my cousin works for a charity",
        "two dollars is not much money", "I would rather volunteer on weekends",
        "I am not sure the money reaches the kids", "there are charities closer to home",
    ],
    "Buyer": [
        "the listing says the bike is barely used", "the couch has a stain on the arm",
        "I can pick it up on Saturday", "the price seems high for the model year",
        "I saw a similar lamp for less", "my truck can fit the table",
        "the photos do not show the back", "I only need it for a semester",
        "the tires look worn in the picture", "the phone case is scratched",
        "my budget for this is limited", "the seller down the street asks less",
    ],
}
RES_OPENERS = ["Well,", "Hmm,", "Honestly,", "Okay so", "Look,", "I mean,", "Actually,", "Yes,"]
RES_TAILS = ["", "though.", "at the moment.", "for now.", "to be fair.", "this week."]
RES_OTHER = {
    "Persuader": [
        "Would you like to donate part of your bonus to Save the Children?",
        "Even a small amount helps children overseas.",
        "The charity provides food and schooling.",
        "You can donate anything from zero to two dollars.",
        "Thank you for considering it.",
        "Many donors start with a small gift.",
    ],
    "Seller": [
        "It is in great shape and I am asking a fair price.",
        "I can include the charger with it.",
        "Someone else is coming to look tomorrow.",
        "The price is firm but I can deliver.",
        "It has been kept indoors the whole time.",
        "Let me know what works for you.",
    ],
}


def pick(rng, weights):
    labels = list(weights)
    return rng.choices(labels, [weights[l] for l in labels])[0]


class Utterances:
    def __init__(self, rng, cues, openers, bodies, tails):
        self.rng, self.cues = rng, cues
        self.openers, self.bodies, self.tails = openers, bodies, tails
        self.seen = set()
        words = set(re.findall(r"[a-z']+", " ".join(openers + bodies + tails).lower()))
        clash = words & {c.lower() for c in cues.values()}
        assert not clash, f"filler text contains cue words: {clash}"

    def make(self, label):
        for _ in range(1000):
            parts = [self.rng.choice(self.openers), self.rng.choice(self.bodies)]
            if self.rng.random() < OWN_CUE:
                parts.append(f"and it is {self.cues[label]}")
            if self.rng.random() < DISTRACTOR:
                other = self.rng.choice([l for l in self.cues if l != label])
                parts.append(f"not that it is {self.cues[other]}")
            tail = self.rng.choice(self.tails)
            text = " ".join(parts) + (f", {tail}" if tail else ".")
            if text not in self.seen:
                self.seen.add(text)
                return text
        raise RuntimeError("ran out of distinct utterances")


def erc_corpus(rng, cues, prefix, domain, speakers, n_dialogues, turns):
    gen = Utterances(rng, cues, ERC_OPENERS, ERC_BODIES, ERC_TAILS)
    out = []
    for d in range(n_dialogues):
        cast = rng.sample(speakers, 2 if len(speakers) == 2 else 3)
        rows = []
        for t in range(rng.randint(*turns)):
            label = pick(rng, ERC_WEIGHTS)
            rows.append({"speaker": cast[t % len(cast)], "text": gen.make(label), "label": label})
        out.append({"dialogue_id": f"{prefix}{d:03d}", "domain": domain, "turns": rows})
    return out


def res_corpus(rng, cues, prefix, domain, resister, other, n_dialogues, turns):
    gen = Utterances(rng, cues, RES_OPENERS, RES_BODIES[resister], RES_TAILS)
    out = []
    for d in range(n_dialogues):
        rows = []
        for t in range(rng.randint(*turns)):
            if t % 2 == 0:
                rows.append({"speaker": other, "text": RES_OTHER[other][(d + t) % len(RES_OTHER[other])],
                             "label": None})
            else:
                label = pick(rng, RES_WEIGHTS)
                rows.append({"speaker": resister, "text": gen.make(label), "label": label})
        out.append({"dialogue_id": f"{prefix}{d:03d}", "domain": domain, "turns": rows})
    return out


def write(path, dialogues):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for d in dialogues:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", default=Path(__file__).resolve().parent.parent / "fixtures", type=Path)
    args = ap.parse_args()
    cues = json.loads((args.root / "synthetic_cues.json").read_text())
    corpora = args.root / "corpora"

    write(corpora / "friends_synth.jsonl",
          erc_corpus(random.Random(101), cues["ERC"], "fr", "Friends",
                     ["Rachel", "Ross", "Monica", "Chandler", "Joey", "Phoebe"], 20, (7, 7)))
    write(corpora / "iemocap_synth.jsonl",
          erc_corpus(random.Random(202), cues["ERC"], "iem", "IEMOCAP", ["Augie", "Joan"], 7, (8, 12)))
    write(corpora / "p4g_synth.jsonl",
          res_corpus(random.Random(303), cues["RES"], "p4g", "P4G", "Persuadee", "Persuader", 16, (6, 10)))
    write(corpora / "cb_synth.jsonl",
          res_corpus(random.Random(404), cues["RES"], "cb", "CB", "Buyer", "Seller", 16, (6, 10)))


if __name__ == "__main__":
    main()
