#!/usr/bin/env python3
"""Generate the synthetic BigBench-style task manifests under data/ and the
demo mock scripts under configs/.

The records are synthetic stand-ins with the same shape as the original tasks
(object_counting, navigate, snarks, question_selection) so the full pipeline
can run offline. Regeneration is deterministic: rerunning this script yields
byte-identical files.

Usage: python3 scripts/make_synthetic_data.py
"""

import json
import os
import random

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")
CONFIGS = os.path.join(ROOT, "configs")

FRUITS = ["apple", "banana", "grape", "peach", "plum", "pear", "fig", "mango",
          "cherry", "melon", "lemon", "kiwi"]
VEGETABLES = ["potato", "yam", "cabbage", "carrot", "onion", "leek", "turnip",
              "radish", "pumpkin", "celery stalk", "broccoli head", "garlic"]
INSTRUMENTS = ["trumpet", "flute", "drum", "violin", "piano", "trombone",
               "clarinet", "accordion", "banjo", "cello"]
ANIMALS = ["cat", "dog", "mouse", "rabbit", "goat", "donkey", "chicken",
           "duck", "frog", "snail"]
FURNITURE = ["chair", "table", "lamp", "couch", "stool", "bed", "shelf",
             "bench", "mirror", "wardrobe"]
CATEGORIES = [("fruits", FRUITS), ("vegetables", VEGETABLES),
              ("musical instruments", INSTRUMENTS), ("animals", ANIMALS),
              ("pieces of furniture", FURNITURE)]
NUMBER_WORDS = {2: "two", 3: "three", 4: "four", 5: "five"}


def article(noun):
    return "an" if noun[0] in "aeiou" else "a"


def phrase(noun, count):
    if count == 1:
        return f"{article(noun)} {noun}"
    plural = noun + ("es" if noun.endswith(("s", "x", "ch")) else "s")
    return f"{NUMBER_WORDS[count]} {plural}"


def gen_object_counting(rng, n):
    records = []
    for _ in range(n):
        cat_name, cat_items = CATEGORIES[rng.randrange(len(CATEGORIES))]
        other = CATEGORIES[rng.randrange(len(CATEGORIES))][1]
        k_target = rng.randint(2, 5)
        k_noise = rng.randint(0, 3)
        picks, total = [], 0
        for item in rng.sample(cat_items, k_target):
            c = rng.choice([1, 1, 1, 2, 3, 4, 5])
            picks.append(phrase(item, c))
            total += c
        noise_pool = [x for x in other if x not in cat_items]
        for item in rng.sample(noise_pool, min(k_noise, len(noise_pool))):
            picks.append(phrase(item, rng.choice([1, 1, 2])))
        rng.shuffle(picks)
        listing = ", ".join(picks[:-1]) + (", and " + picks[-1] if len(picks) > 1 else picks[0])
        inp = f"I have {listing}. How many {cat_name} do I have?"
        records.append({"input": inp, "gold": str(total)})
    return records


def gen_navigate(rng, n):
    records = []
    for _ in range(n):
        steps = []
        pos = [0, 0]
        heading = [0, 1]
        always_forward = rng.random() < 0.4
        if always_forward:
            steps.append("Always face forward.")

        def turn_left(h):
            return [-h[1], h[0]]

        def turn_right(h):
            return [h[1], -h[0]]

        k = rng.randint(3, 7)
        for _ in range(k):
            move = rng.randrange(6)
            if move == 0 and not always_forward:
                heading = [-heading[0], -heading[1]]
                steps.append("Turn around.")
            elif move == 1 and not always_forward:
                heading = turn_left(heading)
                steps.append("Turn left.")
            elif move == 2 and not always_forward:
                heading = turn_right(heading)
                steps.append("Turn right.")
            else:
                d = rng.randint(1, 9)
                kind = rng.randrange(4) if always_forward else 4
                if kind == 0:
                    pos = [pos[0], pos[1] + d]
                    steps.append(f"Take {d} step{'s' if d > 1 else ''} forward.")
                elif kind == 1:
                    pos = [pos[0], pos[1] - d]
                    steps.append(f"Take {d} step{'s' if d > 1 else ''} backward.")
                elif kind == 2:
                    pos = [pos[0] - d, pos[1]]
                    steps.append(f"Take {d} step{'s' if d > 1 else ''} left.")
                elif kind == 3:
                    pos = [pos[0] + d, pos[1]]
                    steps.append(f"Take {d} step{'s' if d > 1 else ''} right.")
                else:
                    pos = [pos[0] + d * heading[0], pos[1] + d * heading[1]]
                    steps.append(f"Take {d} step{'s' if d > 1 else ''}.")
        # half the time, walk straight back so the answer mix stays balanced
        if rng.random() < 0.5 and pos != [0, 0]:
            if not always_forward:
                heading = [-heading[0], -heading[1]]
                steps.append("Turn around.")
                d = abs(pos[0]) + abs(pos[1])
                if pos[0] == 0 or pos[1] == 0:
                    pos = [0, 0]
                    steps.append(f"Take {d} step{'s' if d > 1 else ''}.")
            else:
                if pos[0] != 0:
                    d = abs(pos[0])
                    steps.append(f"Take {d} step{'s' if d > 1 else ''} "
                                 f"{'left' if pos[0] > 0 else 'right'}.")
                    pos[0] = 0
                if pos[1] != 0:
                    d = abs(pos[1])
                    steps.append(f"Take {d} step{'s' if d > 1 else ''} "
                                 f"{'backward' if pos[1] > 0 else 'forward'}.")
                    pos[1] = 0
        gold = "A" if pos == [0, 0] else "B"
        records.append({
            "input": " ".join(steps),
            "gold": gold,
            "choices": [{"label": "A", "text": "True"}, {"label": "B", "text": "False"}],
        })
    return records


SNARK_PAIRS = [
    ("{team} beat the 1st ranked team. Surely that should settle the debate.",
     "{team} beat the 19th ranked team. Surely that should settle the debate."),
    ("The odds of {thing} breaking down twice in one week are basically zero.",
     "The odds of {thing} breaking down twice in one week are basically certain."),
    ("Waiting {n} minutes for coffee is a perfectly normal morning.",
     "Waiting {n} hours for coffee is a perfectly normal morning."),
    ("Sure, reading the manual first saved me a lot of time.",
     "Sure, skipping the manual entirely saved me a lot of time."),
    ("Our {n}-page report was short enough to read over lunch.",
     "Our {n}-thousand-page report was short enough to read over lunch."),
    ("The upgrade made the app faster, exactly as promised.",
     "The upgrade made the app load in a mere {n} minutes, exactly as promised."),
    ("A {n} percent discount is a decent reason to switch brands.",
     "A 0.{n} percent discount is a decent reason to switch brands."),
    ("He practiced every day, so winning was no surprise.",
     "He practiced once in {n} years, so winning was no surprise."),
]
TEAMS = ["Alabama", "the Wolves", "Riverside", "the Comets", "Eastwood"]
THINGS = ["the brand-new printer", "this award-winning engine",
          "the flagship phone", "our premium router"]


def gen_snarks(rng, n):
    records = []
    for _ in range(n):
        plain_t, absurd_t = SNARK_PAIRS[rng.randrange(len(SNARK_PAIRS))]
        subs = {"team": rng.choice(TEAMS), "thing": rng.choice(THINGS),
                "n": rng.randint(2, 9)}
        plain = plain_t.format(**subs)
        absurd = absurd_t.format(**subs)
        if rng.random() < 0.5:
            a, b, gold = absurd, plain, "A"
        else:
            a, b, gold = plain, absurd, "B"
        records.append({
            "input": f"(a) {a} (b) {b}",
            "gold": gold,
            "choices": [{"label": "A", "text": "(a)"}, {"label": "B", "text": "(b)"}],
        })
    return records


QS_FACTS = [
    ("The {place} observatory opened in {y1}. Its main telescope was replaced in {y2}, "
     "and the visitor center now receives about {k} thousand guests each year.",
     [("{y1}", "When did the {place} observatory open?"),
      ("{y2}", "When was the main telescope of the {place} observatory replaced?"),
      ("about {k} thousand", "How many guests visit the {place} visitor center each year?")]),
    ("The river {place} is {k} kilometers long. It freezes for roughly {n} weeks every "
     "winter, and a ferry crossing was established in {y1}.",
     [("{k} kilometers", "How long is the river {place}?"),
      ("roughly {n} weeks", "For how long does the river {place} freeze each winter?"),
      ("{y1}", "When was the ferry crossing on the river {place} established?")]),
    ("{place} station serves {n} lines. The oldest platform dates back to {y1}, while the "
     "newest one was added in {y2} together with {k} new escalators.",
     [("{n}", "How many lines does {place} station serve?"),
      ("{y1}", "When was the oldest platform of {place} station built?"),
      ("{k}", "How many escalators were added to {place} station?")]),
]
PLACES = ["Northfield", "Eastbrook", "Greyharbor", "Westvale", "Southmoor",
          "Larkspur", "Mapleton"]


def gen_question_selection(rng, n):
    records = []
    letters = ["A", "B", "C"]
    for _ in range(n):
        fact_t, qas = QS_FACTS[rng.randrange(len(QS_FACTS))]
        subs = {"place": rng.choice(PLACES), "y1": rng.randint(1870, 1960),
                "y2": rng.randint(1961, 2015), "n": rng.randint(2, 9),
                "k": rng.randint(10, 90)}
        context = fact_t.format(**subs)
        picked = rng.sample(qas, rng.choice([2, 2, 3]))
        gold_idx = rng.randrange(len(picked))
        answer = picked[gold_idx][0].format(**subs)
        lines = [f"Short Answer: {answer}", f"Context: {context}"]
        choices = []
        for i, (_, q) in enumerate(picked):
            choices.append({"label": letters[i], "text": q.format(**subs)})
        records.append({
            "input": "\n".join(lines),
            "gold": letters[gold_idx],
            "choices": choices,
        })
    return records


def write_manifest(name, kind, answer_format, splits, records):
    manifest = {
        "name": name,
        "schema": {"kind": kind, "answer_format": answer_format,
                   "bare_token_fallback": False},
        "splits": {"init": splits[0], "train": splits[1], "test": splits[2]},
        "records": records,
    }
    path = os.path.join(DATA, name + ".json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")
    print(f"wrote {path} ({len(records)} records)")


CHOICE_FORMAT = '{"answer": "A"} or {"answer": "B"}'
NUMBER_FORMAT = '{"answer": "<number>"}'


def build_demo_scripts(oc_records):
    """Mock scripts for the offline quickstart run (APE on object_counting)."""
    opt_rules = []
    instructions = [
        "Count every object of the requested category in the sentence, multiplying "
        "items that come with a number word, and reply only with "
        '{"answer": "<number>"}.',
        "Read the sentence, list the items that belong to the asked category, add up "
        'their quantities (words like "two" mean 2), and answer in the format '
        '{"answer": "<number>"}.',
        "Identify which items in the text match the category in the question, sum "
        'their counts, and give the total as {"answer": "<number>"}.',
        "Go through the sentence item by item, keep a running total for the asked "
        'category only, and finish with {"answer": "<number>"}.',
        "Determine the quantity of each mentioned object, ignore objects outside the "
        'requested category, and output {"answer": "<number>"} with the sum.',
        "Carefully tally the requested objects, counting plural phrases by their "
        'stated number, then respond with {"answer": "<number>"}.',
        "Parse the list of possessions, select those of the asked kind, add their "
        'counts together and answer as {"answer": "<number>"}.',
        "Work out how many of the asked objects appear, treating bare singular "
        'mentions as one, and reply with {"answer": "<number>"}.',
        "Scan the sentence for objects of the target category, accumulate their "
        'quantities, and print {"answer": "<number>"} only.',
        "For each listed item decide whether it belongs to the category in the "
        'question; if so add its count. Respond with {"answer": "<number>"}.',
    ]
    wrap = lambda xs: "\n".join(f"<START>{x}<END>" for x in xs)
    opt_rules.append({"match": "Write 5 different instructions",
                      "respond_seq": [wrap(instructions[:5]), wrap(instructions[5:])]})
    variants = [t + " Double-check the total before answering." for t in instructions]
    opt_rules.append({"match": "Generate a variation of the following instruction",
                      "respond_seeded": variants})

    tgt_rules = []
    rng = random.Random(2024)
    for rec in oc_records:
        gold = rec["gold"]
        wrong = str(int(gold) + 1)
        r = rng.random()
        if r < 0.65:
            tgt_rules.append({"match": rec["input"],
                              "respond": 'The total is %s. {"answer": "%s"}' % (gold, gold)})
        elif r < 0.8:
            tgt_rules.append({"match": rec["input"],
                              "respond": 'The total is %s. {"answer": "%s"}' % (wrong, wrong)})
        else:
            tgt_rules.append({"match": rec["input"],
                              "respond_seeded": [
                                  'The total is %s. {"answer": "%s"}' % (gold, gold),
                                  'The total is %s. {"answer": "%s"}' % (wrong, wrong)]})

    for fname, rules in [("demo_mock_optimizer.json", opt_rules),
                         ("demo_mock_target.json", tgt_rules)]:
        path = os.path.join(CONFIGS, fname)
        with open(path, "w") as f:
            json.dump({"strict": True, "rules": rules}, f, indent=1)
            f.write("\n")
        print(f"wrote {path} ({len(rules)} rules)")


def main():
    os.makedirs(DATA, exist_ok=True)
    os.makedirs(CONFIGS, exist_ok=True)

    rng = random.Random(20240101)
    oc = gen_object_counting(rng, 260)
    write_manifest("object_counting", "numeric_string", NUMBER_FORMAT,
                   (10, 50, 200), oc)

    rng = random.Random(20240102)
    write_manifest("navigate", "choice", CHOICE_FORMAT, (10, 50, 200),
                   gen_navigate(rng, 260))

    rng = random.Random(20240103)
    write_manifest("snarks", "choice", CHOICE_FORMAT, (10, 50, 106),
                   gen_snarks(rng, 166))

    rng = random.Random(20240104)
    write_manifest("question_selection", "choice",
                   '{"answer": "<letter of the correct choice>"}', (10, 50, 200),
                   gen_question_selection(rng, 260))

    build_demo_scripts(oc)


if __name__ == "__main__":
    main()
