"""Regenerates the harness and annotation fixtures. Output is committed."""
import json
import pathlib

HERE = pathlib.Path(__file__).parent

AGENTS = ["Amelia", "Benjamin", "Chloe", "Daniel", "Ella", "Felix", "Grace", "Henry", "Isla", "Jack"]
ROOMS = ["kitchen", "garden", "attic", "hall", "pantry"]
OBJECTS = ["apple", "banana", "cherry", "grape", "lemon", "lime", "mango", "melon", "orange", "peach",
           "pear", "plum", "carrot", "celery", "onion", "potato", "tomato", "turnip", "radish", "cabbage"]
CONTAINERS = ["basket", "box", "bucket", "crate", "drawer", "cupboard", "envelope", "suitcase"]


def dump_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n" for r in rows))


def harness():
    problems, rules, expected = [], [], {}
    for i, obj in enumerate(OBJECTS):
        a, b = AGENTS[i % 10], AGENTS[(i + 3) % 10]
        room = ROOMS[i % 5]
        c1, c2 = CONTAINERS[i % 8], CONTAINERS[(i + 1) % 8]
        sentences = [f"{a} entered the {room}.", f"{b} entered the {room}.", f"The {obj} is in the {c1}.",
                     f"{b} exited the {room}.", f"{a} moved the {obj} to the {c2}."]
        question = f"Where is the {obj} really?"
        p = {"id": f"fixture-{i:02d}", "benchmark": "ToMi",
             "sentences": [{"index": k + 1, "text": t} for k, t in enumerate(sentences)],
             "question": question, "gold_answer": c2, "metadata": {}}
        # The last five carry choices and are answered by letter or by text.
        if i >= 15:
            p["choices"] = [c1, c2]
        problems.append(p)
        if i in (3, 7, 11):  # wrong container
            reply, ok = f"<answer>{c1}</answer>", False
        elif i == 16:  # letter A names the wrong choice
            reply, ok = "<answer>A</answer>", False
        elif i == 18:  # answer names neither choice
            reply, ok = "<answer>the kitchen table</answer>", False
        elif i in (15, 17):  # letter B is gold
            reply, ok = "Let me think.\n<answer>(B)</answer>", True
        else:
            reply, ok = f"The {obj} was moved.\n<answer>{c2.capitalize()}.</answer>", True
        rules.append({"contains": question, "response": reply})
        expected[p["id"]] = ok
    dump_jsonl(HERE / "harness" / "problems.jsonl", problems)
    (HERE / "harness" / "mock.json").write_text(json.dumps(
        {"rules": rules, "default_response": "Noted: the state is unchanged."}, indent=1) + "\n")
    (HERE / "harness" / "expected_correct.json").write_text(json.dumps(expected, indent=1, sort_keys=True) + "\n")


def constant_shape():
    problems, annotations = [], []
    for i in range(50):
        a = AGENTS[i % 10]
        obj = OBJECTS[i % 20]
        other = OBJECTS[(i + 7) % 20]
        room = ROOMS[i % 5]
        pid = f"shape-{i:02d}"
        sentences = [f"{a} entered the {room}.", f"The {obj} is in the {CONTAINERS[i % 8]}.", f"{a} likes the {other}"]
        problems.append({"id": pid, "benchmark": "SocialIQa",
                         "sentences": [{"index": k + 1, "text": t} for k, t in enumerate(sentences)],
                         "question": f"Where is the {obj}?", "gold_answer": CONTAINERS[i % 8], "metadata": {}})
        annotations.append({
            "problem_id": pid,
            "objects": [
                {"object_id": obj, "kind": "Physical", "belief_order": 0, "owner_chain": [], "label": obj},
                {"object_id": other, "kind": "Physical", "belief_order": 0, "owner_chain": [], "label": f"{a} likes {other}"},
            ],
            "events": [{"object_id": obj, "boundary_after_sentence": 2},
                       {"object_id": other, "boundary_after_sentence": 3}],
            "question_object_id": obj,
        })
    dump_jsonl(HERE / "annotations" / "constant_shape.problems.jsonl", problems)
    (HERE / "annotations" / "constant_shape.tomann.json").write_text(json.dumps(
        {"format": "tomann", "version": 1, "annotations": annotations}, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    harness()
    constant_shape()
