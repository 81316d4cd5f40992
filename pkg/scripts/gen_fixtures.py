"""Regenerate the committed test fixtures under tests/data/.

Deterministic by construction (fixed encoder seeds, fixed content). Each
fixture is validated after writing; the script fails loudly if a property the
tests rely on (edge counts, sweep accuracy profile) does not hold, so content
can be retuned before committing.

Run from the repo root:  python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import csv
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from graphtriage.encoders import HashEncoderClient
from graphtriage.graph import EdgePolicy, ingest, read_records_csv
from graphtriage.retrieval import RetrievalConfig, stage1_filter
from graphtriage.vectors import HybridEncoding

ROOT = os.path.join(os.path.dirname(__file__), "..")
DATA = os.path.join(ROOT, "tests", "data")

FIXTURE_SEED = 7
FIXTURE_DIM = 32
SWEEP_SEED = 11
SWEEP_DIM = 1024
SWEEP_LAMBDAS = [0.2, 0.4, 0.5, 0.7, 0.9]

CSV_HEADER = ["name", "definition", "symptoms", "clinical_treatment",
              "home_treatment", "prevention", "image_paths"]


def write_csv(path, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)


def row(name, definition, symptoms, clinical, home, prevention, images):
    return [name, definition, symptoms, clinical, home, prevention,
            ";".join(images)]


# --- conditions_10: the golden-session fixture graph -----------------------
# Definitions are token-engineered: the three pairs below share most tokens,
# which puts their text cosine above the 0.8 edge threshold at dim 32.

CONDITIONS_10 = [
    ("Eczema",
     "dry itchy inflamed cracked patches of irritated skin"),
    ("Contact Dermatitis",
     "dry itchy inflamed cracked patches of reactive skin"),
    ("Psoriasis",
     "thick scaly silvery plaques building on elbows and knees"),
    ("Seborrheic Dermatitis",
     "thick scaly greasy plaques building on elbows and knees"),
    ("Hives",
     "raised red wheals that appear suddenly and move around"),
    ("Heat Rash",
     "raised red wheals that appear suddenly and cluster around"),
    ("Ringworm",
     "circular fungal ring with a clear center spreading outward"),
    ("Impetigo",
     "honey colored crusts forming around the nose and mouth"),
    ("Scabies",
     "burrowing mites causing intense nighttime itching between fingers"),
    ("Vitiligo",
     "smooth white depigmented areas expanding slowly over years"),
]


def gen_conditions_10():
    rows = []
    for name, definition in CONDITIONS_10:
        slug = name.lower().replace(" ", "-")
        rows.append(row(
            name, definition,
            f"Common signs: {definition}.",
            f"Clinic treatment plan for {name.lower()}.",
            f"Home treatment plan for {name.lower()}.",
            f"Prevention advice for {name.lower()}.",
            [f"img/{slug}/{i:02d}.jpg" for i in range(1, 4)],
        ))
    path = os.path.join(DATA, "conditions_10.csv")
    write_csv(path, rows)

    encoder = HashEncoderClient(seed=FIXTURE_SEED, dimension=FIXTURE_DIM)
    graph = ingest(read_records_csv(path), encoder, EdgePolicy(threshold=0.8))
    edges = [(e.a, e.b, round(e.weight, 3)) for e in graph.edges]
    assert 2 <= len(edges) <= 8, f"want a moderately connected graph, got {edges}"
    print(f"conditions_10.csv: {len(graph.nodes)} nodes, {len(edges)} edges: {edges}")


# --- conditions_50: ingestion-scale fixture ---------------------------------

NAMES_50 = [
    "Acne", "Alopecia Areata", "Athlete's Foot", "Bed Bug Bites", "Blister",
    "Boil", "Bruise", "Callus", "Cellulitis", "Cherry Angioma",
    "Chickenpox", "Chilblains", "Cold Sore", "Corn", "Cradle Cap",
    "Dandruff", "Dry Skin", "Eczema", "Folliculitis", "Fungal Nail Infection",
    "Heat Rash", "Hives", "Impetigo", "Ingrown Toenail", "Insect Bite",
    "Keloid", "Keratosis Pilaris", "Lichen Planus", "Melasma", "Milia",
    "Molluscum Contagiosum", "Nappy Rash", "Perioral Dermatitis",
    "Pityriasis Rosea", "Pompholyx", "Pressure Sore", "Psoriasis",
    "Raynauds", "Ringworm", "Rosacea", "Scabies", "Shingles", "Skin Tag",
    "Spider Veins", "Stye", "Sunburn", "Varicose Veins", "Vitiligo",
    "Warts", "Whitlow",
]

DESCRIPTORS = ["persistent", "sudden", "spreading", "localized", "recurring",
               "seasonal", "mild", "tender", "flaky", "swollen"]
SITES = ["hands", "feet", "scalp", "face", "back", "legs", "arms", "chest",
         "neck", "elbows"]


def gen_conditions_50():
    rows = []
    for i, name in enumerate(NAMES_50):
        slug = name.lower().replace(" ", "-").replace("'", "")
        token = slug.replace("-", "")
        definition = (f"{token} presents as a {DESCRIPTORS[i % 10]} change on "
                      f"the {SITES[(i * 3) % 10]} distinct to {token}")
        image_count = 10 + (i % 6)  # 10..15 per condition
        rows.append(row(
            name, definition,
            f"Signs of {name.lower()} include {DESCRIPTORS[(i + 4) % 10]} marks.",
            f"Clinic care: topical plan {i} for {name.lower()}.",
            f"Home care: routine {i} for {name.lower()}.",
            f"Prevention: avoid trigger {i} for {name.lower()}.",
            [f"img/{slug}/{j:02d}.jpg" for j in range(1, image_count + 1)],
        ))
    path = os.path.join(DATA, "conditions_50.csv")
    write_csv(path, rows)

    encoder = HashEncoderClient(seed=FIXTURE_SEED, dimension=FIXTURE_DIM)
    graph = ingest(read_records_csv(path), encoder)
    assert len(graph.nodes) == 50 and len(graph.info) == 150
    counts = sorted({len(graph.nodes[n].info_children) for n in graph.nodes})
    assert counts == [3]
    print(f"conditions_50.csv: {len(graph.nodes)} nodes, {len(graph.info)} info, "
          f"{len(graph.edges)} edges")


# --- qa_30 + scripted_eval: deterministic-accuracy eval fixture -------------

QA_PHRASES = [
    "What are the main symptoms of {name}?",
    "How should {name} be treated at home?",
    "What helps prevent {name} from coming back?",
]


def gen_qa_30():
    names = [name for name, _ in CONDITIONS_10]
    items = []
    rules = [
        {"role": "question", "contains": "",
         "response": '["Is the area itchy?", "Any fever?", "How long has it lasted?"]'},
        {"role": "reasoning", "contains": "", "response": '{"likelihood": 90}'},
    ]
    # 25 scripted answers contain their keywords, 5 (every 6th item) do not.
    for i in range(30):
        name = names[i % 10]
        question = QA_PHRASES[i % 3].format(name=name)
        keywords = [name.lower(), "care" if i % 3 else "symptoms"]
        miss = (i % 6 == 5)
        if miss:
            answer = "The information available does not cover this point."
        else:
            answer = (f"For {name}, the {keywords[1]} to know: standard "
                      f"guidance applies. Follow the plan closely.")
        item = {"question": question, "expected_keywords": keywords}
        if i % 5 == 0:
            item["image"] = f"img/query/{i:02d}.jpg"
        items.append(item)
        rules.append({"role": "interaction", "contains": question,
                      "response": answer})
    rules.append({"role": "interaction", "contains": "",
                  "response": "No scripted answer."})

    with open(os.path.join(DATA, "qa_30.jsonl"), "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item) + "\n")
    with open(os.path.join(DATA, "scripted_eval.json"), "w", encoding="utf-8") as fh:
        json.dump(rules, fh, indent=2)
        fh.write("\n")
    hits = sum(0 if i % 6 == 5 else 1 for i in range(30))
    print(f"qa_30.jsonl: 30 items, scripted accuracy {hits}/30")


# --- sweep fixture: planted lambda optimum at 0.4 ----------------------------
# Alnova is the text anchor (its definition is item 2's exact text), Bregma
# the image anchor (every item reuses its one image). Varying how many Alnova
# tokens each item's text shares moves the survival boundary in lambda:
#   items expecting Bregma with low text overlap   -> pass for lambda <~ 0.6
#   items expecting Alnova with exact text overlap -> pass for lambda >~ 0.33
#   items expecting Bregma with high text overlap  -> pass for lambda <~ 0.45
# which makes 0.4 the unique accuracy peak on the 0.2/0.4/0.5/0.7/0.9 grid.

SWEEP_CONDITIONS = [
    ("Alnova", "alnova brint corvel desna ferrol", ["img/alnova/01.jpg"]),
    ("Bregma", "bregma fluxen tidro", ["img/bregma/01.jpg"]),
    ("Cindrel", "cindrel moskar venlo", ["img/cindrel/01.jpg"]),
    ("Dovrell", "dovrell plimmer gosk", ["img/dovrell/01.jpg"]),
]

BREGMA_IMAGE = "img/bregma/01.jpg"

# survival boundaries measured at dim 1024 / seed 11: the one-shared-token
# items flip near lambda 0.64, the exact-text items near 0.27, the
# two-shared-token items near 0.46
SWEEP_ITEMS = [
    # (text, expected name)
    ("alnova zemmel parvik", "Bregma"),
    ("alnova gorse fennick", "Bregma"),
    ("alnova brint corvel desna ferrol", "Alnova"),
    ("alnova brint corvel desna ferrol", "Alnova"),  # duplicate query is fine
    ("alnova brint wexford", "Bregma"),
    ("alnova brint jarrow", "Bregma"),
]

EXPECTED_PROFILE = {0.2: 4, 0.4: 6, 0.5: 4, 0.7: 2, 0.9: 2}


def gen_sweep():
    sweep_dir = os.path.join(DATA, "sweep")
    rows = []
    for name, definition, images in SWEEP_CONDITIONS:
        rows.append(row(
            name, definition,
            f"Signs of {name.lower()}.", f"Clinic care for {name.lower()}.",
            f"Home care for {name.lower()}.", f"Prevention for {name.lower()}.",
            images,
        ))
    csv_path = os.path.join(sweep_dir, "conditions.csv")
    write_csv(csv_path, rows)

    encoder = HashEncoderClient(seed=SWEEP_SEED, dimension=SWEEP_DIM)
    graph = ingest(read_records_csv(csv_path), encoder, EdgePolicy(threshold=0.99))
    assert not graph.edges, f"sweep graph must be edge-free, got {graph.edges}"

    # simulate the per-lambda candidate sets to script the answers and check
    # the planted profile
    items = [{"question": text, "image": BREGMA_IMAGE,
              "expected_keywords": [expected.lower()]}
             for text, expected in SWEEP_ITEMS]
    answer_lines = {}
    profile = {}
    for lam in SWEEP_LAMBDAS:
        hits = 0
        for (text, expected) in SWEEP_ITEMS:
            encoding = HybridEncoding(
                text_vec=encoder.encode_text(text),
                mm_vec=encoder.encode_multimodal(text, BREGMA_IMAGE))
            candidates = stage1_filter(graph, encoding, RetrievalConfig(lam=lam))
            ordered = sorted(candidates.entries,
                             key=lambda e: (-e.score, e.condition_id))
            names = [graph.nodes[e.condition_id].name for e in ordered]
            line = "Conditions considered: " + ", ".join(names) + "."
            answer_lines[line] = "Possible conditions: " + ", ".join(names) + "."
            if expected.lower() in ", ".join(names).lower():
                hits += 1
        profile[lam] = hits
    assert profile == EXPECTED_PROFILE, f"sweep profile {profile}"

    rules = [
        {"role": "question", "contains": "",
         "response": '["Where is it?", "Is it painful?", "How long?"]'},
        {"role": "reasoning", "contains": "", "response": '{"likelihood": 90}'},
    ]
    for line, response in sorted(answer_lines.items()):
        rules.append({"role": "interaction", "contains": line,
                      "response": response})

    with open(os.path.join(sweep_dir, "qa.jsonl"), "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item) + "\n")
    with open(os.path.join(sweep_dir, "script.json"), "w", encoding="utf-8") as fh:
        json.dump(rules, fh, indent=2)
        fh.write("\n")
    print(f"sweep fixture: profile {profile} (peak at 0.4)")


# --- scripted_golden: the deterministic end-to-end script -------------------

def gen_scripted_golden():
    rules = [
        {"role": "question", "contains": "JSON array of question strings",
         "response": '["Is the itching worse at night?", '
                     '"Did the patches appear after contact with a new product?", '
                     '"Are the patches cracked or weeping?"]'},
        {"role": "reasoning", "contains": "has Eczema",
         "response": 'The nighttime itching and cracked patches fit well. '
                     '{"likelihood": 85}'},
        {"role": "reasoning", "contains": "has Contact Dermatitis",
         "response": 'Plausible, but no new product exposure was reported. '
                     '{"likelihood": 40}'},
        {"role": "reasoning", "contains": "",
         "response": 'Little in the answers supports this condition. '
                     '{"likelihood": 10}'},
        {"role": "interaction", "contains": "Patient's new message:",
         "response": "Keep the skin moisturised and avoid known irritants; "
                     "see a clinician if the patches weep or spread."},
        {"role": "interaction", "contains": "Conditions considered:",
         "response": "Your description points most strongly to eczema: dry, "
                     "itchy, cracked patches that flare at night. Moisturise "
                     "regularly and avoid harsh soaps. This is informational "
                     "guidance, not a diagnosis."},
    ]
    with open(os.path.join(DATA, "scripted_golden.json"), "w", encoding="utf-8") as fh:
        json.dump(rules, fh, indent=2)
        fh.write("\n")
    print("scripted_golden.json written")


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    gen_conditions_10()
    gen_conditions_50()
    gen_qa_30()
    gen_sweep()
    gen_scripted_golden()
    print("all fixtures written")
