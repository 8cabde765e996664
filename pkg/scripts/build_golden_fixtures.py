"""Write the two golden replay fixtures (Amazon, Biomedical) into the package.

Each fixture bundles a small graph slice, the scripted model replies, and the
expected scratchpad of every attempt. Expected observations are spelled out here
by hand from the observation templates; they are not produced by the engine.

    python scripts/build_golden_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "src" / "kgqa" / "fixtures"
SUFFIX = " Please answer by providing node main feature (e.g., names) rather than node IDs."
MISS = ("The node or feature name does not exist in the graph. This might because your given "
        "feature name is not correct. Please modify it.")


def expand(steps):
    """Turn (plan, thought, action, observation-or-None) rows into script + expected lines."""
    script, lines = [], []
    for k, (plan, thought, action, obs) in enumerate(steps, 1):
        script += [
            {"match": f"Plan {k}:", "reply": plan},
            {"match": f"Thought {k}:", "reply": thought},
            {"match": f"Action {k}:", "reply": action},
        ]
        lines += [f"Plan {k}: {plan}", f"Thought {k}: {thought}", f"Action {k}: {action}"]
        if obs is not None:
            lines.append(f"Observation {k}: {obs}")
    return script, "\n".join(lines)


def finish_obs(answer: str) -> str:
    return f"Answer is {answer}"


JUDGE = {"match": "Proceed with explanation and judgment below:"}
REFLECT = {"match": "Previous trial Details:"}


# --- Amazon ------------------------------------------------------------------

def amazon() -> dict:
    item = "B00BRPTT9K"
    hub = "B00E45043A"
    title = "Nokia CC-3068 Shell for Lumia 520 - Retail Packaging - White"
    others = [f"B00F{n:06d}" for n in range(1, 49)]
    hub_nbrs = others[:20] + [item] + others[20:]  # 49 ids, original item inside
    assert len(hub_nbrs) == 49

    nodes = {
        item: {"features": {"title": title, "price": "9.99", "category": "Cell Phones & Accessories"}},
        hub: {"features": {"title": "Nokia Lumia 520 GoPhone Prepaid Phone - Black", "price": "",
                           "category": "Cell Phones & Accessories"}},
        "brand_70532": {"features": {"name": "Nokia", "listing": f"{item} {hub}"}},
    }
    for n, oid in enumerate(others, 1):
        nodes[oid] = {"features": {"title": f"Protective Case Model {n} Matte Finish", "price": "",
                                   "category": "Cell Phones & Accessories"}}
    edges = {
        item: {"bought_together_item": [hub], "brand": ["brand_70532"]},
        hub: {"bought_together_item": hub_nbrs, "brand": ["brand_70532"]},
    }
    for oid in others:
        edges[oid] = {"bought_together_item": [hub]}

    question = f"What is the quantity of items sharing the same purchased-together items as item {title}?"
    p1 = ("The question is asking for the count of items that share the same bought_together_item neighbors "
          "as the specified item, excluding the original item. We need to locate the specified item, list its "
          "bought_together_item neighbors, and then find other items that share these neighbors. Finally, we "
          "need to exclude the original item and count the remaining items.")
    common = [
        (p1, "We need to find the node in the graph that represents the specified item.",
         f"Retrieve[{title}]", f"The ID of this retrieval target node is {item}."),
        ("We have the node representing the specified item. Next, we need to list its bought_together_item neighbors.",
         "We need to retrieve the bought_together_item neighbors of the specified item.",
         f"Neighbour[{item}, bought_together_item]",
         f"The bought_together_item neighbors of {item} are: ['{hub}']."),
        ("We have the bought_together_item neighbors of the specified item. Next, we need to find other items "
         "that share these neighbors.",
         "We need to find items that share the same bought_together_item neighbors as the specified item.",
         f"Neighbour[{hub}, bought_together_item]",
         f"The bought_together_item neighbors of {hub} are: [" + ", ".join(f"'{x}'" for x in hub_nbrs) + "]."),
    ]
    p4 = ("We have the list of items that share the same bought_together_item neighbors as the specified item. "
          "Next, we need to filter out the original item and count the remaining items.")
    t4 = f"We need to filter out the original item ({item}) from the list and count the remaining items."
    wrong = common + [
        (p4, t4, f"Feature[Retrieve[{item}], title]",
         f"The ID of this retrieval target node is brand_70532. {MISS}"),
        ("It seems there was an error in retrieving the title of the original item. We will directly filter out "
         "the original item from the list and count the remaining items.", t4, "Finish[49]", finish_obs("49")),
    ]
    right = common + [(p4, t4, "Finish[48]", finish_obs("48"))]

    s1, pad1 = expand(wrong)
    s2, pad2 = expand(right)
    reflection = (HERE / "transcripts" / "amazon_reflection.txt").read_text("utf-8")
    script = (
        s1
        + [{**JUDGE, "reply": "The answer 49 counts every item in the neighbor list, including the original "
                              "item B00BRPTT9K, which the question excludes. The count is off by one. [no]"}]
        + [{**REFLECT, "reply": reflection}]
        + s2
        + [{**JUDGE, "reply": "The neighbor list holds 49 items including the original item; removing it "
                              "leaves 48, which matches the final answer. [yes]"}]
    )
    return {
        "name": "amazon",
        "domain": "E-commerce",
        "question": question,
        "graph_definition": (
            "There are two types of nodes in the graph: item and brand.\n"
            "Item nodes have features: title, price, category. Item nodes have the following neighbor types: "
            "bought_together_item, brand.\nBrand nodes have features: name, listing."
        ),
        "t_max": 10,
        "n_reflect": 2,
        "graph": {"nodes": nodes, "edges": edges},
        "script": script,
        "expected": {
            "final_answer": "48",
            "correct": True,
            "attempts": 2,
            "reflections": 1,
            "scratchpads": [pad1, pad2],
        },
    }


# --- Biomedical ----------------------------------------------------------------

def biomedical() -> dict:
    compound = "DB00591"
    ad, ps = "DOID:3310", "DOID:8893"
    ear, ext, hair = "UBERON:0001690", "UBERON:0001691", "UBERON:0001037"
    filler = [f"UBERON:00020{n:02d}" for n in range(1, 36)]
    ad_sites = [ear, ext] + filler[:15]            # 17
    ps_sites = [hair] + filler[12:35]              # 24
    assert len(ad_sites) == 17 and len(ps_sites) == 24

    names = {ear: "ear", ext: "external ear", hair: "strand of hair"}
    nodes = {
        compound: {"features": {"name": "Fluocinolone Acetonide", "inchikey": "FEBLZLNTKCEFIT-VSXGLTOVSA-N"}},
        "DB01047": {"features": {"name": "Fluocinonide", "inchikey": "WJOHZNCJWYWUJD-IUGZLZTKSA-N"}},
        "DB00620": {"features": {"name": "Triamcinolone", "inchikey": "GFNANZIMVAIWHM-OBYCQNJPSA-N"}},
        ad: {"features": {"name": "atopic dermatitis"}},
        ps: {"features": {"name": "psoriasis"}},
    }
    for uid in filler:
        nodes[uid] = {"features": {"name": f"anatomical structure {uid[-4:]}"}}
    for uid, name in names.items():
        nodes[uid] = {"features": {"name": name}}
    edges = {
        compound: {"Compound-treats-Disease": [ad, ps]},
        "DB01047": {"Compound-treats-Disease": [ps]},
        ad: {"Disease-localizes-Anatomy": ad_sites},
        ps: {"Disease-localizes-Anatomy": ps_sites},
    }

    def nbrs(d, sites):
        return f"The Disease-localizes-Anatomy neighbors of {d} are: [" + ", ".join(f"'{x}'" for x in sites) + "]."

    def name_obs(*ids):
        label = {ad: "atopic dermatitis", ps: "psoriasis", **names}
        return " ".join(f"The name feature of {i} are: {label[i]}." for i in ids)

    q = "What illness situated in ear can be treated by Fluocinolone Acetonide?"
    head = "The question is asking for a disease localized in the ear that can be treated by Fluocinolone Acetonide."
    both_sites = (f"Neighbour[{ad}, Disease-localizes-Anatomy], Neighbour[{ps}, Disease-localizes-Anatomy]",
                  nbrs(ad, ad_sites) + " " + nbrs(ps, ps_sites))
    three_names = (f"Feature[{ear}, name], Feature[{ext}, name], Feature[{hair}, name]", name_obs(ear, ext, hair))
    two_diseases = (f"Feature[{ad}, name], Feature[{ps}, name]", name_obs(ad, ps))
    p4 = f"{head} We have the anatomical locations of the diseases. Next, we need to identify which of these locations correspond to the ear."
    t4 = "We need to get the names of the anatomical locations to identify which ones correspond to the ear."
    common = [
        (f"{head} We need to find the node representing the compound and then identify the diseases it treats. "
         "Next, we need to check which of these diseases are localized in the ear.",
         "We need to find the node representing Fluocinolone Acetonide in the graph.",
         "Retrieve[Fluocinolone Acetonide]", f"The ID of this retrieval target node is {compound}."),
        (f"{head} We have the node representing the compound. Next, we need to find the diseases that this compound treats.",
         "We need to find the diseases that Fluocinolone Acetonide treats.",
         f"Neighbour[{compound}, Compound-treats-Disease]",
         f"The Compound-treats-Disease neighbors of {compound} are: ['{ad}', '{ps}']."),
        (f"{head} We have the diseases that this compound treats. Next, we need to check which of these diseases are localized in the ear.",
         f"We need to check the anatomical locations of the diseases '{ad}' and '{ps}'.", *both_sites),
        (p4, t4, *three_names),
    ]
    verify = "We need to verify which of the diseases 'atopic dermatitis' and 'psoriasis' are localized in the ear."
    wrong = common + [
        (f"{head} We have the names of the anatomical locations. Next, we need to identify which of these locations "
         "correspond to the ear and then get the names of the diseases associated with these locations.",
         "We need to identify the diseases associated with the ear and external ear.", *two_diseases),
        (f"{head} We have the names of the diseases. Next, we need to verify which of these diseases are localized in the ear.",
         verify, *two_diseases),
        (f"{head} We have the names of the diseases. We need to verify which of these diseases are localized in the ear.",
         "We need to verify the anatomical locations of 'atopic dermatitis' and 'psoriasis' again to ensure they are localized in the ear.",
         *both_sites),
        (p4, t4, f"Feature[{ear}, name], Feature[{ext}, name]", name_obs(ear, ext)),
        (f"{head} We have the names of the anatomical locations. Next, we need to verify which of these diseases are localized in the ear.",
         verify, *two_diseases),
        (f"{head} We have the names of the diseases and their anatomical locations. Next, we need to identify which disease is localized in the ear.",
         "We need to identify which of the diseases 'atopic dermatitis' and 'psoriasis' are localized in the ear.",
         f"Feature[{ad}, name]", name_obs(ad)),
    ]
    right = common + [
        (f"{head} We have the names of the anatomical locations. Next, we need to identify which of these locations "
         "correspond to the ear and then get the names of the diseases associated with these locations.",
         "We need to identify the diseases associated with the ear.", f"Feature[{ad}, name]", name_obs(ad)),
        (f"{head} We have the answer.", "We have the answer: atopic dermatitis.",
         "Finish[atopic dermatitis]", finish_obs("atopic dermatitis")),
    ]
    assert len(wrong) == 10

    s1, pad1 = expand(wrong)
    s2, pad2 = expand(right)
    reflection = (HERE / "transcripts" / "biomedical_reflection.txt").read_text("utf-8")
    script = (
        s1
        + [{**REFLECT, "reply": reflection}]
        + s2
        + [{**JUDGE, "reply": "Atopic dermatitis is treated by the compound and localizes to the ear and the "
                              "external ear, so the answer is supported by the observations. [yes]"}]
    )
    return {
        "name": "biomedical",
        "domain": "Healthcare",
        "question": q,
        "graph_definition": (
            "There are three types of nodes in the graph: Compound, Disease and Anatomy.\n"
            "Compound nodes have features: name, inchikey. Compound nodes have the following neighbor types: "
            "Compound-treats-Disease.\nDisease nodes have features: name. Disease nodes have the following "
            "neighbor types: Disease-localizes-Anatomy.\nAnatomy nodes have features: name."
        ),
        "t_max": 10,
        "n_reflect": 2,
        "graph": {"nodes": nodes, "edges": edges},
        "script": script,
        "expected": {
            "final_answer": "atopic dermatitis",
            "correct": True,
            "attempts": 2,
            "reflections": 1,
            "scratchpads": [pad1, pad2],
        },
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for fixture in (amazon(), biomedical()):
        path = OUT / f"{fixture['name']}.json"
        path.write_text(json.dumps(fixture, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
