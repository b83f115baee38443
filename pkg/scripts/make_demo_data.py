#!/usr/bin/env python3
"""Regenerate the bundled demo world and encoded vignettes.

The demo world is a synthetic 9-condition / 40-symptom dermatology matrix
(the probabilities are generated, not clinical data).  Each condition's
vignette lists the symptoms whose conditional probability is at least 0.5,
which makes the bundled set solvable by any sensible questioner.
"""

import json
from pathlib import Path

from symcheck.knowledge import save_matrix
from symcheck.worldgen import gen_world

CONDITIONS = (
    "atopic_dermatitis",
    "lupus",
    "shingles",
    "cellulitis",
    "chickenpox",
    "hives",
    "psoriasis",
    "gout",
    "melanoma",
)

# ordered so that symptom i is a plausible lead symptom of condition i % 9
SYMPTOMS = (
    "intense_itching",
    "sun_sensitive_rash",
    "one_sided_blister_band",
    "spreading_warm_redness",
    "itchy_fluid_blisters",
    "raised_itchy_welts",
    "silvery_scaly_plaques",
    "big_toe_joint_pain",
    "changing_pigmented_spot",
    "dry_cracked_skin",
    "facial_butterfly_rash",
    "tingling_before_rash",
    "skin_hot_to_touch",
    "fever",
    "welts_move_around",
    "scaly_elbows_or_knees",
    "sudden_joint_swelling",
    "irregular_lesion_border",
    "rash_in_skin_folds",
    "mouth_sores",
    "burning_skin_pain",
    "leg_swelling",
    "spots_began_on_trunk",
    "worse_with_heat",
    "nail_pitting",
    "ear_lump",
    "lesion_larger_than_pencil_eraser",
    "night_scratching",
    "fatigue",
    "band_of_pain_on_torso",
    "open_sore_or_wound",
    "blisters_crust_over",
    "hives_after_exposure",
    "scalp_flaking",
    "tender_finger_joints",
    "multicolored_lesion",
    "family_history_of_eczema",
    "hair_loss_patches",
    "headache",
    "rapid_rash_spread",
)

SEED = 42
SEPARABILITY = 0.7


def main() -> None:
    out_dir = Path(__file__).resolve().parents[1] / "src" / "symcheck" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)

    world = gen_world(
        len(CONDITIONS),
        len(SYMPTOMS),
        separability=SEPARABILITY,
        seed=SEED,
        condition_names=CONDITIONS,
        symptom_names=SYMPTOMS,
    )
    save_matrix(world, out_dir / "demo_world.json")

    vignettes = []
    for i, condition in enumerate(CONDITIONS):
        present = [
            world.symptom_names[j]
            for j in range(world.n_symptoms)
            if world.probs[i, j] >= 0.5
        ]
        vignettes.append({"condition": condition, "symptoms": present})
    with open(out_dir / "demo_vignettes.json", "w", encoding="utf-8") as fh:
        json.dump(vignettes, fh, indent=1)
        fh.write("\n")
    print(f"wrote {out_dir / 'demo_world.json'} and {out_dir / 'demo_vignettes.json'}")


if __name__ == "__main__":
    main()
