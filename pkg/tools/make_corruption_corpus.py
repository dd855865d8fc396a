#!/usr/bin/env python3
"""Regenerate tests/data/corruption_corpus.jsonl.

500 prediction/truth pairs built from two independent corruption processes:

* wrongness: the probability that a level's name is replaced by a different
  place altogether grows with the planted great-circle distance, finest
  level first (precise drifts within a few hundred km, country only after
  thousands).
* surface variation: aliases, suffixes, and small typos that keep referring
  to the same place, applied at a distance-independent rate. Exact string
  equality fails on these even for spot-on predictions, embedding
  similarity largely does not, which is precisely the behavior the corpus
  exists to expose.

The output file is committed; rerun only if the scheme itself changes.
"""

import argparse
import json
import math
import random
import string
from pathlib import Path

SYLLABLES = [
    "an", "bel", "cor", "dano", "el", "fir", "gos", "hul", "im", "jor",
    "kal", "lum", "mer", "nov", "os", "pren", "quir", "ras", "sol", "tev",
    "ul", "vor", "wen", "xil", "yar", "zam",
]

# Country aliases are short ending variants (translation-style endonym /
# exonym pairs); heavier suffixes would dilute the trigram overlap below
# the strict country threshold, which real alias pairs do not do under a
# proper sentence encoder.
COUNTRY_ENDINGS = ["n", "ia", "e"]
REGION_SUFFIXES = [" City", " Province", " District", " Region"]
PRECISE_SUFFIXES = [" Street", " Square", " Quarter", " Market", " Station"]


def make_pool(count, rng, taken, syllable_count):
    pool = []
    while len(pool) < count:
        name = "".join(rng.sample(SYLLABLES, syllable_count)).capitalize()
        if name not in taken:
            taken.add(name)
            pool.append(name)
    return pool


def typo(name, rng, edits=1):
    chars = list(name)
    for _ in range(edits):
        op = rng.choice(("sub", "ins", "swap"))
        i = rng.randrange(len(chars))
        if op == "sub":
            chars[i] = rng.choice(string.ascii_lowercase)
        elif op == "ins":
            chars.insert(i, rng.choice(string.ascii_lowercase))
        else:
            j = min(i + 1, len(chars) - 1)
            chars[i], chars[j] = chars[j], chars[i]
    return "".join(chars)


def replace_with_other(name, rng, pool):
    other = rng.choice(pool)
    while other == name:
        other = rng.choice(pool)
    return other


def surface_variant(name, rng, suffixes, typo_ok=True):
    roll = rng.random()
    if roll < 0.5 and suffixes:
        return name + rng.choice(suffixes)
    if typo_ok:
        return typo(name, rng, edits=1)
    return name + rng.choice(suffixes or [" Land"])


def clip(x):
    return min(max(x, 0.0), 1.0)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="tests/data/corruption_corpus.jsonl")
    parser.add_argument("--count", type=int, default=500)
    parser.add_argument("--seed", type=int, default=20250801)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    taken = set()
    # Country names run long so a single typo or suffix still clears the
    # strictest similarity threshold; finer levels can be shorter.
    countries = make_pool(12, rng, taken, syllable_count=4)
    regions = make_pool(30, rng, taken, syllable_count=3)
    precises = make_pool(60, rng, taken, syllable_count=3)

    rows = []
    for i in range(args.count):
        country = rng.choice(countries)
        region = rng.choice(regions)
        precise = rng.choice(precises)
        lat = rng.uniform(-40.0, 40.0)
        lon = rng.uniform(-150.0, 150.0)
        d = rng.uniform(1.0, 6000.0)
        offset = math.degrees(d / 6371.0)
        sign = 1.0 if lat + offset <= 89.0 else -1.0
        pred_lat = lat + sign * offset

        # Wrongness: distance-driven replacement, finest level first.
        p_precise = clip((d - 150.0) / 600.0 + rng.gauss(0, 0.1))
        p_region = clip((d - 600.0) / 2000.0 + rng.gauss(0, 0.1))
        p_country = clip((d - 2500.0) / 5000.0 + rng.gauss(0, 0.08))

        if rng.random() < p_country:
            pred_country = replace_with_other(country, rng, countries)
        elif rng.random() < 0.3:
            pred_country = country + rng.choice(COUNTRY_ENDINGS)
        else:
            pred_country = country

        if rng.random() < p_region:
            pred_region = replace_with_other(region, rng, regions)
        elif rng.random() < 0.6:
            pred_region = surface_variant(region, rng, REGION_SUFFIXES)
        else:
            pred_region = region

        if rng.random() < p_precise:
            pred_precise = replace_with_other(precise, rng, precises)
        elif rng.random() < 0.7:
            pred_precise = surface_variant(precise, rng, PRECISE_SUFFIXES)
        else:
            pred_precise = precise

        rows.append(
            {
                "id": f"pair-{i:03d}",
                "planted_km": round(d, 3),
                "truth": {
                    "country": country,
                    "region": region,
                    "precise": precise,
                    "lat": round(lat, 6),
                    "lon": round(lon, 6),
                },
                "pred": {
                    "country": pred_country,
                    "region": pred_region,
                    "precise": pred_precise,
                    "lat": round(pred_lat, 6),
                    "lon": round(lon, 6),
                },
            }
        )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"wrote {len(rows)} pairs to {out}")


if __name__ == "__main__":
    main()
