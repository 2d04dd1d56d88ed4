"""Regenerate the bundled 20-company synthetic fixture.

Two planted clusters (materials, robotics) of 10 companies and 12
technologies each, plus 6 non-technology noise entities. Mentions stay
within a company's own cluster across three sources; every entity gets
a 16-dim classifier embedding (technologies and noise are linearly
separable) and an 8-dim semantic vector near its cluster prototype.

The output is committed under fixtures/synthetic20/ and consumed by the
CLI end-to-end tests; generation is fully seeded, so rerunning this
script reproduces the committed files byte for byte.
"""

import argparse
import json
import os
import random

SEED = 20240917
EMB_DIM = 16
SEM_DIM = 8

CLUSTERS = {
    "materials": {
        "companies": [f"m{i:02d}" for i in range(10)],
        "techs": [f"alloy-{i:02d}" for i in range(12)],
    },
    "robotics": {
        "companies": [f"r{i:02d}" for i in range(10)],
        "techs": [f"servo-{i:02d}" for i in range(12)],
    },
}
NOISE = ["annual-picnic", "cafeteria", "gift-shop",
         "parking-lot", "reception-desk", "shuttle-bus"]

# (mention probability, max count) per source
SOURCES = {"website": (0.75, 6), "patent": (0.35, 3), "jobs": (0.5, 4)}


def write_mentions(out_dir, rng):
    files = {s: open(os.path.join(out_dir, f"{s}.jsonl"), "w", encoding="utf-8")
             for s in SOURCES}
    for cluster in CLUSTERS.values():
        for company in cluster["companies"]:
            for source, (prob, max_count) in SOURCES.items():
                for tech in cluster["techs"]:
                    if rng.random() < prob:
                        rec = {"company": company, "entity": tech,
                               "count": rng.randint(1, max_count)}
                        files[source].write(json.dumps(rec) + "\n")
            for noise in rng.sample(NOISE, 2):
                rec = {"company": company, "entity": noise, "count": 1}
                files["website"].write(json.dumps(rec) + "\n")
    for f in files.values():
        f.close()


def write_vectors(path, dim, rows):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"dim={dim}\n")
        for entity, vec in rows:
            f.write(entity + "\t" + ",".join(f"{v:.6f}" for v in vec) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures/synthetic20")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    rng = random.Random(SEED)

    write_mentions(args.out, rng)

    all_techs = [t for c in CLUSTERS.values() for t in c["techs"]]
    emb_rows = []
    for entity in all_techs + NOISE:
        center = -1.0 if entity in NOISE else 1.0
        emb_rows.append((entity, [center + rng.gauss(0, 0.12) for _ in range(EMB_DIM)]))
    write_vectors(os.path.join(args.out, "embeddings.tsv"), EMB_DIM, sorted(emb_rows))

    sem_rows = []
    for ci, cluster in enumerate(CLUSTERS.values()):
        for tech in cluster["techs"]:
            proto = [1.0 if j == ci else 0.0 for j in range(SEM_DIM)]
            sem_rows.append((tech, [p + rng.gauss(0, 0.05) for p in proto]))
    for noise in NOISE:
        proto = [1.0 if j == len(CLUSTERS) else 0.0 for j in range(SEM_DIM)]
        sem_rows.append((noise, [p + rng.gauss(0, 0.05) for p in proto]))
    write_vectors(os.path.join(args.out, "semantic.tsv"), SEM_DIM, sorted(sem_rows))

    with open(os.path.join(args.out, "labels.csv"), "w", encoding="utf-8") as f:
        f.write("entity,label\n")
        for entity in sorted(all_techs + NOISE):
            f.write(f"{entity},{0 if entity in NOISE else 1}\n")

    with open(os.path.join(args.out, "categories.csv"), "w", encoding="utf-8") as f:
        f.write("id,category\n")
        rows = []
        for name, cluster in CLUSTERS.items():
            rows += [(cid, name) for cid in cluster["companies"]]
            rows += [(tid, name) for tid in cluster["techs"]]
        for rid, name in sorted(rows):
            f.write(f"{rid},{name}\n")

    with open(os.path.join(args.out, "pipeline.cfg"), "w", encoding="utf-8") as f:
        f.write(
            "# shared settings for the end-to-end pipeline on this fixture\n"
            "seed = 7\n"
            "\n"
            "# classifier head\n"
            "h1 = 16\n"
            "h2 = 8\n"
            "classifier_epochs = 400\n"
            "batch_size = 8\n"
            "\n"
            "# recommender\n"
            "d = 16\n"
            "epochs = 80\n"
            "margin = 0.05\n"
        )
    print(f"wrote fixture to {args.out}")


if __name__ == "__main__":
    main()
