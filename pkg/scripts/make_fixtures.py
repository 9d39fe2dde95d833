"""Regenerate the fabricated corpora under data/.

    python scripts/make_fixtures.py

Output is deterministic; rerunning reproduces the committed files.
"""

from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent / "data"


def half_step(v):
    return float(np.clip(np.round(v * 2) / 2, 1.0, 5.0))


def write(path: Path, header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# fabricated values, see README.md\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def toy():
    rng = np.random.default_rng(20230203)
    n_items, n_users = 24, 10
    feats = np.round(rng.uniform(0, 10, size=(n_items, 3)), 1)
    items = [f"m{i + 1:02d}" for i in range(n_items)]
    # each user cares about one or two genres, positively or negatively
    tastes = np.array([
        [1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, 0, 0], [0, -1, 0],
        [1, 1, 0], [1, 0, -1], [0, 1, 1], [-1, 0, 1], [0.5, -1, 0.5],
    ], dtype=float)
    ratings = []
    for u in range(n_users):
        rated = np.sort(rng.choice(n_items, size=int(rng.integers(14, 19)), replace=False))
        centred = (feats - feats.mean(axis=0)) / 5.0
        for i in rated:
            score = 3.0 + 1.8 * float(centred[i] @ tastes[u]) + rng.normal(0, 0.25)
            ratings.append((f"u{u + 1:02d}", items[i], half_step(score)))
    write(ROOT / "toy" / "ratings.csv", "user_id,item_id,rating", ratings)
    write(ROOT / "toy" / "features.csv", "item_id,action,romance,comedy",
          [(items[i], *feats[i]) for i in range(n_items)])
    # unseen catalogue entries for recommendation demos
    cand = np.round(rng.uniform(0, 10, size=(5, 3)), 1)
    write(ROOT / "toy" / "candidates.csv", "item_id,action,romance,comedy",
          [(f"n{k + 1:02d}", *cand[k]) for k in range(5)])


def quadrant_corpus(name, label, seed, n_items=100, n_users=4, margin=0.1):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n_items:
        x = rng.uniform(-1, 1, 2)
        if np.min(np.abs(x)) >= margin:
            pts.append(np.round(x, 4))
    items = [f"p{i + 1:03d}" for i in range(n_items)]
    ratings = []
    for u in range(n_users):
        flip = u % 2 == 1
        for i, x in enumerate(pts):
            like = label(x) != flip
            ratings.append((f"u{u + 1}", items[i], 4.5 if like else 1.5))
    write(ROOT / name / "ratings.csv", "user_id,item_id,rating", ratings)
    write(ROOT / name / "features.csv", "item_id,f1,f2", [(items[i], *pts[i]) for i in range(n_items)])


def main():
    toy()
    quadrant_corpus("xor", lambda x: x[0] * x[1] > 0, seed=7, n_items=200, n_users=2)
    quadrant_corpus("separable", lambda x: x[0] + 0.5 * x[1] > 0, seed=11)


if __name__ == "__main__":
    main()
