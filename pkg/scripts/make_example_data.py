"""Write the bundled synthetic example (475 families, four missingness patterns).

Columns: me (mother's education), he (home environment), math, bpi, read.
Pattern counts over (me, he, math): OOO 417, OXO 36, OOX 14, OXX 8.
Missing cells are written as 99999.
"""
import argparse
from pathlib import Path

import numpy as np

from medboot.dataset import Dataset, save_dataset

PATTERNS = [((False, False, False), 417), ((False, True, False), 36),
            ((False, False, True), 14), ((False, True, True), 8)]


def make(seed: int = 2024) -> Dataset:
    rng = np.random.default_rng(seed)
    n = sum(c for _, c in PATTERNS)
    me = np.round(rng.normal(12.0, 2.3, n))
    he = 5.0 + 0.09 * me + rng.normal(0.0, 1.29, n)
    math_ = 8.0 + 0.47 * he + 0.13 * me + rng.normal(0.0, 2.13, n)
    bpi = 100.0 - 1.5 * he + rng.normal(0.0, 12.0, n)
    read = 0.5 * math_ + 0.3 * he + rng.normal(0.0, 2.0, n)
    values = np.column_stack([me, he, math_, bpi, read])
    mask = np.zeros(values.shape, dtype=bool)
    pats = np.concatenate([np.tile(p, (c, 1)) for p, c in PATTERNS])
    mask[:, :3] = pats[rng.permutation(n)]
    roles = {"me": "X", "he": "M", "math": "Y", "bpi": "AUX", "read": "AUX"}
    return Dataset(("me", "he", "math", "bpi", "read"), values.round(3), mask, roles)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/medboot/data/example.csv"))
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    save_dataset(make(args.seed), args.out, missing_code=99999)
    print(f"wrote {args.out}")
