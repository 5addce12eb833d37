#!/usr/bin/env python3
"""Generate the bundled sample ratings file.

Two user populations with opposite tastes over two movie groups, dense
enough that a factor model recovers the structure. Output uses the
`UserID::MovieID::Rating::Timestamp` line layout.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "linbandit" / "data" / "synthetic_ratings.dat"

N_USERS = 400
N_MOVIES = 30
RATE_PROB = 0.75
SEED = 20240601


def main() -> None:
    rng = np.random.default_rng(SEED)
    lines = []
    ts = 1_000_000_000
    for user in range(1, N_USERS + 1):
        likes_first_half = user <= N_USERS // 2
        for movie in range(1, N_MOVIES + 1):
            if rng.random() >= RATE_PROB:
                continue
            own_type = (movie <= N_MOVIES // 2) == likes_first_half
            if own_type:
                rating = rng.choice([4.0, 5.0]) if rng.random() < 0.9 else 2.0
            else:
                rating = rng.choice([1.0, 2.0]) if rng.random() < 0.9 else 4.0
            lines.append(f"{user}::{movie}::{rating:.1f}::{ts}")
            ts += 7
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} ratings to {OUT}")


if __name__ == "__main__":
    main()
