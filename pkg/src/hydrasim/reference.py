"""Published take-over probabilities used for comparison tables.

``BITCOIN`` holds the classic single-chain values; ``HYDRA_N32`` the
multi-chain values printed alongside them for N = 32. Keys are the attacker
share q, values are indexed by w = 1..9.
"""

WS = tuple(range(1, 10))
QS = (0.06, 0.16, 0.26, 0.46)

BITCOIN = {
    0.06: (0.1200, 0.0200, 0.0039, 0.0007, 0.0001, 0.0000, 0.0000, 0.0000, 0.0000),
    0.16: (0.3200, 0.1372, 0.0635, 0.0305, 0.0149, 0.0074, 0.0037, 0.0019, 0.0009),
    0.26: (0.5200, 0.3353, 0.2286, 0.1603, 0.1142, 0.0823, 0.0598, 0.0438, 0.0322),
    0.46: (0.9200, 0.8802, 0.8506, 0.8261, 0.8048, 0.7857, 0.7683, 0.7523, 0.7374),
}

HYDRA_N32 = {
    0.06: (0.1589, 0.3235, 0.0068, 0.0010, 0.0003, 0.0000, 0.0000, 0.0000, 0.0000),
    0.16: (0.7726, 0.4823, 0.2720, 0.1472, 0.0785, 0.0416, 0.0221, 0.0117, 0.0062),
    0.26: (0.9935, 0.9621, 0.8938, 0.7943, 0.6790, 0.5627, 0.4555, 0.3626, 0.2850),
    0.46: (1.0000, 1.0000, 1.0000, 1.0000, 1.0000, 1.0000, 1.0000, 1.0000, 1.0000),
}

# Breaks monotonicity in w against both neighbours (0.1589, 0.0068).
SUSPECT_CELLS = {(0.06, 2): "published 0.3235 breaks monotonicity in w; suspected typo"}


def published(q: float, w: int, table=HYDRA_N32) -> float:
    return table[q][w - 1]
