"""Shared test utilities: seeded random PC text generation."""

from __future__ import annotations

import random

RELOPS = ["==", "!=", "<=", "<", ">", ">="]


def random_pc_text(
    rng: random.Random,
    max_d: int = 6,
    max_t: int = 4,
    coeff_range: int = 9,
) -> str:
    """One random linear PC in the textual grammar.

    Variables are drawn from a pool of ``max_t`` names; every generated text
    is first-appearance dense by construction of the grammar, so parse and
    format round-trip structurally.
    """
    t = rng.randint(1, max_t)
    d = rng.randint(1, max_d)
    names = [f"x{i}" for i in range(t)]
    constraints = []
    for _ in range(d):
        n_terms = rng.randint(1, min(3, t))
        vars_here = rng.sample(names, n_terms)
        parts = []
        for name in vars_here:
            coeff = rng.randint(-coeff_range, coeff_range)
            if coeff == 0:
                coeff = 1
            parts.append(f"{coeff}*{name}")
        lhs = " + ".join(parts)
        k = rng.randint(-coeff_range, coeff_range)
        op = rng.choice(RELOPS)
        constraints.append(f"{lhs} + {k} {op} 0")
    return " && ".join(constraints)
