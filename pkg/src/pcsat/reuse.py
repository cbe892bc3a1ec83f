"""Exact-match constraint-solution cache, the string-matching baseline.

Keys are canonical PC strings, values are satisfiability verdicts.  The
canonizer makes alpha-renamed and reordered conditions collide on one key;
anything beyond exact equality (implication, subset queries) is out of
scope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .pc import PathCondition, canonize, format_pc
from .solver import Verdict


@dataclass
class SolutionCache:
    entries: dict[str, bool] = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def __len__(self) -> int:
        return len(self.entries)


def cache_check(
    pc: PathCondition,
    cache: SolutionCache,
    solver: Callable[[PathCondition], Verdict],
) -> tuple[bool, bool]:
    """(verdict, hit).  On a miss the solver runs and the result is stored.

    A solver ResourceLimit propagates without caching anything.
    """
    canonical = canonize(pc)
    key = format_pc(canonical)
    if key in cache.entries:
        cache.hits += 1
        return cache.entries[key], True
    verdict = solver(canonical)
    cache.entries[key] = verdict.sat
    cache.misses += 1
    return verdict.sat, False


def save_cache(cache: SolutionCache, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, sat in cache.entries.items():
            fh.write(json.dumps({"pc": key, "sat": sat}) + "\n")


def load_cache(path) -> SolutionCache:
    cache = SolutionCache()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            cache.entries[doc["pc"]] = bool(doc["sat"])
    return cache
