"""
Counters for non-fatal conditions (absent signals, empty cells, truncated
series). Computations accept an optional `FlagLog` and record a reason key
every time they return an absent value for a documented reason.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)


@dataclass
class FlagLog:
    """
    Tally of flagged conditions.

    Attributes:
        counts (Counter): Number of occurrences per reason.
        examples (dict[str, list[str]]): Up to `max_examples` item keys per reason.
    """
    counts: Counter = field(default_factory=Counter)
    examples: dict[str, list[str]] = field(default_factory=dict)
    max_examples: int = 5

    def add(self, reason: str, key: object = None) -> None:
        self.counts[reason] += 1
        if key is not None:
            bucket = self.examples.setdefault(reason, [])
            if len(bucket) < self.max_examples:
                bucket.append(str(key))
        logger.debug(f"flag {reason}: {key}")

    def merge(self, other: "FlagLog") -> None:
        for reason, n in other.counts.items():
            self.counts[reason] += n
            for key in other.examples.get(reason, []):
                bucket = self.examples.setdefault(reason, [])
                if len(bucket) < self.max_examples:
                    bucket.append(key)

    def __len__(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {reason: {"count": self.counts[reason], "examples": self.examples.get(reason, [])}
                for reason in sorted(self.counts)}
