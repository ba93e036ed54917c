"""Token-aware batching for LLM context windows.

Token counts are estimated with the ~4 characters/token heuristic; exact
tokenizer counts are provider-specific and the budget is sized with
headroom, so the estimate only needs to be conservative and cheap.
"""

from __future__ import annotations

from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")


def estimate_tokens(text: str) -> int:
    return max(1, (len(text) + 3) // 4)


def pack_by_budget(
    items: Sequence[T], budget: int, size_of: Callable[[T], int]
) -> List[List[T]]:
    """Partition items, in order, into batches whose sizes sum to <= budget.

    No item is ever split; an item that alone exceeds the budget gets its
    own singleton batch. Concatenating the batches reproduces the input
    sequence exactly.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    batches: List[List[T]] = []
    current: List[T] = []
    current_size = 0
    for item in items:
        size = size_of(item)
        if current and current_size + size > budget:
            batches.append(current)
            current = []
            current_size = 0
        current.append(item)
        current_size += size
    if current:
        batches.append(current)
    return batches
