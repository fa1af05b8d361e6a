"""Independent reference implementations used only to check the library."""

from typing import List, Sequence


def edit_distance_recursive(a: Sequence[str], b: Sequence[str]) -> int:
    """Plain exhaustive recursion, no memoization. Tiny inputs only."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    same = a[0] == b[0]
    return min(
        edit_distance_recursive(a[1:], b[1:]) + (0 if same else 1),
        edit_distance_recursive(a[1:], b) + 1,
        edit_distance_recursive(a, b[1:]) + 1,
    )


def edit_distance_dp(a: Sequence[str], b: Sequence[str]) -> int:
    """Distance-only rolling-row DP, written independently of tsforge.align."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j - 1] + (ca != cb),
                prev[j] + 1,
                cur[j - 1] + 1,
            ))
        prev = cur
    return prev[-1]


def overlap_by_sample_counting(intervals, rate: int = 16000) -> float:
    """Brute-force overlap measure: count sample ticks covered >= 2 times."""
    if not intervals:
        return 0.0
    end = max(iv.end_s for iv in intervals)
    n = int(round(end * rate))
    covered = 0
    for k in range(n):
        t = (k + 0.5) / rate
        if sum(1 for iv in intervals if iv.start_s <= t < iv.end_s) >= 2:
            covered += 1
    return covered / rate


def all_sequences(alphabet: List[str], max_len: int) -> List[tuple]:
    out = [()]
    frontier = [()]
    for _ in range(max_len):
        frontier = [seq + (c,) for seq in frontier for c in alphabet]
        out.extend(frontier)
    return out
