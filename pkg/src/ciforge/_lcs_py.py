"""Pure Python LCS kernel, used when the compiled extension is unavailable.

Same contract as ciforge._lcskernel.lcs_length_i32 but accepts any sequences
of comparable items, not just int buffers.
"""

from __future__ import annotations

from typing import Sequence


def lcs_length(a: Sequence, b: Sequence) -> int:
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return 0
    # Iterate over the longer sequence so the allocated row stays short.
    if lb > la:
        a, b = b, a
        la, lb = lb, la
    prev = [0] * (lb + 1)
    curr = [0] * (lb + 1)
    for i in range(la):
        ai = a[i]
        for j in range(lb):
            if ai == b[j]:
                curr[j + 1] = prev[j] + 1
            else:
                up = prev[j + 1]
                left = curr[j]
                curr[j + 1] = up if up >= left else left
        prev, curr = curr, prev
    return prev[lb]
