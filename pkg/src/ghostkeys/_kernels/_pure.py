"""Pure-Python twin of the compiled subsequence kernel.

Enumerates every distinct subsequence of the observed string exactly once
(canonical leftmost embedding via a next-occurrence table) and keeps the
top-k candidates by score in a bounded heap.  Scores and tie-breaks must
match the compiled kernel bit for bit, so the arithmetic here mirrors
_subseq.pyx expression by expression.
"""

from __future__ import annotations

from typing import List, Tuple


def _worse(sa: float, ca: bytes, sb: float, cb: bytes) -> bool:
    # Entry a ranks strictly below entry b: lower score, or equal score
    # and lexicographically later candidate.
    if sa != sb:
        return sa < sb
    return ca > cb


class _WorstFirstHeap:
    """Bounded heap whose root is the weakest kept candidate."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.scores: List[float] = []
        self.cands: List[bytes] = []

    def offer(self, score: float, cand: bytes) -> None:
        s, c = self.scores, self.cands
        if len(s) < self.capacity:
            s.append(score)
            c.append(cand)
            i = len(s) - 1
            while i > 0:
                parent = (i - 1) >> 1
                if _worse(s[i], c[i], s[parent], c[parent]):
                    s[i], s[parent] = s[parent], s[i]
                    c[i], c[parent] = c[parent], c[i]
                    i = parent
                else:
                    break
            return
        if not _worse(self.scores[0], self.cands[0], score, cand):
            return  # not better than the current worst
        s[0], c[0] = score, cand
        n = len(s)
        i = 0
        while True:
            left = 2 * i + 1
            if left >= n:
                break
            worst = left
            right = left + 1
            if right < n and _worse(s[right], c[right], s[left], c[left]):
                worst = right
            if _worse(s[worst], c[worst], s[i], c[i]):
                s[i], s[worst] = s[worst], s[i]
                c[i], c[worst] = c[worst], c[i]
                i = worst
            else:
                break

    def sorted_entries(self) -> List[Tuple[float, bytes]]:
        return sorted(
            zip(self.scores, self.cands), key=lambda e: (-e[0], e[1])
        )


def top_subsequences(obs, next_occ, step_nll, prior, lo, hi, k):
    """Top-k distinct subsequences of `obs` by score.

    Arguments are prepared by the caller (see attack.enumerate_guesses):

    * obs: observed string as local alphabet indices, length n
    * next_occ: (n+1) x d table; next_occ[p][c] is the first position >= p
      holding local char c, or -1
    * step_nll: ((d+1)**3) x d table; -ln P(char c | packed context), where
      a context packs the last three local chars base d+1, "absent" = d
    * prior: per-length additive score term, indexed by candidate length
    * lo, hi: inclusive candidate length bounds
    * k: number of candidates to keep

    Returns (score, candidate-bytes) pairs, best first; candidate bytes are
    local indices.  Score of a length-L candidate with summed step nll S is
    prior[L] - S / L.
    """
    if k <= 0 or hi < lo:
        return []
    n = len(obs)
    if n == 0 or lo < 1:
        return []
    d = len(next_occ[0]) if n else 0
    nxt = [list(row) for row in next_occ]
    table = [list(row) for row in step_nll]
    pri = list(prior)
    base = d + 1
    sq = base * base
    ctx0 = d * sq + d * base + d  # (absent, absent, absent)
    heap = _WorstFirstHeap(k)
    cand = bytearray(hi)

    def visit(pos: int, ctx: int, nll: float, depth: int) -> None:
        if depth >= lo:
            score = pri[depth] - nll / depth
            heap.offer(score, bytes(cand[:depth]))
        if depth == hi:
            return
        row = nxt[pos]
        trow = table[ctx]
        nctx_base = (ctx % sq) * base
        for ci in range(d):
            j = row[ci]
            if j >= 0:
                cand[depth] = ci
                visit(j + 1, nctx_base + ci, nll + trow[ci], depth + 1)

    visit(0, ctx0, 0.0, 0)
    return heap.sorted_entries()
