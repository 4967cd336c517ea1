"""Exact convex decomposition of a polytope point over 0/1 candidate sets.

Used twice: writing the quarter-mass vector as a distribution over perfect
matchings, and writing shifted marginals as a distribution over constrained
spanning trees.  The greedy subtracts the largest multiple of a candidate
that keeps the scaled residual inside the polytope; restricting candidates
to the minimal face of the residual guarantees a new constraint goes tight
at every step, so the loop terminates with an exact rational decomposition.

Candidates are bitmasks over edge positions.  Constraints are given as
(mask, bound) pairs: ``upper`` means x(mask) <= sigma * bound on the scaled
residual, ``lower`` means x(mask) >= sigma * bound.  All candidates must
contain the same number of edges (a basis cardinality), which makes the
total-mass equality self-maintaining.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def exact_convex_decomposition(
    candidates: Sequence[int],
    target: Sequence[Fraction],
    upper: Sequence[tuple[int, int]] = (),
    lower: Sequence[tuple[int, int]] = (),
) -> dict[int, Fraction]:
    """Weights over candidates reproducing ``target`` exactly.

    Raises ValueError when the greedy gets stuck, which signals that the
    target is outside the polytope spanned by the candidates.
    """
    m = len(target)
    cands = sorted(set(candidates))
    if not cands:
        raise ValueError("no candidates")
    size = cands[0].bit_count()
    if any(c.bit_count() != size for c in cands):
        raise ValueError("candidates differ in cardinality")

    # precompute intersection sizes per candidate and constraint
    upper = list(upper)
    lower = list(lower)
    up_k = [[(c & mask).bit_count() for mask, _ in upper] for c in cands]
    lo_k = [[(c & mask).bit_count() for mask, _ in lower] for c in cands]

    r = [Fraction(x) for x in target]
    sigma = Fraction(1)
    weights: dict[int, Fraction] = {}
    max_rounds = len(cands) + len(upper) + len(lower) + m + 8

    for _ in range(max_rounds):
        if sigma == 0:
            break
        supp = 0
        forced = 0
        for e in range(m):
            if r[e] > 0:
                supp |= 1 << e
            if r[e] == sigma:
                forced |= 1 << e
        up_sum = [sum(r[e] for e in _bits(mask)) for mask, _ in upper]
        lo_sum = [sum(r[e] for e in _bits(mask)) for mask, _ in lower]

        best_t = Fraction(0)
        best_i = -1
        for i, c in enumerate(cands):
            if c & ~supp or forced & ~c:
                continue
            ok = True
            t = sigma
            for j, (_, bound) in enumerate(upper):
                k = up_k[i][j]
                slack = sigma * bound - up_sum[j]
                if slack == 0 and k != bound:
                    ok = False
                    break
                if k < bound:
                    t = min(t, slack / (bound - k))
            if not ok:
                continue
            for j, (_, bound) in enumerate(lower):
                k = lo_k[i][j]
                slack = lo_sum[j] - sigma * bound
                if slack == 0 and k != bound:
                    ok = False
                    break
                if k > bound:
                    t = min(t, slack / (k - bound))
            if not ok:
                continue
            for e in _bits(c):
                if r[e] < t:
                    t = r[e]
            if t > best_t:
                best_t = t
                best_i = i
        if best_i < 0:
            raise ValueError("decomposition stuck; target outside the polytope")
        c = cands[best_i]
        weights[c] = weights.get(c, Fraction(0)) + best_t
        for e in _bits(c):
            r[e] -= best_t
        sigma -= best_t
    if sigma != 0 or any(x != 0 for x in r):
        raise ValueError("decomposition did not exhaust the target")
    return weights


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low
