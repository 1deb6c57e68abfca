"""Straight-line re-implementation of the dispatch passes, used as an oracle.

Deliberately kept apart from the package: 1-based indices, bare while
loops, no shared helpers, no numpy.  Inputs are plain parallel lists
ordered from the feeder end toward the bank (index 1 = farthest device).
test_dispatch.py and the acceptance suite compare production output
against these functions element-wise.
"""
import math

DERATE = 0.9
PF_MIN = 0.9


def q_limit(p):
    over = p / PF_MIN
    return math.sqrt(over * over - p * p)


def active_pass(xi_sta, lo_raw, hi_raw, xi_load, p_load, p_ref):
    """Far-to-near absorb/clamp/forward sweep plus bank-out refinement.

    Returns (p far-to-near, leftover).
    """
    n = len(xi_sta)
    m = len(xi_load)
    p = [0.0] * (n + 1)
    lo = [0.0] * (n + 1)
    hi = [0.0] * (n + 1)
    k = 1
    while k <= n:
        lo[k] = DERATE * lo_raw[k - 1]
        hi[k] = DERATE * hi_raw[k - 1]
        k += 1
    carry = 0.0
    i = 1
    j = 1
    while i <= n:
        p[i] = carry
        carry = 0.0
        while j <= m and xi_load[j - 1] > xi_sta[i - 1]:
            p[i] = p[i] - p_load[j - 1]
            if p[i] > hi[i]:
                carry = p[i] - hi[i]
                p[i] = hi[i]
                j = j + 1
                break
            if p[i] < lo[i]:
                carry = p[i] - lo[i]
                p[i] = lo[i]
                j = j + 1
                break
            j = j + 1
        p_ref = p_ref - p[i]
        i = i + 1
    i = n
    while p_ref != 0.0 and i >= 1:
        if p[i] + p_ref > hi[i]:
            p_ref = p_ref - hi[i] + p[i]
            p[i] = hi[i]
            i = i - 1
        elif p[i] + p_ref < lo[i]:
            p_ref = p_ref - lo[i] + p[i]
            p[i] = lo[i]
            i = i - 1
        else:
            p[i] = p[i] + p_ref
            p_ref = 0.0
    return p[1:], p_ref


def refine_pass(p_in, lo_raw, hi_raw, p_ref):
    """Only the bank-out refinement, on an existing far-to-near dispatch."""
    n = len(p_in)
    p = [0.0] + list(p_in)
    i = n
    while p_ref != 0.0 and i >= 1:
        hi = DERATE * hi_raw[i - 1]
        lo = DERATE * lo_raw[i - 1]
        if p[i] + p_ref > hi:
            p_ref = p_ref - hi + p[i]
            p[i] = hi
            i = i - 1
        elif p[i] + p_ref < lo:
            p_ref = p_ref - lo + p[i]
            p[i] = lo
            i = i - 1
        else:
            p[i] = p[i] + p_ref
            p_ref = 0.0
    return p[1:], p_ref


def reactive_pass(p, xi_sta, xi_load, p_load, g, b):
    """Per-load overwrite with clamp-and-forward.  Returns q far-to-near."""
    n = len(xi_sta)
    m = len(xi_load)
    q = [0.0] * (n + 1)
    carry = 0.0
    i = 1
    j = 1
    while i <= n:
        q[i] = carry
        carry = 0.0
        cap = q_limit(p[i - 1])
        low = -cap
        while j <= m and xi_load[j - 1] > xi_sta[i - 1]:
            q[i] = g / b * (p[i - 1] - p_load[j - 1])
            if q[i] > cap:
                carry = q[i] - cap
                q[i] = cap
                j = j + 1
                break
            if q[i] < low:
                carry = q[i] - low
                q[i] = low
                j = j + 1
                break
            j = j + 1
        i = i + 1
    return q[1:]
