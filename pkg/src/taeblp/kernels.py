"""Compiled event loops for the Monte Carlo hot paths.

Two njit kernels: the single-configuration engine and the coupled pair
carrying exactly one defect.  Both draw two uniforms per event (holding
time, channel) from the numpy Generator they are handed, and share the
Fenwick helpers and rate formulas with the pure-Python engines, so a
Python-stepped trajectory and a kernel trajectory agree bit-for-bit under
the same seed.

Array layout: a window [ell, r] stores sites ell-1 .. r+1, so site s lives
at index s - (ell-1).  Growable columns are ell-1 .. r (the outermost two
only in the theta-boundary variant); column at site c has column index
j = c - (ell-1).  Pair kernels use three channels per column, flat index
3*j + kind.
"""
from __future__ import annotations

import math

from numba import njit

from .fenwick import (
    fenwick_pick,
    fenwick_rebuild,
    fenwick_set,
    fenwick_total,
)

STATUS_OK = 0
STATUS_BAND = 1

# channel kinds of a coupled pair
BOTH = 0
UPPER_ONLY = 1
LOWER_ONLY = 2


@njit(cache=True, inline="always")
def growth_rate(z, beta):
    """f(z) = exp(beta*(z - 1/2)); the caller guarantees |beta*z| is sane."""
    return math.exp(beta * z - 0.5 * beta)


@njit(cache=True)
def single_column_rate(omega, j, ell, r, beta, is_theta, exp_th, exp_nth):
    """Growth rate of the column at site c = ell-1+j for one configuration.

    Interior columns grow at f(omega_c) + f(-omega_{c+1}); in the
    theta-boundary variant the outermost columns add the constant injection
    rates exp(theta) and exp(-theta).  Frozen-variant boundary columns
    never grow.
    """
    c = ell - 1 + j
    if c == ell - 1:
        if is_theta:
            return exp_th + growth_rate(-omega[1], beta)
        return 0.0
    if c == r:
        if is_theta:
            return exp_nth + growth_rate(omega[r - ell + 1], beta)
        return 0.0
    return growth_rate(omega[j], beta) + growth_rate(-omega[j + 1], beta)


@njit(cache=True)
def run_single(
    omega,
    height,
    rates,
    tree,
    clock,
    t_end,
    rng,
    beta,
    is_theta,
    exp_th,
    exp_nth,
    ell,
    r,
    omega_max,
    rebuild_every,
    events,
):
    """Exact event loop for one configuration up to time t_end.

    Mutates omega, height, rates and tree in place.  Returns
    (clock, events, status, bad_site); status != STATUS_OK means the
    admissible band was violated at bad_site and the loop aborted.
    """
    ncols = rates.shape[0]
    band_lo = 1              # site ell
    band_hi = r - ell + 1    # site r
    status = STATUS_OK
    bad_site = 0
    while True:
        total = fenwick_total(tree)
        u1 = rng.random()
        dt = -math.log1p(-u1) / total
        if clock + dt > t_end:
            clock = t_end
            break
        clock += dt
        u2 = rng.random() * total
        j = fenwick_pick(tree, u2)
        if rates[j] == 0.0:
            k = j - 1
            while k >= 0 and rates[k] == 0.0:
                k -= 1
            if k < 0:
                k = j + 1
                while k < ncols and rates[k] == 0.0:
                    k += 1
            j = k
        omega[j] -= 1
        omega[j + 1] += 1
        height[j] += 1
        if band_lo <= j <= band_hi and abs(omega[j]) > omega_max:
            status = STATUS_BAND
            bad_site = ell - 1 + j
            break
        if band_lo <= j + 1 <= band_hi and abs(omega[j + 1]) > omega_max:
            status = STATUS_BAND
            bad_site = ell + j
            break
        lo = j - 1 if j > 0 else 0
        hi = j + 1 if j + 1 < ncols else ncols - 1
        for jj in range(lo, hi + 1):
            fenwick_set(
                tree,
                rates,
                jj,
                single_column_rate(omega, jj, ell, r, beta, is_theta, exp_th, exp_nth),
            )
        events += 1
        if events % rebuild_every == 0:
            fenwick_rebuild(tree, rates)
    return clock, events, status, bad_site


@njit(cache=True)
def pair_column_rates(eta_c, up_c, eta_c1, up_c1, at_left, at_right, beta, is_theta, exp_th, exp_nth):
    """Layered channel rates of a coupled ordered pair at one column.

    Inputs are the lower/upper increment values at the column's two sites
    (c and c+1) plus boundary flags.  Returns (both, upper_only,
    lower_only).  The constant boundary injections act on both layers at
    once, so boundary channels are joint except for the layer-dependent
    interior parts.
    """
    if at_left:
        if not is_theta:
            return 0.0, 0.0, 0.0
        both = exp_th + growth_rate(-up_c1, beta)
        lower_only = growth_rate(-eta_c1, beta) - growth_rate(-up_c1, beta)
        return both, 0.0, lower_only
    if at_right:
        if not is_theta:
            return 0.0, 0.0, 0.0
        both = exp_nth + growth_rate(eta_c, beta)
        upper_only = growth_rate(up_c, beta) - growth_rate(eta_c, beta)
        return both, upper_only, 0.0
    both = growth_rate(eta_c, beta) + growth_rate(-up_c1, beta)
    upper_only = growth_rate(up_c, beta) - growth_rate(eta_c, beta)
    lower_only = growth_rate(-eta_c1, beta) - growth_rate(-up_c1, beta)
    return both, upper_only, lower_only


@njit(cache=True)
def _defect_col_rates(omega, q, j, ell, r, beta, is_theta, exp_th, exp_nth):
    # lower field is omega minus one unit at the defect site q
    c = ell - 1 + j
    up_c = omega[j]
    up_c1 = omega[j + 1]
    eta_c = up_c - 1 if c == q else up_c
    eta_c1 = up_c1 - 1 if c + 1 == q else up_c1
    return pair_column_rates(
        eta_c, up_c, eta_c1, up_c1, c == ell - 1, c == r, beta, is_theta, exp_th, exp_nth
    )


@njit(cache=True)
def set_defect_column(tree, rates, omega, q, j, ell, r, beta, is_theta, exp_th, exp_nth):
    b, uo, lo = _defect_col_rates(omega, q, j, ell, r, beta, is_theta, exp_th, exp_nth)
    fenwick_set(tree, rates, 3 * j, b)
    fenwick_set(tree, rates, 3 * j + 1, uo)
    fenwick_set(tree, rates, 3 * j + 2, lo)


@njit(cache=True)
def set_pair_columns_general(
    tree, rates, lower, upper, j_lo, j_hi, ell, r, beta, is_theta, exp_th, exp_nth
):
    """Recompute the three channels of columns j_lo..j_hi from the two
    increment arrays (general defect counts) and push them into the tree."""
    for j in range(j_lo, j_hi + 1):
        c = ell - 1 + j
        b, uo, lo = pair_column_rates(
            lower[j], upper[j], lower[j + 1], upper[j + 1],
            c == ell - 1, c == r, beta, is_theta, exp_th, exp_nth,
        )
        fenwick_set(tree, rates, 3 * j, b)
        fenwick_set(tree, rates, 3 * j + 1, uo)
        fenwick_set(tree, rates, 3 * j + 2, lo)


@njit(cache=True)
def pick_event(tree, rates, rng, clock, t_end):
    """Draw the next event: returns (new_clock, flat_index) with index -1
    when the next event would pass t_end."""
    total = fenwick_total(tree)
    u1 = rng.random()
    dt = -math.log1p(-u1) / total
    if clock + dt > t_end:
        return t_end, -1
    clock = clock + dt
    u2 = rng.random() * total
    idx = fenwick_pick(tree, u2)
    if rates[idx] == 0.0:
        nflat = rates.shape[0]
        k = idx - 1
        while k >= 0 and rates[k] == 0.0:
            k -= 1
        if k < 0:
            k = idx + 1
            while k < nflat and rates[k] == 0.0:
                k += 1
        idx = k
    return clock, idx


@njit(cache=True)
def run_pair_defect(
    omega,
    q,
    clock,
    t_end,
    rng,
    rates,
    tree,
    beta,
    is_theta,
    exp_th,
    exp_nth,
    ell,
    r,
    omega_max,
    rebuild_every,
    events,
):
    """Coupled pair (omega - delta_q, omega) up to t_end, tracking the defect.

    Returns (clock, events, status, bad_site, q, qmin, qmax); qmin/qmax is
    the defect's excursion range, used for the boundary-contamination flag.
    """
    nflat = rates.shape[0]
    ncols = nflat // 3
    band_lo = 1
    band_hi = r - ell + 1
    qmin = q
    qmax = q
    status = STATUS_OK
    bad_site = 0
    while True:
        total = fenwick_total(tree)
        u1 = rng.random()
        dt = -math.log1p(-u1) / total
        if clock + dt > t_end:
            clock = t_end
            break
        clock += dt
        u2 = rng.random() * total
        idx = fenwick_pick(tree, u2)
        if rates[idx] == 0.0:
            k = idx - 1
            while k >= 0 and rates[k] == 0.0:
                k -= 1
            if k < 0:
                k = idx + 1
                while k < nflat and rates[k] == 0.0:
                    k += 1
            idx = k
        j = idx // 3
        kind = idx - 3 * j
        if kind == BOTH:
            omega[j] -= 1
            omega[j + 1] += 1
        elif kind == UPPER_ONLY:
            # only fires at the defect column: the defect hops right
            omega[j] -= 1
            omega[j + 1] += 1
            q = ell + j  # c + 1
        else:
            # lower layer lays alone: the defect (at c+1) hops left to c
            q = ell - 1 + j
        if q < qmin:
            qmin = q
        if q > qmax:
            qmax = q
        if band_lo <= j <= band_hi and abs(omega[j]) > omega_max:
            status = STATUS_BAND
            bad_site = ell - 1 + j
            break
        if band_lo <= j + 1 <= band_hi and abs(omega[j + 1]) > omega_max:
            status = STATUS_BAND
            bad_site = ell + j
            break
        lo = j - 1 if j > 0 else 0
        hi = j + 1 if j + 1 < ncols else ncols - 1
        for jj in range(lo, hi + 1):
            set_defect_column(tree, rates, omega, q, jj, ell, r, beta, is_theta, exp_th, exp_nth)
        events += 1
        if events % rebuild_every == 0:
            fenwick_rebuild(tree, rates)
    return clock, events, status, bad_site, q, qmin, qmax
