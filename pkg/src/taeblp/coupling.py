"""Basic coupling of ordered configurations with labeled defects.

Two configurations with lower <= upper sitewise evolve under shared
layered clocks.  Per growable column there are three channels:

* ``BOTH``: both layers lay the brick (joint move, no defect motion),
* ``UPPER_ONLY``: the upper layer lays alone, which can only be a
  right-lay at the column's left site, so one defect hops c -> c+1,
* ``LOWER_ONLY``: the lower layer lays alone, a left-lay of the
  bricklayer at site c+1, so one defect hops c+1 -> c.

Defects are conserved and keep a sorted integer labeling: a right hop
moves the highest label at the site, a left hop the lowest, so the
position array stays nondecreasing and a label's block at a site is
always a contiguous interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fenwick import fenwick_build, fenwick_rebuild, fenwick_total
from .kernels import BOTH, LOWER_ONLY, UPPER_ONLY
from .lattice import (
    DEFAULT_OMEGA_MAX,
    DEFAULT_REBUILD_EVERY,
    IncrementField,
    VolumeSpec,
    apply_brick,
)
from .measures import RATE_EXPONENT_GUARD, RateParams, rate_f


class CouplingError(RuntimeError):
    """Internal inconsistency between the fields and the defect labels."""


def which_moves(kind: int):
    """Defect motion implied by a channel kind: 'right', 'left' or None."""
    if kind == UPPER_ONLY:
        return "right"
    if kind == LOWER_ONLY:
        return "left"
    return None


def joint_site_channels(values, params: RateParams):
    """Layered clock decomposition for n coupled layers at one site.

    ``values`` holds each layer's increment at the site.  Returns a list
    of (direction, layers, rate) channels: for the ordering permutation of
    the values, the m-th right channel fires the top n-m+1 layers together
    at rate p(m) - p(m-1) with p(m) = f(m-th smallest value); the m-th
    left channel fires the bottom m layers at rate q(m) - q(m+1) with
    q(m) = f(-(m-th smallest value)).  Each layer's marginal rate is its
    single-process rate.  Tie channels carry rate zero and never fire.
    """
    values = list(values)
    n = len(values)
    order = sorted(range(n), key=lambda a: values[a])
    ranked = [values[a] for a in order]
    channels = []
    for m in range(1, n + 1):
        p_m = rate_f(ranked[m - 1], params)
        p_prev = rate_f(ranked[m - 2], params) if m >= 2 else 0.0
        channels.append(("right", tuple(order[m - 1:]), p_m - p_prev))
    for m in range(1, n + 1):
        q_m = rate_f(-ranked[m - 1], params)
        q_next = rate_f(-ranked[m], params) if m < n else 0.0
        channels.append(("left", tuple(order[:m]), q_m - q_next))
    return channels


class SecondClassLabels:
    """Sorted defect positions indexed by consecutive integer labels.

    ``positions[k]`` is the site of label ``lowest_label + k``; the array
    is nondecreasing at all times, so the labels at a site form one
    contiguous interval, recovered by binary search.
    """

    def __init__(self, positions, lowest_label: int):
        self.positions = np.asarray(positions, dtype=np.int64)
        if np.any(np.diff(self.positions) < 0):
            raise ValueError("label positions must be sorted")
        self.lowest_label = int(lowest_label)

    def __len__(self):
        return len(self.positions)

    @property
    def highest_label(self) -> int:
        return self.lowest_label + len(self.positions) - 1

    def position_of(self, label: int) -> int:
        k = label - self.lowest_label
        if not (0 <= k < len(self.positions)):
            raise KeyError(f"no defect labeled {label}")
        return int(self.positions[k])

    def interval_at(self, site: int):
        """Label interval (a, b) resident at the site, or None if empty."""
        i0 = int(np.searchsorted(self.positions, site, side="left"))
        i1 = int(np.searchsorted(self.positions, site, side="right"))
        if i0 == i1:
            return None
        return self.lowest_label + i0, self.lowest_label + i1 - 1

    def multiplicity(self, site: int) -> int:
        i0 = np.searchsorted(self.positions, site, side="left")
        i1 = np.searchsorted(self.positions, site, side="right")
        return int(i1 - i0)

    def move_right(self, site: int) -> int:
        """Relocate the highest label at the site one step right."""
        i1 = int(np.searchsorted(self.positions, site, side="right"))
        if i1 == 0 or self.positions[i1 - 1] != site:
            raise CouplingError(f"right move claimed at empty site {site}")
        self.positions[i1 - 1] += 1
        return self.lowest_label + i1 - 1

    def move_left(self, site: int) -> int:
        """Relocate the lowest label at the site one step left."""
        i0 = int(np.searchsorted(self.positions, site, side="left"))
        if i0 == len(self.positions) or self.positions[i0] != site:
            raise CouplingError(f"left move claimed at empty site {site}")
        self.positions[i0] -= 1
        return self.lowest_label + i0

    def check_sorted(self):
        if np.any(np.diff(self.positions) < 0):
            raise CouplingError("label positions lost their ordering")


@dataclass
class EventRecord:
    """One applied coupled event, as seen by listeners."""

    column: int
    kind: int
    time: float
    moved_label: int | None = None
    from_site: int | None = None
    to_site: int | None = None

    @property
    def sites_touched(self):
        return (self.column, self.column + 1)


class LayeredPairState:
    """Coupled ordered pair (lower, upper) plus its labeled defects."""

    def __init__(self, lower: IncrementField, upper: IncrementField, labels: SecondClassLabels):
        if (lower.ell, lower.r) != (upper.ell, upper.r):
            raise ValueError("coupled fields must share one window")
        self.lower = lower
        self.upper = upper
        self.labels = labels
        self.check_ordering()

    @property
    def clock(self) -> float:
        return self.upper.clock

    def discrepancies(self) -> np.ndarray:
        return self.upper.omega - self.lower.omega

    def check_ordering(self):
        if np.any(self.lower.omega > self.upper.omega):
            bad = np.nonzero(self.lower.omega > self.upper.omega)[0]
            raise CouplingError(
                f"sitewise ordering broken at sites {bad + self.lower.ell - 1}"
            )

    def check_multiplicities(self):
        """Defect counts per site must match the label blocks exactly."""
        d = self.discrepancies()
        if int(d.sum()) != len(self.labels):
            raise CouplingError("total defect count differs from label count")
        for k, site in enumerate(range(self.lower.ell - 1, self.lower.r + 2)):
            if self.labels.multiplicity(site) != d[k]:
                raise CouplingError(
                    f"label multiplicity mismatch at site {site}: "
                    f"{self.labels.multiplicity(site)} labels vs {d[k]} defects"
                )

    @classmethod
    def from_fields(cls, lower: IncrementField, upper: IncrementField, origin_top_label: int = 0):
        """Label the defects left to right so the top label at the origin
        is ``origin_top_label`` (the origin must carry a defect)."""
        d = upper.omega - lower.omega
        if np.any(d < 0):
            raise CouplingError("lower field exceeds upper field somewhere")
        sites = np.arange(lower.ell - 1, lower.r + 2)
        positions = np.repeat(sites, d)
        origin_idx = lower.idx(0)
        if d[origin_idx] == 0:
            raise CouplingError("no defect at the origin to anchor the labeling")
        n_through_origin = int(d[: origin_idx + 1].sum())
        lowest = origin_top_label - n_through_origin + 1
        return cls(lower, upper, SecondClassLabels(positions, lowest))


def initial_pair_rates(
    lower, upper, volume: VolumeSpec, params: RateParams
) -> np.ndarray:
    """Vectorized three-channel rate table for a fresh coupled engine,
    flat layout [both, upper_only, lower_only] per column."""
    beta = params.beta
    lo = np.asarray(lower, dtype=np.float64)
    up = np.asarray(upper, dtype=np.float64)

    def f(z):
        return np.exp(beta * z - 0.5 * beta)

    both = f(lo[:-1]) + f(-up[1:])
    upper_only = f(up[:-1]) - f(lo[:-1])
    lower_only = f(-lo[1:]) - f(-up[1:])
    if volume.is_theta:
        both[0] = math.exp(volume.theta) + f(-up[1])
        upper_only[0] = 0.0
        lower_only[0] = f(-lo[1]) - f(-up[1])
        both[-1] = math.exp(-volume.theta) + f(lo[-2])
        upper_only[-1] = f(up[-2]) - f(lo[-2])
        lower_only[-1] = 0.0
    else:
        both[0] = upper_only[0] = lower_only[0] = 0.0
        both[-1] = upper_only[-1] = lower_only[-1] = 0.0
    rates = np.empty(3 * len(both), dtype=np.float64)
    rates[0::3] = both
    rates[1::3] = upper_only
    rates[2::3] = lower_only
    return rates


class CoupledPairEngine:
    """Exact event loop for the coupled pair with general defect counts.

    Pure Python; the hot single-defect case has a compiled twin in
    ``kernels.run_pair_defect`` that reproduces the same trajectories
    under a shared seed.  An optional listener receives each applied
    EventRecord (used by the tagged-label dynamics).
    """

    def __init__(
        self,
        state: LayeredPairState,
        params: RateParams,
        volume: VolumeSpec,
        rng,
        omega_max: int = DEFAULT_OMEGA_MAX,
        rebuild_every: int = DEFAULT_REBUILD_EVERY,
    ):
        if params.beta * (omega_max + 1) > RATE_EXPONENT_GUARD:
            raise ValueError("beta*omega_max too close to the overflow guard")
        self.state = state
        self.params = params
        self.volume = volume
        self.rng = rng
        self.omega_max = omega_max
        self.rebuild_every = rebuild_every
        self.exp_th = math.exp(volume.theta) if volume.is_theta else 0.0
        self.exp_nth = math.exp(-volume.theta) if volume.is_theta else 0.0
        self.events = 0
        self.rates = initial_pair_rates(state.lower.omega, state.upper.omega, volume, params)
        self.tree = fenwick_build(self.rates)

    def column_rates(self, j: int):
        """(both, upper_only, lower_only) of column j, from current state."""
        v = self.volume
        c = v.ell - 1 + j
        lower = self.state.lower.omega
        upper = self.state.upper.omega
        return kernels.pair_column_rates(
            lower[j], upper[j], lower[j + 1], upper[j + 1],
            c == v.ell - 1, c == v.r,
            self.params.beta, v.is_theta, self.exp_th, self.exp_nth,
        )

    @property
    def total_rate(self) -> float:
        return fenwick_total(self.tree)

    def step(self, t_end: float = math.inf):
        """Apply one coupled event; returns its EventRecord, or None when
        the next event would pass t_end."""
        st = self.state
        clock, idx = kernels.pick_event(self.tree, self.rates, self.rng, st.upper.clock, t_end)
        st.upper.clock = clock
        st.lower.clock = clock
        if idx < 0:
            return None
        j = idx // 3
        kind = idx - 3 * j
        c = self.volume.ell - 1 + j
        record = EventRecord(column=c, kind=kind, time=clock)
        if kind == BOTH:
            apply_brick(c, st.upper, self.omega_max)
            apply_brick(c, st.lower, self.omega_max)
        elif kind == UPPER_ONLY:
            apply_brick(c, st.upper, self.omega_max)
            record.moved_label = st.labels.move_right(c)
            record.from_site = c
            record.to_site = c + 1
        else:
            apply_brick(c, st.lower, self.omega_max)
            record.moved_label = st.labels.move_left(c + 1)
            record.from_site = c + 1
            record.to_site = c
        v = self.volume
        lo = j - 1 if j > 0 else 0
        hi = j + 1 if j + 1 < v.n_cols else v.n_cols - 1
        kernels.set_pair_columns_general(
            self.tree, self.rates, st.lower.omega, st.upper.omega, lo, hi,
            v.ell, v.r, self.params.beta, v.is_theta, self.exp_th, self.exp_nth,
        )
        self.events += 1
        if self.events % self.rebuild_every == 0:
            fenwick_rebuild(self.tree, self.rates)
        return record

    def run_until(self, t_end: float, listener=None, check_every: int = 0):
        """Advance to t_end; ``listener(record)`` is called per event and
        ``check_every`` > 0 re-verifies the pair invariants periodically."""
        st = self.state
        while st.upper.clock < t_end:
            record = self.step(t_end)
            if record is None:
                break
            if listener is not None:
                listener(record)
            if check_every and self.events % check_every == 0:
                st.check_ordering()
                st.check_multiplicities()
