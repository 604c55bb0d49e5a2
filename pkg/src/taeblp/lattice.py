"""Finite-volume state and exact event-driven dynamics of a single process.

A window [ell, r] carries increment variables omega_i = h_{i-1} - h_i on
sites ell-1 .. r+1 and the column heights h_i on the same range,
normalized to h_0(0) = 0.  Two boundary variants:

* ``frozen``: only the interior columns ell .. r-1 grow; the windowed
  increment sum is conserved on every path.
* ``theta``: the outermost columns ell-1 and r also grow, with constant
  extra injection rates exp(theta) and exp(-theta), which keeps the
  product stationary law exactly invariant on sites ell .. r.

The event engine is an exact continuous-time jump chain: exponential
holding time at the total rate, channel picked proportionally to its rate
through a Fenwick table, and only the <= 3 affected channels recomputed
per event.  ``run_until`` dispatches to the compiled kernel; ``step``
performs one event in pure Python on the same state and RNG stream, and
the two produce identical trajectories for identical seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .fenwick import fenwick_build, fenwick_rebuild, fenwick_pick, fenwick_set, fenwick_total
from .measures import RATE_EXPONENT_GUARD, RateParams, build_marginal

DEFAULT_OMEGA_MAX = 40
DEFAULT_REBUILD_EVERY = 100_000

FROZEN = "frozen"
THETA = "theta"


class BandViolation(RuntimeError):
    """An increment left the admissible band: a bug or a mis-configuration,
    never silently clipped."""

    def __init__(self, site, value, time):
        super().__init__(
            f"increment {value} at site {site} left the admissible band "
            f"at time {time:.6f}"
        )
        self.site = site
        self.value = value
        self.time = time


@dataclass(frozen=True)
class VolumeSpec:
    """Finite window and boundary variant."""

    ell: int
    r: int
    boundary: str = THETA
    theta: float | None = None

    def __post_init__(self):
        if not (self.ell < 0 < self.r):
            raise ValueError(f"need ell < 0 < r, got [{self.ell}, {self.r}]")
        if self.boundary not in (FROZEN, THETA):
            raise ValueError(f"unknown boundary variant {self.boundary!r}")
        if self.boundary == THETA and self.theta is None:
            raise ValueError("theta-boundary volume needs a theta value")

    @property
    def site_lo(self) -> int:
        return self.ell - 1

    @property
    def site_hi(self) -> int:
        return self.r + 1

    @property
    def n_sites(self) -> int:
        return self.r - self.ell + 3

    @property
    def n_cols(self) -> int:
        # columns ell-1 .. r are allocated in both variants; frozen keeps
        # the two outermost at rate zero forever
        return self.r - self.ell + 2

    @property
    def is_theta(self) -> bool:
        return self.boundary == THETA

    def growth_columns(self):
        if self.is_theta:
            return range(self.ell - 1, self.r + 1)
        return range(self.ell, self.r)


class IncrementField:
    """Increments, heights and the simulation clock over one window."""

    def __init__(self, ell: int, r: int, omega, height, clock: float = 0.0):
        self.ell = ell
        self.r = r
        self.omega = np.asarray(omega, dtype=np.int64)
        self.height = np.asarray(height, dtype=np.int64)
        self.clock = float(clock)
        n = r - ell + 3
        if len(self.omega) != n or len(self.height) != n:
            raise ValueError(f"arrays must cover sites {ell - 1}..{r + 1}")

    @classmethod
    def from_omega(cls, ell: int, r: int, omega, clock: float = 0.0):
        """Integrate heights from increments with the h_0(0) = 0 anchor."""
        omega = np.asarray(omega, dtype=np.int64)
        n = r - ell + 3
        if len(omega) != n:
            raise ValueError(f"omega must cover sites {ell - 1}..{r + 1}")
        # h_i = sum_{j=i+1}^0 omega_j for i < 0 and -sum_{j=1}^i for i > 0,
        # which collapses to cumsum(omega) anchored at the origin
        cs = np.cumsum(omega)
        height = cs[-(ell - 1)] - cs
        return cls(ell, r, omega, height, clock)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.ell - 1, self.r + 2)

    def idx(self, site: int) -> int:
        k = site - (self.ell - 1)
        if not (0 <= k < len(self.omega)):
            raise IndexError(f"site {site} outside window [{self.ell - 1}, {self.r + 1}]")
        return k

    def omega_at(self, site: int) -> int:
        return int(self.omega[self.idx(site)])

    def height_at(self, site: int) -> int:
        return int(self.height[self.idx(site)])

    def copy(self) -> "IncrementField":
        return IncrementField(self.ell, self.r, self.omega.copy(), self.height.copy(), self.clock)

    def gradient_errors(self):
        """Sites i >= ell where omega_i != h_{i-1} - h_i."""
        diff = self.height[:-1] - self.height[1:]
        bad = np.nonzero(diff != self.omega[1:])[0]
        return [int(b) + self.ell for b in bad]

    def check_gradient(self):
        bad = self.gradient_errors()
        if bad:
            raise AssertionError(f"gradient identity broken at sites {bad}")

    def dump(self, fileobj, **meta):
        """Snapshot: header lines with metadata, then one `i omega_i h_i`
        line per site."""
        fileobj.write("# taeblp snapshot\n")
        items = {"ell": self.ell, "r": self.r, "clock": self.clock, **meta}
        fileobj.write("# " + " ".join(f"{k}={v}" for k, v in items.items()) + "\n")
        fileobj.write("# site omega height\n")
        for k, site in enumerate(range(self.ell - 1, self.r + 2)):
            fileobj.write(f"{site} {self.omega[k]} {self.height[k]}\n")

    @staticmethod
    def load(fileobj):
        """Parse a snapshot back into (field, metadata dict)."""
        meta = {}
        sites, omegas, heights = [], [], []
        for line in fileobj:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        k, v = token.split("=", 1)
                        meta[k] = v
                continue
            i, w, h = line.split()
            sites.append(int(i))
            omegas.append(int(w))
            heights.append(int(h))
        ell = int(meta["ell"])
        r = int(meta["r"])
        clock = float(meta.get("clock", 0.0))
        field = IncrementField(ell, r, np.array(omegas), np.array(heights), clock)
        if sites != list(range(ell - 1, r + 2)):
            raise ValueError("snapshot site range does not match its header")
        return field, meta


def initial_single_rates(omega, volume: VolumeSpec, params: RateParams) -> np.ndarray:
    """Vectorized column-rate table for a fresh engine."""
    beta = params.beta
    w = np.asarray(omega, dtype=np.float64)
    rates = np.exp(beta * w[:-1] - 0.5 * beta) + np.exp(-beta * w[1:] - 0.5 * beta)
    if volume.is_theta:
        rates[0] = math.exp(volume.theta) + math.exp(-beta * w[1] - 0.5 * beta)
        rates[-1] = math.exp(-volume.theta) + math.exp(beta * w[-2] - 0.5 * beta)
    else:
        rates[0] = 0.0
        rates[-1] = 0.0
    return rates


def init_stationary(
    theta: float,
    volume: VolumeSpec,
    params: RateParams,
    rng,
    tail_tol: float = 1e-12,
) -> IncrementField:
    """i.i.d. stationary increments over the window, heights integrated
    from the origin anchor."""
    marginal = build_marginal(theta, params, tail_tol)
    omega = marginal.sample(rng, volume.n_sites)
    return IncrementField.from_omega(volume.ell, volume.r, omega)


def column_rate(c: int, field: IncrementField, params: RateParams, volume: VolumeSpec) -> float:
    """Growth rate of column c under the volume's boundary variant."""
    if not (volume.ell - 1 <= c <= volume.r):
        raise ValueError(f"column {c} outside the growth range")
    exp_th = math.exp(volume.theta) if volume.is_theta else 0.0
    exp_nth = math.exp(-volume.theta) if volume.is_theta else 0.0
    j = c - (volume.ell - 1)
    return kernels.single_column_rate(
        field.omega, j, volume.ell, volume.r, params.beta, volume.is_theta, exp_th, exp_nth
    )


def apply_brick(c: int, field: IncrementField, omega_max: int = DEFAULT_OMEGA_MAX):
    """Lay one brick on column c: omega_c -= 1, omega_{c+1} += 1, h_c += 1."""
    j = field.idx(c)
    field.omega[j] -= 1
    field.omega[j + 1] += 1
    field.height[j] += 1
    for k, site in ((j, c), (j + 1, c + 1)):
        if field.ell <= site <= field.r and abs(field.omega[k]) > omega_max:
            raise BandViolation(site, int(field.omega[k]), field.clock)


class EventEngine:
    """Exact jump-chain simulator bound to one field and one RNG stream.

    The Fenwick-backed rate table is the source of channel weights; the
    tree total is re-summed from the raw rates every ``rebuild_every``
    events to cap floating drift.
    """

    def __init__(
        self,
        field: IncrementField,
        params: RateParams,
        volume: VolumeSpec,
        rng,
        omega_max: int = DEFAULT_OMEGA_MAX,
        rebuild_every: int = DEFAULT_REBUILD_EVERY,
    ):
        if params.beta * (omega_max + 1) > RATE_EXPONENT_GUARD:
            raise ValueError(
                f"beta*omega_max = {params.beta * omega_max:.3g} too close to "
                f"the overflow guard {RATE_EXPONENT_GUARD}"
            )
        if (field.ell, field.r) != (volume.ell, volume.r):
            raise ValueError("field window does not match the volume spec")
        self.field = field
        self.params = params
        self.volume = volume
        self.rng = rng
        self.omega_max = omega_max
        self.rebuild_every = rebuild_every
        self.exp_th = math.exp(volume.theta) if volume.is_theta else 0.0
        self.exp_nth = math.exp(-volume.theta) if volume.is_theta else 0.0
        self.events = 0
        self.rates = initial_single_rates(field.omega, volume, params)
        self.tree = fenwick_build(self.rates)

    @property
    def total_rate(self) -> float:
        return fenwick_total(self.tree)

    def check_total(self, rel_tol: float = 1e-9):
        exact = float(np.sum(self.rates))
        if abs(self.total_rate - exact) > rel_tol * max(exact, 1.0):
            raise AssertionError(
                f"rate-table drift: tree total {self.total_rate} vs sum {exact}"
            )

    def _refresh_columns(self, j_event: int):
        v = self.volume
        lo = j_event - 1 if j_event > 0 else 0
        hi = j_event + 1 if j_event + 1 < v.n_cols else v.n_cols - 1
        for jj in range(lo, hi + 1):
            fenwick_set(
                self.tree,
                self.rates,
                jj,
                kernels.single_column_rate(
                    self.field.omega, jj, v.ell, v.r, self.params.beta,
                    v.is_theta, self.exp_th, self.exp_nth,
                ),
            )

    def step(self, t_end: float = math.inf):
        """One event in pure Python; returns the column that fired, or None
        if the next event would pass t_end (clock then advances to t_end)."""
        f = self.field
        total = self.total_rate
        u1 = self.rng.random()
        dt = -math.log1p(-u1) / total
        if f.clock + dt > t_end:
            f.clock = t_end
            return None
        f.clock += dt
        u2 = self.rng.random() * total
        j = fenwick_pick(self.tree, u2)
        if self.rates[j] == 0.0:
            k = j - 1
            while k >= 0 and self.rates[k] == 0.0:
                k -= 1
            if k < 0:
                k = j + 1
                while self.rates[k] == 0.0:
                    k += 1
            j = k
        c = self.volume.ell - 1 + j
        apply_brick(c, f, self.omega_max)
        self._refresh_columns(j)
        self.events += 1
        if self.events % self.rebuild_every == 0:
            fenwick_rebuild(self.tree, self.rates)
        return c

    def run_until(self, t_end: float, python: bool = False):
        """Advance the field to t_end (compiled kernel unless python=True)."""
        f = self.field
        if t_end < f.clock:
            raise ValueError(f"t_end {t_end} is before the clock {f.clock}")
        if python:
            while f.clock < t_end:
                self.step(t_end)
            return
        v = self.volume
        clock, events, status, bad_site = kernels.run_single(
            f.omega, f.height, self.rates, self.tree, f.clock, t_end, self.rng,
            self.params.beta, v.is_theta, self.exp_th, self.exp_nth,
            v.ell, v.r, self.omega_max, self.rebuild_every, self.events,
        )
        f.clock = clock
        self.events = events
        if status == kernels.STATUS_BAND:
            raise BandViolation(bad_site, f.omega_at(bad_site), clock)
