"""Tagged-label dynamics riding on a coupled ordered pair.

Two integer labels y >= z live on the defect labels of a coupled pair.
After every background event that touches the site where a label resides
(before the move), the label redraws its value among the labels at its
post-move site.  The redraw laws depend only on the defect count d at
that site, through

    p(d) = (1 - e^{-beta}) / (1 - e^{-beta d}),
    q(d) = e^{-beta(d-1)} (1 - e^{-beta}) / (1 - e^{-beta d}),

with p(1) = q(1) = 1:  the y label lands on the block bottom a with
probability q, on b-1 with probability 1-p-q and on the top b with
probability p; the z label uses the mirrored law; and when both labels
end in the same block they redraw from a six-line joint law whose
marginals are the two single-label laws and which never produces y < z.

The construction keeps the evolutions (upper - delta_{X_y}, upper) and
(lower, lower + delta_{X_z}) marginally in basic coupling, while
displacements of z upward and of y downward stay stochastically below a
fixed geometric law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import (
    CoupledPairEngine,
    CouplingError,
    EventRecord,
    LayeredPairState,
    SecondClassLabels,
)
from .kernels import BOTH
from .lattice import IncrementField, VolumeSpec
from .measures import OrderedPairSampler, RateParams


class RefreshTable:
    """Redraw probabilities p(d), q(d) as functions of the defect count."""

    def __init__(self, beta: float):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.beta = beta

    def p(self, d: int) -> float:
        if d < 1:
            raise ValueError(f"defect count must be >= 1, got {d}")
        if d == 1:
            return 1.0
        b = self.beta
        return (1.0 - math.exp(-b)) / (1.0 - math.exp(-b * d))

    def q(self, d: int) -> float:
        if d < 1:
            raise ValueError(f"defect count must be >= 1, got {d}")
        if d == 1:
            return 1.0
        b = self.beta
        return math.exp(-b * (d - 1)) * (1.0 - math.exp(-b)) / (1.0 - math.exp(-b * d))

    def y_masses(self, d: int) -> np.ndarray:
        """Masses on outcomes (a, b-1, b) for the upper label."""
        if d == 1:
            return np.array([1.0, 0.0, 0.0])
        p, q = self.p(d), self.q(d)
        return np.array([q, 1.0 - p - q, p])

    def z_masses(self, d: int) -> np.ndarray:
        """Masses on outcomes (a, a+1, b) for the lower label."""
        if d == 1:
            return np.array([1.0, 0.0, 0.0])
        p, q = self.p(d), self.q(d)
        return np.array([p, 1.0 - p - q, q])

    def joint_masses(self, d: int) -> np.ndarray:
        """Masses on the six joint outcomes
        [(a,a), (b-1,a), (b,a), (b-1,a+1), (b,a+1), (b,b)]."""
        if d == 1:
            return np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        p, q = self.p(d), self.q(d)
        side = min(p - q, 1.0 - p - q)
        return np.array([q, side, max(2.0 * p - 1.0, 0.0), max(1.0 - 2.0 * p, 0.0), side, q])

    @staticmethod
    def _draw(masses, outcomes, rng):
        u = rng.random()
        acc = 0.0
        for m, out in zip(masses, outcomes):
            acc += m
            if u < acc:
                return out
        return outcomes[-1]

    def sample_y(self, a: int, b: int, rng) -> int:
        if b == a:
            return a
        return self._draw(self.y_masses(b - a + 1), (a, b - 1, b), rng)

    def sample_z(self, a: int, b: int, rng) -> int:
        if b == a:
            return a
        return self._draw(self.z_masses(b - a + 1), (a, a + 1, b), rng)

    def sample_joint(self, a: int, b: int, rng):
        if b == a:
            return a, a
        outcomes = ((a, a), (b - 1, a), (b, a), (b - 1, a + 1), (b, a + 1), (b, b))
        return self._draw(self.joint_masses(b - a + 1), outcomes, rng)


class LabelPairTracker:
    """Listener that maintains the (y, z) labels over a coupled run.

    Attach to :meth:`CoupledPairEngine.run_until` as the listener.  Counts
    ordering violations (must stay zero) and tracks the carriers'
    excursion range for the boundary-contamination flag.
    """

    def __init__(
        self,
        state: LayeredPairState,
        table: RefreshTable,
        rng,
        refresh_on_joint_moves: bool = True,
    ):
        self.state = state
        self.table = table
        self.rng = rng
        self.refresh_on_joint_moves = refresh_on_joint_moves
        self.y = 0
        self.z = 0
        # both labels start on defect label 0
        pos0 = state.labels.position_of(0)
        self.violations = 0
        self.refreshes = 0
        self.carrier_min = pos0
        self.carrier_max = pos0

    @property
    def carrier_y(self) -> int:
        return self.state.labels.position_of(self.y)

    @property
    def carrier_z(self) -> int:
        return self.state.labels.position_of(self.z)

    def _interval_checked(self, site: int):
        interval = self.state.labels.interval_at(site)
        if interval is None:
            raise CouplingError(f"tagged label claims empty site {site}")
        a, b = interval
        d_field = self.state.upper.omega_at(site) - self.state.lower.omega_at(site)
        if b - a + 1 != d_field:
            raise CouplingError(
                f"label block [{a}, {b}] at site {site} inconsistent with "
                f"defect count {d_field}"
            )
        return a, b

    def on_event(self, record: EventRecord):
        labels = self.state.labels
        # residence sites before the move; the engine has already applied it
        sy_pre = record.from_site if record.moved_label == self.y else labels.position_of(self.y)
        sz_pre = record.from_site if record.moved_label == self.z else labels.position_of(self.z)
        touched = record.sites_touched
        y_hit = sy_pre in touched
        z_hit = sz_pre in touched
        if not (y_hit or z_hit):
            return
        if not self.refresh_on_joint_moves and record.kind == BOTH:
            return
        sy = labels.position_of(self.y)
        sz = labels.position_of(self.z)
        if sy == sz:
            a, b = self._interval_checked(sy)
            self.y, self.z = self.table.sample_joint(a, b, self.rng)
        else:
            # distinct blocks: refresh order immaterial, the draws are independent
            if y_hit:
                a, b = self._interval_checked(sy)
                self.y = self.table.sample_y(a, b, self.rng)
            if z_hit:
                a, b = self._interval_checked(sz)
                self.z = self.table.sample_z(a, b, self.rng)
        self.refreshes += 1
        if self.y < self.z:
            self.violations += 1
        cy = labels.position_of(self.y)
        cz = labels.position_of(self.z)
        self.carrier_min = min(self.carrier_min, cy, cz)
        self.carrier_max = max(self.carrier_max, cy, cz)


@dataclass(frozen=True)
class DerivedViews:
    """Single-defect views split off the coupled pair."""

    omega_minus: np.ndarray
    eta_plus: np.ndarray
    defect_upper: int   # site of the defect of (omega_minus, upper)
    defect_lower: int   # site of the defect of (lower, eta_plus)


def derived_views(state: LayeredPairState, tracker: LabelPairTracker) -> DerivedViews:
    """upper - delta at y's carrier and lower + delta at z's carrier."""
    q_up = tracker.carrier_y
    q_lo = tracker.carrier_z
    omega_minus = state.upper.omega.copy()
    omega_minus[state.upper.idx(q_up)] -= 1
    eta_plus = state.lower.omega.copy()
    eta_plus[state.lower.idx(q_lo)] += 1
    return DerivedViews(omega_minus, eta_plus, q_up, q_lo)


def check_sandwich(state: LayeredPairState, views: DerivedViews):
    """lower <= omega_minus <= upper and lower <= eta_plus <= upper sitewise."""
    lo = state.lower.omega
    up = state.upper.omega
    if np.any(views.omega_minus < lo) or np.any(views.omega_minus > up):
        raise CouplingError("omega_minus view escapes the pair sandwich")
    if np.any(views.eta_plus < lo) or np.any(views.eta_plus > up):
        raise CouplingError("eta_plus view escapes the pair sandwich")


def _density_profile(profile, volume: VolumeSpec):
    if callable(profile):
        return {i: float(profile(i)) for i in range(volume.ell - 1, volume.r + 2)}
    return {i: float(profile) for i in range(volume.ell - 1, volume.r + 2)}


def init_four_process(
    lam_profile,
    rho_profile,
    params: RateParams,
    volume: VolumeSpec,
    rng,
    tail_tol: float = 1e-12,
) -> LayeredPairState:
    """Initial coupled state for the tagged-label construction.

    Sitewise monotone couplings of the lower/upper stationary marginals,
    except at the origin where the strict size-biased coupling places at
    least one defect; labels anchored so the top label at the origin is 0.
    Profiles are constants or callables site -> density, with
    lam_profile <= rho_profile sitewise.
    """
    lam = _density_profile(lam_profile, volume)
    rho = _density_profile(rho_profile, volume)
    samplers = {}
    lower = np.empty(volume.n_sites, dtype=np.int64)
    upper = np.empty(volume.n_sites, dtype=np.int64)
    for k, site in enumerate(range(volume.ell - 1, volume.r + 2)):
        key = (lam[site], rho[site], site == 0)
        if key not in samplers:
            samplers[key] = OrderedPairSampler(
                lam[site], rho[site], params, strict_at_origin=(site == 0), tail_tol=tail_tol
            )
        lo, up = samplers[key].sample(rng)
        lower[k] = lo
        upper[k] = up
    lower_field = IncrementField.from_omega(volume.ell, volume.r, lower)
    upper_field = IncrementField.from_omega(volume.ell, volume.r, upper)
    return LayeredPairState.from_fields(lower_field, upper_field, origin_top_label=0)


class FourProcessInitializer:
    """Replica factory for constant density profiles; caches the two
    per-site samplers so repeated draws skip the density inversions."""

    def __init__(self, lam: float, rho: float, params: RateParams, volume: VolumeSpec, tail_tol: float = 1e-12):
        self.volume = volume
        self.bulk = OrderedPairSampler(lam, rho, params, strict_at_origin=False, tail_tol=tail_tol)
        self.origin = OrderedPairSampler(lam, rho, params, strict_at_origin=True, tail_tol=tail_tol)

    def sample(self, rng) -> LayeredPairState:
        vol = self.volume
        lower, upper = self.bulk.sample(rng, vol.n_sites)
        lower = np.asarray(lower, dtype=np.int64)
        upper = np.asarray(upper, dtype=np.int64)
        o_lo, o_up = self.origin.sample(rng)
        k0 = -(vol.ell - 1)
        lower[k0] = o_lo
        upper[k0] = o_up
        lower_field = IncrementField.from_omega(vol.ell, vol.r, lower)
        upper_field = IncrementField.from_omega(vol.ell, vol.r, upper)
        return LayeredPairState.from_fields(lower_field, upper_field, origin_top_label=0)


def run_label_construction(
    engine: CoupledPairEngine,
    tracker: LabelPairTracker,
    t_end: float,
    check_every: int = 0,
):
    """Drive the coupled engine with the tracker attached."""
    engine.run_until(t_end, listener=tracker.on_event, check_every=check_every)
    return tracker
