"""Exact, simulation-free verification of the closed-form claims.

Everything here is finite summation or series evaluation, no random
numbers: refresh-table algebra, domination of the geometric label law
under the bottom-biased redraw, stationarity of the product law under the
theta-boundary generator, the defect Kolmogorov identity at time zero,
and the skew random-walk transition law used as the reference for the
shock experiment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .convexity import RefreshTable
from .measures import RateParams, build_marginal, theta_of_rho

DEFAULT_BAND = 25


@dataclass
class CheckResult:
    """Outcome of one oracle check."""

    name: str
    passed: bool
    max_err: float
    detail: str = ""
    failures: list = field(default_factory=list)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: max_err={self.max_err:.3e} {self.detail}"


# ---------------------------------------------------------------------------
# refresh-table algebra


def check_refresh_tables(
    beta: float, d_max: int = 60, table: RefreshTable | None = None, tol: float = 1e-12
) -> CheckResult:
    """Normalization, nonnegativity and marginal consistency of the joint
    redraw law against the two single-label laws, for every defect count."""
    t = table if table is not None else RefreshTable(beta)
    failures = []
    max_err = 0.0

    def note(err, d, what):
        nonlocal max_err
        max_err = max(max_err, err)
        if err > tol:
            failures.append((beta, d, what, err))

    note(abs(t.p(1) - 1.0), 1, "p(1)=1")
    note(abs(t.q(1) - 1.0), 1, "q(1)=1")
    note(abs(t.p(2) + t.q(2) - 1.0), 2, "p(2)+q(2)=1")
    for d in range(1, d_max + 1):
        joint = t.joint_masses(d)
        if np.any(joint < -tol):
            failures.append((beta, d, "nonnegative", float(-joint.min())))
        note(abs(float(joint.sum()) - 1.0), d, "normalization")
        # y-marginal over outcomes (a, b-1, b); z-marginal over (a, a+1, b)
        y_marg = np.array([joint[0], joint[1] + joint[3], joint[2] + joint[4] + joint[5]])
        z_marg = np.array([joint[0] + joint[1] + joint[2], joint[3] + joint[4], joint[5]])
        note(float(np.abs(y_marg - t.y_masses(d)).max()), d, "y-marginal")
        note(float(np.abs(z_marg - t.z_masses(d)).max()), d, "z-marginal")
        if d >= 2:
            if t.p(d) < t.q(d) - tol:
                failures.append((beta, d, "p>=q", t.q(d) - t.p(d)))
            if t.p(d) + t.q(d) > 1.0 + tol:
                failures.append((beta, d, "p+q<=1", t.p(d) + t.q(d) - 1.0))
    joint2 = t.joint_masses(2)
    for line in (1, 3, 4):
        note(abs(float(joint2[line])), 2, f"d=2 line {line + 1} vanishes")
    return CheckResult(
        name=f"refresh-tables(beta={beta})",
        passed=not failures,
        max_err=max_err,
        detail=f"d <= {d_max}",
        failures=failures,
    )


# ---------------------------------------------------------------------------
# geometric label law domination


def pushed_label_law(beta: float, a: int, b: int, m_hi: int | None = None):
    """Push the geometric law through the bottom-biased redraw on [a, b].

    Mass inside [a, b] is redistributed onto {a, a+1, b} with the lower
    label's redraw weights; mass outside is unchanged.  Returns
    (support, nu, nu_star).
    """
    if a > b:
        raise ValueError("need a <= b")
    if m_hi is None:
        m_hi = max(b + 2, int(math.ceil(37.0 / beta)) + max(b, 0) + 2)
    lo = min(a, 0) - 1
    support = np.arange(lo, m_hi + 1)
    nu = np.where(
        support >= 0, np.exp(-beta * np.maximum(support, 0)) * (1 - math.exp(-beta)), 0.0
    )
    nu_star = nu.copy()
    if a == b:
        return support, nu, nu_star
    inside = (support >= a) & (support <= b)
    mass = float(nu[inside].sum())
    table = RefreshTable(beta)
    z_masses = table.z_masses(b - a + 1)
    nu_star[inside] = 0.0
    nu_star[support == a] += z_masses[0] * mass
    nu_star[support == a + 1] += z_masses[1] * mass
    nu_star[support == b] += z_masses[2] * mass
    return support, nu, nu_star


def check_label_law_domination(
    beta: float, a_lo: int = -10, b_hi: int = 20, tol: float = 1e-12
) -> CheckResult:
    """The pushed law must sit stochastically below the geometric law, with
    the block-bottom mass preserved when the bottom is >= 0 and no mass
    gain at the block top."""
    failures = []
    max_err = 0.0
    for a in range(a_lo, b_hi + 1):
        for b in range(a, b_hi + 1):
            support, nu, nu_star = pushed_label_law(beta, a, b)
            cdf_gap = np.cumsum(nu_star) - np.cumsum(nu)
            worst = float(cdf_gap.min())
            max_err = max(max_err, max(0.0, -worst))
            if worst < -tol:
                k = int(support[np.argmin(cdf_gap)])
                failures.append((beta, a, b, "cdf-domination", k, worst))
            ia = int(np.nonzero(support == a)[0][0])
            ib = int(np.nonzero(support == b)[0][0])
            if a >= 0:
                err = abs(float(nu_star[ia] - nu[ia]))
                max_err = max(max_err, err)
                if err > tol:
                    failures.append((beta, a, b, "bottom-mass-preserved", a, err))
            gain = float(nu_star[ib] - nu[ib])
            if gain > tol:
                failures.append((beta, a, b, "top-mass-gain", b, gain))
            if a == b and float(np.abs(nu_star - nu).max()) > 0.0:
                failures.append((beta, a, b, "identity-at-singleton", a, 1.0))
    return CheckResult(
        name=f"label-law-domination(beta={beta})",
        passed=not failures,
        max_err=max_err,
        detail=f"a in [{a_lo}, {b_hi}], b in [a, {b_hi}]",
        failures=failures,
    )


# ---------------------------------------------------------------------------
# measure identities


def check_measure_identities(beta: float, tol: float = 1e-9) -> CheckResult:
    """Shift covariance of the stationary family and convexity of the flux:
    the law at theta+beta is the law at theta shifted by one site value,
    logZ gains theta + beta/2, the density gains exactly 1, the size-biased
    forms agree, inversion round-trips, and the flux has positive second
    differences."""
    from .measures import flux_and_speed, size_biased

    params = RateParams(beta)
    failures = []
    max_err = 0.0

    def note(err, what):
        nonlocal max_err
        max_err = max(max_err, err)
        if err > tol:
            failures.append((beta, what, err))

    for theta in np.arange(-2.0, 2.01, 0.5):
        m0 = build_marginal(theta, params)
        m1 = build_marginal(theta + beta, params)
        note(abs(m1.logZ - (m0.logZ + theta + 0.5 * beta)), f"logZ-shift(theta={theta})")
        note(abs(m1.rho - (m0.rho + 1.0)) / max(1.0, abs(m0.rho) + 1), f"rho-shift(theta={theta})")
        zs = np.arange(-30, 31)
        note(float(np.abs(m1.pmf_at(zs) - m0.pmf_at(zs - 1)).max()), f"pmf-shift(theta={theta})")
        sb = size_biased(m0)
        note(sb.forms_max_diff, f"size-biased-forms(theta={theta})")
        note(abs(float(sb.pmf.sum()) - 1.0), f"size-biased-mass(theta={theta})")
    for rho in np.arange(-2.0, 2.01, 0.25):
        th = theta_of_rho(rho, params)
        m = build_marginal(th, params)
        note(abs(m.rho - rho) / max(1.0, abs(rho)), f"inversion-roundtrip(rho={rho})")
    h = 0.25
    for rho in np.arange(-2.0, 2.01, 0.25):
        H0, _ = flux_and_speed(rho - h, params)
        H1, _ = flux_and_speed(rho, params)
        H2, _ = flux_and_speed(rho + h, params)
        second = H0 + H2 - 2.0 * H1
        if second <= 0.0:
            failures.append((beta, f"flux-convexity(rho={rho})", second))
    return CheckResult(
        name=f"measure-identities(beta={beta})",
        passed=not failures,
        max_err=max_err,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# product-space summation


def _product_expectation(site_axes, integrand):
    """Weighted sum of ``integrand`` over a product grid.

    ``site_axes`` maps site -> (values, weights).  Each site's values are
    reshaped onto their own broadcast axes, so the integrand works on cheap
    broadcastable views and only the final product materializes the grid.
    """
    sites = list(site_axes)
    nd = len(sites)
    axes = {}
    wtot = np.array(1.0)
    for k, s in enumerate(sites):
        vals, w = site_axes[s]
        shape = [1] * nd
        shape[k] = len(vals)
        axes[s] = np.asarray(vals, dtype=np.float64).reshape(shape)
        wtot = wtot * np.asarray(w, dtype=np.float64).reshape(shape)
    return float(np.sum(integrand(axes) * wtot))


# fixed, versioned cylinder suite: bounded functions of a few sites,
# including ones that touch the window edges so the boundary channels
# contribute nontrivially
CYLINDER_SUITE_V1 = (
    ("const", (), lambda w: 1.0),
    ("occupancy0", (0,), lambda w: (w[0] == 0).astype(np.float64)),
    ("omega0", (0,), lambda w: w[0]),
    ("omega0_sq", (0,), lambda w: w[0] * w[0]),
    ("omega0_omega1", (0, 1), lambda w: w[0] * w[1]),
    ("capped_exp0", (0,), lambda w: np.exp(np.minimum(w[0], 6.0))),
    ("omega_m1", (-1,), lambda w: w[-1]),
    ("occupancy_m1", (-1,), lambda w: (w[-1] == 1).astype(np.float64)),
    ("omega_m1_omega1", (-1, 1), lambda w: w[-1] * w[1]),
    ("omega_m2_sq", (-2,), lambda w: w[-2] * w[-2]),
)


def frozen_conservation_residual(
    beta: float, n_sites: int = 3, band: int = 10, tol: float = 1e-12
) -> CheckResult:
    """The frozen-boundary generator annihilates the windowed increment
    sum configuration by configuration: every interior flip moves one
    unit between adjacent sites.  Evaluated pointwise on a truncated grid."""
    ell = -(n_sites // 2)
    r = ell + n_sites - 1
    window = list(range(ell, r + 1))
    vals = np.arange(-band, band + 1)

    def phi(axes):
        return sum(axes[s] for s in window)

    def integrand(axes):
        acc = 0.0
        for c in range(ell, r):
            rate = np.exp(beta * axes[c] - 0.5 * beta) + np.exp(-beta * axes[c + 1] - 0.5 * beta)
            shifted = {s: axes[s] + ({c: -1, c + 1: 1}.get(s, 0)) for s in window}
            acc = acc + rate * (phi(shifted) - phi(axes))
        return np.abs(acc) if isinstance(acc, np.ndarray) else abs(acc)

    # max over the grid, not an expectation: the identity is pathwise
    sites_axes = {}
    nd = len(window)
    for k, s in enumerate(window):
        shape = [1] * nd
        shape[k] = len(vals)
        sites_axes[s] = vals.astype(np.float64).reshape(shape)
    max_err = float(np.max(integrand(sites_axes)))
    return CheckResult(
        name=f"frozen-conservation(beta={beta}, n={n_sites})",
        passed=max_err <= tol,
        max_err=max_err,
        detail="pointwise generator residual of the windowed sum",
    )


def stationarity_residual(
    theta: float,
    params: RateParams,
    n_sites: int = 3,
    band: int = DEFAULT_BAND,
    suite=CYLINDER_SUITE_V1,
    tol: float = 1e-6,
    tail_tol: float = 1e-12,
) -> CheckResult:
    """Exact E[G phi] under the product stationary law on a small window
    with theta-boundary injection; must vanish for every bounded cylinder
    function.  Residuals are scaled by sqrt(E[phi^2])."""
    beta = params.beta
    ell = -(n_sites // 2)
    r = ell + n_sites - 1
    window = list(range(ell, r + 1))
    marginal = build_marginal(theta, params, tail_tol)
    vals = np.arange(-band, band + 1)
    weights = marginal.pmf_at(vals)
    neglected = 1.0 - float(weights.sum())
    if neglected > 1e-9:
        raise ValueError(f"band {band} too small: neglected mass {neglected:.3e}")

    exp_th = math.exp(theta)
    exp_nth = math.exp(-theta)
    channels = []
    for c in range(ell, r):
        def rate(axes, c=c):
            return np.exp(beta * axes[c] - 0.5 * beta) + np.exp(-beta * axes[c + 1] - 0.5 * beta)
        channels.append((rate, {c: -1, c + 1: +1}))

    def rate_left(axes):
        return exp_th + np.exp(-beta * axes[ell] - 0.5 * beta)

    def rate_right(axes):
        return exp_nth + np.exp(beta * axes[r] - 0.5 * beta)

    channels.append((rate_left, {ell: +1}))
    channels.append((rate_right, {r: -1}))

    results = []
    failures = []
    max_err = 0.0
    for phi_name, supp, phi in suite:
        if any(s not in window for s in supp):
            continue
        phi_sites = list(supp)
        residual = 0.0
        for rate_fn, shift in channels:
            involved = sorted(set(phi_sites) | set(shift))

            def integrand(axes, rate_fn=rate_fn, shift=shift, phi=phi, ps=phi_sites):
                base = phi({s: axes[s] for s in ps})
                shifted = phi({s: axes[s] + shift.get(s, 0) for s in ps})
                return rate_fn(axes) * (shifted - base)

            site_axes = {s: (vals, weights) for s in involved}
            residual += _product_expectation(site_axes, integrand)
        scale_axes = {s: (vals, weights) for s in (phi_sites or [0])}
        second = _product_expectation(
            scale_axes, lambda axes, phi=phi, ps=phi_sites: phi({s: axes[s] for s in ps}) ** 2
        )
        scale = max(1.0, math.sqrt(abs(second)))
        err = abs(residual) / scale
        results.append((phi_name, err))
        max_err = max(max_err, err)
        if err > tol:
            failures.append((phi_name, residual, scale))
    detail = ", ".join(f"{n}={v:.1e}" for n, v in results)
    return CheckResult(
        name=f"stationarity(theta={theta}, beta={beta}, n={n_sites}, K={band})",
        passed=not failures,
        max_err=max_err,
        detail=detail,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# defect Kolmogorov identity at time zero

# pair cylinder functions: (name, support sites, phi(lower_dict, upper_dict))
PAIR_SUITE_V1 = (
    ("const", (), lambda lo, up: 1.0),
    ("defect_at_origin", (0,), lambda lo, up: ((up[0] - lo[0]) == 1).astype(np.float64)),
    ("upper0", (0,), lambda lo, up: up[0]),
    ("lower_m1_upper1", (-1, 1), lambda lo, up: lo[-1] * up[1]),
    ("defect_and_right", (0, 1), lambda lo, up: ((up[0] - lo[0]) == 1) * up[1]),
    ("capped_exp_upper0", (0,), lambda lo, up: np.exp(np.minimum(up[0], 6.0))),
    ("lower_m2", (-2,), lambda lo, up: lo[-2]),
    ("upper2_sq", (2,), lambda lo, up: up[2] * up[2]),
)


def _shock_site_axes(site: int, defect_site: int, vals, w_dense, w_sparse):
    """(values, weights, lower offset, upper offset) for one site of the
    shifted defect product measure: equal dense coordinates left of the
    defect, (v, v+1) at the defect, equal sparse coordinates to the right."""
    if site < defect_site:
        return (vals, w_dense, 0, 0)
    if site == defect_site:
        return (vals, w_sparse, 0, 1)
    return (vals, w_sparse, 0, 0)


def _pair_expectation(phi, supp, defect_site, vals, w_dense, w_sparse):
    if not supp:
        supp_eff = [0]
    else:
        supp_eff = sorted(supp)
    site_axes = {}
    offsets = {}
    for s in supp_eff:
        v, w, off_lo, off_up = _shock_site_axes(s, defect_site, vals, w_dense, w_sparse)
        site_axes[s] = (v, w)
        offsets[s] = (off_lo, off_up)

    def integrand(axes):
        lo = {s: axes[s] + offsets[s][0] for s in supp_eff}
        up = {s: axes[s] + offsets[s][1] for s in supp_eff}
        return phi(lo, up) * np.ones_like(axes[supp_eff[0]])

    return _product_expectation(site_axes, integrand)


def shock_generator_residual(
    rho: float,
    params: RateParams,
    band: int = DEFAULT_BAND,
    suite=PAIR_SUITE_V1,
    tol: float = 1e-6,
    tail_tol: float = 1e-12,
) -> CheckResult:
    """Time-zero derivative identity for the defect product measure.

    The coupled-pair generator applied to a cylinder function and averaged
    over the defect measure must equal the skew random walk combination
    right*(shift right - id) + left*(shift left - id) applied to the
    measure, with right = e^{theta+beta} - e^{theta} and
    left = e^{-theta} - e^{-theta-beta}.
    """
    beta = params.beta
    theta = theta_of_rho(rho, params, tail_tol)
    dense = build_marginal(theta + beta, params, tail_tol)   # density rho + 1
    sparse = build_marginal(theta, params, tail_tol)         # density rho
    vals = np.arange(-band, band + 1)
    w_dense = dense.pmf_at(vals)
    w_sparse = sparse.pmf_at(vals)
    for w, lbl in ((w_dense, "dense"), (w_sparse, "sparse")):
        neglected = 1.0 - float(w.sum())
        if neglected > 1e-9:
            raise ValueError(f"band {band} too small for the {lbl} marginal: {neglected:.3e}")

    right = math.exp(theta + beta) - math.exp(theta)
    left = math.exp(-theta) - math.exp(-theta - beta)

    results = []
    failures = []
    max_err = 0.0
    for phi_name, supp, phi in suite:
        supp = sorted(supp)
        w_lo = min(supp) if supp else 0
        w_hi = max(supp) if supp else 0

        # left side: sum over columns of E[rate * (phi after - phi before)]
        lhs = 0.0
        for c in range(w_lo - 1, w_hi + 1):
            involved = sorted(set(supp) | {c, c + 1})
            site_axes = {}
            offsets = {}
            for s in involved:
                v, w, off_lo, off_up = _shock_site_axes(s, 0, vals, w_dense, w_sparse)
                site_axes[s] = (v, w)
                offsets[s] = (off_lo, off_up)

            def integrand(axes, c=c, offsets=offsets, involved=involved, phi=phi, supp=supp):
                lo = {s: axes[s] + offsets[s][0] for s in involved}
                up = {s: axes[s] + offsets[s][1] for s in involved}
                both = np.exp(beta * lo[c] - 0.5 * beta) + np.exp(-beta * up[c + 1] - 0.5 * beta)
                upper_only = np.exp(beta * up[c] - 0.5 * beta) - np.exp(beta * lo[c] - 0.5 * beta)
                lower_only = np.exp(-beta * lo[c + 1] - 0.5 * beta) - np.exp(
                    -beta * up[c + 1] - 0.5 * beta
                )
                base = phi({s: lo[s] for s in supp}, {s: up[s] for s in supp})
                def shifted(d_lo, d_up):
                    lo2 = {s: lo[s] + d_lo.get(s, 0) for s in supp}
                    up2 = {s: up[s] + d_up.get(s, 0) for s in supp}
                    return phi(lo2, up2)
                move = {c: -1, c + 1: +1}
                acc = both * (shifted(move, move) - base)
                acc = acc + upper_only * (shifted({}, move) - base)
                acc = acc + lower_only * (shifted(move, {}) - base)
                return acc

            lhs += _product_expectation(site_axes, integrand)

        e_center = _pair_expectation(phi, supp, 0, vals, w_dense, w_sparse)
        e_right = _pair_expectation(phi, supp, 1, vals, w_dense, w_sparse)
        e_left = _pair_expectation(phi, supp, -1, vals, w_dense, w_sparse)
        rhs = right * (e_right - e_center) + left * (e_left - e_center)

        scale = max(1.0, abs(e_center))
        err = abs(lhs - rhs) / scale
        results.append((phi_name, err))
        max_err = max(max_err, err)
        if err > tol:
            failures.append((phi_name, lhs, rhs))
    detail = ", ".join(f"{n}={v:.1e}" for n, v in results)
    return CheckResult(
        name=f"defect-kolmogorov(rho={rho}, beta={beta}, K={band})",
        passed=not failures,
        max_err=max_err,
        detail=detail,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# skew random walk law


def rw_log_pmf(right: float, left: float, t: float, ks) -> np.ndarray:
    """Log transition probabilities of the two-sided jump process with the
    given rates, via the log-space convolution series over the smaller
    jump count."""
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    if right <= 0 or left <= 0:
        raise ValueError("both rates must be positive")
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        out = np.where(ks == 0, 0.0, -np.inf)
        return out
    lr = math.log(right * t)
    ll = math.log(left * t)
    const = -(right + left) * t
    out = np.empty(len(ks), dtype=np.float64)
    mean_j = math.sqrt(right * left) * t
    for i, k in enumerate(ks):
        j0 = max(0, -int(k))
        # series in j (number of left jumps); extend well past the mode
        j_hi = j0 + int(math.ceil(mean_j + 12.0 * math.sqrt(mean_j + 1.0) + 30.0))
        js = np.arange(j0, j_hi + 1, dtype=np.float64)
        logterms = const + (k + js) * lr + js * ll - gammaln(k + js + 1.0) - gammaln(js + 1.0)
        out[i] = logsumexp(logterms)
    return out


def rw_pmf(right: float, left: float, t: float, ks) -> np.ndarray:
    """Transition probabilities P_k(t); truncation error below 1e-14
    relative by construction of the series cutoff."""
    single = np.isscalar(ks)
    out = np.exp(rw_log_pmf(right, left, t, ks))
    return float(out[0]) if single else out


def rw_law(right: float, left: float, t: float, k: int) -> float:
    return rw_pmf(right, left, t, k)


def rw_law_expm(right: float, left: float, t: float, m: int) -> np.ndarray:
    """Matrix-exponential cross-check on the truncated state space
    [-m, m]; returns the occupation vector started from 0."""
    from scipy.linalg import expm

    n = 2 * m + 1
    gen = np.zeros((n, n))
    for i in range(n):
        if i + 1 < n:
            gen[i, i + 1] = right
        if i - 1 >= 0:
            gen[i, i - 1] = left
        gen[i, i] = -(right + left)
    probs = expm(gen * t)[m]
    return probs


def run_all_checks(
    betas=(0.25, 0.5, 1.0, 2.0),
    d_max: int = 60,
    band: int = DEFAULT_BAND,
    fast: bool = False,
) -> list[CheckResult]:
    """The full oracle suite; ``fast`` trims the expensive summations."""
    checks = []
    for beta in betas:
        checks.append(check_refresh_tables(beta, d_max=d_max))
    for beta in betas:
        checks.append(check_label_law_domination(beta, a_lo=-10, b_hi=20))
    for beta in betas:
        checks.append(check_measure_identities(beta))
    params1 = RateParams(1.0)
    checks.append(stationarity_residual(0.0, params1, n_sites=3, band=band))
    if not fast:
        checks.append(stationarity_residual(0.0, params1, n_sites=4, band=band))
        checks.append(stationarity_residual(0.5, params1, n_sites=3, band=band))
        checks.append(stationarity_residual(0.0, RateParams(0.5), n_sites=3, band=band))
    checks.append(frozen_conservation_residual(1.0))
    checks.append(shock_generator_residual(0.0, params1, band=band))
    if not fast:
        checks.append(shock_generator_residual(1.0, params1, band=band))

    # random walk law: normalization, moments, matrix exponential agreement
    right, left = math.e - 1.0, 1.0 - math.exp(-1.0)
    t = 4.0
    ks = np.arange(-40, 61)
    pk = rw_pmf(right, left, t, ks)
    norm_err = abs(float(pk.sum()) - 1.0)
    mean_err = abs(float((ks * pk).sum()) - (right - left) * t)
    var = float((ks * ks * pk).sum()) - float((ks * pk).sum()) ** 2
    var_err = abs(var - (right + left) * t)
    expm_probs = rw_law_expm(right, left, 1.0, 40)
    series_probs = rw_pmf(right, left, 1.0, np.arange(-40, 41))
    expm_err = float(np.abs(expm_probs - series_probs).max())
    rw_err = max(norm_err, mean_err, var_err, expm_err)
    checks.append(
        CheckResult(
            name="random-walk-law",
            passed=norm_err < 1e-12 and mean_err < 1e-10 and var_err < 1e-9 and expm_err < 1e-10,
            max_err=rw_err,
            detail=(
                f"norm={norm_err:.1e} mean={mean_err:.1e} "
                f"var={var_err:.1e} expm={expm_err:.1e}"
            ),
        )
    )
    return checks
