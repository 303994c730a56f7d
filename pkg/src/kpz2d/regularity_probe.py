"""Scaled-test-function moment scans and the Poincare variance bound.

The negative-Holder diagnostics pair the renormalized height with bump
tests contracted to scale lambda = 2^-n (euclidean at fixed time, parabolic
in space-time) and track how the second moments grow with n.  The variance
bound check compares Var(<h, psi>) against the tilted pair-intersection
integral that dominates it.
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _rng
from .errors import ScaleUnresolvable
from .noise_field import TorusGrid, make_mollifier, sample_noise, torus_delta
from .polymer_mc import _ensemble_pair_intersection, build_ensembles
from .spde_solvers import ReducedParams, SolverConfig, solve_kpz

_norm_cache = {}
_norm_lock = threading.Lock()


def _bump1(u):
    """1-d bump on (-1/2, 1/2)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 0.5
    out[m] = np.exp(-1.0 / (1.0 - 4.0 * u[m] ** 2))
    return out


def _bump2(x, y):
    """Radial 2-d bump on the Euclidean ball B(0, 1/2)."""
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    out = np.zeros_like(r2, dtype=float)
    m = r2 < 0.25
    out[m] = np.exp(-1.0 / (1.0 - 4.0 * r2[m]))
    return out


def _cr_norm_2d(fn, r, m=801):
    """C^r norm (sum of sup norms of derivatives up to order r) on a grid."""
    ax = np.linspace(-0.5, 0.5, m)
    h = ax[1] - ax[0]
    f = fn(ax[:, None], ax[None, :])
    total = float(np.abs(f).max())
    grids = {(0, 0): f}
    for order in range(1, r + 1):
        new = {}
        for (a, b), gprev in list(grids.items()):
            if a + b != order - 1:
                continue
            gx = np.gradient(gprev, h, axis=0)
            gy = np.gradient(gprev, h, axis=1)
            new[(a + 1, b)] = gx
            new[(a, b + 1)] = gy
        for key, gval in new.items():
            total += float(np.abs(gval).max())
        grids.update(new)
    return total


@dataclass
class TestFunction:
    """Compactly supported bump test, normalized so the C^r norm is <= 1."""
    kind: str = "bump2d"
    r: int = 2

    def __post_init__(self):
        if self.kind not in ("bump2d", "bump1d_time_bump2d_space"):
            raise ValueError(f"unknown test kind {self.kind!r}")
        key = (self.kind, self.r)
        with _norm_lock:
            if key not in _norm_cache:
                space = _cr_norm_2d(_bump2, self.r)
                if self.kind == "bump2d":
                    _norm_cache[key] = space
                else:
                    # product of unit-normalized factors; the C^r norm of
                    # the product is bounded by the product of the norms
                    ax = np.linspace(0.0, 1.0, 2001)
                    tvals = _bump1(ax - 0.5)
                    tn = float(np.abs(tvals).max())
                    for _ in range(self.r):
                        tvals = np.gradient(tvals, ax[1] - ax[0])
                        tn += float(np.abs(tvals).max())
                    _norm_cache[key] = space * tn
        self._norm = _norm_cache[key]

    def spatial(self, x, y):
        """Normalized spatial factor."""
        return _bump2(x, y) / self._norm

    def temporal(self, u):
        """Normalized time factor, supported on (0, 1)."""
        if self.kind != "bump1d_time_bump2d_space":
            raise ValueError("no temporal factor for a spatial test")
        return _bump1(np.asarray(u) - 0.5)

    def spatial_mass(self):
        if not hasattr(self, "_mass"):
            val, _ = integrate.quad(
                lambda r: np.exp(-1.0 / (1.0 - 4.0 * r * r)) * r, 0.0, 0.5,
                epsrel=1e-12)
            self._mass = 2.0 * np.pi * val / self._norm
        return self._mass


@dataclass
class ScaledTest:
    """lambda-contracted test centered at y (or (s, y)), periodized."""
    base: TestFunction
    lam: float
    center: tuple
    scaling: str = "euclidean"

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")
        if self.scaling not in ("euclidean", "parabolic"):
            raise ValueError(f"unknown scaling {self.scaling!r}")


def scaled_spatial_field(st, grid):
    """S^lambda eta(x - y) tabulated on the grid (euclidean scaling).

    The tabulation is renormalized to carry exactly the continuum mass of
    eta, so the discrete mass-scaling identity int S^lambda eta = int eta
    holds exactly at every scale.
    """
    if st.lam < 2.0 * grid.dx:
        raise ScaleUnresolvable(
            f"lambda={st.lam} below 2*dx={2 * grid.dx}")
    cy = np.asarray(st.center, dtype=float)[-2:]
    dxs = torus_delta(grid.xx, cy[0])
    dys = torus_delta(grid.yy, cy[1])
    tab = st.base.spatial(dxs / st.lam, dys / st.lam) / st.lam**2
    mass = tab.sum() * grid.dx**2
    if mass > 0.0:
        tab *= st.base.spatial_mass() / mass
    return tab


def pair_field(field, st):
    """Riemann sum of field x periodized scaled test."""
    tab = scaled_spatial_field(st, field.grid)
    return float(np.sum(field.values * tab) * field.grid.dx**2)


def _stratified_centers(count):
    side = int(round(np.sqrt(count)))
    ax = (np.arange(side) + 0.5) / side
    return [(a, b) for a in ax for b in ax]


# ---------------------------------------------------------------------------
# fixed-time scan
# ---------------------------------------------------------------------------

def fixed_time_moment_scan(theta, epsilon, t, n_range, reps, seed, *,
                           grid_n=None, dt=None, n_centers=16,
                           scheme="spectral_exponential", test_r=2):
    """E |<h(t,.), S^{2^-n} psi(. - y)>|^2 over scales and centers.

    Returns a dict with per-(n, center) moments, the per-n max over
    centers, and affine / exponential fits in n.  The height is centered by
    the ensemble estimate of kappa (the spatial-and-ensemble mean).
    """
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    grid = TorusGrid(grid_n)
    base = TestFunction("bump2d", test_r)
    centers = _stratified_centers(n_centers)
    tests = []
    masses = []
    for n in n_range:
        lam = 2.0 ** (-n)
        row = [scaled_spatial_field(
            ScaledTest(base, lam, c), grid) for c in centers]
        tests.append(np.stack(row))
        masses.append(np.array([tab.sum() * grid.dx**2 for tab in row]))
    m = make_mollifier("bump", epsilon, grid)
    params = ReducedParams(theta=theta, epsilon=epsilon, t_final=t)
    cfg = SolverConfig(grid=grid, dt=dt, scheme=scheme)
    pair_raw = np.zeros((reps, len(n_range), n_centers))
    means = np.zeros(reps)
    for rep in range(reps):
        noise = sample_noise(grid, dt, steps, _rng.mix_seed(seed, rep))
        h = solve_kpz(params, cfg, noise, m).final.values
        means[rep] = h.mean()
        for si, tabs in enumerate(tests):
            pair_raw[rep, si] = np.tensordot(tabs, h, axes=([1, 2], [0, 1])) \
                * grid.dx**2
    kappa_hat = means.mean()
    moments = np.empty((len(n_range), n_centers))
    stderrs = np.empty((len(n_range), n_centers))
    for si in range(len(n_range)):
        centered = pair_raw[:, si, :] - kappa_hat * masses[si][None, :]
        sq = centered**2
        moments[si] = sq.mean(axis=0)
        stderrs[si] = sq.std(axis=0, ddof=1) / np.sqrt(reps)
    return _scan_report(np.asarray(list(n_range), dtype=float), t, moments,
                        stderrs, centers)


def _scan_report(ns, t, moments, stderrs, centers):
    peak = moments.max(axis=1)
    arg = moments.argmax(axis=1)
    peak_se = stderrs[np.arange(len(ns)), arg]
    # affine envelope K (t + 1 + 2 n log 2), with K fitted in the log
    # domain so residuals are relative deviations
    envelope = t + 1.0 + 2.0 * ns * np.log(2.0)
    k_fit = float(np.exp(np.mean(np.log(np.maximum(peak, 1e-300) /
                                        envelope))))
    resid = peak / (k_fit * envelope) - 1.0
    # exponential-growth fit: peak ~ A 2^(c n)
    slope = np.polyfit(ns, np.log2(np.maximum(peak, 1e-300)), 1)[0] \
        if len(ns) > 1 else 0.0
    return {
        "n": ns, "moments": moments, "stderrs": stderrs, "centers": centers,
        "peak": peak, "peak_stderr": peak_se,
        "envelope_coeff": k_fit, "envelope_residuals": resid,
        "exp_rate": float(slope),
    }


# ---------------------------------------------------------------------------
# parabolic scan
# ---------------------------------------------------------------------------

def parabolic_moment_scan(theta, epsilon, k, n_range, reps, seed, *,
                          grid_n=None, dt=None, n_centers=16,
                          n_time_centers=3, scheme="spectral_exponential",
                          test_r=2):
    """Space-time moment scan with the parabolic scaling s = (2, 1, 1).

    Pairings accumulate online as the solver runs: for test scale
    lambda = 2^-n, time center t_c and space center y,

      P = sum_j dt lambda^-2 phi(lambda^-2 (t_c - s_j)) <h(s_j), psi_lam(y)>.

    Time centers are sampled in [2^{1-2k}, k_horizon], per the spanning-set
    hypothesis; centers below 2^{1-2k} are rejected.
    """
    n_range = list(n_range)
    if any(n < k for n in n_range):
        raise ValueError("parabolic scan needs n >= k")
    horizon = float(k)        # theorem window [2^{1-2k}, k]
    t_lo = 2.0 ** (1 - 2 * k)
    time_centers = np.linspace(t_lo, horizon, n_time_centers)
    if np.any(time_centers < t_lo - 1e-12):
        raise ValueError("time centers below the spanning-set floor")
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(horizon / dt)))
    dt = horizon / steps
    for n in n_range:
        if 2.0 ** (-2 * n) < 2.0 * dt:
            raise ScaleUnresolvable(f"2^-2n below 2*dt at n={n}")
    grid = TorusGrid(grid_n)
    base = TestFunction("bump1d_time_bump2d_space", test_r)
    centers = _stratified_centers(n_centers)
    spatial_tabs = []
    masses = []
    for n in n_range:
        lam = 2.0 ** (-n)
        row = [scaled_spatial_field(
            ScaledTest(base, lam, c, "parabolic"), grid) for c in centers]
        spatial_tabs.append(np.stack(row))
        masses.append(np.array([tab.sum() * grid.dx**2 for tab in row]))
    # temporal weights per (scale, time center, step)
    s_axis = (np.arange(steps) + 1) * dt
    time_w = np.zeros((len(n_range), n_time_centers, steps))
    for si, n in enumerate(n_range):
        lam2 = 4.0 ** (-n)
        for ti, tc in enumerate(time_centers):
            time_w[si, ti] = base.temporal((tc - s_axis) / lam2) / lam2 * dt
    m = make_mollifier("bump", epsilon, grid)
    params = ReducedParams(theta=theta, epsilon=epsilon, t_final=horizon)
    cfg = SolverConfig(grid=grid, dt=dt, scheme=scheme)
    pair_raw = np.zeros((reps, len(n_range), n_time_centers, len(centers)))
    mean_hist = np.zeros((reps, steps))

    for rep in range(reps):
        noise = sample_noise(grid, dt, steps, _rng.mix_seed(seed, rep))
        acc = np.zeros((len(n_range), n_time_centers, len(centers)))

        def tap(j, h, acc=acc):
            mean_hist[rep, j] = h.mean()
            for si in range(len(n_range)):
                w = time_w[si, :, j]
                if not np.any(w):
                    continue
                sp = np.tensordot(spatial_tabs[si], h,
                                  axes=([1, 2], [0, 1])) * grid.dx**2
                acc[si] += np.outer(w, sp)

        solve_kpz(params, cfg, noise, m, field_tap=tap)
        pair_raw[rep] = acc

    kappa_hat = mean_hist.mean(axis=0)          # kappa(s_j) estimate
    moments = np.empty((len(n_range), n_time_centers * len(centers)))
    stderrs = np.empty_like(moments)
    for si in range(len(n_range)):
        corr = np.einsum("ts,s->t", time_w[si], kappa_hat)
        centered = pair_raw[:, si] - corr[None, :, None] \
            * masses[si][None, None, :]
        sq = centered.reshape(reps, -1) ** 2
        moments[si] = sq.mean(axis=0)
        stderrs[si] = sq.std(axis=0, ddof=1) / np.sqrt(reps)
    return _scan_report(np.asarray(n_range, dtype=float), horizon, moments,
                        stderrs, centers)


# ---------------------------------------------------------------------------
# variance bound
# ---------------------------------------------------------------------------

_LOG_KERNEL = [None]


def log_kernel_integral():
    """L* = int int log |x1 - x2|_T2^{-2} dx1 dx2 (cached quadrature)."""
    if _LOG_KERNEL[0] is None:
        val, _ = integrate.dblquad(lambda y, x: np.log(np.hypot(x, y)),
                                   0.0, 0.5, 0.0, 0.5,
                                   epsabs=1e-10, epsrel=1e-10)
        _LOG_KERNEL[0] = float(-2.0 * 4.0 * val)
    return _LOG_KERNEL[0]


def variance_bound_check(theta, epsilon, t, reps, seed, *, grid_n=None,
                         dt=None, count=384, pair_samples=4096,
                         noise_reps_k=12, scheme="spectral_exponential",
                         separations=None, test_r=2):
    """Poincare bound: Var <h, psi> <= theta iint psi psi K(x1 - x2).

    LHS from PDE realizations; K(u) = E E-hat (x) E-hat I_t at separation u
    from tilted ensembles at a small set of radial separations, interpolated
    log-linearly in |u| (the kernel is bounded by K(0), so the diagonal is
    benign); RHS assembled with the exact discrete autocorrelation of psi.
    """
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    grid = TorusGrid(grid_n)
    base = TestFunction("bump2d", test_r)
    st = ScaledTest(base, 1.0, (0.5, 0.5))
    tab = scaled_spatial_field(st, grid)
    m = make_mollifier("bump", epsilon, grid)
    params = ReducedParams(theta=theta, epsilon=epsilon, t_final=t)
    cfg = SolverConfig(grid=grid, dt=dt, scheme=scheme)

    # LHS: empirical variance of the pairing
    vals = np.empty(reps)
    for rep in range(reps):
        noise = sample_noise(grid, dt, steps, _rng.mix_seed(seed, rep))
        h = solve_kpz(params, cfg, noise, m).final.values
        vals[rep] = np.sum(h * tab) * grid.dx**2
    lhs = float(vals.var(ddof=1))
    lhs_se = lhs * np.sqrt(2.0 / (reps - 1))

    # K(u) at radial separations
    if separations is None:
        seps = [0.0]
        u = 2.0 * grid.dx
        while u < 0.75:
            seps.append(u)
            u *= 2.0
    else:
        seps = list(separations)
    x0 = np.array([0.25, 0.25])
    k_means = np.zeros(len(seps))
    k_vars = np.zeros(len(seps))
    starts = [tuple(x0)] + [tuple(x0 + [sep, 0.0]) for sep in seps]
    for rep in range(noise_reps_k):
        s = _rng.mix_seed(seed + 7919, rep)
        noise = sample_noise(grid, dt, steps, s)
        systems = build_ensembles(noise, m, theta, t, starts, count,
                                  [s + 1 + i for i in range(len(starts))])
        base_ens = systems[0]
        rng = _rng.stream(s, _rng.KIND_RESAMPLE, 5)
        for i, other in enumerate(systems[1:]):
            kv = _ensemble_pair_intersection(base_ens, other, m,
                                             pair_samples, rng)
            k_means[i] += kv
            k_vars[i] += kv * kv
    k_means /= noise_reps_k
    k_vars = k_vars / noise_reps_k - k_means**2
    k_se = np.sqrt(np.maximum(k_vars, 0.0) / noise_reps_k)

    # RHS: theta * sum_u (psi*psi)(u) K(|u|) dx^2 with the exact discrete
    # autocorrelation of the tabulated test
    ft = np.fft.rfft2(tab)
    auto = np.fft.irfft2(ft * np.conj(ft), s=tab.shape).real * grid.dx**2
    du = np.sqrt(torus_delta(grid.xx, 0.0) ** 2
                 + torus_delta(grid.yy, 0.0) ** 2)
    k_interp = _radial_log_interp(du, np.asarray(seps), k_means)
    rhs = float(theta * np.sum(auto * k_interp) * grid.dx**2)
    # propagate K stderr through the same quadrature
    rhs_se = float(theta * np.sqrt(sum(
        (np.sum(auto * _radial_log_interp(du, np.asarray(seps),
                                          _bump_vec(k_means, i, k_se[i])))
         * grid.dx**2 - rhs / theta) ** 2
        for i in range(len(seps)))))
    ratio = lhs / rhs if rhs > 0 else np.inf
    ratio_se = abs(ratio) * np.sqrt((lhs_se / max(lhs, 1e-300)) ** 2
                                    + (rhs_se / max(rhs, 1e-300)) ** 2)
    return {"lhs": lhs, "lhs_stderr": float(lhs_se), "rhs": rhs,
            "rhs_stderr": rhs_se, "ratio": float(ratio),
            "ratio_stderr": float(ratio_se),
            "separations": seps, "k_profile": k_means,
            "k_stderr": k_se}


def _bump_vec(v, i, delta):
    out = v.copy()
    out[i] += delta
    return out


def _radial_log_interp(r, seps, values):
    """Interpolate K(|u|) linearly in log|u| between measured separations.

    Below the first positive separation the kernel is clamped to the
    measured K(0); beyond the last, held constant.
    """
    pos = seps > 0.0
    sp = seps[pos]
    vp = values[pos]
    out = np.interp(np.log(np.maximum(r, 1e-12)), np.log(sp), vp,
                    left=vp[0], right=vp[-1])
    k0 = values[~pos][0] if np.any(~pos) else vp[0]
    frac = np.clip(r / sp[0], 0.0, 1.0)
    near = (1.0 - frac) * k0 + frac * vp[0]
    return np.where(r < sp[0], near, out)
