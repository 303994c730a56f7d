"""Backward Brownian paths, Feynman-Kac weights, and tilted estimators.

The tilted path measure reweights backward Brownian motion by the
exponential noise functional.  Ensembles are built sequentially, one noise
slice at a time, accumulating log-weights

    a_i += sqrt(theta) |log eps|^{-1/2} * dG_i,
    dG_i = sum_cells rho^eps(X_i(t_j) - y) xi[j, y] sqrt(dt) dx,

with optional adaptive systematic resampling when the effective sample size
decays below a threshold fraction.  With the threshold at 0 (or at benign
parameters, where it never triggers) this reduces exactly to one-shot
softmax importance weights; at small epsilon and t ~ 1 the one-shot weights
collapse like exp(-theta |log eps|^{-1} t eps^{-2} ||rho||_2^2) M, so the
sequential form is what makes the tilted expectations measurable at all.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels, _rng
from .errors import DegenerateWeights, GridMisaligned
from .noise_field import TorusGrid, make_mollifier, sample_noise, torus_wrap

ESS_FLOOR = 10.0


# ---------------------------------------------------------------------------
# plain backward paths
# ---------------------------------------------------------------------------

class BackwardPath:
    """Brownian path on the torus run backward from start = (t, x).

    positions[j] is X(t_j) with t_j = j * dt ascending, positions[-1] = x.
    """

    def __init__(self, t, x, positions, dt):
        self.start = (float(t), tuple(np.asarray(x, dtype=float)))
        self.dt = float(dt)
        self.positions = positions
        self.times = np.arange(positions.shape[0]) * self.dt

    @property
    def steps(self):
        return self.positions.shape[0] - 1


def _path_bundle(t, x, steps, count, seed, stream_index=0):
    """positions (count, steps+1, 2): backward increments, torus wrapped."""
    dt = t / steps
    z = _rng.normals(seed, _rng.KIND_PATH, stream_index,
                     (count, steps, 2))
    incr = np.sqrt(dt) * z
    pos = np.empty((count, steps + 1, 2))
    pos[:, steps, :] = np.asarray(x, dtype=float)
    # X(t_j) = X(t_{j+1}) + increment, filled from the start down to 0
    pos[:, :steps, :] = np.asarray(x, dtype=float) + np.cumsum(
        incr[:, ::-1, :], axis=1)[:, ::-1, :]
    return torus_wrap(pos), dt


def sample_paths(start, steps, count, seed):
    """Independent backward Brownian paths from start = (t, x)."""
    t, x = start
    pos, dt = _path_bundle(t, x, steps, count, seed)
    return [BackwardPath(t, x, pos[i], dt) for i in range(count)]


def _check_alignment(path, noise):
    if abs(path.dt - noise.dt) > 1e-12 * noise.dt:
        raise GridMisaligned("path dt differs from noise dt")
    if path.steps > noise.steps:
        raise GridMisaligned("path extends beyond the noise horizon")


def path_noise_integral(path, noise, m):
    """G = sum_j sum_cells rho^eps(X(t_j) - y) xi[j, y] sqrt(dt) dx.

    Direct sum over the mollifier support window, slice by slice.
    """
    _check_alignment(path, noise)
    g = noise.grid
    rad = 0.5 * m.epsilon
    amp = m.c / m.epsilon**2
    out = np.empty(1)
    total = 0.0
    pos = np.ascontiguousarray(path.positions[:-1])
    tab = _kernels.profile_table()
    for j in range(path.steps):
        _kernels.slice_window_sums(pos[j:j + 1], noise.slice(j), g.n, g.dx,
                                   1.0 / m.epsilon, rad, amp, tab, out)
        total += out[0]
    return total * noise.integral_weight()


def intersection_time(p1, p2, m):
    """I_t[X1, X2] = sum_j R^eps(X1(t_j) - X2(t_j)) dt (radial table)."""
    if abs(p1.dt - p2.dt) > 1e-12 * p2.dt or p1.steps != p2.steps:
        raise GridMisaligned("paths live on different time grids")
    d = p1.positions[:-1] - p2.positions[:-1]
    d -= np.rint(d)
    r = np.sqrt(np.sum(d * d, axis=-1))
    return float(np.sum(m.r_eps_radial(r)) * p1.dt)


# ---------------------------------------------------------------------------
# weighted ensembles (sequential construction, adaptive resampling)
# ---------------------------------------------------------------------------

@dataclass
class WeightedEnsemble:
    """Paths from a common start with self-normalized tilt weights.

    ``log_weights`` are the residual log-weights a_i after the last
    resampling epoch (equal to sqrt(theta) c G_i when no resampling
    occurred); softmax of them gives the tilted weights.  ``log_partition``
    accumulates the full partition-function estimate across epochs, so
    fk_height works whether or not resampling happened.
    """
    theta: float
    epsilon: float
    t: float
    dt: float
    log_weights: np.ndarray
    kappa_term: float
    paths: np.ndarray = None          # (M, copies, steps+1, 2) or None
    noise_integrals: np.ndarray = None
    mode_sums: np.ndarray = None      # (n_modes, M) complex
    log_partition: float = 0.0
    n_resamples: int = 0
    ess_min: float = np.inf
    starts: tuple = ()

    @property
    def size(self):
        return self.log_weights.shape[0]

    def weights(self):
        a = self.log_weights - self.log_weights.max()
        w = np.exp(a)
        w /= w.sum()
        return w

    def ess(self):
        w = self.weights()
        return 1.0 / float(np.sum(w * w))

    def path_positions(self, copy=0):
        if self.paths is None:
            raise ValueError("ensemble was built without path storage")
        return self.paths[:, copy]


def _systematic_resample(weights, rng):
    m = weights.shape[0]
    u = rng.random() / m
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, u + np.arange(m) / m, side="left")


class _SystemState:
    """Mutable per-system state advanced by the shared weighting loop."""

    def __init__(self, xs, count, steps, seed, kappa, c, store_paths,
                 mode_k, mode_l):
        self.xs = xs
        self.seed = seed
        self.kappa = kappa
        self.c = c
        n_copies = len(xs)
        self.pos = np.empty((count, n_copies, 2))
        for ci, xc in enumerate(xs):
            self.pos[:, ci, :] = np.asarray(xc, dtype=float)
        self.paths = None
        if store_paths:
            self.paths = np.empty((count, n_copies, steps + 1, 2))
            self.paths[:, :, steps, :] = self.pos
        self.n_modes = 0 if mode_k is None else len(mode_k)
        self.mode_sums = (np.zeros((self.n_modes, count), dtype=complex)
                          if self.n_modes else None)
        if self.n_modes:
            self.mode_k = np.asarray(mode_k, dtype=int).reshape(-1, 2)
            self.mode_l = np.asarray(mode_l, dtype=float).reshape(-1)
            self.k1_vals = sorted(set(self.mode_k[:, 0]))
            self.k2_vals = sorted(set(self.mode_k[:, 1]))
        self.logw = np.zeros(count)
        self.g_acc = np.zeros(count)
        self.log_partition = 0.0
        self.n_res = 0
        self.ess_min = float(count)
        self.res_rng = _rng.stream(seed, _rng.KIND_RESAMPLE, 0)


def build_ensembles(noise, m, theta, t, starts, count, seeds, *, kappas=None,
                    method="grid", resample_threshold=0.5, store_paths=True,
                    mode_k=None, mode_l=None):
    """Advance several independent particle systems through one noise pass.

    ``starts`` is a list whose entries are either a position (one path per
    particle) or a list of positions (coupled copies whose log-weights
    add); all systems share the horizon ``t`` and the same noise, so each
    slice, and its mollified field, is generated exactly once.  ``seeds``
    gives each system its own path and resampling streams.  Returns one
    WeightedEnsemble per start.

    ``mode_k``/``mode_l`` request online accumulation of the path mode
    integrals S_{k,l} for copy 0 of every system (left-endpoint sums).
    method 'grid' evaluates the mollified increment field at particle
    positions by bilinear interpolation; 'exact' does the direct window
    sum of rho^eps against the raw slice.
    """
    steps = int(round(t / noise.dt))
    if abs(steps * noise.dt - t) > 1e-9 * max(t, 1.0):
        raise GridMisaligned("t is not a multiple of the noise dt")
    if steps > noise.steps:
        raise GridMisaligned("noise does not cover [0, t]")
    if len(seeds) != len(starts):
        raise ValueError("need one seed per system")
    g = noise.grid
    dt = noise.dt
    c = 1.0 / np.sqrt(np.abs(np.log(m.epsilon)))
    amp_w = np.sqrt(theta) * c
    kappas = [0.0] * len(starts) if kappas is None else list(kappas)

    systems = []
    for xs, seed, kap in zip(starts, seeds, kappas):
        xs_list = list(xs) if isinstance(xs, (list, tuple)) \
            and np.ndim(xs[0]) > 0 else [xs]
        systems.append(_SystemState(xs_list, count, steps, seed, kap, c,
                                    store_paths, mode_k, mode_l))

    rad = 0.5 * m.epsilon
    amp_prof = m.c / m.epsilon**2
    prof_tab = _kernels.profile_table()
    kf = m.kernel_fft(g) if method == "grid" else None
    w_int = noise.integral_weight()
    log_m = math.log(count)
    dg = np.empty(count)
    sqrt_dt = np.sqrt(dt)

    for j in range(steps - 1, -1, -1):
        xi = noise.slice(j)
        incr = None
        if method == "grid":
            incr = np.fft.irfft2(np.fft.rfft2(xi) * kf, s=xi.shape) * w_int
        for sy in systems:
            n_copies = sy.pos.shape[1]
            z = _rng.normals(sy.seed, _rng.KIND_PATH, j,
                             (count, n_copies, 2))
            sy.pos = torus_wrap(sy.pos + sqrt_dt * z)
            if sy.paths is not None:
                sy.paths[:, :, j, :] = sy.pos
            dg_total = np.zeros(count)
            for ci in range(n_copies):
                if method == "grid":
                    dg_total += _bilinear(incr, sy.pos[:, ci, :], g.dx, g.n)
                else:
                    _kernels.slice_window_sums(
                        np.ascontiguousarray(sy.pos[:, ci, :]), xi, g.n,
                        g.dx, 1.0 / m.epsilon, rad, amp_prof, prof_tab, dg)
                    dg_total += dg * w_int
            sy.g_acc += dg_total
            if amp_w != 0.0:
                sy.logw += amp_w * dg_total
            if sy.n_modes:
                p1 = _int_phase_powers(sy.pos[:, 0, 0], sy.k1_vals)
                p2 = _int_phase_powers(sy.pos[:, 0, 1], sy.k2_vals)
                tw = dt * np.exp(2j * np.pi * sy.mode_l * (j * dt))
                for mi in range(sy.n_modes):
                    sy.mode_sums[mi] += tw[mi] * p1[sy.mode_k[mi, 0]] \
                        * p2[sy.mode_k[mi, 1]]
            if amp_w != 0.0 and resample_threshold > 0.0 and j > 0:
                shifted = sy.logw - sy.logw.max()
                w = np.exp(shifted)
                w /= w.sum()
                ess = 1.0 / np.sum(w * w)
                sy.ess_min = min(sy.ess_min, ess)
                if ess < resample_threshold * count:
                    idx = _systematic_resample(w, sy.res_rng)
                    sy.log_partition += logsumexp(sy.logw) - log_m
                    sy.logw[:] = 0.0
                    sy.pos = sy.pos[idx]
                    sy.g_acc = sy.g_acc[idx]
                    if sy.paths is not None:
                        tail = sy.paths[:, :, j:, :]
                        tail[:] = tail[idx]
                    if sy.n_modes:
                        sy.mode_sums[:] = sy.mode_sums[:, idx]
                    sy.n_res += 1

    out = []
    for sy in systems:
        out.append(WeightedEnsemble(
            theta=theta, epsilon=m.epsilon, t=t, dt=dt,
            log_weights=sy.logw.copy(), kappa_term=c * sy.kappa,
            paths=sy.paths, noise_integrals=sy.g_acc,
            mode_sums=sy.mode_sums,
            log_partition=float(sy.log_partition
                                + logsumexp(sy.logw) - log_m),
            n_resamples=sy.n_res,
            ess_min=float(min(sy.ess_min, count)),
            starts=tuple(tuple(np.atleast_1d(np.asarray(xc, float)))
                         for xc in sy.xs)))
    return out


def build_ensemble(noise, m, theta, start, count, seed, *, kappa=0.0,
                   starts_x=None, method="grid", resample_threshold=0.5,
                   store_paths=True, mode_k=None, mode_l=None):
    """Single-system convenience wrapper around ``build_ensembles``.

    start = (t, x); pass ``starts_x`` (list of positions) instead of x to
    carry several coupled copies per particle (their log-weights add).
    """
    t, x0 = start
    entry = list(starts_x) if starts_x is not None else x0
    return build_ensembles(noise, m, theta, t, [entry], count, [seed],
                           kappas=[kappa], method=method,
                           resample_threshold=resample_threshold,
                           store_paths=store_paths, mode_k=mode_k,
                           mode_l=mode_l)[0]


def _int_phase_powers(x, k_vals):
    """exp(2 pi i k x) for each integer k in k_vals, by repeated multiply."""
    z = np.exp(2j * np.pi * x)
    out = {}
    max_k = max((abs(k) for k in k_vals), default=0)
    pw = np.ones_like(z)
    pows = [pw]
    for _ in range(max_k):
        pw = pw * z
        pows.append(pw)
    for k in k_vals:
        out[k] = pows[abs(k)] if k >= 0 else np.conj(pows[abs(k)])
    return out


def _bilinear(fld, pos, dx, n):
    s = pos / dx
    i0 = np.floor(s[:, 0]).astype(np.int64)
    j0 = np.floor(s[:, 1]).astype(np.int64)
    fx = s[:, 0] - i0
    fy = s[:, 1] - j0
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    i0 %= n
    j0 %= n
    return (fld[i0, j0] * (1 - fx) * (1 - fy) + fld[i1, j0] * fx * (1 - fy)
            + fld[i0, j1] * (1 - fx) * fy + fld[i1, j1] * fx * fy)


def make_ensemble(start, count, noise, m, params, kappa, **kwargs):
    """Spec-level constructor: ensemble of count paths from one start."""
    if count < 2:
        raise ValueError("need at least two paths")
    seed = kwargs.pop("seed", noise.seed + 1)
    return build_ensemble(noise, m, params.theta, start, count, seed,
                          kappa=kappa, **kwargs)


def fk_height(ens, epsilon):
    """h = |log eps|^{1/2} log E-hat-free partition - kappa.

    With no resampling this is |log eps|^{1/2} (logsumexp(a) - log M) - kappa.
    """
    root = np.sqrt(np.abs(np.log(epsilon)))
    return float(root * ens.log_partition - root * ens.kappa_term)


def tilted_expectation(ens, q_fn, *, pair_samples=4096, seed=0):
    """Self-normalized tilted expectation of a path functional.

    Single ensemble: exact softmax average of q_fn(positions_i) over
    particles.  Tuple of ensembles (product measure over independent copies
    tilted by the same noise): the product expectation is estimated from
    ``pair_samples`` index tuples drawn from the per-ensemble weights.
    Raises DegenerateWeights when any factor's ESS is below 10.
    """
    if isinstance(ens, WeightedEnsemble):
        if ens.paths is None:
            raise ValueError("tilted_expectation needs stored paths")
        w = ens.weights()
        ess = 1.0 / float(np.sum(w * w))
        if ess < ESS_FLOOR:
            raise DegenerateWeights(f"ESS={ess:.2f}")
        vals = q_fn(ens.paths[:, 0])
        return float(np.dot(w, vals)), ess
    enss = list(ens)
    rng = _rng.stream(seed, _rng.KIND_RESAMPLE, 1)
    idx = []
    ess_all = []
    for e in enss:
        w = e.weights()
        ess = 1.0 / float(np.sum(w * w))
        if ess < ESS_FLOOR:
            raise DegenerateWeights(f"ESS={ess:.2f}")
        ess_all.append(ess)
        idx.append(rng.choice(e.size, size=pair_samples, p=w))
    vals = q_fn(*[e.paths[i, 0] for e, i in zip(enss, idx)])
    return float(np.mean(vals)), min(ess_all)


# ---------------------------------------------------------------------------
# Monte Carlo moment estimators
# ---------------------------------------------------------------------------

def _difference_intersection(epsilon, t, dx0, pairs, seed, *,
                             dt=None, block_budget=4_000_000):
    """Intersection times of independent path pairs via the difference walk.

    X1 - X2 is Brownian with rate 2; streams time in blocks so arbitrarily
    fine dt fits in memory.  Returns per-pair intersection times.
    """
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    acc = np.zeros(pairs)
    d = np.tile(np.asarray(dx0, dtype=float), (pairs, 1))
    gen = _rng.stream(seed, _rng.KIND_PATH, 0)
    from .noise_field import _ProfileData
    prof = _ProfileData.get()
    grid = np.arange(prof.r_table.size) * prof.r_step
    done = 0
    block = max(1, block_budget // pairs)
    # left-endpoint rule: sum over D(t_j), j = 0..J-1, start time excluded
    while done < steps:
        nb = min(block, steps - done)
        z = gen.standard_normal((pairs, nb, 2))
        walk = d[:, None, :] + np.sqrt(2.0 * dt) * np.cumsum(z, axis=1)
        d = walk[:, -1, :].copy()
        walk -= np.rint(walk)
        r = np.sqrt(np.sum(walk * walk, axis=-1)) / epsilon
        acc += np.interp(r, grid, prof.r_table, right=0.0).sum(axis=1)
        done += nb
    return acc * dt / epsilon**2


def intersection_moment(r, epsilon, t, x1, x2, paths, seed, *, dt=None,
                        enforce_gate=True):
    """Untilted MC estimate of E I_t[X1, X2]^r over independent path pairs.

    Returns (estimate, stderr).  The lemma regime epsilon <= e^{-t/2} is
    checked when ``enforce_gate``; exploratory runs may relax it.
    """
    import warnings
    if r < 1:
        raise ValueError("moment order r must be >= 1")
    if epsilon > np.exp(-t / 2.0):
        msg = f"epsilon={epsilon} > e^(-t/2): outside the lemma regime"
        if enforce_gate:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    dx0 = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    vals = _difference_intersection(epsilon, t, dx0, paths, seed, dt=dt)
    pow_vals = vals**r
    est = float(pow_vals.mean())
    stderr = float(pow_vals.std(ddof=1) / np.sqrt(paths))
    return est, stderr


def _pair_indices(e1, e2, n_pairs, rng):
    w1 = e1.weights()
    w2 = e2.weights()
    for w in (w1, w2):
        if 1.0 / float(np.sum(w * w)) < ESS_FLOOR:
            raise DegenerateWeights("pair resampling from collapsed weights")
    i = rng.choice(e1.size, size=n_pairs, p=w1)
    k = rng.choice(e2.size, size=n_pairs, p=w2)
    return i, k


def _ensemble_pair_intersection(e1, e2, m, n_pairs, rng):
    """E-hat (x) E-hat of I_t via weighted pair resampling."""
    i, k = _pair_indices(e1, e2, n_pairs, rng)
    prof = m._data
    out = np.empty(n_pairs)
    _kernels.pair_intersection_times(
        np.ascontiguousarray(e1.paths[:, 0]),
        np.ascontiguousarray(e2.paths[:, 0]),
        i.astype(np.int64), k.astype(np.int64),
        prof.r_table, prof.r_step, 1.0 / m.epsilon, 1.0 / m.epsilon**2,
        e1.dt, out)
    return float(out.mean())


def tilted_intersection_mean(theta, epsilon, t, x1, x2, count, noise_reps,
                             seed, *, grid_n=None, dt=None,
                             pair_samples=8192, resample_threshold=0.5):
    """E over noise of the product-tilted expectation of I_t[X1, X2].

    Builds two independent path ensembles per realization (same noise),
    pairs them by weighted resampling, and averages.  Degenerate
    realizations raise through; with the sequential engine they should not
    occur.  Returns (estimate, stderr) with stderr across realizations.
    """
    if noise_reps < 2:
        raise ValueError("noise_reps must be >= 2")
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    grid = TorusGrid(grid_n)
    m = make_mollifier("bump", epsilon, grid)
    vals = np.empty(noise_reps)
    for rep in range(noise_reps):
        s = _rng.mix_seed(seed, rep)
        noise = sample_noise(grid, dt, steps, s)
        e1, e2 = build_ensembles(noise, m, theta, t, [x1, x2], count,
                                 [s + 1, s + 2],
                                 resample_threshold=resample_threshold)
        rng = _rng.stream(s, _rng.KIND_RESAMPLE, 3)
        vals[rep] = _ensemble_pair_intersection(e1, e2, m, pair_samples, rng)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(noise_reps))


_PAIRINGS = {(a, j, b, k) for a in range(3) for b in range(3)
             for j in range(1, 3) for k in range(1, 3)
             if (a, j) != (b, k)}


def tilted_moment_F(r, theta, epsilon, t, pairing, q_kind, count, noise_reps,
                    seed, *, x1=None, x2=None, grid_n=None, dt=None,
                    tuple_samples=4096, resample_threshold=0.5):
    """Tilted mixed moment F = E E-hat( Q[X_0] I_t[X_{a;j}, X_{b;k}]^r ).

    Three independent copies of the path pair (X_.;1 from x1, X_.;2 from
    x2), all tilted by the same noise; ``pairing`` = (alpha, j, beta, k)
    with 1-based path indices; q_kind is 'one' or 'intersection'
    (Q = I_t[X_{0;1}, X_{0;2}]).  Returns (estimate, stderr).
    """
    if r > 4:
        raise ValueError("moment order r > 4 not supported (cost)")
    if tuple(pairing) not in _PAIRINGS:
        raise ValueError(f"invalid pairing {pairing!r}")
    if q_kind not in ("one", "intersection"):
        raise ValueError("q_kind must be 'one' or 'intersection'")
    alpha, jj, beta, kk = pairing
    x1 = (0.5, 0.5) if x1 is None else x1
    x2 = x1 if x2 is None else x2
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    grid = TorusGrid(grid_n)
    m = make_mollifier("bump", epsilon, grid)
    prof = m._data
    vals = np.empty(noise_reps)
    for rep in range(noise_reps):
        s = _rng.mix_seed(seed, rep)
        noise = sample_noise(grid, dt, steps, s)
        copies = build_ensembles(noise, m, theta, t,
                                 [[x1, x2]] * 3, count,
                                 [s + 1, s + 2, s + 3],
                                 resample_threshold=resample_threshold)
        rng = _rng.stream(s, _rng.KIND_RESAMPLE, 4)
        idx = []
        for e in copies:
            w = e.weights()
            if 1.0 / float(np.sum(w * w)) < ESS_FLOOR:
                raise DegenerateWeights("tilted_moment_F: collapsed copy")
            idx.append(rng.choice(e.size, size=tuple_samples, p=w))
        inter = np.empty(tuple_samples)
        _kernels.pair_intersection_times(
            np.ascontiguousarray(copies[alpha].paths[:, jj - 1]),
            np.ascontiguousarray(copies[beta].paths[:, kk - 1]),
            idx[alpha].astype(np.int64), idx[beta].astype(np.int64),
            prof.r_table, prof.r_step, 1.0 / epsilon, 1.0 / epsilon**2,
            dt, inter)
        term = inter**r
        if q_kind == "intersection":
            q = np.empty(tuple_samples)
            _kernels.pair_intersection_times(
                np.ascontiguousarray(copies[0].paths[:, 0]),
                np.ascontiguousarray(copies[0].paths[:, 1]),
                idx[0].astype(np.int64), idx[0].astype(np.int64),
                prof.r_table, prof.r_step, 1.0 / epsilon, 1.0 / epsilon**2,
                dt, q)
            term = term * q
        vals[rep] = term.mean()
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(noise_reps))
