"""Second-chaos statistics of the spatially averaged height at t = 1.

The mode variables z_{k,l} = W_1[e_{k,l}] conj(W_1[e_{k,l}]) - 1 over the
canonical half lattice are orthonormal; the coefficient of the averaged
height on z_{k,l} can be computed two ways:

  direct   a = E[ z_{k,l} * (integral of h(1,x) dx) ]     (PDE runs)
  fk       a = theta |rho_hat(eps k)|^2 |log eps|^{-1/2}
               E E-hat (x) E-hat [ A_{k,l}[X1, X2] ]       (tilted paths)

with A_{k,l} in its collapsed form |S[X1]|^2 - S[X1] conj(S[X2]).  The two
routes are analytically equal; their Monte Carlo agreement is one of the
acceptance gates.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import HorizonMismatch
from .noise_field import TorusGrid, make_mollifier, sample_noise
from .polymer_mc import build_ensembles
from .spde_solvers import ReducedParams, SolverConfig, solve_kpz

_HORIZON_TOL = 1e-9


@dataclass(frozen=True)
class ChaosIndex:
    """Mode (k, l): k in Z^2 \\ {0}, 0 <= l <= |k|^2 - 1."""
    k: tuple
    l: int

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        object.__setattr__(self, "k", k)
        if k == (0, 0):
            raise ValueError("k must be nonzero")
        if not 0 <= self.l <= self.k_sq - 1:
            raise ValueError(f"l={self.l} outside [0, |k|^2 - 1]")

    @property
    def k_sq(self):
        return self.k[0] ** 2 + self.k[1] ** 2

    @property
    def canonical(self):
        """k in the half lattice: k1 > 0, or k1 = 0 and k2 > 0."""
        return self.k[0] > 0 or (self.k[0] == 0 and self.k[1] > 0)


def canonical_modes(k_min, k_max):
    """All canonical modes with k_min <= |k| <= k_max, every admissible l."""
    out = []
    bound = int(np.ceil(k_max))
    for k1 in range(0, bound + 1):
        for k2 in range(-bound, bound + 1):
            if k1 == 0 and k2 <= 0:
                continue
            ksq = k1 * k1 + k2 * k2
            if ksq == 0 or not k_min**2 <= ksq <= k_max**2:
                continue
            out.extend(ChaosIndex((k1, k2), l) for l in range(ksq))
    return out


@dataclass
class ChaosReport:
    """Per-mode results plus the aggregate second-chaos energy."""
    theta: float
    epsilon: float
    indices: list
    a_coeff: np.ndarray
    a_stderr: np.ndarray
    route: str
    mean_S: np.ndarray = None
    M2: np.ndarray = None
    ess: np.ndarray = None
    zero_mode_samples: np.ndarray = None
    v_mode_samples: np.ndarray = None
    extras: dict = field(default_factory=dict)

    @property
    def energy(self):
        """Bias-corrected sum of squared coefficients."""
        return float(np.sum(self.a_coeff**2 - self.a_stderr**2))


# ---------------------------------------------------------------------------
# path functionals
# ---------------------------------------------------------------------------

def _check_horizon(path):
    t = path.start[0]
    if abs(t - 1.0) > _HORIZON_TOL:
        raise HorizonMismatch(f"mode integrals need t = 1, got t = {t}")


def path_mode_integral(path, idx):
    """S_{k,l}[X] = left-endpoint sum of e_{k,l}(t_j, X(t_j)) dt."""
    _check_horizon(path)
    pos = path.positions[:-1]
    t = path.times[:-1]
    phase = 2.0 * np.pi * (idx.l * t + idx.k[0] * pos[:, 0]
                           + idx.k[1] * pos[:, 1])
    return complex(np.sum(np.exp(1j * phase)) * path.dt)


def phase_shift_identity(idx, x):
    """exp(2 pi i k . x): the factor by which S shifts under X -> X + x."""
    return complex(np.exp(2j * np.pi * (idx.k[0] * x[0] + idx.k[1] * x[1])))


def A_functional(p1, p2, idx):
    """Collapsed shift-averaged functional |S[X1]|^2 - S[X1] conj(S[X2])."""
    s1 = path_mode_integral(p1, idx)
    s2 = path_mode_integral(p2, idx)
    return abs(s1) ** 2 - s1 * np.conj(s2)


def mode_sums_for_positions(positions, dt, indices):
    """S_{k,l} for a bundle of paths, vectorized: (n_modes, n_paths)."""
    pos = positions[:, :-1, :]
    j = np.arange(pos.shape[1])
    out = np.empty((len(indices), pos.shape[0]), dtype=complex)
    for mi, idx in enumerate(indices):
        phase = 2.0 * np.pi * (idx.l * (j * dt)[None, :]
                               + idx.k[0] * pos[:, :, 0]
                               + idx.k[1] * pos[:, :, 1])
        out[mi] = np.exp(1j * phase).sum(axis=1) * dt
    return out


# ---------------------------------------------------------------------------
# direct (PDE) route
# ---------------------------------------------------------------------------

class _ModeTap:
    """Accumulates W_1[e_{k,l}] and W_1[1] during a solver run."""

    def __init__(self, noise, indices):
        self.noise = noise
        g = noise.grid
        ks = np.array([idx.k for idx in indices], dtype=int)
        self.ls = np.array([idx.l for idx in indices], dtype=float)
        self.ph1 = np.exp(2j * np.pi * np.outer(g.x, ks[:, 0]))
        self.ph2 = np.exp(2j * np.pi * np.outer(g.x, ks[:, 1]))
        self.mode_acc = np.zeros(len(indices), dtype=complex)
        self.zero_acc = 0.0

    def __call__(self, j, xi):
        spatial = ((xi @ self.ph2) * self.ph1).sum(axis=0)
        self.mode_acc += np.exp(2j * np.pi * self.ls * (j * self.noise.dt)) \
            * spatial
        self.zero_acc += xi.sum()

    def finish(self):
        w = self.noise.integral_weight()
        return self.mode_acc * w, self.zero_acc * w


def chaos_run_direct(theta, epsilon, indices, noise_reps, seed, *,
                     grid_n=None, dt=None, scheme="spectral_exponential"):
    """One batch of PDE realizations; returns per-rep mode and height data.

    For each realization: z_m = |W_1[e_m]|^2 - 1 for every requested mode,
    H = integral of h-tilde(1, x) dx, and v = sqrt(theta) W_1[1].
    """
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(1.0 / dt)))
    dt = 1.0 / steps
    grid = TorusGrid(grid_n)
    m = make_mollifier("bump", epsilon, grid)
    params = ReducedParams(theta=theta, epsilon=epsilon, t_final=1.0)
    cfg = SolverConfig(grid=grid, dt=dt, scheme=scheme)
    n_modes = len(indices)
    z = np.empty((noise_reps, n_modes))
    H = np.empty(noise_reps)
    v = np.empty(noise_reps)
    for rep in range(noise_reps):
        noise = sample_noise(grid, dt, steps, _rng.mix_seed(seed, rep))
        tap = _ModeTap(noise, indices)
        traj = solve_kpz(params, cfg, noise, m, slice_tap=tap)
        modes, w1 = tap.finish()
        z[rep] = np.abs(modes) ** 2 - 1.0
        H[rep] = traj.final.spatial_integral()
        v[rep] = np.sqrt(theta) * w1
    return z, H, v


def chaos_coefficients_direct(theta, epsilon, indices, noise_reps, seed,
                              **solver_kw):
    """Direct-route coefficients for a batch of modes.

    a_m = E[z_m * f-bar] with f-bar = H - v - mean(H - v); subtracting the
    zero-mode part v (independent of z_m) and centering are exact variance
    reductions, not changes of estimand.  Returns a ChaosReport.
    """
    z, H, v = chaos_run_direct(theta, epsilon, indices, noise_reps, seed,
                               **solver_kw)
    f = H - v
    fc = f - f.mean()
    prod = z * fc[:, None]
    a = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / np.sqrt(noise_reps)
    return ChaosReport(theta=theta, epsilon=epsilon, indices=list(indices),
                       a_coeff=a, a_stderr=se, route="direct",
                       zero_mode_samples=H - H.mean(), v_mode_samples=v,
                       extras={"f_samples": fc, "z_samples": z})


def chaos_coefficient_direct(theta, epsilon, idx, noise_reps, seed,
                             **solver_kw):
    """(a, stderr) for one mode via the PDE route."""
    rep = chaos_coefficients_direct(theta, epsilon, [idx], noise_reps, seed,
                                    **solver_kw)
    return float(rep.a_coeff[0]), float(rep.a_stderr[0])


# ---------------------------------------------------------------------------
# Feynman-Kac (tilted path) route
# ---------------------------------------------------------------------------

def chaos_coefficients_fk(theta, epsilon, indices, count, noise_reps, seed, *,
                          grid_n=None, dt=None, resample_threshold=0.5):
    """FK-route coefficients for a batch of modes (one ChaosReport).

    Per realization, two independent particle systems from the origin carry
    online S_{k,l} accumulators; the product-tilted expectation of the
    collapsed A functional factorizes over the systems:

        E-hat (x) E-hat [A] = sum_i w_i |S_i|^2
                              - (sum_i w_i S_i) conj(sum_j w'_j S'_j).
    """
    if grid_n is None:
        grid_n = max(8, int(np.ceil(4.0 / epsilon)))
    if dt is None:
        dt = epsilon**2 / 10.0
    steps = max(1, int(round(1.0 / dt)))
    dt = 1.0 / steps
    grid = TorusGrid(grid_n)
    m = make_mollifier("bump", epsilon, grid)
    mode_k = np.array([idx.k for idx in indices], dtype=float)
    mode_l = np.array([idx.l for idx in indices], dtype=float)
    c = 1.0 / np.sqrt(np.abs(np.log(epsilon)))
    rho2 = m.fourier(mode_k * epsilon) ** 2
    n_modes = len(indices)
    vals = np.empty((noise_reps, n_modes))
    ess = np.empty(noise_reps)
    origin = (0.0, 0.0)
    for rep in range(noise_reps):
        s = _rng.mix_seed(seed, rep)
        noise = sample_noise(grid, dt, steps, s)
        e1, e2 = build_ensembles(noise, m, theta, 1.0, [origin, origin],
                                 count, [s + 1, s + 2], store_paths=False,
                                 mode_k=mode_k, mode_l=mode_l,
                                 resample_threshold=resample_threshold)
        w1 = e1.weights()
        w2 = e2.weights()
        s1 = e1.mode_sums
        s2 = e2.mode_sums
        m2_term = (np.abs(s1) ** 2 @ w1)
        cross = (s1 @ w1) * np.conj(s2 @ w2)
        vals[rep] = (m2_term - cross).real
        ess[rep] = min(e1.ess(), e2.ess())
    pref = theta * rho2 * c
    a = pref * vals.mean(axis=0)
    se = np.abs(pref) * vals.std(axis=0, ddof=1) / np.sqrt(noise_reps)
    return ChaosReport(theta=theta, epsilon=epsilon, indices=list(indices),
                       a_coeff=a, a_stderr=se, route="fk", ess=ess,
                       extras={"raw_A": vals, "rho2": rho2})


def chaos_coefficient_fk(theta, epsilon, idx, count, noise_reps, seed,
                         **kw):
    """(a, stderr) for one mode via the tilted-path route."""
    rep = chaos_coefficients_fk(theta, epsilon, [idx], count, noise_reps,
                                seed, **kw)
    return float(rep.a_coeff[0]), float(rep.a_stderr[0])


def second_chaos_energy(theta, epsilon, k_max, seed, *, route="fk", k_min=1,
                        noise_reps=24, count=2048, **kw):
    """Sum of a^2 over canonical modes with k_min <= |k| <= k_max, l < |k|^2.

    Uses the bias-corrected estimator sum(a^2 - stderr^2) so that Monte
    Carlo noise does not inflate the energy.  Returns (energy, report).
    """
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    indices = canonical_modes(k_min, k_max)
    if theta == 0.0:
        zero = np.zeros(len(indices))
        rep = ChaosReport(theta=0.0, epsilon=epsilon, indices=indices,
                          a_coeff=zero, a_stderr=zero, route=route)
        return 0.0, rep
    if route == "fk":
        rep = chaos_coefficients_fk(theta, epsilon, indices, count,
                                    noise_reps, seed, **kw)
    elif route == "direct":
        rep = chaos_coefficients_direct(theta, epsilon, indices, noise_reps,
                                        seed, **kw)
    else:
        raise ValueError(f"unknown route {route!r}")
    return rep.energy, rep


# ---------------------------------------------------------------------------
# zero-mode comparison
# ---------------------------------------------------------------------------

def zero_mode_comparison(theta, epsilon, reps, seed, *, grid_n=None, dt=None,
                         scheme="spectral_exponential",
                         corr_index=ChaosIndex((1, 0), 0)):
    """Distributional report on (integral h dx, sqrt(theta) W_1[1], f-bar).

    Emits per-realization samples, moment summaries, the correlation of
    f-bar with the second-chaos variable of ``corr_index``, and a
    two-sample Kolmogorov-Smirnov distance between the height average and
    a matched Gaussian sample.
    """
    from scipy import stats

    z, H, v = chaos_run_direct(theta, epsilon, [corr_index], reps, seed,
                               grid_n=grid_n, dt=dt, scheme=scheme)
    h_bar = H - H.mean()          # empirical kappa centering
    f_bar = H - v - (H - v).mean()
    z0 = z[:, 0]

    def moments(x):
        return {"var": float(np.var(x, ddof=1)),
                "skew": float(stats.skew(x)),
                "ex_kurtosis": float(stats.kurtosis(x))}

    prod = z0 * f_bar
    corr_se = float(prod.std(ddof=1) / np.sqrt(reps))
    gauss = _rng.stream(seed, _rng.KIND_MISC, 0).standard_normal(reps) \
        * h_bar.std(ddof=1)
    ks = stats.ks_2samp(h_bar, gauss)
    return {
        "h_bar": h_bar, "v_bar": v, "f_bar": f_bar,
        "h_moments": moments(h_bar), "v_moments": moments(v),
        "f_moments": moments(f_bar),
        "corr_f_secondchaos": float(prod.mean()),
        "corr_f_secondchaos_stderr": corr_se,
        "ks_stat": float(ks.statistic), "ks_pvalue": float(ks.pvalue),
    }
