"""Deterministic closed forms used as ground truth by the test suite.

Mode-integral conventions: paths run backward from (1, x), so the marginal
of X(s) has variance (1 - s) per coordinate and

    E S_{k,l} = (1 - e^{-2 pi^2 |k|^2}) / (2 pi^2 |k|^2 + 2 pi i l),

the complex conjugate of evaluating the forward-time display.  The second
and fourth moments of |S| carry the multinomial prefactor p!^2 (each sign
pattern of the simplex expansion arises from p! p! orderings of identical
factors); both conventions here were pinned against brute-force path Monte
Carlo before being frozen.
"""

import itertools
import math
import threading

import numpy as np

from .errors import EpsilonTooLarge, UnsupportedP

_lock = threading.Lock()
_cache = {}


def heat_kernel(t, x, z_max=6):
    """Periodic heat kernel p_t(x) = (2 pi t)^-1 sum_z exp(-|x+z|^2 / 2t).

    Lattice images truncated at |z|_inf <= z_max.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if z_max < 3:
        raise ValueError("z_max must be >= 3")
    x = np.asarray(x, dtype=float)
    zs = np.arange(-z_max, z_max + 1)
    z1, z2 = np.meshgrid(zs, zs, indexing="ij")
    d2 = (x[0] + z1) ** 2 + (x[1] + z2) ** 2
    return float(np.exp(-d2 / (2.0 * t)).sum() / (2.0 * np.pi * t))


def heat_kernel_error_bound(t, z_max=6, extra_shells=60):
    """Upper bound on the truncation error of ``heat_kernel``.

    For |x|_inf <= 1/2, every image in shell |z|_inf = s is at distance at
    least s - 1/2; the shell has 8s points.
    """
    s = np.arange(z_max + 1, z_max + 1 + extra_shells, dtype=float)
    tail = 8.0 * s * np.exp(-((s - 0.5) ** 2) / (2.0 * t))
    return float(tail.sum() / (2.0 * np.pi * t))


def mean_mode_integral(k, l):
    """m = E S_{k,l} for backward paths from (1, 0)."""
    ksq = float(k[0] ** 2 + k[1] ** 2)
    if ksq == 0:
        raise ValueError("k must be nonzero")
    b = 2.0 * np.pi**2 * ksq + 2j * np.pi * l
    return complex((1.0 - np.exp(-2.0 * np.pi**2 * ksq)) / b)


def M2_closed_form(k, l):
    """M_2 = E |S_{k,l}|^2 = 2 Re f(a), f(a) = (e^a - 1 - a)/a^2.

    a = 2 pi (i l - pi |k|^2).  Half of the published display's value; the
    p!^2 multinomial prefactor was confirmed by direct path Monte Carlo.
    """
    ksq = float(k[0] ** 2 + k[1] ** 2)
    if ksq == 0:
        raise ValueError("k must be nonzero")
    a = 2.0 * np.pi * (1j * l - np.pi * ksq)
    f = (np.exp(a) - 1.0 - a) / a**2
    return float(2.0 * f.real)


def M2p_exact_small_p(k, l, p):
    """Exact E |S_{k,l}|^{2p} for p in {1, 2} via the simplex expansion.

    M_{2p} = p!^2 sum_{alpha in Q_{2p}} int_simplex exp{sum a_m s'_m} with
    a_m = 2 pi (i l at_m - pi |k|^2 at_m^2), at_m the alpha tail sums; the
    exponent is rewritten in the ordered coordinates.
    """
    if p not in (1, 2):
        raise UnsupportedP(f"exact moments implemented for p <= 2, got {p}")
    ksq = float(k[0] ** 2 + k[1] ** 2)
    if ksq == 0:
        raise ValueError("k must be nonzero")
    d = 2 * p
    total = 0j
    for alpha in itertools.product((-1, 1), repeat=d):
        if sum(alpha) != 0:
            continue
        tails = [sum(alpha[m:]) for m in range(d)]
        gaps = [2.0 * np.pi * (1j * l * tm - np.pi * ksq * tm * tm)
                for tm in tails]
        # exponent sum a_m (s_m - s_{m-1}) -> rates (a_m - a_{m+1}) s_m
        rates = [gaps[m] - (gaps[m + 1] if m + 1 < d else 0.0)
                 for m in range(d)]
        total += _iterated_simplex_exp(rates)
    return float((math.factorial(p) ** 2 * total).real)


def _iterated_simplex_exp(rates):
    """Integral over 0 <= s_1 <= ... <= s_d <= 1 of prod exp(rate_m s_m).

    Exact recursion on exponential-polynomial terms (coeff, rate, power);
    coincident or zero rates fall into the polynomial branch, so no divided
    differences are needed.
    """
    terms = [(1.0 + 0j, 0j, 0)]
    for b in rates:
        new = {}

        def add(c, r, p):
            key = (r, p)
            new[key] = new.get(key, 0j) + c

        for (c, r, p) in terms:
            rb = r + b
            if abs(rb) < 1e-12:
                add(c / (p + 1), 0j, p + 1)
            else:
                fact = 1.0
                for i in range(p + 1):
                    add(c * ((-1) ** i) * fact / rb ** (i + 1), rb, p - i)
                    fact *= (p - i)
                add(-c * ((-1) ** p) * math.factorial(p) / rb ** (p + 1),
                    0j, 0)
        terms = [(cc, r, p) for (r, p), cc in new.items()]
    return sum(c * np.exp(r) for (c, r, p) in terms)


def expected_pair_intersection_mean(epsilon, t, dt, separation=(0.0, 0.0),
                                    kmax_mult=4.0):
    """Exact E I_t[X1, X2] for the discrete-time model, via Fourier series.

    E R^eps(D(t_j)) = sum_k rho_hat(eps k)^2 e^{-4 pi^2 |k|^2 (t - t_j)}
    e^{2 pi i k . dx}; the left-endpoint time sum is geometric per mode.
    Serves as the independent oracle for intersection_moment at r = 1.
    """
    from .noise_field import _ProfileData

    prof = _ProfileData.get()
    steps = int(round(t / dt))
    kmax = int(np.ceil(kmax_mult / epsilon))
    ks = np.arange(-kmax, kmax + 1)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    k1 = k1.ravel()
    k2 = k2.ravel()
    ksq = (k1 * k1 + k2 * k2).astype(float)
    phase = np.cos(2.0 * np.pi * (k1 * separation[0] + k2 * separation[1]))
    # rho_hat depends on |k| only: evaluate once per distinct |k|^2
    uniq, inv = np.unique(ksq, return_inverse=True)
    rsq = np.empty(uniq.size)
    for lo in range(0, uniq.size, 20000):
        hi = min(lo + 20000, uniq.size)
        rsq[lo:hi] = prof.fourier(np.sqrt(uniq[lo:hi]) * epsilon) ** 2
    lam = 4.0 * np.pi**2 * uniq
    x = np.exp(-lam * dt)
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = np.where(lam > 0.0,
                       x * (1.0 - x**steps) / np.maximum(1.0 - x, 1e-300),
                       float(steps))
    return float(dt * np.sum(phase * (rsq * geo)[inv]))


def r_log_integral_check(m, z_samples):
    """Quadrature of int R^eps(w) log |w - z|_T2^{-2} dw at sampled z.

    When the singular point z sits inside (or near) the R^eps support, the
    quadrature goes polar around z so the r log r integrand stays bounded;
    otherwise polar around 0 over the support suffices.  Requires
    eps < 1/4.  Returns per-z values plus the fitted constant of the bound
    C (1 + log |z|^{-2}).
    """
    if m.epsilon >= 0.25:
        raise EpsilonTooLarge("lemma regime needs eps < 1/4")
    from .noise_field import torus_dist

    eps = m.epsilon
    nr, na = 512, 256
    da = 2.0 * np.pi / na
    a_nodes = (np.arange(na) + 0.5) * da
    ca, sa = np.cos(a_nodes), np.sin(a_nodes)
    values = []
    zdist = []
    for z in z_samples:
        z = np.asarray(z, dtype=float)
        dz = float(torus_dist(z, 0.0))
        zdist.append(dz)
        if dz <= 2.0 * eps:
            # singularity inside the support: center the polar grid at z
            rad = dz + eps
            r_nodes = (np.arange(nr) + 0.5) * (rad / nr)
            w = np.empty((nr, na, 2))
            w[..., 0] = z[0] + r_nodes[:, None] * ca[None, :]
            w[..., 1] = z[1] + r_nodes[:, None] * sa[None, :]
            logker = -2.0 * np.log(r_nodes)[:, None]
        else:
            # smooth integrand: center at 0, radius just past the support
            rad = eps * 1.01
            r_nodes = (np.arange(nr) + 0.5) * (rad / nr)
            w = np.empty((nr, na, 2))
            w[..., 0] = r_nodes[:, None] * ca[None, :]
            w[..., 1] = r_nodes[:, None] * sa[None, :]
            logker = -2.0 * np.log(np.maximum(torus_dist(w, z), 1e-300))
        val = np.sum(m.r_eps(w) * logker * r_nodes[:, None]) \
            * (rad / nr) * da
        values.append(float(val))
    values = np.asarray(values)
    zdist = np.asarray(zdist)
    with np.errstate(divide="ignore"):
        envelope = 1.0 + np.log(1.0 / np.maximum(zdist, 1e-300) ** 2)
    c_fit = float(np.max(np.abs(values) / envelope))
    return {"z": [tuple(float(v) for v in np.atleast_1d(z))
                  for z in z_samples],
            "values": values, "envelope": envelope, "c_fit": c_fit}


def oracle_table():
    """Pinned oracle entries exported to oracles.json."""
    from .noise_field import _ProfileData

    prof = _ProfileData.get()
    entries = [
        {"name": "bump_normalization_c", "inputs": {},
         "value": prof.c,
         "method": "adaptive radial quadrature, epsrel 1e-14",
         "tolerance": 1e-10},
        {"name": "bump_l2_sq", "inputs": {},
         "value": prof.l2sq,
         "method": "adaptive radial quadrature of rho^2, epsrel 1e-14",
         "tolerance": 1e-10},
        {"name": "bump_linf", "inputs": {},
         "value": prof.linf, "method": "c * exp(-1)", "tolerance": 1e-12},
        {"name": "mean_mode_integral_k10_l0", "inputs": {"k": [1, 0], "l": 0},
         "value": mean_mode_integral((1, 0), 0).real,
         "method": "backward-path characteristic function, exact integral",
         "tolerance": 1e-12},
        {"name": "M2_k10_l0", "inputs": {"k": [1, 0], "l": 0},
         "value": M2_closed_form((1, 0), 0),
         "method": "2 Re (e^a-1-a)/a^2, a = -2 pi^2 |k|^2",
         "tolerance": 1e-12},
        {"name": "M4_k10_l0", "inputs": {"k": [1, 0], "l": 0, "p": 2},
         "value": M2p_exact_small_p((1, 0), 0, 2),
         "method": "exact simplex expansion, p!^2 prefactor",
         "tolerance": 1e-12},
        {"name": "heat_kernel_t0.001_origin", "inputs": {"t": 0.001},
         "value": heat_kernel(0.001, (0.0, 0.0)),
         "method": "lattice image sum, z_max 6",
         "tolerance": 1e-9},
    ]
    return entries
