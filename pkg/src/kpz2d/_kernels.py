"""Hot inner loops, numba-compiled when available.

Every kernel writes per-item outputs with no shared accumulators, so results
are bit-identical under any thread count.  The numpy fallbacks implement the
same arithmetic; they are slower but keep the package importable without a
working numba toolchain.
"""

import warnings

import numpy as np

try:
    # the TBB-version notice is environmental noise; the fallback layer is fine
    warnings.filterwarnings("ignore", message=".*TBB.*",
                            category=Warning, module="numba")
    from numba import njit, prange
    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return deco

    prange = range


PROFILE_TAB_N = 8192
_PROFILE_TAB = [None]


def profile_table():
    """exp(-1/(1-4q)) tabulated on q = (r/eps)^2 in [0, 1/4]."""
    if _PROFILE_TAB[0] is None:
        q = np.linspace(0.0, 0.25, PROFILE_TAB_N)
        u = 1.0 - 4.0 * q
        out = np.zeros(PROFILE_TAB_N)
        m = u > 1e-14
        out[m] = np.exp(-1.0 / u[m])
        _PROFILE_TAB[0] = out
    return _PROFILE_TAB[0]


@njit(cache=True)
def _window_sum_one(px, py, xi, n, dx, inv_eps, rad, amp, tab):
    """Direct sum of rho^eps(x - y_cell) * xi[cell] over the support disk.

    rad is the support radius eps/2; the cell ranges are the exact lattice
    covers of the disk, row by row.  The profile is a linear interpolation
    of ``tab`` in the squared rescaled radius (absolute error < 1e-8).
    """
    acc = 0.0
    q_scale = (PROFILE_TAB_N - 1) / 0.25
    ix_lo = int(np.floor((px - rad) / dx))
    ix_hi = int(np.floor((px + rad) / dx))
    for gx in range(ix_lo, ix_hi + 1):
        cx = px - gx * dx
        rem = rad * rad - cx * cx
        if rem <= 0.0:
            continue
        dy = np.sqrt(rem)
        iy_lo = int(np.floor((py - dy) / dx))
        iy_hi = int(np.floor((py + dy) / dx))
        ixw = gx % n
        for gy in range(iy_lo, iy_hi + 1):
            cy = py - gy * dx
            q = (cx * cx + cy * cy) * inv_eps * inv_eps * q_scale
            k = int(q)
            if k + 1 < PROFILE_TAB_N:
                frac = q - k
                acc += (tab[k] * (1.0 - frac) + tab[k + 1] * frac) \
                    * xi[ixw, gy % n]
    return acc * amp


@njit(parallel=True, cache=True)
def slice_window_sums(pos, xi, n, dx, inv_eps, rad, amp, tab, out):
    """out[i] = sum over the mollifier support of rho^eps(pos_i - y) xi[y].

    ``amp`` folds in the profile normalization c * eps^-2 (and any external
    scaling).  Each particle writes its own slot: thread-count independent.
    """
    for i in prange(pos.shape[0]):
        out[i] = _window_sum_one(pos[i, 0], pos[i, 1], xi, n, dx, inv_eps,
                                 rad, amp, tab)


def slice_window_sums_np(pos, xi, n, dx, inv_eps, rad, amp, tab, out):
    """Vectorized fallback with identical semantics."""
    half_w = int(np.ceil(rad / dx)) + 1
    offs = np.arange(-half_w, half_w + 1)
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    ox = ox.ravel()
    oy = oy.ravel()
    base = np.floor(pos / dx).astype(np.int64)
    gx = base[:, 0][:, None] + ox[None, :]
    gy = base[:, 1][:, None] + oy[None, :]
    cx = pos[:, 0][:, None] - gx * dx
    cy = pos[:, 1][:, None] - gy * dx
    q = (cx * cx + cy * cy) * inv_eps**2 * ((PROFILE_TAB_N - 1) / 0.25)
    grid = np.arange(PROFILE_TAB_N, dtype=float)
    vals = np.interp(q, grid, tab, right=0.0)
    vals[q >= PROFILE_TAB_N - 1] = 0.0
    out[:] = amp * np.sum(vals * xi[gx % n, gy % n], axis=1)
    return out


@njit(parallel=True, cache=True)
def pair_intersection_times(pa, pb, ia, ib, r_table, table_step, inv_eps,
                            eps2_fac, dt, out):
    """Intersection time per resampled pair.

    pa, pb: (Ma, J+1, 2) and (Mb, J+1, 2) path arrays; ia, ib: pair index
    vectors; R^eps looked up by linear interpolation of the radial table
    (rescaled radius r/eps, values eps^-2 R(r/eps)).
    """
    n_tab = r_table.shape[0]
    for p in prange(ia.shape[0]):
        a = ia[p]
        b = ib[p]
        acc = 0.0
        for j in range(pa.shape[1] - 1):
            dx0 = pa[a, j, 0] - pb[b, j, 0]
            dx1 = pa[a, j, 1] - pb[b, j, 1]
            dx0 -= np.rint(dx0)
            dx1 -= np.rint(dx1)
            r = np.sqrt(dx0 * dx0 + dx1 * dx1) * inv_eps
            s = r / table_step
            k = int(s)
            if k + 1 < n_tab:
                frac = s - k
                acc += r_table[k] * (1.0 - frac) + r_table[k + 1] * frac
        out[p] = acc * dt * eps2_fac


def pair_intersection_times_np(pa, pb, ia, ib, r_table, table_step, inv_eps,
                               eps2_fac, dt, out):
    d = pa[ia, :-1, :] - pb[ib, :-1, :]
    d -= np.rint(d)
    r = np.sqrt(np.sum(d * d, axis=-1)) * inv_eps
    grid = np.arange(r_table.shape[0]) * table_step
    vals = np.interp(r, grid, r_table, right=0.0)
    out[:] = vals.sum(axis=1) * dt * eps2_fac
    return out


if not HAVE_NUMBA:  # pragma: no cover
    slice_window_sums = slice_window_sums_np
    pair_intersection_times = pair_intersection_times_np
