"""Discrete space-time white noise on the torus and its mollification.

The discretization contract: cell (j, i) of a noise realization holds an
independent standard Gaussian ``xi[j, i]``, and the discrete Wiener integral
of a test function f is

    W[f] = sum_{j,i} f(t_j, y_i) * xi[j,i] * sqrt(dt) * dx,

whose variance is the Riemann sum of f^2 dt dx^2 — the unique scaling that
makes the integral an isometry.  Mollification convolves each slice with the
epsilon-rescaled bump profile.
"""

import threading

import numpy as np
from scipy import integrate
from scipy.special import j0

from . import _rng
from .errors import EpsilonOutOfRange, EpsilonUnresolvable, IndexOutOfRange

# slices of a realization are cached in full up to this many values
_CACHE_BUDGET = 1 << 25


def torus_wrap(x):
    """Reduce coordinates mod 1 into [0, 1)."""
    return np.mod(x, 1.0)


def torus_delta(a, b):
    """Componentwise difference a - b wrapped into [-1/2, 1/2)."""
    return np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5


def torus_dist(a, b):
    """Euclidean distance on the torus."""
    d = torus_delta(a, b)
    return np.sqrt(np.sum(d * d, axis=-1))


class TorusGrid:
    """n x n periodic grid on [0,1)^2 with spacing dx = 1/n."""

    def __init__(self, n):
        n = int(n)
        if n < 8:
            raise ValueError("grid needs n >= 8")
        self.n = n
        self.dx = 1.0 / n
        ax = np.arange(n) * self.dx
        self.x = ax
        self.xx, self.yy = np.meshgrid(ax, ax, indexing="ij")

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and other.n == self.n

    def __hash__(self):
        return hash(("TorusGrid", self.n))

    def __repr__(self):
        return f"TorusGrid(n={self.n})"


class ScalarField:
    """Real field sampled on a TorusGrid."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n, grid.n):
            raise ValueError("field shape does not match grid")
        self.grid = grid
        self.values = values

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    def mean(self):
        return float(self.values.mean())

    def spatial_integral(self):
        return float(self.values.sum() * self.grid.dx**2)


# ---------------------------------------------------------------------------
# canonical bump profile and its derived constants
# ---------------------------------------------------------------------------

def _bump_radial(r):
    """Unnormalized radial profile exp(-1/(1-(2r)^2)) on r < 1/2."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    m = r < 0.5
    out[m] = np.exp(-1.0 / (1.0 - 4.0 * r[m] ** 2))
    return out


class _ProfileData:
    """Process-wide cache of the profile's quadrature constants and tables."""

    _lock = threading.Lock()
    _instance = None

    def __init__(self):
        one_d, _ = integrate.quad(lambda r: _bump_radial(np.array([r]))[0] * r,
                                  0.0, 0.5, epsabs=1e-15, epsrel=1e-14,
                                  limit=400)
        self.c = 1.0 / (2.0 * np.pi * one_d)
        two_d, _ = integrate.quad(
            lambda r: _bump_radial(np.array([r]))[0] ** 2 * r,
            0.0, 0.5, epsabs=1e-16, epsrel=1e-14, limit=400)
        self.l2sq = self.c**2 * 2.0 * np.pi * two_d
        self.linf = self.c * np.exp(-1.0)

        # radial table of R = rho * rho (plane convolution) on [0, 1];
        # FFT of the sampled profile on [-1,1)^2 — spectrally accurate for
        # a C_c^infinity integrand.  R(0) is pinned to the quadrature value
        # so the self-intersection identity holds to float precision.
        m = 2048
        h = 2.0 / m
        ax = (np.arange(m) - m // 2) * h
        rr = np.sqrt(ax[:, None] ** 2 + ax[None, :] ** 2)
        rho = self.c * _bump_radial(rr)
        fr = np.fft.rfft2(rho)
        conv = np.fft.irfft2(fr * fr, s=(m, m)) * h * h
        conv = np.fft.fftshift(conv)
        radial = conv[m // 2, m // 2:]          # values at s = 0, h, ..., 1-h
        radial = np.append(radial, 0.0)         # s = 1: support boundary
        radial[0] = self.l2sq
        radial = np.maximum(radial, 0.0)
        self.r_table = radial
        self.r_step = h

        # Gauss-Legendre nodes for the radial Fourier transform
        gl_x, gl_w = np.polynomial.legendre.leggauss(256)
        self._ft_r = 0.25 * (gl_x + 1.0)
        self._ft_w = 0.25 * gl_w * self._ft_r * self.c * _bump_radial(self._ft_r)

    @classmethod
    def get(cls):
        with cls._lock:
            if cls._instance is None:
                cls._instance = cls()
            return cls._instance

    def fourier(self, s):
        """rho_hat at radial frequency |xi| = s (2-d FT, rho_hat(0) = 1)."""
        s = np.asarray(s, dtype=float)
        arg = 2.0 * np.pi * np.multiply.outer(s, self._ft_r)
        return 2.0 * np.pi * (j0(arg) * self._ft_w).sum(axis=-1)

    def r_of(self, s):
        """R(s) by linear interpolation of the radial table."""
        s = np.asarray(s, dtype=float)
        return np.interp(s, np.arange(self.r_table.size) * self.r_step,
                         self.r_table, right=0.0)


class Mollifier:
    """The profile rho, its epsilon rescaling, self-convolution and FT.

    rho is the canonical normalized bump supported on the radius-1/2 ball;
    rho^eps(x) = eps^-2 rho(x/eps), R^eps = rho^eps * rho^eps with
    R^eps(0) = eps^-2 ||rho||_2^2 exactly.
    """

    def __init__(self, epsilon, grid):
        data = _ProfileData.get()
        self.epsilon = float(epsilon)
        self.grid = grid
        self.l1 = 1.0
        self.l2sq = data.l2sq
        self.linf = data.linf
        self.c = data.c
        self._data = data
        self._kernel_fft = {}

    # -- profile evaluation -------------------------------------------------

    def rho(self, r):
        """Profile rho at plane radius r."""
        return self.c * _bump_radial(r)

    def rho_eps(self, d):
        """rho^eps at torus displacement(s) d (shape (..., 2))."""
        r = np.sqrt(np.sum(np.square(torus_delta(d, 0.0)), axis=-1))
        return self.rho(r / self.epsilon) / self.epsilon**2

    def r_eps(self, d):
        """R^eps at torus displacement(s) d (shape (..., 2))."""
        r = torus_dist(d, 0.0)
        return self.r_eps_radial(r)

    def r_eps_radial(self, r):
        """R^eps at torus radius r (table lookup)."""
        return self._data.r_of(np.asarray(r) / self.epsilon) / self.epsilon**2

    def fourier(self, xi):
        """rho_hat evaluated at plane frequency xi (shape (..., 2))."""
        s = np.sqrt(np.sum(np.square(np.asarray(xi, dtype=float)), axis=-1))
        return self._data.fourier(s)

    def fourier_radial(self, s):
        return self._data.fourier(s)

    @property
    def r0(self):
        """R^eps(0) = eps^-2 ||rho||_2^2."""
        return self.l2sq / self.epsilon**2

    # -- grid kernel --------------------------------------------------------

    def kernel(self, grid=None):
        """rho^eps sampled at wrapped lattice offsets of ``grid``."""
        grid = grid or self.grid
        ax = torus_delta(np.arange(grid.n) * grid.dx, 0.0)
        rr = np.sqrt(ax[:, None] ** 2 + ax[None, :] ** 2)
        return self.rho(rr / self.epsilon) / self.epsilon**2

    def kernel_fft(self, grid=None):
        grid = grid or self.grid
        key = grid.n
        if key not in self._kernel_fft:
            self._kernel_fft[key] = np.fft.rfft2(self.kernel(grid))
        return self._kernel_fft[key]


def make_mollifier(profile_name, epsilon, grid):
    """Build the canonical bump mollifier at scale epsilon on ``grid``."""
    if profile_name != "bump":
        raise ValueError(f"unknown profile {profile_name!r}")
    if not 0.0 < epsilon < 1.0:
        raise EpsilonOutOfRange(f"epsilon={epsilon} outside (0, 1)")
    if epsilon < 4.0 * grid.dx:
        raise EpsilonUnresolvable(
            f"epsilon={epsilon} < 4*dx={4.0 * grid.dx}: mollifier not "
            f"resolvable on an n={grid.n} grid")
    return Mollifier(epsilon, grid)


# ---------------------------------------------------------------------------
# noise realizations
# ---------------------------------------------------------------------------

class NoiseRealization:
    """Seeded discrete space-time white noise.

    Slice j is an (n, n) array of independent standard Gaussians generated
    from a Philox stream keyed on (seed, j); slices can therefore be
    produced lazily, in any order, with bit-exact reproducibility.
    """

    def __init__(self, grid, dt, steps, seed):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if steps < 1:
            raise ValueError("steps must be >= 1")
        self.grid = grid
        self.dt = float(dt)
        self.steps = int(steps)
        self.seed = int(seed)
        self.t_final = self.dt * self.steps
        self._cache = None
        if self.steps * grid.n * grid.n <= _CACHE_BUDGET:
            self._cache = [None] * self.steps

    def slice(self, j):
        """Gaussians of time slice j (shape (n, n))."""
        if not 0 <= j < self.steps:
            raise IndexOutOfRange(f"slice {j} outside [0, {self.steps})")
        if self._cache is not None and self._cache[j] is not None:
            return self._cache[j]
        xi = _rng.normals(self.seed, _rng.KIND_NOISE, j,
                          (self.grid.n, self.grid.n))
        if self._cache is not None:
            self._cache[j] = xi
        return xi

    @property
    def xi(self):
        """All slices stacked, shape (steps, n, n).  Materializes lazily."""
        return np.stack([self.slice(j) for j in range(self.steps)])

    def times(self):
        return np.arange(self.steps) * self.dt

    # -- integrals ----------------------------------------------------------

    def wiener_integral(self, xi_fn):
        """Discrete Wiener integral of ``xi_fn(s, x, y)`` over [0, t_final].

        The test function is evaluated on the full grid at each slice time;
        returns sum f * xi * sqrt(dt) * dx (complex if f is).
        """
        g = self.grid
        total = 0.0 + 0.0j
        is_complex = False
        for j in range(self.steps):
            f = np.asarray(xi_fn(j * self.dt, g.xx, g.yy))
            is_complex = is_complex or np.iscomplexobj(f)
            total += np.sum(f * self.slice(j))
        total *= self.integral_weight()
        return complex(total) if is_complex else float(total.real)

    def integral_weight(self):
        """Per-cell Wiener weight sqrt(dt)*dx."""
        return np.sqrt(self.dt) * self.grid.dx

    def mollified_increment(self, j, m):
        """Increment field I_j(x) = sum_i rho^eps(x - y_i) xi[j,i] sqrt(dt) dx.

        This is the one-step increment of the mollified noise W^eps on the
        grid; solvers add sqrt(theta) * I_j per Euler step.
        """
        kf = m.kernel_fft(self.grid)
        conv = np.fft.irfft2(np.fft.rfft2(self.slice(j)) * kf,
                             s=(self.grid.n, self.grid.n))
        return conv * self.integral_weight()

    def raw_increment(self, j):
        """Unmollified noise increment density xi[j] * sqrt(dt) / dx."""
        return self.slice(j) * (np.sqrt(self.dt) / self.grid.dx)

    def mode_coefficients(self, ks, ls):
        """W_{t_final}[e_{k,l}] for mode lists ks (m,2) and ls (m,).

        e_{k,l}(s, y) = exp(2 pi i (l s + k . y)); evaluated by contracting
        each slice against the spatial phases (separable in the two axes).
        """
        ks = np.asarray(ks, dtype=int).reshape(-1, 2)
        ls = np.asarray(ls, dtype=int).reshape(-1)
        g = self.grid
        phase1 = np.exp(2j * np.pi * np.outer(g.x, ks[:, 0]))  # (n, m)
        phase2 = np.exp(2j * np.pi * np.outer(g.x, ks[:, 1]))  # (n, m)
        out = np.zeros(ks.shape[0], dtype=complex)
        for j in range(self.steps):
            spatial = ((self.slice(j) @ phase2) * phase1).sum(axis=0)
            out += np.exp(2j * np.pi * ls * (j * self.dt)) * spatial
        return out * self.integral_weight()


def sample_noise(grid, dt, steps, seed):
    """Fresh noise realization; distinct seeds give independent noise."""
    return NoiseRealization(grid, dt, steps, seed)


def mollify_slice(noise, j, m):
    """Mollified white-noise sample of slice j, scaled as dW^eps/dt.

    Returns the grid function sum_i rho^eps(x - y_i) xi[j,i] dx / sqrt(dt);
    its pointwise variance approximates R^eps(0)/dt, and dt times it is the
    increment field used by the solvers.
    """
    return ScalarField(noise.grid, noise.mollified_increment(j, m) / noise.dt)
