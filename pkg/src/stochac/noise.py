"""Brownian paths and their mollified derivatives.

A Brownian path is sampled on a uniform grid that extends to negative times
(an independent backward branch), so that kernel windows centered near t = 0
are always covered.  Smoothing against a compactly supported bump rho at
scale eps**gamma produces a C-infinity path W_eps; its first and second time
derivatives are obtained by convolving the *analytically differentiated*
kernel against the path, never by differencing W_eps numerically.

Quadrature is trapezoid on the path grid with a small moment correction:
the discrete weights are projected (least-squares, 2-3 constraints) onto the
set of weight vectors that integrate constants, linears and - for the second
derivative - quadratics exactly.  This keeps the advertised identities
(constant path -> constant, W(t)=t -> slope 1, ...) at machine precision
while leaving the stochastic content of the quadrature untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, SupportWindowError

GAMMA_MAX = 2.0 / 3.0

# support is cut where exp(-1/(1-x^2)) is below ~1e-217; avoids overflow in
# the rational prefactors of the derivatives
_EDGE = 0.999


@lru_cache(maxsize=1)
def _norm_const() -> float:
    from scipy.integrate import quad

    z, _ = quad(lambda x: np.exp(-1.0 / (1.0 - x * x)), -1.0, 1.0,
                epsabs=1e-13, epsrel=1e-12, limit=200)
    return z


def kernel_eval(x):
    """Normalized bump exp(-1/(1-x^2)) / Z on (-1, 1), zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < _EDGE
    u = 1.0 - x[m] ** 2
    out[m] = np.exp(-1.0 / u) / _norm_const()
    return out if out.ndim else float(out)


def kernel_deriv1(x):
    """First derivative of the bump, in closed form."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < _EDGE
    u = 1.0 - x[m] ** 2
    out[m] = np.exp(-1.0 / u) / _norm_const() * (-2.0 * x[m] / u ** 2)
    return out if out.ndim else float(out)


def kernel_deriv2(x):
    """Second derivative of the bump, in closed form."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < _EDGE
    u = 1.0 - x[m] ** 2
    xm = x[m]
    out[m] = np.exp(-1.0 / u) / _norm_const() * (
        4.0 * xm ** 2 / u ** 4 - 2.0 * (1.0 + 3.0 * xm ** 2) / u ** 3)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MollifierKernel:
    """Scalar facts about the bump: normalization, L2 norm, sup norms."""

    norm_const: float
    l2_norm_sq: float
    second_moment: float
    sup_deriv1: float
    sup_deriv2: float


@lru_cache(maxsize=1)
def kernel_info() -> MollifierKernel:
    from scipy.integrate import quad

    z = _norm_const()
    l2, _ = quad(lambda x: kernel_eval(x) ** 2, -1.0, 1.0,
                 epsabs=1e-13, epsrel=1e-12, limit=200)
    m2, _ = quad(lambda x: x * x * kernel_eval(x), -1.0, 1.0,
                 epsabs=1e-13, epsrel=1e-12, limit=200)
    xs = np.linspace(-_EDGE, _EDGE, 200001)
    return MollifierKernel(
        norm_const=z,
        l2_norm_sq=l2,
        second_moment=m2,
        sup_deriv1=float(np.max(np.abs(kernel_deriv1(xs)))),
        sup_deriv2=float(np.max(np.abs(kernel_deriv2(xs)))),
    )


@dataclass
class BrownianPath:
    """A trajectory sampled on a uniform grid covering negative and positive times.

    ``values[i_zero]`` is the value at t = 0 (exactly 0.0 for sampled paths).
    One path is the single source of randomness for every solver of an
    experiment; evaluation methods are pure reads.
    """

    t_min: float
    t_max: float
    dt: float
    values: np.ndarray
    seed: int | None = None
    times: np.ndarray = field(init=False, repr=False)
    i_zero: int = field(init=False, repr=False)

    def __post_init__(self):
        n_neg = int(round(-self.t_min / self.dt))
        self.times = (np.arange(len(self.values)) - n_neg) * self.dt
        self.i_zero = n_neg

    def value(self, t):
        """Piecewise-linear read of the path at time(s) t."""
        return np.interp(t, self.times, self.values)

    def increment(self, t0: float, t1: float) -> float:
        return float(self.value(t1) - self.value(t0))


def sample_brownian(seed: int, t_min: float, t_max: float, dt: float) -> BrownianPath:
    """Sample a Brownian path on a uniform grid, pinned to W(0) = 0.

    The forward and backward branches are generated from independent
    sub-streams spawned from the seed, so the negative-time extension is an
    independent motion read backwards.  Deterministic for a fixed seed.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if not (t_min < 0.0 < t_max):
        raise ParameterError(f"need t_min < 0 < t_max, got [{t_min}, {t_max}]")
    n_neg = int(np.ceil(-t_min / dt - 1e-12))
    n_pos = int(np.ceil(t_max / dt - 1e-12))
    fwd_ss, bwd_ss = np.random.SeedSequence(seed).spawn(2)
    fwd = np.random.default_rng(fwd_ss)
    bwd = np.random.default_rng(bwd_ss)
    w = np.empty(n_neg + n_pos + 1)
    w[n_neg] = 0.0
    sig = np.sqrt(dt)
    w[n_neg + 1:] = np.cumsum(fwd.normal(0.0, sig, n_pos))
    w[:n_neg] = np.cumsum(bwd.normal(0.0, sig, n_neg))[::-1]
    return BrownianPath(t_min=-n_neg * dt, t_max=n_pos * dt, dt=dt,
                        values=w, seed=seed)


def path_from_function(fn: Callable, t_min: float, t_max: float, dt: float) -> BrownianPath:
    """Deterministic path built from a function; for synthetic tests and CLI checks."""
    n_neg = int(np.ceil(-t_min / dt - 1e-12))
    n_pos = int(np.ceil(t_max / dt - 1e-12))
    times = (np.arange(n_neg + n_pos + 1) - n_neg) * dt
    return BrownianPath(t_min=-n_neg * dt, t_max=n_pos * dt, dt=dt,
                        values=np.asarray([float(fn(t)) for t in times]),
                        seed=None)


class MollifiedNoise:
    """View of a BrownianPath smoothed at scale eps**gamma.

    ``smoothed``   -- the mollified path itself,
    ``value``      -- its time derivative, the noise driving the dynamics,
    ``derivative`` -- the second time derivative (rate of change of the noise).
    """

    def __init__(self, path: BrownianPath, epsilon: float, gamma: float):
        if epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        if not (0.0 < gamma < GAMMA_MAX):
            raise ParameterError(
                f"gamma must lie in (0, 2/3), got {gamma}")
        self.path = path
        self.epsilon = float(epsilon)
        self.gamma = float(gamma)
        self.window = float(epsilon) ** float(gamma)

    # -- quadrature weights ------------------------------------------------

    def _window_slice(self, t: float):
        p = self.path
        lo = int(np.ceil((t - self.window - p.times[0]) / p.dt - 1e-9))
        hi = int(np.floor((t + self.window - p.times[0]) / p.dt + 1e-9))
        if lo < 0 or hi > len(p.values) - 1:
            raise SupportWindowError(
                f"window [{t - self.window:.6g}, {t + self.window:.6g}] exceeds "
                f"path support [{p.times[0]:.6g}, {p.times[-1]:.6g}]")
        return lo, hi

    def _weights(self, t: float, order: int):
        """Trapezoid weights on the path grid, moment-corrected.

        order 0 reproduces constants and linears exactly, order 1 kills
        constants and differentiates linears exactly, order 2 additionally
        pins the quadratic moment.
        """
        lo, hi = self._window_slice(t)
        s = self.path.times[lo:hi + 1]
        w = self.window
        u = (t - s) / w
        dt = self.path.dt
        if order == 0:
            raw = kernel_eval(u) / w * dt
            V = np.vstack([np.ones_like(u), u])
            b = np.array([1.0, 0.0])
        elif order == 1:
            raw = kernel_deriv1(u) / w ** 2 * dt
            V = np.vstack([np.ones_like(u), u])
            b = np.array([0.0, -1.0 / w])
        else:
            raw = kernel_deriv2(u) / w ** 3 * dt
            V = np.vstack([np.ones_like(u), u, u * u])
            b = np.array([0.0, 0.0, 2.0 / w ** 2])
        lam = np.linalg.solve(V @ V.T, b - V @ raw)
        return lo, raw + V.T @ lam

    def _convolve(self, t, order: int):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        vals = self.path.values
        for k, tk in enumerate(t_arr):
            lo, w = self._weights(float(tk), order)
            out[k] = w @ vals[lo:lo + len(w)]
        return out if np.ndim(t) else float(out[0])

    # -- public evaluations ------------------------------------------------

    def smoothed(self, t):
        """Kernel-smoothed path value at time(s) t."""
        return self._convolve(t, 0)

    def value(self, t):
        """The mollified noise at time(s) t (derivative of the smoothed path)."""
        return self._convolve(t, 1)

    def derivative(self, t):
        """Time derivative of the noise at time(s) t."""
        return self._convolve(t, 2)

    def theoretical_variance(self) -> float:
        """Stationary variance of the noise predicted by the kernel L2 norm."""
        return kernel_info().l2_norm_sq / self.window


# -- Monte-Carlo statistics over seeds ------------------------------------

def default_path_dt(eps_min: float, gamma: float) -> float:
    """Path resolution rule: at least 40 nodes across every kernel window."""
    return eps_min ** gamma / 20.0


def _stat_paths(template: MollifiedNoise, n_samples: int, t_lo: float, t_hi: float):
    """Matrix of path values on a common grid for n_samples derived seeds."""
    base = template.path.seed if template.path.seed is not None else 0
    w, dt = template.window, template.path.dt
    t_min = min(t_lo - w, -w) - 2 * dt
    t_max = t_hi + w + 2 * dt
    paths = [sample_brownian(base + k, t_min, t_max, dt) for k in range(n_samples)]
    return paths[0], np.array([p.values for p in paths])


def empirical_variance(noise: MollifiedNoise, t: float = 0.0,
                       n_samples: int = 2000) -> tuple[float, float]:
    """Sample variance of the noise at time t over derived seeds.

    Returns (empirical, theoretical); the theoretical value is
    l2_norm_sq / eps**gamma.
    """
    ref, mat = _stat_paths(noise, n_samples, t, t)
    probe = MollifiedNoise(ref, noise.epsilon, noise.gamma)
    lo, w = probe._weights(t, 1)
    xi = mat[:, lo:lo + len(w)] @ w
    return float(np.var(xi, ddof=1)), noise.theoretical_variance()


def empirical_correlation(noise: MollifiedNoise, lag: float,
                          n_samples: int = 2000, t0: float = 0.0) -> float:
    """Monte-Carlo correlation of the noise at times t0 and t0 + lag."""
    ref, mat = _stat_paths(noise, n_samples, min(t0, t0 + lag), max(t0, t0 + lag))
    probe = MollifiedNoise(ref, noise.epsilon, noise.gamma)
    lo_a, w_a = probe._weights(t0, 1)
    lo_b, w_b = probe._weights(t0 + lag, 1)
    a = mat[:, lo_a:lo_a + len(w_a)] @ w_a
    b = mat[:, lo_b:lo_b + len(w_b)] @ w_b
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class SupScaling:
    """Result of a sup-over-time scaling sweep across eps values."""

    eps: list[float]
    log_sup_mean: list[float]
    per_seed_sup: dict[int, list[float]]
    slope: float
    degenerate: bool

    def __iter__(self):  # allows tuple-style unpacking of the headline number
        yield self.slope


def sup_noise_scaling(eps_list: Sequence[float], gamma: float, T: float,
                      seeds: Sequence[int], which: str = "value",
                      path_factory: Callable[[int], BrownianPath] | None = None,
                      ) -> SupScaling:
    """Fit the log-log slope of sup_{[0,T]} |noise| against eps.

    One shared path per seed (resolving the finest kernel window) is
    evaluated at every eps; the sup is taken on a grid of step eps**gamma/10.
    A path that yields sup == 0 for some eps (e.g. the zero path) makes the
    slope undefined; the result is flagged degenerate with slope NaN.
    """
    eps_list = sorted(float(e) for e in eps_list)[::-1]
    if len(eps_list) < 2:
        raise ParameterError("need at least two eps values for a slope")
    w_max = max(eps_list) ** gamma
    dt = default_path_dt(min(eps_list), gamma)
    per_seed: dict[int, list[float]] = {}
    for seed in seeds:
        if path_factory is not None:
            path = path_factory(seed)
        else:
            path = sample_brownian(seed, -(w_max + 4 * dt), T + w_max + 4 * dt, dt)
        sups = []
        for eps in eps_list:
            noise = MollifiedNoise(path, eps, gamma)
            grid = np.arange(0.0, T + 1e-12, eps ** gamma / 10.0)
            if which == "value":
                vals = noise.value(grid)
            elif which == "derivative":
                vals = noise.derivative(grid)
            else:
                raise ParameterError(f"unknown statistic {which!r}")
            sups.append(float(np.max(np.abs(vals))))
        per_seed[seed] = sups
    sup_mat = np.array([per_seed[s] for s in seeds])
    if np.any(sup_mat <= 0.0):
        return SupScaling(eps=list(eps_list), log_sup_mean=[],
                          per_seed_sup=per_seed, slope=float("nan"),
                          degenerate=True)
    log_mean = np.mean(np.log(sup_mat), axis=0)
    A = np.vstack([np.log(eps_list), np.ones(len(eps_list))]).T
    slope = float(np.linalg.lstsq(A, log_mean, rcond=None)[0][0])
    return SupScaling(eps=list(eps_list), log_sup_mean=list(log_mean),
                      per_seed_sup=per_seed, slope=slope, degenerate=False)
