"""Traveling-wave profiles for the tilted double-well reaction term.

Solves the boundary-value problem

    m'' + c m' + f(m) + delta = 0,   m(-L) = m_-(delta),  m(L) = m_+(delta),

for the profile m and the scalar speed c together, on a truncated domain with
the phase condition m(0) = (m_+ + m_-)/2 fixing translation.  The interior
discretization is 4th-order central (5-point), dropping to the 3-point stencil
at the first and last interior node where the solution is exponentially flat;
the nonlinear system is solved by damped Newton started from the scaled kink.

The speed sensitivity at zero tilt equals -speed_constant() for the quartic
well, which is what couples the limiting interface law to the Brownian drive.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceError, ParameterError

DELTA_MAX = 0.2   # admissible tilt; cubic keeps three real roots below 2/(3 sqrt 3)


def reaction(u):
    """f(u) = u - u^3, the negative gradient of the quartic double well."""
    return u - u ** 3


def reaction_deriv(u):
    return 1.0 - 3.0 * u ** 2


def potential(u):
    """F(u) = (u^2 - 1)^2 / 4."""
    return (u * u - 1.0) ** 2 / 4.0


def stable_roots(delta: float) -> tuple[float, float]:
    """The two stable zeros of f(u) + delta near -1 and +1 (Newton from the wells)."""
    if abs(delta) > DELTA_MAX:
        raise ParameterError(
            f"tilt {delta} outside admissible range [-{DELTA_MAX}, {DELTA_MAX}]")
    roots = []
    for u in (-1.0, 1.0):
        for _ in range(100):
            step = (reaction(u) + delta) / reaction_deriv(u)
            u -= step
            if abs(step) < 1e-15:
                break
        else:
            raise ConvergenceError(f"root iteration stalled for tilt {delta}")
        roots.append(u)
    m_minus, m_plus = roots
    if not (m_minus < 0.0 < m_plus):
        raise ConvergenceError(f"roots {roots} not separated by zero")
    return m_minus, m_plus


@dataclass
class WaveProfile:
    """Discretized monotone front together with its speed and tail metadata."""

    delta: float
    grid: np.ndarray
    m_values: np.ndarray
    speed_c: float
    m_minus: float
    m_plus: float
    residual: float
    decay_A: float = float("nan")
    decay_beta: float = float("nan")

    def __post_init__(self):
        self.grid.flags.writeable = False
        self.m_values.flags.writeable = False

    def interpolant(self):
        """Cubic interpolant of the profile, clamped to the wells outside [-L, L]."""
        spline = CubicSpline(self.grid, self.m_values)
        lo, hi = self.grid[0], self.grid[-1]
        m_minus, m_plus = self.m_minus, self.m_plus

        def m_of(z):
            z = np.asarray(z, dtype=float)
            out = spline(np.clip(z, lo, hi))
            out = np.where(z < lo, m_minus, out)
            out = np.where(z > hi, m_plus, out)
            return out if out.ndim else float(out)

        return m_of


def _wave_residual(m, c, delta, h, m_minus, m_plus, mid):
    n = len(m)
    r = np.empty(n + 1)
    i = np.arange(2, n - 2)
    d2 = (-m[i - 2] + 16 * m[i - 1] - 30 * m[i] + 16 * m[i + 1] - m[i + 2]) / (12 * h * h)
    d1 = (m[i - 2] - 8 * m[i - 1] + 8 * m[i + 1] - m[i + 2]) / (12 * h)
    r[i] = d2 + c * d1 + reaction(m[i]) + delta
    for j in (1, n - 2):
        d2 = (m[j + 1] - 2 * m[j] + m[j - 1]) / (h * h)
        d1 = (m[j + 1] - m[j - 1]) / (2 * h)
        r[j] = d2 + c * d1 + reaction(m[j]) + delta
    r[0] = m[0] - m_minus
    r[n - 1] = m[n - 1] - m_plus
    r[n] = m[mid] - 0.5 * (m_minus + m_plus)
    return r


def _wave_jacobian(m, c, h, mid):
    n = len(m)
    rows, cols, vals = [], [], []

    def put(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    i = np.arange(2, n - 2)
    h2, hh = 12 * h * h, 12 * h
    for off, d2c, d1c in ((-2, -1.0, 1.0), (-1, 16.0, -8.0),
                          (0, -30.0, 0.0), (1, 16.0, 8.0), (2, -1.0, -1.0)):
        rows.extend(i)
        cols.extend(i + off)
        contrib = np.full(len(i), d2c / h2 + c * d1c / hh)
        if off == 0:
            contrib = contrib + reaction_deriv(m[i])
        vals.extend(contrib)
    rows.extend(i)
    cols.extend(np.full(len(i), n))
    vals.extend((m[i - 2] - 8 * m[i - 1] + 8 * m[i + 1] - m[i + 2]) / hh)

    for j in (1, n - 2):
        put(j, j - 1, 1.0 / h ** 2 - c / (2 * h))
        put(j, j, -2.0 / h ** 2 + reaction_deriv(m[j]))
        put(j, j + 1, 1.0 / h ** 2 + c / (2 * h))
        put(j, n, (m[j + 1] - m[j - 1]) / (2 * h))
    put(0, 0, 1.0)
    put(n - 1, n - 1, 1.0)
    put(n, mid, 1.0)
    return sp.csc_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n + 1, n + 1)))


def solve_wave(delta: float, L: float = 20.0, n: int = 4001,
               tol: float = 1e-10, initial: np.ndarray | None = None,
               max_iter: int = 50) -> WaveProfile:
    """Solve the front boundary-value problem for (profile, speed).

    Damped Newton (step halving) from the scaled zero-tilt kink; rejects
    non-monotone solutions.  The returned profile satisfies the discrete
    equations to max-norm tol at every interior node.
    """
    if n % 2 == 0 or n < 9:
        raise ParameterError("n must be odd and at least 9 so x = 0 is a node")
    m_minus, m_plus = stable_roots(delta)
    x = np.linspace(-L, L, n)
    h = x[1] - x[0]
    mid = (n - 1) // 2
    if initial is not None:
        m = initial.astype(float).copy()
    else:
        center = 0.5 * (m_plus + m_minus)
        half = 0.5 * (m_plus - m_minus)
        m = center + half * np.tanh(x / np.sqrt(2.0))
    c = 0.0

    r = _wave_residual(m, c, delta, h, m_minus, m_plus, mid)
    rnorm = np.max(np.abs(r))
    for _ in range(max_iter):
        if rnorm < tol:
            break
        J = _wave_jacobian(m, c, h, mid)
        dz = spsolve(J, -r)
        scale = 1.0
        for _ in range(30):
            m_new = m + scale * dz[:n]
            c_new = c + scale * dz[n]
            r_new = _wave_residual(m_new, c_new, delta, h, m_minus, m_plus, mid)
            rnorm_new = np.max(np.abs(r_new))
            if rnorm_new < rnorm:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                f"Newton stalled at residual {rnorm:.3e} for tilt {delta}")
        m, c, r, rnorm = m_new, c_new, r_new, rnorm_new
    else:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations (residual {rnorm:.3e})")

    if np.any(np.diff(m) <= 0.0):
        raise ConvergenceError(f"solution for tilt {delta} is not monotone")
    profile = WaveProfile(delta=delta, grid=x, m_values=m, speed_c=float(c),
                          m_minus=m_minus, m_plus=m_plus, residual=float(rnorm))
    fit = decay_fit(profile)
    profile.decay_A, profile.decay_beta = fit.amplitude, fit.rate
    return profile


@dataclass(frozen=True)
class DecayFit:
    """Exponential envelope |m - m_pm| ~ amplitude * exp(-rate * |x|) on the tails."""

    amplitude: float
    rate: float
    log_residual: float


def decay_fit(profile: WaveProfile, floor: float = 1e-11) -> DecayFit:
    """Least-squares fit of log|m - m_pm| against |x| on the outer quarter.

    Tail values below the floor (solver noise) are dropped before fitting.
    """
    x, m = profile.grid, profile.m_values
    L = x[-1]
    xs, ys = [], []
    right = x >= L / 2
    gap = profile.m_plus - m[right]
    keep = gap > floor
    xs.append(x[right][keep])
    ys.append(np.log(gap[keep]))
    left = x <= -L / 2
    gap = m[left] - profile.m_minus
    keep = gap > floor
    xs.append(-x[left][keep])
    ys.append(np.log(gap[keep]))
    xs = np.concatenate(xs)
    ys = np.concatenate(ys)
    if len(xs) < 8:
        raise ConvergenceError("not enough tail points above the noise floor")
    A = np.vstack([np.ones_like(xs), -xs]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - A @ coef
    return DecayFit(amplitude=float(np.exp(coef[0])), rate=float(coef[1]),
                    log_residual=float(np.sqrt(np.mean(resid ** 2))))


@lru_cache(maxsize=1)
def speed_constant() -> float:
    """The coupling constant sqrt(2) / int_{-1}^{1} sqrt(F), by adaptive quadrature."""
    from scipy.integrate import quad

    integral, _ = quad(lambda u: np.sqrt(potential(u)), -1.0, 1.0,
                       epsabs=1e-13, epsrel=1e-13)
    return float(np.sqrt(2.0) / integral)


def wave_speed_derivative(h_delta: float = 1e-3, L: float = 20.0,
                          n: int = 4001, tol: float = 1e-10) -> float:
    """Central difference of the wave speed in the tilt at zero."""
    cp = solve_wave(h_delta, L=L, n=n, tol=tol).speed_c
    cm = solve_wave(-h_delta, L=L, n=n, tol=tol).speed_c
    return (cp - cm) / (2.0 * h_delta)


class SpeedTable:
    """Cubic-spline interpolation of the wave speed over the admissible tilts.

    Solving the boundary-value problem per time step is far too slow, so the
    speed is tabulated once on 41 nodes and interpolated; the table is
    immutable and safe to share across concurrent runs.
    """

    def __init__(self, delta0: float = DELTA_MAX, n_nodes: int = 41,
                 L: float = 20.0, n: int = 2001, tol: float = 1e-10):
        if not (0.0 < delta0 <= DELTA_MAX):
            raise ParameterError(f"delta0 must lie in (0, {DELTA_MAX}]")
        self.delta0 = float(delta0)
        nodes = np.linspace(-delta0, delta0, n_nodes)
        order = np.argsort(np.abs(nodes), kind="stable")   # continuation outward from 0
        speeds = np.empty(n_nodes)
        guesses: dict[int, np.ndarray] = {}
        for idx in order:
            prev = guesses.get(idx)
            prof = solve_wave(float(nodes[idx]), L=L, n=n, tol=tol, initial=prev)
            speeds[idx] = prof.speed_c
            for j in (idx - 1, idx + 1):
                if 0 <= j < n_nodes and abs(nodes[j]) >= abs(nodes[idx]):
                    guesses[j] = np.asarray(prof.m_values)
        self.nodes = nodes
        self.speeds = speeds
        self._spline = CubicSpline(nodes, speeds)

    def __call__(self, delta):
        delta = np.asarray(delta, dtype=float)
        if np.any(np.abs(delta) > self.delta0 + 1e-12):
            worst = float(np.max(np.abs(delta)))
            raise ParameterError(
                f"speed argument {worst:.4g} outside table range "
                f"[-{self.delta0}, {self.delta0}]")
        out = self._spline(delta)
        return out if out.ndim else float(out)

    def slope_at_zero(self) -> float:
        return float(self._spline(0.0, 1))

    def max_curvature(self) -> float:
        """sup |c''| over the table range, for Taylor remainder bounds."""
        fine = np.linspace(-self.delta0, self.delta0, 2001)
        return float(np.max(np.abs(self._spline(fine, 2))))


@lru_cache(maxsize=4)
def get_speed_table(delta0: float = DELTA_MAX, n_nodes: int = 41) -> SpeedTable:
    return SpeedTable(delta0=delta0, n_nodes=n_nodes)


@lru_cache(maxsize=2)
def kink_interpolant(L: float = 20.0, n: int = 4001):
    """Interpolant of the zero-tilt kink, used to write fronts onto grids."""
    return solve_wave(0.0, L=L, n=n).interpolant()
