"""Reference dynamics for the sharp-interface limit.

Three coupled descriptions of a shrinking spherical front live here:

* the resolvent function g(A, q) = tr(A (I - qA)^{-1}) that turns a distance
  function's Hessian into the mean curvature at the foot point,
* the radial reduction of the distance-function flow
  dq/dt = g(D^2 q, q + B(t)) on an annulus, driven by an integrated noise B,
* the radius equation dR = -(n-1)/R dt - c0 dW (or its finite-eps front
  version with the tabulated wave speed).

Sign convention, shared package-wide: with the inside phase at -1 and
distance negative inside, the front law is dR = -(n-1)/R dt - c0 dW and the
distance function is driven by +c0 W; the finite-eps front velocity is
dR/dt = -(n-1)/R + c(eps xi + sign eps^beta)/eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allen_cahn import InterfaceTrace
from .errors import ParameterError, SingularityError, StabilityError
from .noise import BrownianPath, MollifiedNoise
from .wave import SpeedTable, get_speed_table, speed_constant

# The radial eigenvalue q_rr carries the explicit scheme's diffusion, so its
# resolvent factor must stay close to 1 for the 0.25 dr^2 step to be stable;
# the tangential eigenvalue q_r / r is advective and only needs to stay away
# from the focal singularity itself.  (On the working annulus [R0/3, 3 R0]
# the tangential product reaches 1 - R0/r = 2/3 already on distance data.)
RADIAL_PRODUCT_MAX = 0.3
TANGENTIAL_PRODUCT_MAX = 0.95
DET_FLOOR = 1e-10


def g_eval(A: np.ndarray, q: float) -> float:
    """tr(A (I - qA)^{-1}) for a small symmetric matrix A.

    Raises SingularityError when I - qA is numerically singular (a focal
    point of the distance function).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    k = A.shape[0]
    if A.shape != (k, k) or k > 3:
        raise ParameterError(f"A must be k x k with k <= 3, got {A.shape}")
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.max(np.abs(A)))):
        raise ParameterError("A must be symmetric")
    M = np.eye(k) - q * A
    if abs(np.linalg.det(M)) < DET_FLOOR:
        raise SingularityError(
            f"I - qA is singular to tolerance {DET_FLOOR} (q = {q})")
    return float(np.trace(np.linalg.solve(M, A)))


def g_resolvent_series(A: np.ndarray, q: float, terms: int = 30) -> float:
    """Truncated power series sum_{j>=1} q^{j-1} tr(A^j); oracle for g_eval."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    total, power = 0.0, A.copy()
    for j in range(1, terms + 1):
        total += q ** (j - 1) * np.trace(power)
        power = power @ A
    return float(total)


@dataclass
class RadialDistance:
    """Shifted distance function q(r) = d(r) - B(t) on an annulus grid."""

    r_grid: np.ndarray
    q_values: np.ndarray
    time: float = 0.0
    dim_n: int = 2

    @property
    def dr(self) -> float:
        return float(self.r_grid[1] - self.r_grid[0])

    def slope(self) -> np.ndarray:
        return np.gradient(self.q_values, self.r_grid)

    def zero_level(self, b_value: float) -> float:
        """Radius where q + B crosses zero (q is increasing in r)."""
        target = -b_value
        q = self.q_values
        if not (q[0] < target < q[-1]):
            raise StabilityError(
                f"zero level left the annulus (target {target:.4g}, "
                f"q range [{q[0]:.4g}, {q[-1]:.4g}])")
        return float(np.interp(target, q, self.r_grid))


def annulus_for(R0: float, r_outer_cap: float, dr: float, dim_n: int = 2,
                ) -> RadialDistance:
    """Signed-distance initial state r - R0 on [R0/3, min(3 R0, cap)]."""
    r_in, r_out = R0 / 3.0, min(3.0 * R0, r_outer_cap)
    if r_out - r_in < 10 * dr:
        raise ParameterError("annulus too thin for the requested spacing")
    n = int(np.ceil((r_out - r_in) / dr)) + 1
    r = r_in + (r_out - r_in) * np.arange(n) / (n - 1)
    return RadialDistance(r_grid=r, q_values=r - R0, dim_n=dim_n)


def radial_smbmc_step(state: RadialDistance, w_value: float, dt: float,
                      ) -> RadialDistance:
    """One explicit step of dq/dt = g(D^2 q, q + W) in radial symmetry.

    The Hessian of a radial function has eigenvalues q_rr (radial) and
    q_r / r (tangential, multiplicity n-1).  Extrapolation walls keep the
    slope |dq/dr| = 1 at both annulus ends.  Raises on CFL violation and on
    approach to the focal singularity (resolvent factor below the margin).
    """
    dr = state.dr
    if dt > 0.25 * dr * dr * (1.0 + 1e-9):
        raise StabilityError(f"dt = {dt:.3e} above CFL limit {0.25 * dr * dr:.3e}")
    q = state.q_values
    r = state.r_grid
    q_ext = np.concatenate([[q[0] - dr], q, [q[-1] + dr]])
    q_rr = (q_ext[2:] - 2.0 * q + q_ext[:-2]) / dr ** 2
    q_r = (q_ext[2:] - q_ext[:-2]) / (2.0 * dr)
    p = q + w_value
    a_tan = q_r / r
    rad_worst = float(np.max(p * q_rr))
    tan_worst = float(np.max(p * a_tan))
    if rad_worst > RADIAL_PRODUCT_MAX or tan_worst > TANGENTIAL_PRODUCT_MAX:
        raise SingularityError(
            f"focal-point margin exceeded at t = {state.time:.6g} "
            f"(radial product {rad_worst:.3g}, tangential {tan_worst:.3g})")
    rate = q_rr / (1.0 - p * q_rr) + (state.dim_n - 1) * a_tan / (1.0 - p * a_tan)
    q_new = q + dt * rate
    q_new[0] = q_new[1] - dr
    q_new[-1] = q_new[-2] + dr
    return RadialDistance(r_grid=state.r_grid, q_values=q_new,
                          time=state.time + dt, dim_n=state.dim_n)


def radial_smbmc_run(state: RadialDistance, drive, dt: float, T: float,
                     sample_every: int = 1):
    """March the radial flow to time T; drive(t) is the integrated noise B(t).

    Returns (final state, times, zero-level radii, snapshots) where snapshots
    are the states at the sampled times (for building barrier fronts).
    """
    n_steps = int(round(T / dt))
    times, radii, snaps = [state.time], [state.zero_level(drive(state.time))], [state]
    for k in range(1, n_steps + 1):
        state = radial_smbmc_step(state, drive(state.time), dt)
        if k % sample_every == 0 or k == n_steps:
            times.append(state.time)
            radii.append(state.zero_level(drive(state.time)))
            snaps.append(state)
    return state, np.asarray(times), np.asarray(radii), snaps


@dataclass
class FlowParams:
    """Parameters of the front laws.

    drive = "limit_sde" integrates dR = -(n-1)/R dt - c0 dW against a
    Brownian path; drive = "eps_front" integrates the finite-eps velocity
    -(n-1)/R + c(eps xi + sign eps^beta)/eps against a mollified noise.
    drift_scale is a test hook that scales the curvature drift.
    """

    dim_n: int = 2
    c0: float | None = None
    drive: str = "limit_sde"
    eps: float | None = None
    beta_corr: float | None = None
    sign: int = 0
    drift_scale: float = 1.0
    floor: float = 1e-3

    def __post_init__(self):
        if self.dim_n < 2:
            raise ParameterError(f"dim_n must be >= 2, got {self.dim_n}")
        if self.drive not in ("limit_sde", "eps_front"):
            raise ParameterError(f"unknown drive {self.drive!r}")
        if self.sign not in (-1, 0, 1):
            raise ParameterError("sign must be -1, 0 or +1")
        if self.drive == "eps_front":
            if self.eps is None:
                raise ParameterError("eps_front drive needs eps")
            if self.sign != 0:
                if self.beta_corr is None or not (1.0 < self.beta_corr < 2.0):
                    raise ParameterError(
                        f"beta_corr must lie in (1, 2), got {self.beta_corr}")
        if self.c0 is None:
            self.c0 = speed_constant()


def radius_sde(R0: float, source, params: FlowParams, dt: float, T: float,
               speed_table: SpeedTable | None = None) -> InterfaceTrace:
    """Integrate the front radius law from R0 up to time T (or the floor).

    source is a BrownianPath for the limit SDE (increments read off the
    shared path on an aligned grid) or a MollifiedNoise for the finite-eps
    front (noise sampled at step midpoints, speed from the table).
    """
    if R0 <= 0:
        raise ParameterError("R0 must be positive")
    trace = InterfaceTrace()
    drift = params.drift_scale * (params.dim_n - 1)
    if params.drive == "limit_sde":
        if not isinstance(source, BrownianPath):
            raise ParameterError("limit_sde drive needs a BrownianPath")
        k = max(1, int(round(dt / source.dt)))
        dt = k * source.dt
        n_steps = int(round(T / dt))
        R, t = R0, 0.0
        trace.times.append(t)
        trace.radii.append(R)
        for _ in range(n_steps):
            dw = source.increment(t, t + dt)
            R = R - drift / R * dt - params.c0 * dw
            t += dt
            trace.times.append(t)
            trace.radii.append(R)
            if R < params.floor:
                trace.stop_reason = "radius below floor"
                break
        return trace
    # finite-eps front
    if not isinstance(source, MollifiedNoise):
        raise ParameterError("eps_front drive needs a MollifiedNoise")
    table = speed_table if speed_table is not None else get_speed_table()
    eps, beta, sign = params.eps, params.beta_corr, params.sign
    shift = 0.0 if sign == 0 else sign * eps ** beta
    n_steps = int(round(T / dt))
    R, t = R0, 0.0
    trace.times.append(t)
    trace.radii.append(R)
    for _ in range(n_steps):
        xi = source.value(t + dt / 2.0)
        v = table(eps * xi + shift) / eps
        R = R + dt * (-drift / R + v)
        t += dt
        trace.times.append(t)
        trace.radii.append(R)
        if R < params.floor:
            trace.stop_reason = "radius below floor"
            break
    return trace


def holder_distance(times: np.ndarray, values: np.ndarray, exponent: float = 0.25,
                    min_sep: int = 4) -> float:
    """Discrete Hoelder norm: sup |v| plus the seminorm over dyadic separations."""
    sup = float(np.max(np.abs(values)))
    semi, sep = 0.0, min_sep
    step = float(times[1] - times[0])
    n = len(values) - 1
    while sep <= n:
        gaps = np.abs(values[sep:] - values[:-sep]) / (sep * step) ** exponent
        semi = max(semi, float(np.max(gaps)))
        sep *= 2
    return sup + semi


def stability_probe(path_a: BrownianPath, path_b: BrownianPath, R0: float,
                    params: FlowParams, T: float, dr: float | None = None,
                    r_outer_cap: float = np.inf) -> tuple[float, float]:
    """Run the radial flow on two driving paths and compare.

    Returns (sup-over-time max-norm distance of q, Hoelder distance of the
    driving paths); their ratio is an empirical Lipschitz constant for the
    pathwise stability of the flow.
    """
    dr = dr if dr is not None else R0 / 150.0
    dt = 0.25 * dr * dr
    n_steps = int(round(T / dt))
    a = annulus_for(R0, r_outer_cap, dr, params.dim_n)
    b = annulus_for(R0, r_outer_cap, dr, params.dim_n)
    sup_dist = 0.0
    for _ in range(n_steps):
        a = radial_smbmc_step(a, float(path_a.value(a.time)), dt)
        b = radial_smbmc_step(b, float(path_b.value(b.time)), dt)
        sup_dist = max(sup_dist, float(np.max(np.abs(a.q_values - b.q_values))))
    grid = np.linspace(0.0, T, max(65, min(2049, n_steps + 1)))
    dw = path_a.value(grid) - path_b.value(grid)
    return sup_dist, holder_distance(grid, dw)
