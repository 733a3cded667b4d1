"""Closed-loop spectral time integration with Lyapunov monitoring.

The stepper is exponential Euler with zero-order hold: the diagonal linear
part advances exactly, control and nonlinear forcing are frozen over each
step.  Nonlinear terms are synthesized pseudospectrally on the shared
quadrature grid, which is sized for exact cubic products, and projected back
onto the retained modes; the dispersive projection of the cubic term moves
two derivatives onto the basis so no field derivative beyond second order is
ever formed.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import BlowUp, BoundExpired, NonPositiveChannel
from .saturation import sat

EXIT_HORIZON = "horizon"
EXIT_BLOWUP = "blowup"
EXIT_LEFT_REGION = "left_region"

_PRESETS = ("first_mode", "smooth", "bump")


@dataclass(frozen=True)
class SimConfig:
    """Time-integration settings and initial data.

    `initial` is either an array of modal coefficients or a (preset,
    amplitude) pair; delta and nu switch the convective and dispersive
    nonlinear terms.
    """

    J: int
    dt: float
    T: float
    delta: float = 0.0
    nu: float = 0.0
    dealias: bool = True
    initial: object = ("first_mode", 0.1)
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("retained mode count must be >= 1")
        if not self.dt > 0.0:
            raise ValueError("time step must be positive")
        if self.T < 0.0:
            raise ValueError("horizon must be nonnegative")
        if self.delta < 0.0 or self.nu < 0.0:
            raise ValueError("nonlinearity switches must be >= 0")


@dataclass
class Trajectory:
    """Time-sampled modal state, control, and monitor channels."""

    times: np.ndarray
    states: np.ndarray
    control: np.ndarray
    sat_active: np.ndarray
    l2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    exit_reason: str
    left_region: bool
    mode: str = "internal"
    nl_ratio_max: float = float("nan")

    def channel(self, name):
        simple = {
            "l2": self.l2,
            "h1": self.h1,
            "h2": self.h2,
            "v1": self.v1,
            "v2": self.v2,
        }
        if name in simple:
            return simple[name]
        if self.mode == "internal":
            if name == "z":
                raise ValueError("use znorm(n) for the head-norm channel")
            raise ValueError(f"unknown channel {name!r}")
        if name == "u":
            return np.abs(self.states[:, 0])
        if name == "w_l2":
            return np.sqrt(np.sum(self.states[:, 1:] ** 2, axis=1))
        if name == "u_plus_w":
            return np.abs(self.states[:, 0]) + np.sqrt(
                np.sum(self.states[:, 1:] ** 2, axis=1)
            )
        raise ValueError(f"unknown channel {name!r}")

    def znorm(self, n):
        head = self.states[:, : n + 1] if self.mode == "boundary" else self.states[:, :n]
        return np.sqrt(np.sum(head**2, axis=1))

    @property
    def sat_duty(self):
        if self.sat_active.shape[0] <= 1:
            return np.zeros(self.sat_active.shape[1])
        return self.sat_active[:-1].mean(axis=0)


def _phi1(h):
    """(exp(h) - 1) / h with the removable singularity filled."""
    h = np.asarray(h, dtype=float)
    out = np.ones_like(h)
    nz = h != 0.0
    out[nz] = np.expm1(h[nz]) / h[nz]
    return out


def _full_input_matrix(ms):
    return np.vstack([ms.B, ms.b_tail]) if ms.mode == "internal" else None


def step_linear_closed_loop(state, ms, gain, level, dt):
    """One exponential-Euler step of the internally actuated linear loop."""
    state = np.asarray(state, dtype=float)
    sigma = ms.es.values[: state.shape[0]]
    z = state[: ms.n]
    command = gain.K @ z
    forcing = _full_input_matrix(ms)[: state.shape[0]] @ sat(command, level)
    growth = np.exp(sigma * dt)
    return growth * state + dt * _phi1(sigma * dt) * forcing


def nonlinear_forcing(es, state, delta, nu, dealias=True):
    """Modal projection of the negated nonlinearity.

    The convective part projects -delta * y y_x directly; the dispersive part
    uses <d_xx(y^3), e_j> = <y^3, e_j''>, valid for every supported BC family.
    """
    if not dealias:
        coarse = _coarse_rule(es)
        basis, basis_d1, basis_d2, w = coarse
    else:
        basis, basis_d1, basis_d2 = es.basis, es.basis_d1, es.basis_d2
        w = es.quadrature.weights
    y = state @ basis
    out = np.zeros_like(state)
    if delta:
        yx = state @ basis_d1
        out -= delta * (basis @ (w * (y * yx)))
    if nu:
        out += nu * (basis_d2 @ (w * y**3))
    return out


_COARSE_CACHE = {}


def _coarse_rule(es):
    """Half-density evaluation grid used when dealiasing is switched off."""
    import weakref

    key = id(es)
    hit = _COARSE_CACHE.get(key)
    if hit is None or hit[0]() is not es:
        from .spectral import composite_gauss_legendre

        k_max = int(np.max(es.mode_index)) if len(es.mode_index) else 1
        panels = max(4, int(math.ceil(0.75 * k_max)))
        rule = composite_gauss_legendre(es.params.length, panels, 8)
        basis = np.array([m(rule.nodes) for m in es.modes])
        basis_d1 = np.array([m(rule.nodes, 1) for m in es.modes])
        basis_d2 = np.array([m(rule.nodes, 2) for m in es.modes])
        hit = (weakref.ref(es), (basis, basis_d1, basis_d2, rule.weights))
        _COARSE_CACHE[key] = hit
    return hit[1]


def step_nonlinear_closed_loop(state, ms, gain, level, config, dt):
    """Exponential-Euler step with frozen control plus nonlinear forcing."""
    state = np.asarray(state, dtype=float)
    sigma = ms.es.values[: state.shape[0]]
    z = state[: ms.n]
    command = gain.K @ z
    forcing = _full_input_matrix(ms)[: state.shape[0]] @ sat(command, level)
    forcing = forcing + nonlinear_forcing(
        ms.es, state, config.delta, config.nu, config.dealias
    )
    growth = np.exp(sigma * dt)
    new = growth * state + dt * _phi1(sigma * dt) * forcing
    if _h2_norm_sq(ms.es, new) > config.blowup_threshold**2:
        raise BlowUp(f"H2 norm exceeded {config.blowup_threshold:g}")
    return new


def step_boundary_closed_loop(state, ms, gain, level, dt):
    """One step of the integrator-augmented boundary loop.

    state[0] is the integrator u, the rest are modal coordinates of the
    lifted field; the integrator advances exactly under zero-order hold, the
    modes see the frozen forcing a_j u + b_j sat(h).
    """
    state = np.asarray(state, dtype=float)
    u, w = state[0], state[1:]
    count = w.shape[0]
    sigma = ms.es.values[:count]
    z = state[: ms.n + 1]
    command = float((gain.K @ z)[0])
    s = sat(command, level)
    a_full = np.concatenate([ms.A[1:, 0], ms.a_tail])[:count]
    b_full = np.concatenate([ms.B[1:, 0], ms.b_tail[:, 0]])[:count]
    forcing = a_full * u + b_full * s
    out = np.empty_like(state)
    out[0] = u + dt * s
    out[1:] = np.exp(sigma * dt) * w + dt * _phi1(sigma * dt) * forcing
    return out


def _h2_norm_sq(es, coeffs):
    c = np.asarray(coeffs)
    return float(c @ c + es.h1_seminorm_sq(c) + es.h2_seminorm_sq(c))


def resolve_initial(config, es, ms=None):
    """Modal coefficients for the configured initial state."""
    entry = config.initial
    if isinstance(entry, (list, tuple)) and len(entry) == 2 and isinstance(entry[0], str):
        preset, amplitude = entry
        if preset not in _PRESETS:
            raise ValueError(f"unknown preset {preset!r}; use one of {_PRESETS}")
        y0 = np.zeros(config.J)
        if preset == "first_mode":
            y0[0] = amplitude
        elif preset == "smooth":
            y0[:] = amplitude * 0.5 ** np.arange(config.J)
        else:  # bump
            L = es.params.length
            x = es.quadrature.nodes
            g = np.exp(-(((x - L / 2) / (L / 10)) ** 2))
            coeffs = es.project_values(g)
            y0 = amplitude * coeffs[: config.J] / math.sqrt(float(np.sum(coeffs**2)))
        return y0
    y0 = np.asarray(entry, dtype=float)
    if y0.shape != (config.J,):
        raise ValueError(f"initial data must have {config.J} coefficients")
    return y0.copy()


def run(config, ms, gain, cert=None, constants=None, level=None, stop_on_region_exit=False):
    """Integrate to the horizon, a blow-up, or a region exit.

    Monitors every sample; with a certificate, v1 = z^T P z is recorded and
    region exits are flagged (and optionally stop the run).  With constants,
    v2 adds the frequency-weighted energy.  Boundary systems carry the
    integrator as state[0] and the l2 channel reports the reconstructed
    physical field.  `level` defaults to the unsaturated sentinel.
    """
    es = ms.es
    if config.J != es.count:
        raise ValueError(
            f"config retains {config.J} modes but the eigen system holds {es.count}"
        )
    boundary = ms.mode == "boundary"
    nonlinear = (config.delta != 0.0 or config.nu != 0.0) and not boundary
    if boundary and (config.delta != 0.0 or config.nu != 0.0):
        raise ValueError("boundary runs support the linear dynamics only")

    y0 = resolve_initial(config, es, ms)
    if boundary:
        y0 = np.concatenate([[0.0], y0])  # integrator starts at rest

    steps = int(round(config.T / config.dt))
    samples = steps + 1
    dim = y0.shape[0]
    m = gain.K.shape[0]

    times = np.arange(samples) * config.dt
    states = np.zeros((samples, dim))
    control = np.zeros((samples, m))
    active = np.zeros((samples, m), dtype=bool)
    l2 = np.zeros(samples)
    h1 = np.zeros(samples)
    h2 = np.zeros(samples)
    v1 = np.full(samples, np.nan)
    v2 = np.full(samples, np.nan)

    head = ms.n + 1 if boundary else ms.n
    if level is None:
        from .saturation import UNSATURATED

        level = UNSATURATED
    exit_reason = EXIT_HORIZON
    left_region = False
    nl_ratio_max = float("nan")

    state = y0
    filled = 0
    for k in range(samples):
        z = state[:head]
        command = gain.K @ z
        states[k] = state
        control[k] = command
        active[k] = np.abs(command) > level.ell

        modal = state[1:] if boundary else state
        w_sq = float(modal @ modal)
        h1_sq = es.h1_seminorm_sq(modal)
        h2_sq = es.h2_seminorm_sq(modal)
        if boundary:
            u = state[0]
            b_full = np.concatenate([ms.B[1:, 0], ms.b_tail[:, 0]])
            inner_wd = -float(modal @ b_full)  # <w, d> since b = -d
            y_sq = w_sq + 2.0 * u * inner_wd + u**2 * ms.lifting.d_norm_sq()
            l2[k] = math.sqrt(max(0.0, y_sq))
        else:
            l2[k] = math.sqrt(w_sq)
        h1[k] = math.sqrt(max(0.0, h1_sq))
        h2[k] = math.sqrt(max(0.0, h2_sq))

        if cert is not None:
            v1[k] = float(z @ cert.P @ z)
            if constants is not None:
                v2[k] = 0.5 * constants.M * v1[k] + float(-es.values @ modal**2)
                if nonlinear and v2[k] > 0.0:
                    f = nonlinear_forcing(es, modal, config.delta, config.nu, config.dealias)
                    ratio = float(np.max(np.abs(f))) / v2[k]
                    if math.isnan(nl_ratio_max) or ratio > nl_ratio_max:
                        nl_ratio_max = ratio
            if v1[k] > 1.0 + 1e-9:
                left_region = True
                if stop_on_region_exit:
                    filled = k + 1
                    exit_reason = EXIT_LEFT_REGION
                    break

        norm_sq = w_sq + h1_sq + h2_sq
        if boundary:
            norm_sq += state[0] ** 2
        if norm_sq > config.blowup_threshold**2:
            filled = k + 1
            exit_reason = EXIT_BLOWUP
            break

        filled = k + 1
        if k == samples - 1:
            break
        try:
            if boundary:
                state = step_boundary_closed_loop(state, ms, gain, level, config.dt)
            elif nonlinear:
                state = step_nonlinear_closed_loop(state, ms, gain, level, config, config.dt)
            else:
                state = step_linear_closed_loop(state, ms, gain, level, config.dt)
        except BlowUp:
            exit_reason = EXIT_BLOWUP
            break

    sl = slice(0, filled)
    return Trajectory(
        times=times[sl],
        states=states[sl],
        control=control[sl],
        sat_active=active[sl],
        l2=l2[sl],
        h1=h1[sl],
        h2=h2[sl],
        v1=v1[sl],
        v2=v2[sl],
        exit_reason=exit_reason,
        left_region=left_region,
        mode=ms.mode,
        nl_ratio_max=nl_ratio_max,
    )


class DecayFit(NamedTuple):
    rate: float
    prefactor: float
    r_squared: float


def fit_decay_rate(traj, channel, t_start=0.0):
    """Least-squares exponential fit of a monitor channel from t_start on."""
    values = traj.channel(channel)
    mask = traj.times >= t_start
    t = traj.times[mask]
    v = values[mask]
    if t.size < 2:
        raise NonPositiveChannel("fit window holds fewer than two samples")
    if np.any(v <= 0.0) or np.any(~np.isfinite(v)):
        raise NonPositiveChannel(f"channel {channel!r} is not positive on the window")
    logs = np.log(v)
    slope, intercept = np.polyfit(t, logs, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(rate=-float(slope), prefactor=float(np.exp(intercept)), r_squared=r2)


class V2Reading(NamedTuple):
    value: float
    sandwich_lower: float


def monitor_v2(state, cert, constants, es):
    """Frequency-weighted energy and its sandwich lower bound at one state."""
    state = np.asarray(state, dtype=float)
    n = cert.P.shape[0]
    z = state[:n]
    value = 0.5 * constants.M * float(z @ cert.P @ z) + float(-es.values @ state**2)
    lower = 0.5 * constants.C1 * float(z @ z) + (
        constants.C1 / (2.0 * constants.C2)
    ) * es.h2_seminorm_sq(state)
    return V2Reading(value=value, sandwich_lower=lower)


@dataclass(frozen=True)
class GronwallBound:
    times: np.ndarray
    values: np.ndarray
    w: np.ndarray


def gronwall_bound(v0, b, k, p, t_grid):
    """Comparison bound for v' <= b(t) v + k(t) v^p on a time grid.

    With q = 1 - p the bound is exp(int b) * w^(1/q), where w(t) = v0^q +
    q * int_0^t k(s) exp(-q int_0^s b) ds; cumulative Simpson quadrature is
    used for both integrals.  Raises `BoundExpired` at the first grid point
    where w loses positivity, carrying the partial result.
    """
    if p < 0.0 or p == 1.0:
        raise ValueError("exponent must be >= 0 and != 1")
    if not v0 > 0.0:
        raise ValueError("initial value must be positive")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise ValueError("time grid must hold at least three points")
    b_vals = np.array([float(b(s)) for s in t]) if callable(b) else np.full(t.size, float(b))
    k_vals = np.array([float(k(s)) for s in t]) if callable(k) else np.full(t.size, float(k))

    q = 1.0 - p
    int_b = cumulative_simpson(b_vals, x=t, initial=0.0)
    integrand = k_vals * np.exp(-q * int_b)
    w = v0**q + q * cumulative_simpson(integrand, x=t, initial=0.0)
    if np.any(w <= 0.0):
        first = int(np.argmax(w <= 0.0))
        partial = GronwallBound(
            times=t[:first],
            values=np.exp(int_b[:first]) * w[:first] ** (1.0 / q),
            w=w.copy(),
        )
        raise BoundExpired(
            f"comparison function lost positivity at t = {t[first]:.6g}",
            time=float(t[first]),
            partial=partial,
        )
    values = np.exp(int_b) * w ** (1.0 / q)
    return GronwallBound(times=t.copy(), values=values, w=w)


def estimate_basin(
    make_config, ms, gain, cert, constants, low, high, iters=12, t_start=None, level=None
):
    """Bisect the initial amplitude between decay and failure.

    `make_config` maps an amplitude to a SimConfig; an amplitude counts as
    decaying when the run reaches the horizon and the fitted H2-norm rate is
    positive.  Returns the empirical threshold estimate.
    """

    def decays(amplitude):
        config = make_config(amplitude)
        traj = run(config, ms, gain, cert, constants, level=level)
        if traj.exit_reason != EXIT_HORIZON:
            return False
        try:
            start = t_start if t_start is not None else config.T / 4.0
            fit = fit_decay_rate(traj, "h2", start)
        except NonPositiveChannel:
            return True  # channel hit the floor: decayed outright
        return fit.rate > 0.0

    if not decays(low):
        raise ValueError("lower amplitude already fails; no bracket to bisect")
    if decays(high):
        return high
    for _ in range(iters):
        mid = 0.5 * (low + high)
        if decays(mid):
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)
