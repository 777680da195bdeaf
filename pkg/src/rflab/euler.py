"""Finite-volume integrator for the frictional pressure-interaction system.

Unscaled form (friction rate nu):

    d_t rho + div(rho u) = 0
    d_t m + div(m u) + grad p(rho) + kappa rho grad W*rho = -nu m

Scaled form (inertia epsilon, used for the relaxation experiments; the
momentum equation divided through by epsilon):

    d_t rho + div(m) = 0
    d_t m + div(m u) + (1/eps)(grad p + kappa rho grad W*rho) = -m/eps

Both are advanced by the same code with pressure/interaction scale and
friction rate set from the config. Spatial discretization is a Rusanov
(local Lax-Friedrichs) flux on the uniform periodic mesh; time stepping is
the two-stage strong-stability-preserving Runge-Kutta (Heun) scheme under a
CFL bound, with the stiff friction applied once per step as an exact-solve
split (m <- m / (1 + rate*dt)) or, optionally, explicitly. Negative
densities produced by roundoff or near-vacuum undershoots are clipped to
zero (momentum zeroed there) and the field rescaled to its pre-clip mass;
runs abort if the cumulative clipped mass exceeds 1e-10 of the initial mass.

The per-step energy ledger records mass, kinetic, internal, and interaction
energy plus the running time integral of the friction dissipation rate. In
scaled runs the kinetic column carries its epsilon weight so that
total = kinetic + internal + interaction is the quantity obeying
d/dt total = -dissipation rate (up to scheme diffusion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv
from .fields import (Array, ModelParams, PeriodicGrid, SolverError, State,
                     grad_centered, total_mass, validate_state, velocity)
from .riesz import KernelTable, convolve
from .thermo import h_energy, pressure

_CLIP_BUDGET = 1e-10  # fraction of initial mass the positivity guard may touch

_FRICTION_TREATMENTS = ("implicit-split", "explicit")


def snapshot_schedule(t0: float, t_end: float, snapshot_times, tol: float) -> list:
    """Future times a driver must land on exactly; t_end always included."""
    if snapshot_times is None:
        pending = [t_end]
    else:
        pending = sorted(float(ts) for ts in snapshot_times)
        if pending and (pending[0] < t0 - tol or pending[-1] > t_end + tol):
            raise ValueError("snapshot times outside [t0, t_end]")
        if not any(abs(ts - t_end) <= tol for ts in pending):
            pending.append(t_end)
    # keep only future times, merging near-duplicates
    out: list = []
    for ts in pending:
        if ts > t0 + tol and (not out or ts - out[-1] > tol):
            out.append(ts)
    return out


@dataclass(frozen=True)
class EulerConfig:
    grid: PeriodicGrid
    params: ModelParams
    t_end: float = 1.0
    cfl: float = 0.45
    scaled: bool = False
    friction_treatment: str = "implicit-split"
    snapshot_stride: int = 0  # 0: snapshots only at t0 and t_end
    dt_max: float = math.inf
    conv_backend: str = "spectral"

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.friction_treatment not in _FRICTION_TREATMENTS:
            raise ValueError(f"friction_treatment must be one of {_FRICTION_TREATMENTS}")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be nonnegative")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")

    def coefficients(self) -> tuple[float, float, float, float]:
        """(pressure/interaction scale, friction rate, kinetic weight, dissipation coeff)."""
        if self.scaled:
            eps = self.params.epsilon
            return 1.0 / eps, 1.0 / eps, eps, 1.0
        return 1.0, self.params.nu, 1.0, self.params.nu


# ---------------------------------------------------------------------------
# spatial operator

def _flux_div(rho: Array, mom: Array, u: Array, p: Array, c: Array,
              grid: PeriodicGrid) -> tuple[Array, Array]:
    """Rusanov flux divergence: -div F applied to (rho, m), all axes."""
    h = grid.cell_size
    drho = np.zeros_like(rho)
    dmom = np.zeros_like(mom)
    for a in range(grid.dim):
        lam = np.abs(u[a]) + c
        lam_f = np.maximum(lam, np.roll(lam, -1, axis=a))
        fr = mom[a]
        fm = mom * u[a]
        fm[a] = fm[a] + p
        hr = 0.5 * (fr + np.roll(fr, -1, axis=a)) \
            - 0.5 * lam_f * (np.roll(rho, -1, axis=a) - rho)
        hm = 0.5 * (fm + np.roll(fm, -1, axis=a + 1)) \
            - 0.5 * lam_f * (np.roll(mom, -1, axis=a + 1) - mom)
        drho -= (hr - np.roll(hr, 1, axis=a)) / h
        dmom -= (hm - np.roll(hm, 1, axis=a + 1)) / h
    return drho, dmom


def _sound_speed(rho: Array, gamma: float, pscale: float) -> Array:
    return np.sqrt(gamma * pscale * np.maximum(rho, 0.0) ** (gamma - 1.0))


def _rhs(rho: Array, mom: Array, cfg: EulerConfig, kernel: KernelTable,
         pscale: float) -> tuple[Array, Array]:
    gamma = cfg.params.gamma
    u = velocity(rho, mom)
    p = pscale * pressure(rho, gamma)
    c = _sound_speed(rho, gamma, pscale)
    drho, dmom = _flux_div(rho, mom, u, p, c, cfg.grid)
    kap = pscale * cfg.params.kappa
    if kap != 0.0:
        # force from the centered gradient of the convolved potential, the
        # form whose work telescopes against the interaction energy budget
        w = convolve(kernel, rho, cfg.conv_backend)
        dmom -= kap * rho * grad_centered(w, cfg.grid)
    return drho, dmom


def stable_dt(rho: Array, mom: Array, cfg: EulerConfig) -> float:
    """CFL time step from the largest signal speed |u_a| + c."""
    pscale = cfg.coefficients()[0]
    u = velocity(rho, mom)
    c = _sound_speed(rho, cfg.params.gamma, pscale)
    speed = max(float(np.max(np.abs(u[a]) + c)) for a in range(cfg.grid.dim))
    return cfg.cfl * cfg.grid.cell_size / (speed + 1e-300)


def _clip_negatives(rho: Array, mom: Array, vol: float) -> tuple[Array, Array, float]:
    """Zero out negative densities, rescale to the pre-clip mass.

    Returns the clipped mass (absolute). Momentum on clipped cells is zeroed
    so vacuum cells stay momentum-free.
    """
    neg = rho < 0.0
    if not neg.any():
        return rho, mom, 0.0
    target = float(rho.sum())
    if target <= 0.0:
        raise SolverError("density lost positivity globally")
    clipped = -float(rho[neg].sum()) * vol
    rho[neg] = 0.0
    mom[:, neg] = 0.0
    remaining = float(rho.sum())
    if remaining <= 0.0:
        raise SolverError("density collapsed under positivity clipping")
    rho *= target / remaining
    return rho, mom, clipped


def _advance(rho: Array, mom: Array, dt: float, cfg: EulerConfig,
             kernel: KernelTable) -> tuple[Array, Array, float]:
    """One SSP-RK2 step plus the friction split. Returns clipped mass too."""
    pscale, rate, _, _ = cfg.coefficients()
    vol = cfg.grid.cell_volume

    dr1, dm1 = _rhs(rho, mom, cfg, kernel, pscale)
    r1 = rho + dt * dr1
    m1 = mom + dt * dm1
    r1, m1, clip1 = _clip_negatives(r1, m1, vol)

    dr2, dm2 = _rhs(r1, m1, cfg, kernel, pscale)
    r2 = 0.5 * (rho + r1 + dt * dr2)
    m2 = 0.5 * (mom + m1 + dt * dm2)
    r2, m2, clip2 = _clip_negatives(r2, m2, vol)

    if rate != 0.0:
        if cfg.friction_treatment == "implicit-split":
            m2 /= 1.0 + rate * dt
        else:
            m2 *= 1.0 - rate * dt

    if not (np.all(np.isfinite(r2)) and np.all(np.isfinite(m2))):
        raise SolverError("non-finite state")
    return r2, m2, clip1 + clip2


def euler_step(s: State, cfg: EulerConfig, kernel: KernelTable,
               dt: float | None = None) -> State:
    """Advance one step; dt defaults to the CFL-stable step."""
    validate_state(s, cfg.grid)
    if dt is None:
        dt = min(stable_dt(s.rho, s.mom, cfg), cfg.dt_max)
    rho, mom, clipped = _advance(s.rho.copy(), s.mom.copy(), dt, cfg, kernel)
    if clipped > _CLIP_BUDGET * total_mass(s.rho, cfg.grid):
        raise SolverError("positivity guard clipped too much mass")
    return State(rho, mom, s.time + dt)


# ---------------------------------------------------------------------------
# energy ledger

@dataclass
class EnergyLedger:
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    internal: list = field(default_factory=list)
    interaction: list = field(default_factory=list)
    dissipation_integral: list = field(default_factory=list)
    _last_rate: float = 0.0

    @property
    def total(self) -> Array:
        return (np.asarray(self.kinetic) + np.asarray(self.internal)
                + np.asarray(self.interaction))

    def append(self, t: float, mass: float, kin: float, internal: float,
               inter: float, rate: float) -> None:
        if self.times:
            step = 0.5 * (t - self.times[-1]) * (self._last_rate + rate)
            diss = self.dissipation_integral[-1] + step
        else:
            diss = 0.0
        self.times.append(t)
        self.mass.append(mass)
        self.kinetic.append(kin)
        self.internal.append(internal)
        self.interaction.append(inter)
        self.dissipation_integral.append(diss)
        self._last_rate = rate


def energy_parts(rho: Array, mom: Array, cfg: EulerConfig,
                 kernel: KernelTable) -> tuple[float, float, float, float, float]:
    """(mass, weighted kinetic, internal, interaction, dissipation rate)."""
    grid, params = cfg.grid, cfg.params
    _, _, kin_weight, diss_coeff = cfg.coefficients()
    vol = grid.cell_volume
    u = velocity(rho, mom)
    rho_u2 = float(np.sum(mom * u)) * vol  # int rho |u|^2
    kin = 0.5 * kin_weight * rho_u2
    internal = float(np.sum(h_energy(rho, params.gamma))) * vol
    inter = 0.0
    if params.kappa != 0.0:
        inter = 0.5 * params.kappa * float(np.sum(rho * convolve(kernel, rho, cfg.conv_backend))) * vol
    return total_mass(rho, grid), kin, internal, inter, diss_coeff * rho_u2


def write_ledger_csv(path, ledger: EnergyLedger) -> None:
    header = ["t", "mass", "kinetic", "internal", "interaction", "total",
              "dissipation_integral"]
    total = ledger.total
    rows = []
    for k in range(len(ledger.times)):
        rows.append([ledger.times[k], ledger.mass[k], ledger.kinetic[k],
                     ledger.internal[k], ledger.interaction[k], float(total[k]),
                     ledger.dissipation_integral[k]])
    write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# driver

def run_euler(state0: State, cfg: EulerConfig, kernel: KernelTable,
              snapshot_times=None) -> tuple[list[State], EnergyLedger]:
    """Integrate to cfg.t_end; returns (snapshots, per-step energy ledger).

    Snapshot times are hit exactly (the step is shortened, never stretched).
    When snapshot_times is None, snapshots fall every snapshot_stride steps,
    plus the initial and final states. A zero-length run still emits the
    initial snapshot and ledger row.
    """
    grid = cfg.grid
    if kernel.grid != grid:
        raise ValueError("kernel was tabulated on a different grid")
    validate_state(state0, grid)

    t = float(state0.time)
    t_end = cfg.t_end
    if t_end < t:
        raise ValueError("t_end precedes the initial time")
    tol = 1e-12 * max(1.0, abs(t_end))

    pending = snapshot_schedule(t, t_end, snapshot_times, tol)

    rho = np.array(state0.rho, dtype=float)
    mom = np.array(state0.mom, dtype=float)
    mass0 = total_mass(rho, grid)
    clipped_total = 0.0

    snaps = [State(rho.copy(), mom.copy(), t)]
    ledger = EnergyLedger()
    mass, kin, internal, inter, rate = energy_parts(rho, mom, cfg, kernel)
    ledger.append(t, mass, kin, internal, inter, rate)

    steps = 0
    while t < t_end - tol:
        dt_cfl = stable_dt(rho, mom, cfg)
        if dt_cfl < 1e-12 * max(t_end - float(state0.time), 1e-30):
            raise SolverError("time step underflow")
        dt = min(dt_cfl, cfg.dt_max, t_end - t)
        hit = None
        # the tol guard absorbs accumulated roundoff in t near a scheduled time
        if pending and pending[0] - t <= dt + tol:
            hit = pending.pop(0)
            dt = hit - t
            if dt <= 0.0:  # drift overtook the schedule; emit without stepping
                t = hit
                snaps.append(State(rho.copy(), mom.copy(), t))
                continue

        rho, mom, clipped = _advance(rho, mom, dt, cfg, kernel)
        clipped_total += clipped
        if clipped_total > _CLIP_BUDGET * mass0:
            raise SolverError("positivity guard clipped too much mass")

        t = hit if hit is not None else t + dt
        steps += 1
        mass, kin, internal, inter, rate = energy_parts(rho, mom, cfg, kernel)
        ledger.append(t, mass, kin, internal, inter, rate)

        if hit is not None:
            snaps.append(State(rho.copy(), mom.copy(), t))
        elif cfg.snapshot_stride and steps % cfg.snapshot_stride == 0:
            snaps.append(State(rho.copy(), mom.copy(), t))

    # scheduled times the loop stopped within tolerance of still get emitted
    while pending:
        ts = pending.pop(0)
        snaps.append(State(rho.copy(), mom.copy(), ts))

    return snaps, ledger
