"""Relative energy between a computed solution and a reference trajectory.

Modes:

  "weak-strong"  Psi(t) = int 1/2 rho |u - u_bar|^2 + h(rho|rho_bar)
                         + kappa/2 (rho - rho_bar) W*(rho - rho_bar),
                 measuring the distance of a (possibly rough) solution to a
                 smooth reference solution of the same frictional system.

  "relaxation"   Phi_eps(t), the same functional with the kinetic part
                 weighted by epsilon, measuring the distance of the scaled
                 system to its gradient-flow limit.

term_decomposition integrates the growth terms of the associated identity
along snapshot pairs (weak state, StrongProxy):

    I1 = - int int grad u_bar : rho (u - u_bar) x (u - u_bar)   [x eps in relaxation]
    I2 = - int int div u_bar  p(rho|rho_bar)
    I3 =   kappa int int (rho - rho_bar) u_bar . grad W*(rho - rho_bar)
    J4 = - eps int int (rho/rho_bar) e_bar . (u - u_bar)        [relaxation only]

together with the cumulative friction dissipation of the difference
(nu int rho|u-u_bar|^2, coefficient 1 in the relaxation scaling). All
integrals in time use the trapezoid rule on the snapshot grid.

gronwall_fit extracts the smallest exponential envelope rate
C = max_{t>0} log(Psi(t)/Psi(0))/t, so Psi(t) <= Psi(0) exp(C t) holds along
the whole series; relaxation_rate_fit extracts the sweep-level constant A in
sup_t Phi_eps <= A (Phi_eps(0) + eps^2) and the log-log slope of
sup_t Phi_eps against eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .fields import (Array, ModelParams, PeriodicGrid, State, grad_centered,
                     velocity)
from .gflow import StrongProxy
from .riesz import KernelTable, convolve
from .thermo import h_relative, p_relative

MODES = ("weak-strong", "relaxation")


def _mode_weights(mode: str, params: ModelParams) -> tuple[float, float]:
    """(kinetic weight, dissipation coefficient) for the given mode."""
    if mode == "weak-strong":
        return 1.0, params.nu
    if mode == "relaxation":
        return params.epsilon, 1.0
    raise ValueError(f"mode must be one of {MODES}")


def relative_energy(s: State, proxy: StrongProxy, params: ModelParams,
                    grid: PeriodicGrid, kernel: KernelTable, mode: str,
                    backend: str = "spectral") -> tuple[float, float, float, float]:
    """(total, kinetic, internal, interaction) parts of Psi or Phi_eps."""
    kin_w, _ = _mode_weights(mode, params)
    if s.rho.shape != grid.shape or proxy.rho_bar.shape != grid.shape:
        raise ValueError("state and reference must live on the diagnostics grid")
    if proxy.u_bar.shape != (grid.dim,) + grid.shape:
        raise ValueError("reference velocity has the wrong shape")
    vol = grid.cell_volume
    w = velocity(s.rho, s.mom) - proxy.u_bar
    kin = 0.5 * kin_w * float(np.sum(s.rho * np.sum(w * w, axis=0))) * vol
    internal = float(np.sum(h_relative(s.rho, proxy.rho_bar, params.gamma))) * vol
    e = s.rho - proxy.rho_bar
    inter = 0.0
    if params.kappa != 0.0:
        inter = 0.5 * params.kappa * float(np.sum(e * convolve(kernel, e, backend))) * vol
    return kin + internal + inter, kin, internal, inter


def _term_rates(s: State, proxy: StrongProxy, params: ModelParams,
                grid: PeriodicGrid, kernel: KernelTable, mode: str,
                backend: str) -> dict:
    kin_w, diss_c = _mode_weights(mode, params)
    vol = grid.cell_volume
    rho = s.rho
    w = velocity(rho, s.mom) - proxy.u_bar
    e = rho - proxy.rho_bar

    # grad_ub[b][a] = d_a u_bar_b
    grad_ub = np.stack([grad_centered(proxy.u_bar[b], grid) for b in range(grid.dim)])
    div_ub = sum(grad_ub[a][a] for a in range(grid.dim))

    quad = np.zeros_like(rho)
    for b in range(grid.dim):
        for a in range(grid.dim):
            quad += grad_ub[b][a] * w[a] * w[b]
    i1 = -kin_w * float(np.sum(rho * quad)) * vol

    i2 = -float(np.sum(div_ub * p_relative(rho, proxy.rho_bar, params.gamma))) * vol

    i3 = 0.0
    if params.kappa != 0.0:
        # same potential-difference gradient the solvers use for the force
        ge = grad_centered(convolve(kernel, e, backend), grid)
        i3 = params.kappa * float(np.sum(e * np.sum(proxy.u_bar * ge, axis=0))) * vol

    rates = {"I1": i1, "I2": i2, "I3": i3}
    if mode == "relaxation":
        if proxy.e_bar is None:
            raise ValueError("relaxation mode needs proxies with e_bar")
        j4 = -params.epsilon * float(
            np.sum(rho / proxy.rho_bar * np.sum(proxy.e_bar * w, axis=0))) * vol
        rates = {"J1": i1, "J2": i2, "J3": i3, "J4": j4}
    rates["dissipation"] = diss_c * float(np.sum(rho * np.sum(w * w, axis=0))) * vol
    return rates


@dataclass
class RelativeEnergyReport:
    mode: str
    epsilon: float | None
    times: Array
    total: Array
    kinetic: Array
    internal: Array
    interaction: Array
    dissipation: Array   # cumulative
    terms: dict          # name -> cumulative array

    @property
    def term_names(self) -> list:
        return ["I1", "I2", "I3"] if self.mode == "weak-strong" else ["J1", "J2", "J3", "J4"]


def term_decomposition(weak: list, proxies: list, params: ModelParams,
                       grid: PeriodicGrid, kernel: KernelTable, mode: str,
                       backend: str = "spectral") -> RelativeEnergyReport:
    """Relative energy and cumulative growth terms along aligned snapshots."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if len(weak) != len(proxies) or not weak:
        raise ValueError("weak snapshots and proxies must align one to one")
    t_scale = max(1.0, abs(float(proxies[-1].time)))
    for s, pr in zip(weak, proxies):
        if abs(float(s.time) - float(pr.time)) > 1e-9 * t_scale:
            raise ValueError(f"snapshot time {s.time} does not match proxy time {pr.time}")
        if np.any(pr.rho_bar <= 0):
            raise ValueError("reference density must stay positive")

    n = len(weak)
    times = np.array([float(s.time) for s in weak])
    total = np.zeros(n)
    kin = np.zeros(n)
    internal = np.zeros(n)
    inter = np.zeros(n)
    names = ["I1", "I2", "I3"] if mode == "weak-strong" else ["J1", "J2", "J3", "J4"]
    cum = {name: np.zeros(n) for name in names}
    diss = np.zeros(n)
    prev = None
    for k in range(n):
        total[k], kin[k], internal[k], inter[k] = relative_energy(
            weak[k], proxies[k], params, grid, kernel, mode, backend)
        rates = _term_rates(weak[k], proxies[k], params, grid, kernel, mode, backend)
        if k > 0:
            dt = times[k] - times[k - 1]
            for name in names:
                cum[name][k] = cum[name][k - 1] + 0.5 * dt * (prev[name] + rates[name])
            diss[k] = diss[k - 1] + 0.5 * dt * (prev["dissipation"] + rates["dissipation"])
        prev = rates

    eps = params.epsilon if mode == "relaxation" else None
    return RelativeEnergyReport(mode=mode, epsilon=eps, times=times, total=total,
                                kinetic=kin, internal=internal, interaction=inter,
                                dissipation=diss, terms=cum)


# ---------------------------------------------------------------------------
# fits

def gronwall_fit(report: RelativeEnergyReport) -> tuple[float, bool]:
    """Smallest C with Psi(t) <= Psi(0) exp(C t) along the series.

    A series starting at exactly zero fits C = 0 when it stays zero and is
    flagged violated otherwise (no finite rate can lift zero).
    """
    psi = np.asarray(report.total, dtype=float)
    t = np.asarray(report.times, dtype=float)
    psi0 = float(psi[0])
    later = np.maximum(psi[1:], 0.0)
    if psi0 <= 0.0:
        if float(np.max(psi, initial=0.0)) <= 0.0:
            return 0.0, False
        return math.inf, True
    with np.errstate(divide="ignore"):
        rates = np.log(later / psi0) / (t[1:] - t[0])
    fitted = float(np.max(rates)) if rates.size else 0.0
    if not np.isfinite(fitted):
        fitted = 0.0
    bound = psi0 * np.exp(fitted * (t - t[0]))
    violated = bool(np.any(psi > bound * (1.0 + 1e-9) + 1e-300))
    return fitted, violated


def relaxation_rate_fit(eps_list, phi0_list, sup_list) -> tuple[float, float, bool]:
    """(A, slope, violated) for sup Phi_eps <= A (Phi_eps(0) + eps^2)."""
    eps = np.asarray(eps_list, dtype=float)
    phi0 = np.asarray(phi0_list, dtype=float)
    sup = np.asarray(sup_list, dtype=float)
    if eps.size < 2:
        raise ValueError("need at least two epsilon values")
    if np.any(eps <= 0):
        raise ValueError("epsilon values must be positive")
    ratios = sup / (phi0 + eps**2)
    a = float(np.max(ratios))
    if np.any(sup <= 0):
        slope = math.nan
    else:
        slope = float(np.polyfit(np.log(eps), np.log(sup), 1)[0])
    violated = bool(np.any(sup > a * (phi0 + eps**2) * (1.0 + 1e-12)))
    return a, slope, violated


# ---------------------------------------------------------------------------
# interaction transport pairing (audit hook)

def i3_pairing(e: Array, u_bar: Array, kernel: KernelTable,
               backend: str = "spectral") -> tuple[float, float]:
    """Direct and symmetrized values of sum_a <e u_bar_a, d_a(W*e)>.

    The symmetrized form 1/2<e u_bar, grad(W*e)> - 1/2<e, grad(W*(u_bar e))>
    equals the direct pairing exactly because the centered difference is
    antisymmetric and commutes with the convolution; the residual measures
    any symmetry defect of the assembled operators.
    """
    grid = kernel.grid
    vol = grid.cell_volume
    ge = grad_centered(convolve(kernel, e, backend), grid)
    x = float(np.sum(e * np.sum(u_bar * ge, axis=0))) * vol
    y = 0.0
    for a in range(grid.dim):
        gv = grad_centered(convolve(kernel, u_bar[a] * e, backend), grid)
        y += float(np.sum(e * gv[a])) * vol
    return x, 0.5 * (x - y)


def write_report_csv(path, report: RelativeEnergyReport) -> None:
    names = report.term_names
    header = ["t", "total", "kinetic", "internal", "interaction", "dissipation"] + names
    rows = []
    for k in range(report.times.size):
        row = [float(report.times[k]), float(report.total[k]),
               float(report.kinetic[k]), float(report.internal[k]),
               float(report.interaction[k]), float(report.dissipation[k])]
        row += [float(report.terms[n][k]) for n in names]
        rows.append(row)
    write_csv(path, header, rows)
