"""Internal energy, pressure, Bregman gaps, and fitted coercivity constants.

h(rho) = rho**gamma / (gamma - 1) and p(rho) = rho**gamma, gamma > 1. The
relative quantities are the Bregman gaps of h and p; they satisfy
p(rho|rho_bar) = (gamma - 1) * h(rho|rho_bar) identically for this power law.

Two empirical constants make the gap quantitative: h(rho|rho_bar) >=
C1 (rho - rho_bar)**2 while rho stays in [0, R] and h(rho|rho_bar) >=
C2 (rho - rho_bar)**gamma for rho > R, uniformly over rho_bar in
[delta, Mbar] with R = Mbar + 1. Both are fitted as 0.95 times a dense grid
minimum of the corresponding ratio and re-checked on a 4x finer grid.

estimate_c_star bounds the interaction part of the relative energy by the
internal part over an ensemble: c* = max |<e, W*e>| / int h(rho|rho_bar),
e = rho - rho_bar. Any kappa < 2/c* leaves the combined internal+interaction
part coercive with margin lambda = 1 - kappa c*/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Array, ModelParams, PeriodicGrid
from .riesz import KernelTable, convolve


def h_energy(rho, gamma: float):
    """Internal energy density rho**gamma / (gamma - 1)."""
    rho = np.asarray(rho, dtype=float)
    return rho**gamma / (gamma - 1.0)


def h_prime(rho, gamma: float):
    rho = np.asarray(rho, dtype=float)
    return gamma / (gamma - 1.0) * rho ** (gamma - 1.0)


def pressure(rho, gamma: float):
    rho = np.asarray(rho, dtype=float)
    return rho**gamma


def pressure_prime(rho, gamma: float):
    rho = np.asarray(rho, dtype=float)
    return gamma * rho ** (gamma - 1.0)


def _check_pair(rho, rho_bar):
    rho = np.asarray(rho, dtype=float)
    rho_bar = np.asarray(rho_bar, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    if np.any(rho_bar <= 0):
        raise ValueError("rho_bar must be strictly positive")
    return rho, rho_bar


def h_relative(rho, rho_bar, gamma: float):
    """Bregman gap h(rho) - h(rho_bar) - h'(rho_bar)(rho - rho_bar), >= 0."""
    rho, rho_bar = _check_pair(rho, rho_bar)
    return h_energy(rho, gamma) - h_energy(rho_bar, gamma) \
        - h_prime(rho_bar, gamma) * (rho - rho_bar)


def p_relative(rho, rho_bar, gamma: float):
    """Bregman gap of the pressure; equals (gamma-1) * h_relative exactly."""
    rho, rho_bar = _check_pair(rho, rho_bar)
    return pressure(rho, gamma) - pressure(rho_bar, gamma) \
        - pressure_prime(rho_bar, gamma) * (rho - rho_bar)


# ---------------------------------------------------------------------------
# fitted coercivity constants

@dataclass(frozen=True)
class RelativeBoundConstants:
    gamma: float
    delta: float
    Mbar: float
    R: float
    C1: float
    C2: float


def _quadratic_zone_ratio(gamma: float, P: Array, Q: Array) -> Array:
    """h(rho|rho_bar) / (rho - rho_bar)^2 via the second-order remainder.

    gap / d^2 = gamma * int_0^1 (1-s) (rho_bar + s d)^(gamma-2) ds, which is
    free of the cancellation that plagues the direct Bregman difference near
    the diagonal (and is exactly 1 for gamma = 2).
    """
    nodes, weights = np.polynomial.legendre.leggauss(64)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    out = np.zeros_like(P)
    d = P - Q
    for si, wi in zip(s, w):
        out += wi * (1.0 - si) * (Q + si * d) ** (gamma - 2.0)
    return gamma * out


def _ratio_minima(gamma: float, delta: float, Mbar: float, R: float,
                  n: int) -> tuple[float, float]:
    rho_bar = np.linspace(delta, Mbar, n)
    # quadratic zone rho in [0, R]; the remainder form covers the diagonal
    rho = np.linspace(0.0, R, n)
    P, Q = np.meshgrid(rho, rho_bar, indexing="ij")
    m1 = float(np.min(_quadratic_zone_ratio(gamma, P, Q)))
    # gamma-power zone rho > R; there rho - rho_bar >= R - Mbar = 1 > 0
    rho_t = np.linspace(R * (1.0 + 1e-9), 100.0 * R, n)
    P, Q = np.meshgrid(rho_t, rho_bar, indexing="ij")
    gap = h_relative(P, Q, gamma)
    m2 = float(np.min(gap / (P - Q) ** gamma))
    return m1, m2


def fit_bound_constants(gamma: float, delta: float, Mbar: float,
                        n: int = 240) -> RelativeBoundConstants:
    """Fit C1, C2 as 0.95 * grid minimum of the respective ratios."""
    if not 0 < delta <= Mbar:
        raise ValueError("need 0 < delta <= Mbar")
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    R = Mbar + 1.0
    m1, m2 = _ratio_minima(gamma, delta, Mbar, R, n)
    if m1 <= 0 or m2 <= 0:
        raise ValueError("degenerate fit: nonpositive ratio minimum")
    return RelativeBoundConstants(gamma=gamma, delta=delta, Mbar=Mbar, R=R,
                                  C1=0.95 * m1, C2=0.95 * m2)


def verify_bound_constants(c: RelativeBoundConstants, n: int = 960) -> bool:
    """Re-check the fitted constants on a 4x finer grid of the same zones."""
    m1, m2 = _ratio_minima(c.gamma, c.delta, c.Mbar, c.R, n)
    return c.C1 <= m1 and c.C2 <= m2


# ---------------------------------------------------------------------------
# empirical interaction-control certificate

@dataclass(frozen=True)
class KappaCertificate:
    c_star_emp: float
    kappa_max: float
    kappa: float
    lam: float  # coercivity margin 1 - kappa * c_star_emp / 2
    n_pairs: int


def relative_interaction(e: Array, kernel: KernelTable,
                         backend: str = "spectral") -> float:
    """Signed quadratic form <e, W*e> with the cell measure."""
    return float(np.sum(e * convolve(kernel, e, backend))) * kernel.grid.cell_volume


def estimate_c_star(pairs, params: ModelParams, grid: PeriodicGrid,
                    kernel: KernelTable, kappa: float | None = None) -> KappaCertificate:
    """Empirical c* over an ensemble of (rho, rho_bar) pairs.

    Pairs with rho == rho_bar contribute 0/0 and are skipped; an ensemble
    with no informative pair is refused.
    """
    vol = grid.cell_volume
    best = 0.0
    used = 0
    for rho, rho_bar in pairs:
        e = np.asarray(rho, dtype=float) - np.asarray(rho_bar, dtype=float)
        num = abs(relative_interaction(e, kernel))
        den = float(np.sum(h_relative(rho, rho_bar, params.gamma))) * vol
        if den == 0.0:
            if num > 1e-14 * (1.0 + abs(best)):
                raise ValueError("interaction energy without internal energy")
            continue
        used += 1
        best = max(best, num / den)
    if used == 0:
        raise ValueError("trivial ensemble: every pair has rho == rho_bar")
    if best <= 0.0:
        raise ValueError("degenerate ensemble: interaction form vanished")
    kappa_max = 2.0 / best
    if kappa is None:
        kappa = 0.5 * kappa_max
    lam = 1.0 - kappa * best / 2.0
    return KappaCertificate(c_star_emp=best, kappa_max=kappa_max,
                            kappa=kappa, lam=lam, n_pairs=used)
