import numpy as np

from rflab.fields import PeriodicGrid


def smooth_random_field(grid: PeriodicGrid, rng, n_modes: int = 3,
                        amp: float = 1.0) -> np.ndarray:
    """Band-limited random field, sup-norm <= amp, zero mean."""
    out = np.zeros(grid.shape)
    coords = grid.centers()
    L = grid.length_per_axis
    for _ in range(n_modes):
        k = rng.integers(1, 4, size=grid.dim)
        phase = rng.uniform(0, 2 * np.pi, size=grid.dim)
        wave = np.ones(grid.shape)
        for a in range(grid.dim):
            wave = wave * np.cos(2 * np.pi * k[a] * coords[a] / L + phase[a])
        out += rng.uniform(0.3, 1.0) * wave
    peak = float(np.max(np.abs(out)))
    if peak > 0:
        out *= amp / peak
    return out


def rough_random_field(grid: PeriodicGrid, rng, amp: float = 1.0) -> np.ndarray:
    return amp * rng.standard_normal(grid.shape)
