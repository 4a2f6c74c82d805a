"""Random radial test states shared by the property sweeps."""
import numpy as np

from inls.grid import RadialState


def smooth_state(rng, grid, complex_=True, max_terms=3, width=(0.3, 2.0)):
    """Sum of a few Gaussians with polynomial envelopes and chirps."""
    r = grid.r
    u = np.zeros(grid.n, dtype=complex)
    for _ in range(rng.integers(1, max_terms + 1)):
        w = rng.uniform(*width)
        c = rng.normal() + (1j * rng.normal() if complex_ else 0)
        poly = 1 + rng.uniform(-0.5, 2) * (r / w) ** 2
        chirp = np.exp(1j * rng.uniform(-2, 2) * r**2) if complex_ else 1.0
        u += c * poly * np.exp(-(r / w) ** 2) * chirp
    return RadialState.from_u(grid, u)


def bump_state(rng, grid, radius):
    """Smooth state supported in |x| <= radius (C^3 at the edge)."""
    r = grid.r
    rho = rng.uniform(0.2, 1.0) * radius
    s = np.clip(1 - (r / rho) ** 2, 0, None)
    c = rng.normal() + 1j * rng.normal()
    u = c * s**4 * (1 + rng.uniform(-0.5, 0.5) * (r / rho) ** 2) * np.exp(1j * rng.uniform(-1, 1) * r**2)
    return RadialState.from_u(grid, u)


def hardy_like_state(rng, grid, gamma):
    """Positive profile with the r^gamma origin behaviour and exponential decay."""
    r = grid.r
    L = rng.uniform(0.15, 1.5)
    p = rng.uniform(1.0, 2.5)
    u = (r**2 / (L**2 + r**2)) ** (gamma / 2) * np.exp(-(r / (2 * L)) ** p)
    return RadialState.from_u(grid, u)
