"""Restriction norms on space-time Fourier data.

Every norm here is a weighted trapezoid sum applied directly to the stored
coefficients u_hat(n, tau); nothing is transformed first.  The three core
norms:

  X^{s,b}:  || <n>^s <tau+|n|^2>^b u_hat ||_{l^2_n L^2_tau}
  Y^{s,b}:  || <n>^s u_hat ||_{l^2_n L^1_tau}
              + || <tau+|n|^2>^{s/2+b} u_hat ||_{l^2_n L^2_tau}
  Z^{s,b}:  X-norm of the low-modulation part plus Y-norm of the
            high-modulation part, split at |tau+|n|^2| = threshold * |n|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .grid import (
    SpaceTimeField,
    dyadic_blocks,
    project_dyadic,
    project_modulation,
    time_slices,
)


@dataclass(frozen=True)
class NormParams:
    """Regularity s, modulation exponent b, and the lo/hi split constant."""

    s: float
    b: float = 2.0 / 3.0
    mod_threshold: float = 2.0**-10

    def __post_init__(self):
        if not self.mod_threshold > 0:
            raise ValueError("mod_threshold must be positive")


def _bracket_sq_columns(u):
    # <n>^2 = 1 + |n|^2 per stored column
    return 1.0 + u.norm_sq_columns().astype(float)


def _bracket_sq_mod(u):
    m = u.mod_array()
    return 1.0 + m * m


def _l2_tau_sq(u, mod_power):
    """Per-column Int <tau+|n|^2>^{2 mod_power} |u|^2 dtau by the grid quadrature."""
    integrand = np.abs(u.data) ** 2
    if mod_power != 0.0:
        integrand = integrand * _bracket_sq_mod(u) ** mod_power
    return integrand @ u.grid.tau_weights


def xsb_norm(u, p):
    """|| <n>^s <tau+|n|^2>^b u_hat ||_{l^2 L^2}."""
    cols = _l2_tau_sq(u, p.b)
    return float(np.sqrt((_bracket_sq_columns(u) ** p.s * cols).sum()))


def energy_l2l1(u, s):
    """|| <n>^s u_hat ||_{l^2_n L^1_tau}, the H^s-energy functional."""
    l1 = np.abs(u.data) @ u.grid.tau_weights
    return float(np.sqrt(((1.0 + u.norm_sq_columns().astype(float)) ** s * l1 * l1).sum()))


def ysb_norm(u, p):
    """Energy term plus the modulation-weighted L^2 term with exponent s/2 + b."""
    return energy_l2l1(u, p.s) + float(np.sqrt(_l2_tau_sq(u, p.s / 2.0 + p.b).sum()))


def zsb_norm(u, p):
    """X-norm below the modulation split plus Y-norm above it."""
    lo = project_modulation(u, "lo", p.mod_threshold)
    hi = project_modulation(u, "hi", p.mod_threshold)
    return xsb_norm(lo, p) + ysb_norm(hi, p)


def norm_for_mode(u, p, mode):
    """X^{s,b} or Z^{s,b} norm according to the sweep mode."""
    if mode == "X":
        return xsb_norm(u, p)
    if mode == "Z":
        return zsb_norm(u, p)
    raise ValueError("mode must be 'X' or 'Z'")


def spatial_hs_norm(ns, vals, s):
    """H^s norm of spatial coefficients at the given lattice points."""
    vals = np.asarray(vals, dtype=np.complex128).reshape(-1)
    ns = np.asarray(ns, dtype=np.int64).reshape(len(vals), -1)
    w = (1.0 + (ns * ns).sum(axis=1).astype(float)) ** s
    return float(np.sqrt((w * np.abs(vals) ** 2).sum()))


def ct_hs_norm(u, s, t_window, samples_per_unit=8):
    """sup over sampled t in the window of the H^s norm of u(t).

    u(n, t) is recovered per column by the inverse time-transform quadrature;
    t is sampled at ``samples_per_unit`` points per unit time.
    """
    t0, t1 = float(t_window[0]), float(t_window[1])
    if not t1 > t0:
        raise ValueError("empty time window")
    nyquist = np.pi / u.grid.tau_step
    if max(abs(t0), abs(t1)) > nyquist:
        raise ValueError("time window exceeds the reciprocal resolution of the tau-grid")
    count = max(2, int(np.ceil((t1 - t0) * samples_per_unit)) + 1)
    times = np.linspace(t0, t1, count)
    slices = time_slices(u, times)
    w = (1.0 + u.norm_sq_columns().astype(float)) ** s
    vals = np.sqrt((w[:, None] * np.abs(slices) ** 2).sum(axis=0))
    return float(vals.max())


def l4_spacetime_norm(u, t_window, oversample=2, samples_per_unit=16):
    """Physical-space L^4 norm over T^d x window via oversampled synthesis."""
    t0, t1 = float(t_window[0]), float(t_window[1])
    if not t1 > t0:
        raise ValueError("empty time window")
    grid = u.grid
    count = max(3, int(np.ceil((t1 - t0) * samples_per_unit)) + 1)
    times = np.linspace(t0, t1, count)
    tw = np.full(count, (t1 - t0) / (count - 1))
    tw[0] *= 0.5
    tw[-1] *= 0.5
    slices = time_slices(u, times)
    P = sfft.next_fast_len(oversample * grid.box_side)
    shape = (P,) * grid.dimension + (count,)
    spectral = np.zeros(shape, dtype=np.complex128)
    idx = [u.index[:, a] % P for a in range(grid.dimension)]
    spectral[tuple(idx)] = slices
    phys = sfft.ifftn(spectral, axes=tuple(range(grid.dimension))) * P**grid.dimension
    cell = (2.0 * np.pi / P) ** grid.dimension
    integrand = (np.abs(phys) ** 4).reshape(-1, count)
    return float((integrand.sum(axis=0) * cell * tw).sum() ** 0.25)


def dyadic_norm_profile(u, p):
    """Per dyadic block N, the Z^{s,b} norm of the block projection."""
    return [(blk.N, zsb_norm(project_dyadic(u, blk), p)) for blk in dyadic_blocks(u.grid)]


def apply_modulation_weight(u, power):
    """Multiply coefficients by <tau + |n|^2>^power (used for the Duhamel weight)."""
    data = u.data * _bracket_sq_mod(u) ** (power / 2.0)
    return SpaceTimeField(u.grid, u.index.copy(), data)
