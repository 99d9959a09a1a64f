"""Picard fixed-point scheme for i u_t + Laplacian u = conj(u)^2.

The Duhamel map is realized entirely on space-time Fourier data.  With
F = eta_{2T} conj(u) * eta_{2T} conj(v) (data: conjugate-reflect, cutoff
kernel convolution in tau, space-time convolution) and sigma = tau + |n|^2,
the three nonlinear pieces are

  N1: psi(sigma)-localized part of the Duhamel multiplier, realized through
      the Taylor series (e^{it sigma}-1)/(i sigma) = sum_k (it)^k sigma^{k-1}/k!
      whose k-th term is a t^k eta(t) free evolution, i.e. a column profile
      F(t^k eta)(sigma) times the sigma^{k-1}-moment of F;
  N2: the stationary-phase remainder collapsed in tau and freely evolved:
      i * F(eta)(sigma) * Int F (1-psi)/(i sigma) dtau;
  N3: the pointwise multiplier -i (1-psi(sigma))/(i sigma) applied to F.

The fixed-point iterate is Gamma[u] = eta(t) e^{it Lap} u0 + N1 + N2 + N3
applied with v = u.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec

from . import cutoffs
from .cutoffs import CutoffSpec, apply_time_cutoff, free_evolution_data
from .grid import FrequencyGrid, SpaceTimeField, conjugate_reflect, spacetime_convolve
from .norms import NormParams, ct_hs_norm, spatial_hs_norm, zsb_norm

_SERIES_TOL = 1e-12
_SERIES_MAX_TERMS = 60


@dataclass(frozen=True)
class SolverParams:
    """Picard iteration parameters; b is pinned to 2/3 by the bilinear estimate."""

    s: float
    T: float
    b: float = 2.0 / 3.0
    max_iterations: int = 12
    contraction_tolerance: float = 1e-10
    ball_radius: float | None = None
    mod_threshold: float = 2.0**-10

    def __post_init__(self):
        if not self.s > -2.0 / 3.0:
            raise ValueError("regularity must satisfy s > -2/3")
        if not 0.0 < self.T <= 0.25:
            raise ValueError("localization scale must satisfy 0 < T <= 1/4")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def norm_params(self):
        return NormParams(s=self.s, b=self.b, mod_threshold=self.mod_threshold)


@dataclass
class IterationTrace:
    """Iterates, their Z-norms, successive differences, and contraction ratios."""

    iterates: list = field(default_factory=list)
    z_norms: list = field(default_factory=list)
    successive_diffs: list = field(default_factory=list)
    converged: bool = False

    def contraction_ratios(self, floor=1e-14):
        out = []
        for a, b in zip(self.successive_diffs, self.successive_diffs[1:]):
            if a > floor:
                out.append(b / a)
        return out

    def to_json_text(self):
        obj = {
            "z_norms": self.z_norms,
            "successive_diffs": self.successive_diffs,
            "contraction_ratios": self.contraction_ratios(),
            "converged": self.converged,
            "iterations": len(self.iterates),
        }
        return json.dumps(obj, indent=2) + "\n"


class DivergenceError(RuntimeError):
    """Raised when an iterate leaves the contraction ball; carries the trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def nonlinear_fourier_data(u, v, cutoff):
    """Data of (eta_{2T} conj(u)) * (eta_{2T} conj(v))."""
    u.grid.assert_compatible(v.grid)
    a = apply_time_cutoff(conjugate_reflect(u), 2.0 * cutoff.T, cutoff.eta)
    b = apply_time_cutoff(conjugate_reflect(v), 2.0 * cutoff.T, cutoff.eta)
    return spacetime_convolve(a, b)


def _psi_split(fhat, cutoff):
    mod = fhat.mod_array()
    psi = cutoff.psi(mod)
    return mod, psi


def duhamel_n1(u, v, cutoff, fhat=None):
    """psi-localized Duhamel piece via the convergent Taylor construction.

    The series in k is truncated once a term falls below 1e-12 of the
    accumulated maximum twice in a row; |sigma| <= 2 on supp psi keeps the
    terms bounded by 4^k / k!, so the sigma -> 0 limit is removable by
    construction.
    """
    if fhat is None:
        fhat = nonlinear_fourier_data(u, v, cutoff)
    grid = fhat.grid
    if fhat.n_columns == 0:
        return SpaceTimeField.zero(grid)
    mod, psi = _psi_split(fhat, cutoff)
    weighted = fhat.data * psi  # psi(sigma) F, the only part the series sees
    nsq = fhat.norm_sq_columns()
    out = np.zeros_like(fhat.data)
    sigma_pow = np.ones_like(mod)
    w = grid.tau_weights
    coef = 1.0
    below = 0
    for k in range(1, _SERIES_MAX_TERMS + 1):
        moments = (weighted * sigma_pow) @ w  # g_k(n) = Int F psi sigma^{k-1}
        lattice, j_max = cutoffs.sigma_lattice(grid, t_power=k, profile=cutoff.eta)
        profile = cutoffs.gather_profile(grid, nsq, lattice, j_max)
        coef *= 1j / k  # builds i^k / k!
        term = (-coef) * profile * moments[:, None]
        out += term
        t_max = np.abs(term).max()
        if t_max <= _SERIES_TOL * max(np.abs(out).max(), 1e-300):
            below += 1
            if below >= 2:
                break
        else:
            below = 0
        sigma_pow = sigma_pow * mod
    return SpaceTimeField(grid, fhat.index.copy(), out)


def _high_modulation_multiplier(mod, psi):
    # (1 - psi(sigma)) / (i sigma); the numerator vanishes where |sigma| <= 1
    out = np.zeros_like(mod, dtype=np.complex128)
    mask = psi < 1.0
    out[mask] = (1.0 - psi[mask]) / (1j * mod[mask])
    return out


def duhamel_n2(u, v, cutoff, fhat=None):
    """Collapsed high-modulation piece carried by a free eta-evolution."""
    if fhat is None:
        fhat = nonlinear_fourier_data(u, v, cutoff)
    grid = fhat.grid
    if fhat.n_columns == 0:
        return SpaceTimeField.zero(grid)
    mod, psi = _psi_split(fhat, cutoff)
    column_sums = (fhat.data * _high_modulation_multiplier(mod, psi)) @ grid.tau_weights
    lattice, j_max = cutoffs.sigma_lattice(grid, t_power=0, profile=cutoff.eta)
    profile = cutoffs.gather_profile(grid, fhat.norm_sq_columns(), lattice, j_max)
    return SpaceTimeField(grid, fhat.index.copy(), 1j * profile * column_sums[:, None])


def duhamel_n3(u, v, cutoff, fhat=None):
    """Stationary high-modulation piece: pointwise multiplier on F."""
    if fhat is None:
        fhat = nonlinear_fourier_data(u, v, cutoff)
    if fhat.n_columns == 0:
        return SpaceTimeField.zero(fhat.grid)
    mod, psi = _psi_split(fhat, cutoff)
    data = -1j * fhat.data * _high_modulation_multiplier(mod, psi)
    return SpaceTimeField(fhat.grid, fhat.index.copy(), data)


def duhamel_rhs(u, v, cutoff):
    """N1 + N2 + N3 applied to the pair (u, v), sharing one product transform."""
    fhat = nonlinear_fourier_data(u, v, cutoff)
    return (duhamel_n1(u, v, cutoff, fhat)
            + duhamel_n2(u, v, cutoff, fhat)
            + duhamel_n3(u, v, cutoff, fhat))


def duhamel_time_integral(fhat, times):
    """Adaptive-quadrature oracle -i Int_0^t e^{-i(t-t')|n|^2} F(n, t') dt'.

    F(n, t') is synthesized from the same discrete data the operators see, so
    the comparison isolates the psi-split, multiplier, and series machinery.
    """
    grid = fhat.grid
    nsq = fhat.norm_sq_columns().astype(float)
    tau = grid.tau_nodes
    wdata = fhat.data * grid.tau_weights[None, :]

    def f_of_t(t):
        return wdata @ np.exp(1j * t * tau)

    out = np.zeros((fhat.n_columns, len(times)), dtype=np.complex128)
    for j, t in enumerate(times):
        if t == 0.0:
            continue

        def integrand(tp, t=t):
            return -1j * np.exp(-1j * (t - tp) * nsq) * f_of_t(tp)

        val, _ = quad_vec(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-10)
        out[:, j] = val
    return out


# -- Picard iteration --------------------------------------------------------


def rough_initial_data(grid, s, seed):
    """Unit-H^s random data: <n>^{-s-1}-enveloped complex Gaussians, normalized.

    Returns (columns, values) over the whole box.
    """
    rng = np.random.default_rng(seed)
    ns = grid.box_index.copy()
    g = rng.standard_normal(len(ns)) + 1j * rng.standard_normal(len(ns))
    vals = (1.0 + FrequencyGrid.norm_sq(ns).astype(float)) ** ((-s - 1.0) / 2.0) * g
    vals /= spatial_hs_norm(ns, vals, s)
    return ns, vals


def picard_solve(u0, params, grid, cutoff=None, initial=None):
    """Iterate Gamma[u] = eta e^{it Lap} u0 + N(u, u) from the linear solution.

    ``u0`` is spatial data as a (columns, values) pair or box array.  Raises
    DivergenceError (trace attached) when an iterate's Z-norm exceeds ten
    times the ball radius.
    """
    cutoff = cutoff if cutoff is not None else CutoffSpec(T=params.T)
    if abs(cutoff.T - params.T) > 1e-12:
        raise ValueError("cutoff scale and solver T must agree")
    p = params.norm_params()
    linear = free_evolution_data(grid, u0, cutoff.eta, prune=False)
    trace = IterationTrace()
    current = linear
    z0 = zsb_norm(current, p)
    radius = params.ball_radius if params.ball_radius is not None else max(z0, 1e-12)
    if initial is not None:
        current = initial
        z0 = zsb_norm(current, p)
    trace.iterates.append(current)
    trace.z_norms.append(z0)
    for _ in range(params.max_iterations):
        nxt = linear + duhamel_rhs(current, current, cutoff)
        z = zsb_norm(nxt, p)
        diff = zsb_norm(nxt - current, p)
        trace.iterates.append(nxt)
        trace.z_norms.append(z)
        trace.successive_diffs.append(diff)
        current = nxt
        if z > 10.0 * radius:
            raise DivergenceError(
                f"iterate Z-norm {z:.3e} exceeded 10x ball radius {radius:.3e}", trace
            )
        if diff < params.contraction_tolerance:
            trace.converged = True
            break
    return trace


def continuous_dependence(u0a, u0b, params, grid, cutoff=None, samples_per_unit=8):
    """(input H^s distance, output C_t H^s distance on [-T, T], quotient)."""
    ta = picard_solve(u0a, params, grid, cutoff)
    tb = picard_solve(u0b, params, grid, cutoff)
    nsa, va = cutoffs._spatial_pairs(grid, u0a)
    nsb, vb = cutoffs._spatial_pairs(grid, u0b)
    if not np.array_equal(nsa, nsb):
        raise ValueError("initial data must live on the same columns")
    input_dist = spatial_hs_norm(nsa, va - vb, params.s)
    diff = ta.iterates[-1] - tb.iterates[-1]
    output_dist = ct_hs_norm(diff, params.s, (-params.T, params.T), samples_per_unit)
    if input_dist == 0.0:
        return 0.0, output_dist, float("nan")
    return input_dist, output_dist, output_dist / input_dist


# -- classical reference integrator ------------------------------------------


@dataclass
class ReferenceTrajectory:
    """Fourth-order reference trajectory with a step-halving reliability flag."""

    times: np.ndarray
    states: np.ndarray  # (len(times), box_count) spatial coefficients
    reliable: bool
    halving_error: float


def _nonlinear_coefficients(vals, grid, pad):
    """F_x(conj(u)^2)(n) from box coefficients via dealiased padded FFTs."""
    from scipy import fft as sfft

    side = grid.box_side
    d = grid.dimension
    emb = np.zeros((pad,) * d, dtype=np.complex128)
    idx = np.ix_(*[np.arange(-grid.n_max, grid.n_max + 1) % pad] * d)
    emb[idx] = vals.reshape((side,) * d)
    phys = sfft.ifftn(emb) * pad**d
    sq = np.conj(phys) ** 2
    back = sfft.fftn(sq) / pad**d
    return back[idx].reshape(-1)


def reference_integrate(u0, grid, T, steps, include_nonlinearity=True):
    """Lawson-RK4 exponential integrator for the Duhamel form, both time signs.

    Used only as a cross-validation oracle on smooth data; integrates
    d/dt u_hat = -i |n|^2 u_hat - i F_x(conj(u)^2) with the linear part
    removed exactly by the integrating factor.
    """
    from scipy import fft as sfft

    ns, vals = cutoffs._spatial_pairs(grid, u0)
    if not np.array_equal(ns, grid.box_index):
        full = np.zeros(grid.box_count, dtype=np.complex128)
        full[grid.flat_keys(ns)] = vals
        vals = full
    pad = sfft.next_fast_len(2 * grid.box_side - 1)
    nsq = FrequencyGrid.norm_sq(grid.box_index).astype(float)

    def rhs(t, w):
        # w = e^{i nsq t} u_hat(t);  dw/dt = -i e^{i nsq t} N(u_hat)
        if not include_nonlinearity:
            return np.zeros_like(w)
        u = np.exp(-1j * nsq * t) * w
        return -1j * np.exp(1j * nsq * t) * _nonlinear_coefficients(u, grid, pad)

    def run(n_steps):
        # integrate both time directions from 0; returns states at
        # times = linspace(-T, T, 2 n_steps + 1)
        states = [None] * (2 * n_steps + 1)
        states[n_steps] = vals.copy()
        for sign in (1.0, -1.0):
            dt = sign * T / n_steps
            w = vals.copy()
            t = 0.0
            for step in range(1, n_steps + 1):
                k1 = rhs(t, w)
                k2 = rhs(t + dt / 2, w + dt * k1 / 2)
                k3 = rhs(t + dt / 2, w + dt * k2 / 2)
                k4 = rhs(t + dt, w + dt * k3)
                w = w + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
                t = step * dt
                states[n_steps + int(sign) * step] = np.exp(-1j * nsq * t) * w
        return np.stack(states)

    coarse = run(steps)
    fine = run(2 * steps)
    err = float(np.abs(coarse - fine[::2]).max())
    times = np.linspace(-T, T, 4 * steps + 1)
    return ReferenceTrajectory(times, fine, err <= 1e-6, err)


# -- flat binary field dumps --------------------------------------------------

_HEADER = struct.Struct("<iiddd")  # dimension, n_max, tau_min, tau_max, tau_step


def dump_field(u, path):
    """Write a field as header + little-endian complex64 in row-major (n, tau) order."""
    box = u.box_array().reshape(u.grid.box_count, u.grid.n_tau)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(u.grid.dimension, u.grid.n_max,
                             u.grid.tau_min, u.grid.tau_max, u.grid.tau_step))
        f.write(np.ascontiguousarray(box.astype(np.complex64)).tobytes())


def load_field(path):
    """Read a field written by dump_field (complex64 payload widens to complex128)."""
    with open(path, "rb") as f:
        dim, n_max, tau_min, tau_max, tau_step = _HEADER.unpack(f.read(_HEADER.size))
        grid = FrequencyGrid(dim, n_max, tau_max, tau_step)
        payload = np.frombuffer(f.read(), dtype="<c8")
    data = payload.reshape(grid.box_count, grid.n_tau).astype(np.complex128)
    return SpaceTimeField(grid, grid.box_index.copy(), data)
