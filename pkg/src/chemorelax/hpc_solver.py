"""Pseudo-spectral solver for the reformulated chemotaxis system on the torus.

The evolved unknowns are the enthalpy perturbation n, the velocity u and the
concentration perturbation psi:

    dt n   + u . grad n + (c0 + G(n)) div u          = 0
    dt u   + u . grad u + u/eps + grad n - mu grad psi = 0
    dt psi - Lap psi + b psi - c1 n - H(n)             = 0

The full coupled linear part (not just the stiff diagonal) is applied exactly
per Fourier mode through the 3x3 compressible symbol and the scalar
incompressible relaxation factor; quadratic terms are formed in physical space
under the 2/3 dealiasing rule and advanced with the second-order exponential
integrator from :mod:`chemorelax.etd`.  Total mass of rho(n) is conserved by a
mean-mode projection consistent with the divergence form of the density
equation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import etd
from .linear_analysis import symbol_matrix
from .model import (
    ModelParams,
    OutsideValidityWindow,
    coefficient_G,
    coefficient_H,
    density_perturbation,
    density_rho,
)
from .spectral import (
    DyadicDecomposition,
    Grid,
    SpectralField,
    bessel_inverse,
    dealias,
    divergence,
    gradient,
    make_decomposition,
)

__all__ = [
    "HpcState",
    "SolverConfig",
    "HpcTrajectory",
    "BlowupError",
    "linear_propagator",
    "PropagatorTables",
    "nonlinear_rhs",
    "step",
    "run",
    "build_initial_data",
    "equilibrium_psi",
    "hybrid_aggregate",
    "gaussian_bump",
    "mode_bump",
    "rough_mode_profile",
]


# operational smallness for near-equilibrium runs; larger data is allowed but
# the global bound is then only an experiment, not an expectation
SMALL_DATA_HINT = 0.05


class BlowupError(RuntimeError):
    """Solution left the admissible neighborhood of equilibrium."""


@dataclass
class HpcState:
    """Snapshot of (n, u, psi) at one time instant."""

    t: float
    n: SpectralField
    u: SpectralField
    psi: SpectralField
    params: ModelParams

    @property
    def grid(self) -> Grid:
        return self.n.grid

    def rho_physical(self) -> np.ndarray:
        """Density field recovered from the enthalpy (validity-window checked)."""
        return density_rho(self.n.to_physical()[0], self.params)

    def phi_physical(self) -> np.ndarray:
        """Concentration field psi + phi_bar."""
        return self.psi.to_physical()[0] + self.params.phi_bar

    def mass_perturbation(self) -> float:
        """Mean of rho - rho_bar, accurate at the perturbation scale."""
        return float(np.mean(density_perturbation(self.n.to_physical()[0], self.params)))

    def total_mass(self) -> float:
        return float((self.params.rho_bar + self.mass_perturbation()) * self.grid.volume)

    def copy(self) -> "HpcState":
        return HpcState(self.t, self.n.copy(), self.u.copy(), self.psi.copy(), self.params)


@dataclass
class SolverConfig:
    dt: float
    t_end: float
    snap_dt: float | None = None   # None: ~100 snapshots
    dealias: bool = True
    cfl_safety: float = 0.4
    max_retries: int = 8
    mass_fix: bool = True
    blowup_factor: float = 1e3

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")


@dataclass
class HpcTrajectory:
    states: list
    series: "object"               # diagnostics.DiagnosticSeries
    status: str                    # "completed" or "blowup"
    message: str = ""

    @property
    def initial(self) -> HpcState:
        return self.states[0]

    @property
    def final(self) -> HpcState:
        return self.states[-1]


# -- exact linear propagation -------------------------------------------------

def linear_propagator(xi: float, dt: float, params: ModelParams):
    """exp(dt A(xi)) on the compressible triple plus the incompressible factor.

    Returns (3x3 matrix, scalar exp(-dt/eps)).  dt = 0 gives the identity.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return np.eye(3), 1.0
    e, _, _ = etd.matrix_phis(symbol_matrix(xi, params).matrix, dt)
    return e, math.exp(-dt / params.eps)


class PropagatorTables:
    """Cached per-mode E / phi1 / phi2 tables for one (grid, params, dt).

    The compressible triple uses the 3x3 tables indexed by the grid's unique
    wavenumber magnitudes; the incompressible components use scalar factors.
    """

    def __init__(self, grid: Grid, params: ModelParams, dt: float):
        self.grid = grid
        self.params = params
        self.dt = dt
        mags, inverse = np.unique(grid.xi_mag_diff, return_inverse=True)
        self.index = inverse.reshape(grid.shape)
        mats = np.stack([symbol_matrix(float(m), params).matrix for m in mags])
        self.E3, self.P13, self.P23 = etd.batched_matrix_phis(mats, dt)
        z = -dt / params.eps
        self.e_inc = math.exp(z)
        self.p1_inc = float(dt * etd.phi1(z).real)
        self.p2_inc = float(dt * etd.phi2(z).real)

        mag = grid.xi_mag_diff
        self._safe_mag = np.where(mag > 0, mag, 1.0)
        self._zero = mag == 0
        self._unit = grid.xi_diff / self._safe_mag  # (d, *shape), zero rows at mean

    def _split(self, u_coef: np.ndarray):
        """Compressible amplitude m = i xi.u/|xi| and the transverse remainder."""
        dot = np.sum(self.grid.xi_diff * u_coef, axis=0)
        m = 1j * dot / self._safe_mag
        m[self._zero] = 0.0
        u_par = -1j * self._unit * m[None]
        return m, u_coef - u_par

    def _apply(self, table3: np.ndarray, scal: float, n_coef, u_coef, psi_coef):
        m, u_perp = self._split(u_coef)
        triple = np.stack([n_coef[0], m, psi_coef[0]], axis=-1)
        out = np.einsum("...ij,...j->...i", table3[self.index], triple)
        n_out = out[..., 0][None]
        psi_out = out[..., 2][None]
        u_out = scal * u_perp + (-1j) * self._unit * out[..., 1][None]
        return n_out, u_out, psi_out

    def apply_exp(self, n, u, psi):
        return self._apply(self.E3, self.e_inc, n, u, psi)

    def apply_phi1(self, n, u, psi):
        return self._apply(self.P13, self.p1_inc, n, u, psi)

    def apply_phi2(self, n, u, psi):
        return self._apply(self.P23, self.p2_inc, n, u, psi)


# -- nonlinear terms ----------------------------------------------------------

def nonlinear_rhs(state: HpcState, use_dealias: bool = True):
    """(N_n, N_u, N_psi) with products formed in physical space.

    N_n = -u.grad n - G(n) div u,  N_u = -(u.grad) u,  N_psi = H(n).
    The 2/3 mask is applied to the inputs and to the assembled outputs.
    """
    nf = dealias(state.n) if use_dealias else state.n
    uf = dealias(state.u) if use_dealias else state.u
    grid = state.grid

    n_phys = nf.to_physical()[0]
    u_phys = uf.to_physical()
    grad_n = gradient(nf).to_physical()
    div_u = divergence(uf).to_physical()[0]

    g_vals = coefficient_G(n_phys, state.params)   # raises on window violation
    h_vals = coefficient_H(n_phys, state.params)

    nn = -np.einsum("k...,k...->...", u_phys, grad_n) - g_vals * div_u
    nu = np.empty_like(u_phys)
    for i in range(grid.d):
        grad_ui = SpectralField(grid, 1j * grid.xi_diff * uf.coef[i]).to_physical()
        nu[i] = -np.einsum("k...,k...->...", u_phys, grad_ui)

    out_n = SpectralField.from_physical(grid, nn[None])
    out_u = SpectralField.from_physical(grid, nu)
    out_psi = SpectralField.from_physical(grid, h_vals[None])
    if use_dealias:
        out_n, out_u, out_psi = dealias(out_n), dealias(out_u), dealias(out_psi)
    return out_n, out_u, out_psi


def _fix_mass(n: SpectralField, params: ModelParams, target_mean_pert: float) -> SpectralField:
    """Shift the mean enthalpy so that mean(rho - rho_bar) matches the target.

    The density equation is in divergence form, so total mass is an invariant
    of the flow; the integrator's O(dt^3) mean defect is projected out with a
    couple of Newton corrections of the zero mode.  Working with the
    perturbation mean keeps the projection noise at the solution scale.
    """
    out = n.copy()
    zero = (0,) + (0,) * n.grid.d
    scale = max(abs(target_mean_pert), 1e-30)
    for _ in range(3):
        n_phys = out.to_physical()[0]
        pert = density_perturbation(n_phys, params)
        defect = target_mean_pert - float(np.mean(pert))
        if abs(defect) <= 1e-15 * scale:
            break
        rho = params.rho_bar + pert
        drho_dn = rho / params.pressure.dP(rho)   # inverse of dn/drho = P'(rho)/rho
        out.coef[zero] += defect / float(np.mean(drho_dn))
    return out


def step(state: HpcState, dt: float, tables: PropagatorTables | None = None,
         use_dealias: bool = True, mass_target: float | None = None) -> HpcState:
    """One exponential Runge-Kutta step; reduces to the exact propagator when
    the nonlinearity vanishes identically."""
    if tables is None or tables.dt != dt or tables.params is not state.params:
        tables = PropagatorTables(state.grid, state.params, dt)

    n0, u0, p0 = state.n.coef, state.u.coef, state.psi.coef
    nn, nu, npsi = nonlinear_rhs(state, use_dealias)

    en, eu, ep = tables.apply_exp(n0, u0, p0)
    fn, fu, fp = tables.apply_phi1(nn.coef, nu.coef, npsi.coef)
    star = HpcState(state.t + dt,
                    SpectralField(state.grid, en + fn),
                    SpectralField(state.grid, eu + fu),
                    SpectralField(state.grid, ep + fp), state.params)

    sn, su, sp = nonlinear_rhs(star, use_dealias)
    cn, cu, cp = tables.apply_phi2(sn.coef - nn.coef, su.coef - nu.coef, sp.coef - npsi.coef)
    out = HpcState(state.t + dt,
                   SpectralField(state.grid, star.n.coef + cn),
                   SpectralField(state.grid, star.u.coef + cu),
                   SpectralField(state.grid, star.psi.coef + cp), state.params)
    if mass_target is not None:
        out.n = _fix_mass(out.n, state.params, mass_target)
    return out


def _cfl_ok(state: HpcState, dt: float, safety: float) -> bool:
    vmax = float(np.max(np.abs(state.u.to_physical())))
    return dt * vmax <= safety * state.grid.dx or vmax == 0.0


def _advance(state: HpcState, dt: float, config: SolverConfig, cache: dict,
             mass_target: float | None, depth: int = 0) -> HpcState:
    """Advance by dt, halving the step on CFL violation (bounded retries)."""
    if _cfl_ok(state, dt, config.cfl_safety):
        if dt not in cache:
            cache[dt] = PropagatorTables(state.grid, state.params, dt)
        return step(state, dt, cache[dt], config.dealias, mass_target)
    if depth >= config.max_retries:
        raise BlowupError(f"CFL violation persists after {depth} halvings at t={state.t}")
    half = _advance(state, dt / 2, config, cache, mass_target, depth + 1)
    return _advance(half, dt / 2, config, cache, mass_target, depth + 1)


def hybrid_aggregate(state: HpcState, dec: DyadicDecomposition | None = None,
                     J: int | None = None):
    """Hybrid energy of one snapshot:
    ||(n,u,psi)||^l_{B^{d/2}_{2,1}} + eps ||(n,u,grad psi)||^h_{B^{d/2+1}_{2,1}}.

    Returns (total, breakdown dict).
    """
    dec = dec or make_decomposition(state.grid)
    J = state.params.threshold() if J is None else J
    s_lo = state.grid.d / 2.0
    s_hi = s_lo + 1.0
    low = 0.0
    for f in (state.n, state.u, state.psi):
        lo, _ = dec.hybrid_norm(f, s_lo, s_hi, 1, J)
        low += lo
    high = 0.0
    for f in (state.n, state.u, gradient(state.psi)):
        _, hi = dec.hybrid_norm(f, s_lo, s_hi, 1, J)
        high += hi
    total = low + state.params.eps * high
    return total, {"low": low, "high": high, "eps_high": state.params.eps * high}


def run(initial: HpcState, config: SolverConfig) -> HpcTrajectory:
    """Integrate to t_end, recording snapshots and the diagnostic series.

    A validity-window escape or an aggregate-norm explosion ends the run with
    status "blowup" (the expected outcome for large data or a negative
    stability margin); everything recorded up to that point is returned.
    """
    from .diagnostics import DiagnosticSeries

    grid = initial.grid
    dec = make_decomposition(grid)
    J = initial.params.threshold()
    snap_dt = config.snap_dt if config.snap_dt is not None else max(config.dt, config.t_end / 100.0)
    steps_per_snap = max(1, round(snap_dt / config.dt))
    n_snaps = max(1, round(config.t_end / (steps_per_snap * config.dt)))

    series = DiagnosticSeries()
    cache: dict = {}

    mass0 = initial.total_mass()
    mass_target = initial.mass_perturbation() if config.mass_fix else None
    x0, _ = hybrid_aggregate(initial, dec, J)
    if x0 > SMALL_DATA_HINT:
        warnings.warn(f"initial hybrid energy {x0:.3g} exceeds the operational smallness "
                      f"{SMALL_DATA_HINT}; global boundedness is not guaranteed", stacklevel=2)

    def record(s: HpcState):
        agg, parts = hybrid_aggregate(s, dec, J)
        h_vals = coefficient_H(s.n.to_physical()[0], s.params)
        lows, highs = {}, {}
        for name, f in (("n", s.n), ("u", s.u), ("psi", s.psi)):
            lo, hi = dec.hybrid_norm(f, grid.d / 2.0, grid.d / 2.0 + 1.0, 1, J)
            lows[name], highs[name] = lo, hi
        series.add(t=s.t, mass=s.total_mass(),
                   mean_n=float(s.n.mean()[0]), mean_psi=float(s.psi.mean()[0]),
                   mean_H=float(np.mean(h_vals)),
                   low_n=lows["n"], high_n=highs["n"], low_u=lows["u"], high_u=highs["u"],
                   low_psi=lows["psi"], high_psi=highs["psi"],
                   x_aggregate=agg, x_low=parts["low"], x_high=parts["eps_high"],
                   max_u=float(np.max(np.abs(s.u.to_physical()))))

    states = [initial.copy()]
    record(initial)
    state = initial.copy()
    try:
        for _ in range(n_snaps):
            for _ in range(steps_per_snap):
                state = _advance(state, config.dt, config, cache, mass_target)
            agg, _ = hybrid_aggregate(state, dec, J)
            if x0 > 0 and agg > config.blowup_factor * x0:
                raise BlowupError(f"aggregate norm exceeded {config.blowup_factor:g} x initial at t={state.t}")
            states.append(state.copy())
            record(state)
    except (OutsideValidityWindow, BlowupError) as exc:
        return HpcTrajectory(states=states, series=series, status="blowup", message=str(exc))
    if config.mass_fix:
        # bookkeeping invariant, not the mass-conservation test itself
        assert abs(states[-1].total_mass() - mass0) <= 1e-8 * abs(mass0) + 1e-14
    return HpcTrajectory(states=states, series=series, status="completed")


# -- initial data --------------------------------------------------------------

def gaussian_bump(grid: Grid, width: float = 0.5, center=None, mean_zero: bool = True) -> np.ndarray:
    """Smooth periodic bump (wrapped Gaussian), optionally mean-adjusted."""
    center = center if center is not None else [grid.L / 2.0] * grid.d
    r2 = np.zeros(grid.shape)
    for ax in range(grid.d):
        x = grid.x_axes[ax]
        dxv = np.minimum(np.abs(x - center[ax]), grid.L - np.abs(x - center[ax]))
        sl = [None] * grid.d
        sl[ax] = slice(None)
        r2 = r2 + (dxv[tuple(sl)] ** 2)
    vals = np.exp(-r2 / (2.0 * width ** 2))
    if mean_zero:
        vals = vals - vals.mean()
    return vals


def mode_bump(grid: Grid, modes) -> np.ndarray:
    """Low-mode trigonometric profile: sum of cos(k.x + phase) terms.

    ``modes`` is a list of (k_ints, amplitude, phase).
    """
    x_mesh = np.meshgrid(*grid.x_axes, indexing="ij")
    vals = np.zeros(grid.shape)
    for k_ints, amp, phase in modes:
        arg = np.zeros(grid.shape)
        for ax, k in enumerate(np.atleast_1d(k_ints)):
            arg = arg + 2.0 * np.pi * k * x_mesh[ax] / grid.L
        vals = vals + amp * np.cos(arg + phase)
    return vals


def rough_mode_profile(grid: Grid, params: ModelParams, budget: float,
                       phase: float = 0.7) -> np.ndarray:
    """Single mode at the low/high frequency threshold, with a prescribed
    high-frequency energy: eps * ||mode||_{B^{d/2+1}_{2,1}} = budget.

    This is how an eps-family of initial data keeps the high-frequency part of
    its energy uniformly filled: the mode tracks |xi| ~ 2^J as eps shrinks.
    """
    from .spectral import make_decomposition
    k_int = 2 ** params.threshold()
    if k_int * grid.xi_min > grid.xi_max / math.sqrt(grid.d) * 2.0 / 3.0:
        raise ValueError(f"threshold mode {k_int} exceeds the dealiased band; refine the grid")
    profile = mode_bump(grid, [([k_int] + [0] * (grid.d - 1), 1.0, phase)])
    f = dealias(SpectralField.from_physical(grid, profile[None]))
    dec = make_decomposition(grid)
    norm = dec.besov_norm(f, grid.d / 2.0 + 1.0, 1)
    return budget / (params.eps * norm) * profile


def equilibrium_psi(n: SpectralField, params: ModelParams, use_dealias: bool = True) -> SpectralField:
    """Well-prepared concentration: psi = (b - Lap)^{-1} (c1 n + H(n))."""
    h_vals = coefficient_H(n.to_physical()[0], params)
    h_field = SpectralField.from_physical(n.grid, h_vals[None])
    if use_dealias:
        h_field = dealias(h_field)
    return bessel_inverse(params.c1 * n + h_field, params.b)


def build_initial_data(grid: Grid, params: ModelParams, n_profile=None, u_profile=None,
                       psi_profile=None, target_x0: float | None = None,
                       well_prepared: bool = True):
    """Assemble an initial state, optionally rescaled to a prescribed hybrid energy.

    Profiles are physical-space arrays (or None).  With ``well_prepared`` the
    concentration solves the screened elliptic balance, which zeroes the
    effective concentration at t = 0.  Returns (state, breakdown).
    """
    def mk(profile, ncomp):
        if profile is None:
            return SpectralField.zeros(grid, ncomp)
        arr = np.asarray(profile, dtype=np.float64)
        if ncomp == 1 and arr.shape == grid.shape:
            arr = arr[None]
        return dealias(SpectralField.from_physical(grid, arr))

    n_shape = mk(n_profile, 1)
    u_shape = mk(u_profile, grid.d)

    def assemble(s: float) -> HpcState:
        nf = s * n_shape
        uf = s * u_shape
        if well_prepared:
            pf = equilibrium_psi(nf, params)
        else:
            pf = mk(psi_profile, 1) * s
        return HpcState(0.0, nf, uf, pf, params)

    if target_x0 is None:
        state = assemble(1.0)
        return state, hybrid_aggregate(state)[1]

    if target_x0 == 0:
        return assemble(0.0), {"low": 0.0, "high": 0.0, "eps_high": 0.0}

    base = max(np.max(np.abs(n_shape.to_physical())), np.max(np.abs(u_shape.to_physical())))
    if base == 0:
        raise ValueError("zero profile cannot be scaled to a nonzero target")

    s = 1e-4 / base
    for _ in range(60):
        state = assemble(s)
        x, parts = hybrid_aggregate(state)
        if abs(x - target_x0) <= 1e-10 * target_x0:
            return state, parts
        s *= target_x0 / x
    raise RuntimeError("initial-data scaling did not converge")
