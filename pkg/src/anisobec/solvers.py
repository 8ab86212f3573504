"""Imaginary-time ground-state solvers for the three condensate models.

* ``solve_gp1d``    — longitudinal cubic equation with coupling g1 = g~ eta_T
* ``solve_quintic`` — cubic equation plus the attractive quintic correction
                      -g5 phi^4 with g5 = 3 g~^2 Upsilon_T
* ``solve_gp3d``    — full azimuthally symmetric cylindrical equation

All solves run in trap units on grids from :mod:`anisobec.grids`.  The 3D
solver uses explicit normalized gradient flow (psi <- psi - dt*H psi,
renormalize) whose fixed points are exact stencil eigenstates for any
stable dt; the step is jitted with numba, dt <= 0.4 min(dz,drho)^2.  The
1D solves default to a backward-Euler iteration with lagged nonlinearity
(banded solves, stable at large steps, same fixed points) and fall back
to smaller steps if the chemical potential stops decreasing; the explicit
scheme remains available via ``SolveSettings.method`` and is what the
energy-monotonicity property tests exercise.

Chemical potentials are Rayleigh-type functionals: mu = <H> + g1 I4 - g5 I6
in 1D and mu = <H> + g~ I4 in 3D, where I4, I6 are the quartic/sextic
density integrals; converged solver mu and functional mu agree to the
solver tolerance.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from . import core, grids
from .grids import AxialGrid, CylGrid, Field1D, FieldRZ

try:
    if os.environ.get("ANISOBEC_NO_NUMBA"):
        raise ImportError("numba disabled via ANISOBEC_NO_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


class ConvergenceError(RuntimeError):
    """Solver failed to meet its tolerance within max_steps."""


class PerturbativeBreakdownError(RuntimeError):
    """Quintic solve collapsed: the attractive correction is no longer a
    perturbation at this atom number."""


class GridTooSmallError(RuntimeError):
    """Converged state has non-negligible density on the outer boundary."""


BOUNDARY_DENSITY_LIMIT = 1e-10


@dataclass
class SolveSettings:
    """Iteration controls shared by all solvers.

    tol_mu is the relative chemical-potential drift per unit imaginary
    time: converged once |mu_now - mu_prev| / (|mu| * dtau_window) stays
    below tol_mu for two consecutive check windows.  dt = None picks the
    scheme default (0.4 min(dz,drho)^2 for explicit stepping).
    """

    dt: Optional[float] = None
    tol_mu: float = 1e-10
    max_steps: int = 3_000_000
    initial_guess: Union[str, Field1D, FieldRZ] = "thomas_fermi"
    check_every: Optional[int] = None
    method: str = "auto"  # semi_implicit | explicit (1D); 3D is explicit
    track_energy: bool = False

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.tol_mu > 0:
            raise ValueError(f"tol_mu must be positive, got {self.tol_mu}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass
class GroundState1D:
    """Converged longitudinal state.  mu in trap units (hbar omega_T)."""

    phi: Field1D
    mu: float
    model: str  # linear | cubic | quintic
    residual: float
    units: core.UnitSystem
    n_steps: int
    energy: float
    energy_history: Optional[np.ndarray] = None

    @property
    def mu_si(self) -> float:
        return self.mu * self.units.energy


@dataclass
class GroundState3D:
    """Converged cylindrical state.  mu in trap units (hbar omega_T)."""

    psi: FieldRZ
    mu: float
    residual: float
    units: core.UnitSystem
    n_steps: int
    energy: float
    energy_history: Optional[np.ndarray] = None

    @property
    def mu_si(self) -> float:
        return self.mu * self.units.energy


# ---------------------------------------------------------------------------
# potentials and functionals
# ---------------------------------------------------------------------------


def longitudinal_potential(grid: AxialGrid, k_nat: float, q: int) -> np.ndarray:
    return 0.5 * k_nat * np.abs(grid.z) ** q


def cylindrical_potential(grid: CylGrid, k_nat: float, q: int) -> np.ndarray:
    rho = grid.radial.rho[:, None]
    z = grid.axial.z[None, :]
    return 0.5 * rho**2 + 0.5 * k_nat * np.abs(z) ** q


def _apply_h_1d(values: np.ndarray, dz: float, v_eff: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    inv = 0.5 / dz**2
    out[1:-1] = -(values[:-2] - 2.0 * values[1:-1] + values[2:]) * inv
    out[0] = -(-2.0 * values[0] + values[1]) * inv
    out[-1] = -(values[-2] - 2.0 * values[-1]) * inv
    out += v_eff * values
    return out


def _apply_h_cyl(field: FieldRZ, v_eff: np.ndarray) -> np.ndarray:
    lap = grids.laplacian_cyl(field).values
    return -0.5 * lap + v_eff * field.values


def chemical_potential_1d(
    phi: Field1D, potential: np.ndarray, g1: float, g5: float = 0.0
) -> float:
    """mu = <phi| H_L + g1 phi^2 - g5 phi^4 |phi> for a normalized phi."""
    grids.assert_normalized(phi)
    w = phi.grid.weights
    v = phi.values
    h_lin = _apply_h_1d(v, phi.grid.dz, potential)
    dens = v * v
    return float(w @ (v * h_lin) + g1 * (w @ dens**2) - g5 * (w @ dens**3))


def energy_1d(phi: Field1D, potential: np.ndarray, g1: float, g5: float = 0.0) -> float:
    w = phi.grid.weights
    v = phi.values
    h_lin = _apply_h_1d(v, phi.grid.dz, potential)
    dens = v * v
    return float(
        w @ (v * h_lin) + 0.5 * g1 * (w @ dens**2) - (g5 / 3.0) * (w @ dens**3)
    )


def chemical_potential_3d(psi: FieldRZ, potential: np.ndarray, g_tilde: float) -> float:
    """mu = <psi| H_T + H_L + g~ |psi|^2 |psi> for a normalized psi."""
    grids.assert_normalized(psi)
    wr = psi.grid.radial.weights
    wz = psi.grid.axial.weights
    h_lin = _apply_h_cyl(psi, potential)
    dens = psi.values**2
    return float(wr @ (psi.values * h_lin) @ wz + g_tilde * (wr @ dens**2 @ wz))


def energy_3d(psi: FieldRZ, potential: np.ndarray, g_tilde: float) -> float:
    wr = psi.grid.radial.weights
    wz = psi.grid.axial.weights
    h_lin = _apply_h_cyl(psi, potential)
    dens = psi.values**2
    return float(wr @ (psi.values * h_lin) @ wz + 0.5 * g_tilde * (wr @ dens**2 @ wz))


def _residual_1d(phi: Field1D, potential, g1, g5, mu) -> float:
    v_eff = potential + g1 * phi.values**2 - g5 * phi.values**4
    r = _apply_h_1d(phi.values, phi.grid.dz, v_eff) - mu * phi.values
    return float(np.sqrt(phi.grid.weights @ (r * r)))


def _residual_3d(psi: FieldRZ, potential, g_tilde, mu) -> float:
    v_eff = potential + g_tilde * psi.values**2
    r = _apply_h_cyl(psi, v_eff) - mu * psi.values
    return float(np.sqrt(psi.grid.radial.weights @ (r * r) @ psi.grid.axial.weights))


# ---------------------------------------------------------------------------
# initial guesses
# ---------------------------------------------------------------------------


def thomas_fermi_guess(grid: AxialGrid, k_nat: float, q: int, g1: float) -> Field1D:
    """TF density profile, already a good start at large N; falls back to
    a Gaussian when the TF radius is unresolved (< 2 dz)."""
    z_tf = core.thomas_fermi_radius(g1, k_nat, q)
    if z_tf < 2.0 * grid.dz:
        return gaussian_guess(grid, k_nat, q)
    mu = core.thomas_fermi_mu(g1, k_nat, q)
    dens = np.maximum(mu - 0.5 * k_nat * np.abs(grid.z) ** q, 0.0) / g1
    return grids.normalize(Field1D(grid, np.sqrt(dens)))


def gaussian_guess(grid: AxialGrid, k_nat: float, q: int) -> Field1D:
    _, width = core.variational_gaussian_energy(k_nat, q)
    vals = np.exp(-0.5 * (grid.z / width) ** 2)
    return grids.normalize(Field1D(grid, vals))


def _initial_field_1d(settings, grid, k_nat, q, g1) -> Field1D:
    guess = settings.initial_guess
    if isinstance(guess, Field1D):
        if guess.grid != grid:
            raise grids.GridMismatchError(
                "provided initial field is on a different grid"
            )
        return grids.normalize(guess)
    if guess == "thomas_fermi":
        return thomas_fermi_guess(grid, k_nat, q, g1)
    if guess == "gaussian":
        return gaussian_guess(grid, k_nat, q)
    raise ValueError(f"unknown initial guess {guess!r}")


def product_guess_3d(grid: CylGrid, k_nat: float, q: int, g1: float) -> FieldRZ:
    """Transverse Gaussian times longitudinal TF (or Gaussian) profile."""
    axial = thomas_fermi_guess(grid.axial, k_nat, q, g1)
    chi = core.transverse_ground_mode(grid.radial.rho, 2)
    return grids.normalize(FieldRZ(grid, np.outer(chi, axial.values)))


def _sign_fix(values: np.ndarray) -> np.ndarray:
    flat_idx = np.argmax(np.abs(values))
    if values.reshape(-1)[flat_idx] < 0:
        return -values
    return values


# ---------------------------------------------------------------------------
# 1D stepping
# ---------------------------------------------------------------------------


def _solve_1d(
    grid: AxialGrid,
    potential: np.ndarray,
    g1: float,
    g5: float,
    settings: SolveSettings,
    units: core.UnitSystem,
    k_nat: float,
    q: int,
    model: str,
) -> GroundState1D:
    phi = _initial_field_1d(settings, grid, k_nat, q, g1)
    method = settings.method
    if method == "auto":
        method = "explicit" if settings.track_energy else "semi_implicit"
    if method == "semi_implicit":
        return _solve_1d_semi_implicit(
            grid, potential, g1, g5, settings, units, k_nat, q, phi, model
        )
    if method == "explicit":
        return _solve_1d_explicit(grid, potential, g1, g5, settings, units, phi, model)
    raise ValueError(f"unknown 1D method {settings.method!r}")


def _solve_1d_semi_implicit(
    grid, potential, g1, g5, settings, units, k_nat, q, phi, model
) -> GroundState1D:
    """Backward Euler with lagged nonlinearity:
    phi <- (I + dt (H[phi] - s))^{-1} phi, renormalized.

    Fixed points are exact eigenstates of the discrete H for any dt.  The
    shift s sits at or below the floor of the effective potential, so
    every damping factor 1/(1 + dt (e - s)) is positive and decreasing in
    e: the iteration always targets the nodeless ground state and the
    update matrix stays an M-matrix (positivity preserving).  dt of order
    1/gap of the bare longitudinal spectrum saturates the contraction
    rate; the energy is monitored per window and a genuine rise halves dt
    down to the explicit-scale floor.
    """
    dz = grid.dz
    n = grid.n_z
    w = grid.weights
    v = phi.values.copy()
    off = -0.5 / dz**2
    kin_diag = 1.0 / dz**2

    gap_est = k_nat ** (2.0 / (q + 2.0))  # bare longitudinal level spacing
    mu = chemical_potential_1d(Field1D(grid, v, normalized=True), potential, g1, g5)
    guard = -10.0 * max(abs(mu), 1.0)
    dt = settings.dt if settings.dt is not None else 1.0 / max(
        gap_est, 0.05 * abs(mu), 1e-6
    )
    dt_floor = 0.4 * dz**2
    window = settings.check_every or 8
    tol = settings.tol_mu
    energies = [] if settings.track_energy else None

    def banded_matrix(step):
        ab = np.empty((3, n))
        ab[0, :] = step * off
        ab[2, :] = step * off
        ab[0, 0] = 0.0
        ab[2, -1] = 0.0
        return ab

    ab = banded_matrix(dt)
    energy = energy_1d(Field1D(grid, v, normalized=True), potential, g1, g5)
    mu_prev_window = mu
    ok_windows = 0
    steps = 0
    rate = np.inf
    while steps < settings.max_steps:
        for _ in range(window):
            dens = v * v
            v_eff = potential + g1 * dens - g5 * dens * dens
            shift = min(0.0, float(np.min(v_eff)))
            ab[1, :] = 1.0 + dt * (kin_diag + v_eff - shift)
            v = solve_banded((1, 1), ab, v)
            nrm = math.sqrt(w @ (v * v))
            if not np.isfinite(nrm) or nrm == 0.0:
                raise ConvergenceError("semi-implicit 1D iteration diverged")
            v /= nrm
            v = _sign_fix(v)
            mu = chemical_potential_1d(
                Field1D(grid, v, normalized=True), potential, g1, g5
            )
            steps += 1
            if energies is not None:
                energies.append(energy_1d(Field1D(grid, v, True), potential, g1, g5))
            if mu < guard:
                raise PerturbativeBreakdownError(
                    f"chemical potential collapsed to {mu:.3g} (quintic term "
                    f"dominates; atom number beyond perturbative validity)"
                )
        phi_f = Field1D(grid, v, normalized=True)
        energy_new = energy_1d(phi_f, potential, g1, g5)
        if energy_new > energy + 1e-9 * max(abs(energy), 1.0) and dt > 2.0 * dt_floor:
            dt = max(0.25 * dt, dt_floor)
            ab = banded_matrix(dt)
        energy = energy_new
        rate = abs(mu - mu_prev_window) / (max(abs(mu), 1e-30) * dt * window)
        res = _residual_1d(phi_f, potential, g1, g5, mu)
        if rate < tol and res <= 10.0 * tol * max(1.0, abs(mu)):
            ok_windows += 1
            if ok_windows >= 2:
                return GroundState1D(
                    phi=phi_f,
                    mu=mu,
                    model=model,
                    residual=res,
                    units=units,
                    n_steps=steps,
                    energy=energy_new,
                    energy_history=np.array(energies) if energies else None,
                )
        else:
            ok_windows = 0
        mu_prev_window = mu
    raise ConvergenceError(
        f"1D solve did not converge within {settings.max_steps} steps "
        f"(mu = {mu:.12g}, rate = {rate:.3g})"
    )


def _solve_1d_explicit(
    grid, potential, g1, g5, settings, units, phi, model
) -> GroundState1D:
    """Normalized gradient flow phi <- phi - dt H[phi] phi, renormalized
    every step; dt capped by the diffusion stability limit."""
    dz = grid.dz
    w = grid.weights
    v = phi.values.copy()
    v_bound = float(np.max(potential) + g1 * np.max(v * v) * 4.0)
    dt_stable = 1.7 / (2.0 / dz**2 + v_bound)
    dt = settings.dt if settings.dt is not None else min(0.4 * dz**2, dt_stable)
    window = settings.check_every or 100
    tol = settings.tol_mu
    energies = [] if settings.track_energy else None

    mu = chemical_potential_1d(Field1D(grid, v, normalized=True), potential, g1, g5)
    guard = -10.0 * max(abs(mu), 1.0)
    mu_prev = mu
    ok_windows = 0
    steps = 0
    while steps < settings.max_steps:
        for _ in range(window):
            dens = v * v
            v_eff = potential + g1 * dens - g5 * dens * dens
            hv = _apply_h_1d(v, dz, v_eff)
            v = v - dt * hv
            nrm = math.sqrt(w @ (v * v))
            if not np.isfinite(nrm) or nrm == 0.0:
                raise ConvergenceError("explicit 1D iteration diverged")
            v /= nrm
            steps += 1
            if energies is not None:
                energies.append(energy_1d(Field1D(grid, v, True), potential, g1, g5))
        v = _sign_fix(v)
        mu = chemical_potential_1d(Field1D(grid, v, normalized=True), potential, g1, g5)
        if mu < guard:
            raise PerturbativeBreakdownError(f"chemical potential collapsed to {mu:.3g}")
        rate = abs(mu - mu_prev) / (max(abs(mu), 1e-30) * dt * window)
        if rate < tol:
            ok_windows += 1
            if ok_windows >= 2:
                phi_f = Field1D(grid, v, normalized=True)
                res = _residual_1d(phi_f, potential, g1, g5, mu)
                return GroundState1D(
                    phi=phi_f,
                    mu=mu,
                    model=model,
                    residual=res,
                    units=units,
                    n_steps=steps,
                    energy=energy_1d(phi_f, potential, g1, g5),
                    energy_history=np.array(energies) if energies else None,
                )
        else:
            ok_windows = 0
        mu_prev = mu
    raise ConvergenceError(f"1D solve did not converge within {settings.max_steps} steps")


# ---------------------------------------------------------------------------
# public 1D entry points
# ---------------------------------------------------------------------------


def _check_1d_preconditions(trap: core.TrapConfig, n_atoms: float):
    if n_atoms < 1:
        raise ValueError(f"atom number must be >= 1, got {n_atoms}")
    if trap.longitudinal_dims != 1:
        raise ValueError(
            "longitudinal solver requires a cigar trap (one loose dimension)"
        )


def solve_gp1d(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    settings: Optional[SolveSettings] = None,
    grid: Optional[AxialGrid] = None,
) -> GroundState1D:
    """Ground state of the reduced longitudinal equation
    mu phi = (-(1/2) d^2/dz^2 + k z^q/2 + g1 phi^2) phi, g1 = g~ eta_T."""
    _check_1d_preconditions(trap, n_atoms)
    settings = settings or SolveSettings()
    units = core.UnitSystem.from_species_trap(species, trap)
    k_nat = units.stiffness_natural(trap)
    cpl = core.natural_couplings(species, trap, n_atoms)
    if grid is None:
        grid = grids.default_axial_grid(species, trap, n_atoms)
    potential = longitudinal_potential(grid, k_nat, trap.q)
    model = "cubic" if cpl.g1 > 0 else "linear"
    return _solve_1d(grid, potential, cpl.g1, 0.0, settings, units, k_nat, trap.q, model)


def solve_quintic(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    settings: Optional[SolveSettings] = None,
    grid: Optional[AxialGrid] = None,
) -> GroundState1D:
    """Ground state of the corrected longitudinal equation with the
    attractive quintic term: mu~ phi = (H_L + g1 phi^2 - g5 phi^4) phi."""
    _check_1d_preconditions(trap, n_atoms)
    settings = settings or SolveSettings()
    units = core.UnitSystem.from_species_trap(species, trap)
    k_nat = units.stiffness_natural(trap)
    cpl = core.natural_couplings(species, trap, n_atoms)
    if grid is None:
        grid = grids.default_axial_grid(species, trap, n_atoms)
    potential = longitudinal_potential(grid, k_nat, trap.q)
    model = "quintic" if cpl.g1 > 0 else "linear"
    return _solve_1d(
        grid, potential, cpl.g1, cpl.g5, settings, units, k_nat, trap.q, model
    )


# ---------------------------------------------------------------------------
# 3D explicit stepping (numba kernel with numpy fallback)
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=True)  # pragma: no cover - jitted
    def _window_3d(a, b, pot, cp, cm, wr, wz, inv_dz2, dt, g1, nsteps):
        n_r, n_z = a.shape
        for _ in range(nsteps):
            s = 0.0
            for i in range(n_r):
                for j in range(n_z):
                    c = a[i, j]
                    zl = a[i, j - 1] if j > 0 else 0.0
                    zr = a[i, j + 1] if j < n_z - 1 else 0.0
                    rl = a[i - 1, j] if i > 0 else 0.0
                    rr = a[i + 1, j] if i < n_r - 1 else 0.0
                    lap = (zl - 2.0 * c + zr) * inv_dz2 + cp[i] * (rr - c) - cm[i] * (
                        c - rl
                    )
                    h = -0.5 * lap + (pot[i, j] + g1 * c * c) * c
                    nv = c - dt * h
                    b[i, j] = nv
                    s += wr[i] * wz[j] * nv * nv
            inv_n = 1.0 / math.sqrt(s)
            for i in range(n_r):
                for j in range(n_z):
                    b[i, j] *= inv_n
            a, b = b, a
        return a

else:  # pragma: no cover - fallback when numba is unavailable

    def _window_3d(a, b, pot, cp, cm, wr, wz, inv_dz2, dt, g1, nsteps):
        v = a
        for _ in range(nsteps):
            lap = np.empty_like(v)
            lap[:, 1:-1] = (v[:, :-2] - 2.0 * v[:, 1:-1] + v[:, 2:]) * inv_dz2
            lap[:, 0] = (-2.0 * v[:, 0] + v[:, 1]) * inv_dz2
            lap[:, -1] = (v[:, -2] - 2.0 * v[:, -1]) * inv_dz2
            up = np.vstack((v[1:], np.zeros((1, v.shape[1]))))
            down = np.vstack((np.zeros((1, v.shape[1])), v[:-1]))
            lap += cp[:, None] * (up - v) - cm[:, None] * (v - down)
            h = -0.5 * lap + (pot + g1 * v * v) * v
            v = v - dt * h
            nrm = math.sqrt(wr @ (v * v) @ wz)
            v = v / nrm
        target = a if nsteps % 2 == 0 else b  # match the jitted swap parity
        target[:] = v
        return target


def _run_3d_steps(a, b, pot, cp, cm, wr, wz, inv_dz2, dt, g1, nsteps):
    """Run nsteps and return (result, spare_buffer).

    The kernel double-buffers, so the result lands in the storage of `a`
    for even nsteps and of `b` for odd nsteps; numba reboxes arrays, so
    the spare buffer is identified by step parity, not identity.
    """
    ret = _window_3d(a, b, pot, cp, cm, wr, wz, inv_dz2, dt, g1, nsteps)
    spare = b if nsteps % 2 == 0 else a
    return ret, spare


def solve_gp3d(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    settings: Optional[SolveSettings] = None,
    grid: Optional[CylGrid] = None,
) -> GroundState3D:
    """Azimuthally symmetric ground state of the full equation
    mu psi = (-(1/2) grad^2 + V + g~ |psi|^2) psi in trap units."""
    if n_atoms < 1:
        raise ValueError(f"atom number must be >= 1, got {n_atoms}")
    if trap.transverse_dims != 2:
        raise ValueError("3D cylindrical solver requires a cigar trap (D = 2)")
    settings = settings or SolveSettings()
    units = core.UnitSystem.from_species_trap(species, trap)
    k_nat = units.stiffness_natural(trap)
    cpl = core.natural_couplings(species, trap, n_atoms)
    g_t = cpl.g_tilde
    if grid is None:
        grid = grids.default_cyl_grid(species, trap, n_atoms)

    potential = cylindrical_potential(grid, k_nat, trap.q)
    guess = settings.initial_guess
    if isinstance(guess, FieldRZ):
        if guess.grid != grid:
            raise grids.GridMismatchError(
                "provided initial field is on a different grid"
            )
        psi = grids.normalize(guess)
    elif guess in ("thomas_fermi", "gaussian"):
        psi = product_guess_3d(grid, k_nat, trap.q, cpl.g1)
    else:
        raise ValueError(f"unknown initial guess {guess!r}")

    d_rho = grid.radial.d_rho
    dz = grid.axial.dz
    v_bound = float(np.max(potential)) + g_t * float(np.max(psi.values**2)) * 4.0
    lam_bound = 2.0 / d_rho**2 + 2.0 / dz**2 + v_bound
    dt = settings.dt
    if dt is None:
        dt = min(0.4 * min(d_rho, dz) ** 2, 1.7 / lam_bound)
    window = settings.check_every or 100

    cp, cm = grids.radial_stencil_coefficients(grid.radial)
    wr = grid.radial.weights
    wz = grid.axial.weights
    inv_dz2 = 1.0 / dz**2

    a = psi.values.copy()
    b = np.empty_like(a)

    mu_prev = chemical_potential_3d(FieldRZ(grid, a, normalized=True), potential, g_t)
    energies = [] if settings.track_energy else None
    tol = settings.tol_mu
    ok_windows = 0
    steps = 0
    mu = mu_prev
    converged = False
    while steps < settings.max_steps:
        if energies is not None:
            for _ in range(window):
                a, b = _run_3d_steps(a, b, potential, cp, cm, wr, wz, inv_dz2, dt, g_t, 1)
                steps += 1
                energies.append(
                    energy_3d(FieldRZ(grid, a, normalized=True), potential, g_t)
                )
        else:
            a, b = _run_3d_steps(
                a, b, potential, cp, cm, wr, wz, inv_dz2, dt, g_t, window
            )
            steps += window
        psi_f = FieldRZ(grid, a, normalized=True)
        mu = chemical_potential_3d(psi_f, potential, g_t)
        rate = abs(mu - mu_prev) / (max(abs(mu), 1e-30) * dt * window)
        if rate < tol:
            ok_windows += 1
            if ok_windows >= 2:
                converged = True
                break
        else:
            ok_windows = 0
        mu_prev = mu
    if not converged:
        raise ConvergenceError(
            f"3D solve did not converge within {settings.max_steps} steps "
            f"(mu = {mu:.12g})"
        )

    vals = _sign_fix(a)
    psi_f = FieldRZ(grid, vals, normalized=True)
    boundary_density = max(
        float(np.max(vals[-1, :] ** 2)),
        float(np.max(vals[:, 0] ** 2)),
        float(np.max(vals[:, -1] ** 2)),
    )
    if boundary_density > BOUNDARY_DENSITY_LIMIT:
        raise GridTooSmallError(
            f"boundary density {boundary_density:.3g} exceeds "
            f"{BOUNDARY_DENSITY_LIMIT:g}; enlarge the grid"
        )
    return GroundState3D(
        psi=psi_f,
        mu=mu,
        residual=_residual_3d(psi_f, potential, g_t, mu),
        units=units,
        n_steps=steps,
        energy=energy_3d(psi_f, potential, g_t),
        energy_history=np.array(energies) if energies else None,
    )
