"""Comparison observables: marginals, probability deficit, concurrence,
average density, the critical atom number and stiffness matching.

The probability deficit P_D = 1 - c~0^2 - c~1^2 measures the weight of the
full cylindrical solution outside the two-dimensional subspace spanned by
the (numerically re-normalized) model basis functions chi_0 phi_0 and
chi_10 phi_10.  The concurrence C = 2 c0 c1 of the two-term state
quantifies transverse-longitudinal entanglement; its exact counterpart
C~ = 2 c~0 c~1 uses the projections of the 3D solution.

The critical atom number solves
    (g/2) (N_T - 1) eta = (hbar^2 / 2M) int |grad xi_0|^2
with eta evaluated self-consistently as eta_T * eta_L(N) from quasi-1D
solves; for a cigar the right-hand side is the transverse kinetic energy
hbar omega_T / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import core, grids, schmidt, solvers
from .grids import Field1D, FieldRZ, RadialField
from .schmidt import SchmidtModel


def marginal_longitudinal(psi: FieldRZ) -> Field1D:
    """n_L(z): transverse integral of |psi|^2; integrates to 1."""
    grids.assert_normalized(psi, tol=1e-8)
    dens = psi.grid.radial.weights @ psi.values**2
    return Field1D(psi.grid.axial, dens)


def marginal_transverse(psi: FieldRZ) -> RadialField:
    """n_T(rho): axial integral of |psi|^2; integrates to 1 under the
    radial measure."""
    grids.assert_normalized(psi, tol=1e-8)
    dens = psi.values**2 @ psi.grid.axial.weights
    return RadialField(psi.grid.radial, dens)


def schmidt_projections(psi3d: FieldRZ, model: SchmidtModel) -> tuple[float, float]:
    """Projections (c~0, c~1) of the 3D state onto the normalized model
    basis functions, signs folded to >= 0."""
    grids.assert_normalized(psi3d, tol=1e-8)
    b0 = grids.normalize(schmidt.product_state(model.chi0, model.phi0))
    if b0.grid != psi3d.grid:
        raise grids.GridMismatchError("model and 3D state live on different grids")
    c0 = abs(grids.inner_product(b0, psi3d))
    if model.entanglement_absent:
        return c0, 0.0
    b1_raw = schmidt.product_state(model.chi10, model.phi10)
    nrm = grids.norm(b1_raw)
    if nrm == 0.0:
        return c0, 0.0
    b1 = grids.normalize(b1_raw)
    c1 = abs(grids.inner_product(b1, psi3d))
    return c0, c1


def probability_deficit(c_tilde0: float, c_tilde1: float) -> float:
    """P_D = 1 - c~0^2 - c~1^2, the weight outside the two-term subspace.

    Uses the plain normalized projections; the basis pair is orthogonal
    only to first order, so this matches the published tabulation rather
    than the exact span complement (see ``span_deficit``).
    """
    return 1.0 - c_tilde0**2 - c_tilde1**2


def span_deficit(psi3d: FieldRZ, model: SchmidtModel) -> float:
    """Exact weight of psi outside span{chi_0 phi_0, chi_10 phi_10}.

    Orthonormalizes the basis pair before projecting, so self-projection
    of the assembled two-term state vanishes to roundoff.  Diagnostic
    companion to ``probability_deficit``.
    """
    grids.assert_normalized(psi3d, tol=1e-8)
    b0 = grids.normalize(schmidt.product_state(model.chi0, model.phi0))
    c0 = grids.inner_product(b0, psi3d)
    total = c0 * c0
    if not model.entanglement_absent:
        b1_raw = schmidt.product_state(model.chi10, model.phi10)
        overlap = grids.inner_product(b0, b1_raw)
        ortho = FieldRZ(b1_raw.grid, b1_raw.values - overlap * b0.values)
        nrm = grids.norm(ortho)
        if nrm > 0.0:
            c1 = grids.inner_product(ortho, psi3d) / nrm
            total += c1 * c1
    return 1.0 - total


def concurrence(c0: float, c1: float) -> float:
    """Two-term entanglement measure C = 2 c0 c1 in [0, 1]."""
    for name, c in (("c0", c0), ("c1", c1)):
        if not -1e-9 <= c <= 1.0 + 1e-9:
            raise ValueError(f"{name} must lie in [0, 1], got {c}")
    c0 = min(max(c0, 0.0), 1.0)
    c1 = min(max(c1, 0.0), 1.0)
    return 2.0 * c0 * c1


def schmidt_spectrum(psi: FieldRZ) -> np.ndarray:
    """Full discrete Schmidt spectrum of psi(rho, z) (diagnostic).

    Singular values of sqrt(w_rho) psi sqrt(w_z); their squares are the
    marginal-density eigenvalues and sum to <psi|psi>.
    """
    m = np.sqrt(psi.grid.radial.weights)[:, None] * psi.values
    m = m * np.sqrt(psi.grid.axial.weights)[None, :]
    return np.linalg.svd(m, compute_uv=False)


def average_density_3d(psi: FieldRZ, n_atoms: float) -> float:
    """N <psi|psi^3> = N int |psi|^4, trap units."""
    grids.assert_normalized(psi, tol=1e-8)
    wr = psi.grid.radial.weights
    wz = psi.grid.axial.weights
    return n_atoms * float(wr @ psi.values**4 @ wz)


def schmidt_average_densities(model: SchmidtModel, n_atoms: float) -> dict:
    """The three perturbative estimates of the average density N eta.

    full:     from the normalized two-term state psi_1
    dominant: from the normalized dominant product chi_0 phi_0
    quasi1d:  N eta_T eta_L (bare reduced-dimension value)
    """
    psi1 = schmidt.assemble_model_state(model)
    dominant = grids.normalize(schmidt.product_state(model.chi0, model.phi0))
    return {
        "full": average_density_3d(psi1, n_atoms),
        "dominant": average_density_3d(dominant, n_atoms),
        "quasi1d": n_atoms * model.couplings.eta_T * model.moments.eta_L,
    }


# ---------------------------------------------------------------------------
# critical atom number and stiffness matching
# ---------------------------------------------------------------------------

#: defaults for the quasi-1D solves inside the N_T root-find; eta_L only
#: needs ~1e-6 relative accuracy here.
_NT_SETTINGS = dict(tol_mu=1e-9, max_steps=200_000)
_NT_GRID_POINTS = 513


def _eta_l_of_n(
    species: core.AtomSpecies, trap: core.TrapConfig, n_atoms: float, n_z: int
) -> float:
    grid = grids.default_axial_grid(species, trap, n_atoms, n_z=n_z)
    state = solvers.solve_gp1d(
        species, trap, n_atoms, solvers.SolveSettings(**_NT_SETTINGS), grid=grid
    )
    return schmidt.longitudinal_moments(state.phi).eta_L


def _critical_number_tf_estimate(
    species: core.AtomSpecies, trap: core.TrapConfig
) -> float:
    """Closed-form TF estimate: the condition reduces to
    mu_TF(N_T) = (2q+1)/(2q) in trap units for a cigar."""
    units = core.UnitSystem.from_species_trap(species, trap)
    k_nat = units.stiffness_natural(trap)
    q = trap.q
    a = species.scattering_length / units.length
    mu_star = (2.0 * q + 1.0) / (2.0 * q)
    g1 = (2.0 * q / (q + 1.0)) * (2.0 * mu_star ** (q + 1.0) / k_nat) ** (1.0 / q)
    return g1 / (2.0 * a) + 1.0


def critical_atom_number(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_z: int = _NT_GRID_POINTS,
    rtol: float = 1e-4,
) -> float:
    """Atom number where the scattering energy reaches the transverse
    kinetic energy: a (N-1) eta_L(N) = 1/2 in trap units (cigar).

    eta_L comes from quasi-1D solves at each trial N, so eta is the
    self-consistent eta_T * eta_L of the product state.
    """
    if trap.transverse_dims != 2:
        raise ValueError("critical atom number implemented for cigar traps")
    units = core.UnitSystem.from_species_trap(species, trap)
    a = species.scattering_length / units.length

    def f(n):
        return a * (n - 1.0) * _eta_l_of_n(species, trap, n, n_z) - 0.5

    n_guess = _critical_number_tf_estimate(species, trap)
    lo, hi = 0.4 * n_guess, 2.0 * n_guess
    flo, fhi = f(lo), f(hi)
    while flo > 0.0:
        lo *= 0.5
        flo = f(lo)
        if lo < 2.0:
            raise RuntimeError("failed to bracket the critical atom number from below")
    while fhi < 0.0:
        hi *= 2.0
        fhi = f(hi)
        if hi > 1e9:
            raise RuntimeError("failed to bracket the critical atom number from above")
    return float(brentq(f, lo, hi, rtol=rtol))


@dataclass(frozen=True)
class StiffnessMatch:
    """Stiffness k reproducing a target critical atom number at power q."""

    k: float  # SI, J m^-q
    q: int
    n_t: float  # achieved critical atom number
    z0: float  # bare longitudinal width, m
    aspect_ratio: float  # z0 / rho0

    def trap(self, omega_T: float) -> core.TrapConfig:
        return core.TrapConfig(omega_T=omega_T, k=self.k, q=self.q)


def match_stiffness(
    species: core.AtomSpecies,
    reference_trap: core.TrapConfig,
    q: int,
    n_t_target: float,
    rtol: float = 1e-3,
) -> StiffnessMatch:
    """Find k such that the q-power trap has the same critical atom number.

    Root-find on log k seeded by the TF closed form (N_T decreases with
    k); the returned match carries the bare aspect ratio for verification.
    """
    omega_t = reference_trap.omega_T
    # TF seed: invert mu_TF(N_T) = (2q+1)/(2q) for k at the target N.
    units_scale = core.UnitSystem.from_species_trap(species, reference_trap)
    a = species.scattering_length / units_scale.length
    g1 = 2.0 * a * (n_t_target - 1.0)
    mu_star = (2.0 * q + 1.0) / (2.0 * q)
    k_nat_seed = 2.0 * mu_star ** (q + 1.0) * (2.0 * q / ((q + 1.0) * g1)) ** q
    k_si_seed = k_nat_seed * units_scale.energy / units_scale.length**q

    def mismatch(log_k):
        trap = core.TrapConfig(omega_T=omega_t, k=math.exp(log_k), q=q)
        return critical_atom_number(species, trap) - n_t_target

    lo = math.log(k_si_seed) - 0.7
    hi = math.log(k_si_seed) + 0.7
    flo, fhi = mismatch(lo), mismatch(hi)
    # N_T decreases with k: f(lo) > 0 > f(hi) once bracketed
    while flo < 0.0:
        lo -= 0.7
        flo = mismatch(lo)
    while fhi > 0.0:
        hi += 0.7
        fhi = mismatch(hi)
    log_k = brentq(mismatch, lo, hi, xtol=rtol / max(q, 1))
    k = math.exp(log_k)
    trap = core.TrapConfig(omega_T=omega_t, k=k, q=q)
    units = core.UnitSystem.from_species_trap(species, trap)
    achieved = critical_atom_number(species, trap)
    if abs(achieved - n_t_target) > 1e-3 * n_t_target:
        # brentq met its x tolerance but N_T is still off; refine once
        log_k = brentq(mismatch, log_k - 0.05, log_k + 0.05, xtol=1e-5)
        k = math.exp(log_k)
        trap = core.TrapConfig(omega_T=omega_t, k=k, q=q)
        units = core.UnitSystem.from_species_trap(species, trap)
        achieved = critical_atom_number(species, trap)
    return StiffnessMatch(
        k=k, q=q, n_t=achieved, z0=units.z0, aspect_ratio=units.aspect_ratio
    )


# ---------------------------------------------------------------------------
# per-point report
# ---------------------------------------------------------------------------


@dataclass
class AnalysisReport:
    """All comparison observables for one (trap power, atom number) point.

    Energies in hbar omega_T; densities in rho0^-3 scaled by N.
    """

    n_atoms: float
    q: int
    mu_3d: float
    mu_tilde: float
    mu_1d: float
    p_deficit: float
    concurrence_pert: float
    concurrence_exact: float
    avg_density_3d: float
    avg_density_pert: float
    avg_density_dominant: float
    avg_density_quasi1d: float
    c_tilde0: float
    c_tilde1: float
    marginal_nl: Field1D
    marginal_nt: RadialField

    def __post_init__(self):
        if not -1e-9 <= self.p_deficit <= 1.0:
            raise ValueError(f"probability deficit out of range: {self.p_deficit}")
        for name in ("concurrence_pert", "concurrence_exact"):
            val = getattr(self, name)
            if not -1e-12 <= val <= 1.0:
                raise ValueError(f"{name} out of range: {val}")
        if self.c_tilde0**2 + self.c_tilde1**2 > 1.0 + 1e-9:
            raise ValueError("projection weights exceed unity")

    def scalars(self) -> dict:
        return {
            "N": self.n_atoms,
            "q": self.q,
            "mu_3d": self.mu_3d,
            "mu_tilde": self.mu_tilde,
            "mu_1d": self.mu_1d,
            "P_D": self.p_deficit,
            "C_pert": self.concurrence_pert,
            "C_exact": self.concurrence_exact,
            "avg_density_3d": self.avg_density_3d,
            "avg_density_pert": self.avg_density_pert,
            "avg_density_dominant": self.avg_density_dominant,
            "avg_density_quasi1d": self.avg_density_quasi1d,
            "c_tilde0": self.c_tilde0,
            "c_tilde1": self.c_tilde1,
        }


def build_report(
    model: SchmidtModel,
    state3d: solvers.GroundState3D,
    mu_1d: float,
    q: int,
    n_atoms: float,
) -> AnalysisReport:
    """Assemble the report for one point from a model and the 3D solve."""
    c_t0, c_t1 = schmidt_projections(state3d.psi, model)
    p_d = probability_deficit(c_t0, c_t1)
    densities = schmidt_average_densities(model, n_atoms)
    return AnalysisReport(
        n_atoms=n_atoms,
        q=q,
        mu_3d=state3d.mu,
        mu_tilde=model.mu_tilde,
        mu_1d=1.0 + mu_1d,
        p_deficit=p_d,
        concurrence_pert=concurrence(model.c0, model.c1),
        concurrence_exact=concurrence(c_t0, c_t1),
        avg_density_3d=average_density_3d(state3d.psi, n_atoms),
        avg_density_pert=densities["full"],
        avg_density_dominant=densities["dominant"],
        avg_density_quasi1d=densities["quasi1d"],
        c_tilde0=c_t0,
        c_tilde1=c_t1,
        marginal_nl=marginal_longitudinal(state3d.psi),
        marginal_nt=marginal_transverse(state3d.psi),
    )
