"""Two-term perturbative Schmidt decomposition of the condensate state.

Builds, from the two 1D solver outputs and the closed-form transverse
layer, the objects of the first-order factorization

    psi_1(rho, z) = chi_0(rho) phi_0(z) + chi_10(rho) phi_10(z),

where phi_0 solves the quintic equation, chi_0 = xi_00 + chi_01 collects
the transverse reshaping, and the second term carries all first-order
spatial entanglement.  The longitudinal ingredients are the self-average
eta_L of the ground density and its standard deviation delta_eta_L, which
drives every entanglement quantity:

    phi_10 = (phi_00^2 - eta_L) phi_00 / delta_eta_L
    chi_10 = -a (N-1) delta_eta_L * sum_n xi_{n 0} / (2^n n)
    c_1    = sqrt(Li_2(1/4)) (N-1) a delta_eta_L      (cigar traps)

phi_01 is recovered as phi_0 - phi_00 with its numerical phi_00 component
projected out (a second-order artifact of using two nonlinear solves), and
feeds the second-order chemical potential

    mu_2 = 2 g~ eta_T <phi_01|phi_00^3> - 3 g~^2 (eta_L^2 + delta_eta_L^2) Upsilon_T.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import core, grids
from .grids import CylGrid, Field1D, FieldRZ, RadialField, RadialGrid

#: relative (to the sixth moment) threshold below which the variance of the
#: ground density is treated as exactly zero (homogeneous trap).
VARIANCE_REL_FLOOR = 1e-12

#: spectral sums over radial modes stop once a term falls below this
#: fraction of the running sum (~45 terms for the 2^-n geometric decay).
SUM_TRUNCATION = 1e-14


class QuadratureInconsistencyError(ValueError):
    """Sixth moment fell below eta_L^2 by more than roundoff allows."""


@dataclass(frozen=True)
class LongitudinalMoments:
    """Self-average and spread of the longitudinal ground density.

    eta_L = <phi|phi^3>, delta_eta_L = std dev of phi^2 over itself,
    sixth_moment = <phi^3|phi^3> = eta_L^2 + delta_eta_L^2.
    """

    eta_L: float
    delta_eta_L: float
    sixth_moment: float

    def __post_init__(self):
        if not self.eta_L > 0:
            raise ValueError(f"eta_L must be positive, got {self.eta_L}")
        if self.delta_eta_L < 0:
            raise ValueError("delta_eta_L must be nonnegative")


def longitudinal_moments(phi00: Field1D) -> LongitudinalMoments:
    """Quadrature moments of a normalized longitudinal ground state."""
    grids.assert_normalized(phi00)
    w = phi00.grid.weights
    dens = phi00.values**2
    eta = float(w @ dens**2)
    sixth = float(w @ dens**3)
    radicand = sixth - eta * eta
    floor = max(1e-14, VARIANCE_REL_FLOOR * sixth)
    if radicand < -floor:
        raise QuadratureInconsistencyError(
            f"<phi^3|phi^3> - eta_L^2 = {radicand:.3g} < 0 beyond roundoff"
        )
    delta = math.sqrt(radicand) if radicand > floor else 0.0
    return LongitudinalMoments(eta_L=eta, delta_eta_L=delta, sixth_moment=sixth)


def phi10(phi00: Field1D, moments: LongitudinalMoments) -> tuple[Field1D, bool]:
    """Entangled longitudinal mode (phi_00^2 - eta_L) phi_00 / delta_eta_L.

    Orthogonal to phi_00 and unit-normalized by construction in the grid
    quadrature; re-normalized to polish roundoff.  Returns the field and
    an ``entanglement_absent`` flag; for homogeneous profiles
    (delta_eta_L = 0) the field is identically zero and the flag is set.
    """
    grids.assert_normalized(phi00)
    if moments.delta_eta_L == 0.0:
        return Field1D(phi00.grid, np.zeros(phi00.grid.n_z)), True
    vals = (phi00.values**2 - moments.eta_L) * phi00.values / moments.delta_eta_L
    return grids.normalize(Field1D(phi00.grid, vals)), False


def project_out(field: Field1D, direction: Field1D) -> Field1D:
    """Remove the component of ``field`` along a normalized ``direction``."""
    overlap = grids.inner_product(field, direction)
    return Field1D(field.grid, field.values - overlap * direction.values)


def radial_mode_sum(rho: np.ndarray) -> np.ndarray:
    """sum_{n>=1} xi_{n 0}(rho) / (2^n n), truncated at SUM_TRUNCATION.

    This fixed radial profile multiplies both transverse corrections; it
    is orthogonal to the ground mode xi_00 term by term.
    """
    total = np.zeros_like(rho)
    scale = 0.0
    for n in range(1, 200):
        term = core.laguerre_gaussian_mode(n, rho) / (2.0**n * n)
        total += term
        scale = max(scale, float(np.max(np.abs(total))))
        if float(np.max(np.abs(term))) < SUM_TRUNCATION * scale:
            break
    return total


def transverse_corrections(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    moments: LongitudinalMoments,
    radial_grid: RadialGrid,
) -> tuple[RadialField, RadialField]:
    """Corrected transverse profile chi_0 and entangled mode chi_10.

    chi_0  = xi_00 - a (N-1) eta_L       * radial_mode_sum
    chi_10 =       - a (N-1) delta_eta_L * radial_mode_sum

    (cigar traps; a and the moments in trap units).  chi_10/delta_eta_L
    equals (chi_0 - xi_00)/eta_L pointwise by construction.
    """
    if trap.transverse_dims != 2:
        raise ValueError("transverse corrections require a cigar trap (D = 2)")
    cpl = core.natural_couplings(species, trap, n_atoms)
    rho = radial_grid.rho
    xi0 = core.transverse_ground_mode(rho, 2)
    if n_atoms == 1:
        return (
            RadialField(radial_grid, xi0),
            RadialField(radial_grid, np.zeros_like(rho)),
        )
    s = radial_mode_sum(rho)
    amp = cpl.a * (n_atoms - 1.0)
    chi0 = RadialField(radial_grid, xi0 - amp * moments.eta_L * s)
    chi10 = RadialField(radial_grid, -amp * moments.delta_eta_L * s)
    return chi0, chi10


def schmidt_c1(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    moments: LongitudinalMoments,
) -> float:
    """Second Schmidt coefficient sqrt(Li_2(1/4)) (N-1) a delta_eta_L.

    The closed form of ||chi_10||; c_0 is 1 at this order.
    """
    if trap.transverse_dims != 2:
        raise ValueError("c1 closed form applies to cigar traps (D = 2)")
    cpl = core.natural_couplings(species, trap, n_atoms)
    return (
        math.sqrt(core.polylog2(0.25))
        * (n_atoms - 1.0)
        * cpl.a
        * moments.delta_eta_L
    )


def mu2(
    phi00: Field1D,
    phi01: Field1D,
    moments: LongitudinalMoments,
    couplings: core.NaturalCouplings,
) -> float:
    """Second-order chemical potential, trap units.

    mu_2 = 2 g~ eta_T <phi_01|phi_00^3> - 3 g~^2 (eta_L^2 + dEta_L^2) Ups_T.
    phi_01 must already have its phi_00 component projected out.
    """
    w = phi00.grid.weights
    cross = float(w @ (phi01.values * phi00.values**3))
    second = moments.eta_L**2 + moments.delta_eta_L**2
    return (
        2.0 * couplings.g_tilde * couplings.eta_T * cross
        - 3.0 * couplings.g_tilde**2 * second * couplings.upsilon_T
    )


def product_state(chi: RadialField, phi: Field1D) -> FieldRZ:
    """Unnormalized separable field chi(rho) phi(z)."""
    grid = CylGrid(chi.grid, phi.grid)
    return FieldRZ(grid, np.outer(chi.values, phi.values))


def assemble_psi1(
    chi0: RadialField, phi0: Field1D, chi10: RadialField, phi10_field: Field1D
) -> FieldRZ:
    """Normalized two-term state chi_0 phi_0 + chi_10 phi_10 on the
    product grid."""
    if chi0.grid != chi10.grid:
        raise grids.GridMismatchError("chi0 and chi10 live on different radial grids")
    if phi0.grid != phi10_field.grid:
        raise grids.GridMismatchError("phi0 and phi10 live on different axial grids")
    vals = np.outer(chi0.values, phi0.values) + np.outer(
        chi10.values, phi10_field.values
    )
    return grids.normalize(FieldRZ(CylGrid(chi0.grid, phi0.grid), vals))


@dataclass
class SchmidtModel:
    """All first-order decomposition objects for one (trap, N) point."""

    phi00: Field1D
    phi0: Field1D
    phi01: Field1D
    phi10: Field1D
    chi0: RadialField
    chi10: RadialField
    c0: float
    c1: float
    mu1: float
    mu2: float
    mu_tilde: float  # 1 + mu~_L, full chemical potential estimate, trap units
    moments: LongitudinalMoments
    couplings: core.NaturalCouplings
    entanglement_absent: bool

    def summary(self) -> dict:
        return {
            "n_atoms": self.couplings.n_atoms,
            "c0": self.c0,
            "c1": self.c1,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "mu_tilde": self.mu_tilde,
            "eta_L": self.moments.eta_L,
            "delta_eta_L": self.moments.delta_eta_L,
            "eta_T": self.couplings.eta_T,
            "upsilon_T": self.couplings.upsilon_T,
            "entanglement_absent": self.entanglement_absent,
        }

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def build_schmidt_model(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    cubic_mu: float,
    phi00: Field1D,
    quintic_mu: float,
    phi0: Field1D,
    radial_grid: RadialGrid,
) -> SchmidtModel:
    """Assemble the model from the two longitudinal solves.

    cubic_mu/phi00 come from the cubic solve, quintic_mu/phi0 from the
    quintic solve on the same axial grid.  mu_tilde is 1 + quintic_mu
    (transverse ground energy plus the corrected longitudinal part).
    """
    if phi00.grid != phi0.grid:
        raise grids.GridMismatchError("longitudinal solves must share one grid")
    moments = longitudinal_moments(phi00)
    cpl = core.natural_couplings(species, trap, n_atoms)

    phi01 = project_out(Field1D(phi00.grid, phi0.values - phi00.values), phi00)
    phi10_field, absent = phi10(phi00, moments)
    chi0, chi10 = transverse_corrections(species, trap, n_atoms, moments, radial_grid)
    c1 = 0.0 if absent else schmidt_c1(species, trap, n_atoms, moments)
    mu2_val = mu2(phi00, phi01, moments, cpl)
    mu_l = quintic_mu
    return SchmidtModel(
        phi00=phi00,
        phi0=phi0,
        phi01=phi01,
        phi10=phi10_field,
        chi0=chi0,
        chi10=chi10,
        c0=1.0,
        c1=c1,
        mu1=cubic_mu,
        mu2=mu2_val,
        mu_tilde=1.0 + mu_l,
        moments=moments,
        couplings=cpl,
        entanglement_absent=absent,
    )


def assemble_model_state(model: SchmidtModel) -> FieldRZ:
    """Normalized psi_1 for the model (pure product if entanglement is
    absent)."""
    if model.entanglement_absent:
        return grids.normalize(product_state(model.chi0, model.phi0))
    return assemble_psi1(model.chi0, model.phi0, model.chi10, model.phi10)
