"""Species, trap and unit definitions plus the closed-form transverse layer.

Everything in this module is exact arithmetic on trap parameters: no grids,
no iteration.  It provides

* the physical inputs (atom species, trap shape, derived unit system),
* harmonic-oscillator mode functions and their quartic overlap integrals,
* the mode-coupling parameter that sets the strength of the effective
  quintic interaction in the reduced longitudinal equation,
* Laguerre polynomials and the dilogarithm, evaluated from scratch so the
  downstream identities can be cross-checked against scipy independently,
* Thomas-Fermi closed forms used for initial guesses and grid sizing.

Internally all solver work happens in trap units (hbar = M = omega_T = 1,
lengths in rho0 = sqrt(hbar/(M omega_T)), energies in hbar*omega_T); the
``NaturalCouplings`` bundle carries the dimensionless coupling strengths.
SI values are exposed through the spec'd types for I/O.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, physical_constants

BOHR_RADIUS = physical_constants["Bohr radius"][0]

# 87Rb in the |F=1, m_F=-1> state: a = 100.4 a0.
RB87_MASS = 1.44316e-25  # kg
RB87_SCATTERING_LENGTH = 100.4 * BOHR_RADIUS


@dataclass(frozen=True)
class AtomSpecies:
    """Atomic mass and (repulsive) s-wave scattering length, SI units."""

    mass: float  # kg
    scattering_length: float  # m

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not self.scattering_length > 0:
            raise ValueError(
                f"scattering_length must be positive (repulsive interactions "
                f"only), got {self.scattering_length}"
            )

    @property
    def g(self) -> float:
        """Contact-interaction strength g = 4 pi hbar^2 a / M  [J m^3]."""
        return 4.0 * math.pi * hbar**2 * self.scattering_length / self.mass

    @classmethod
    def rb87(cls) -> "AtomSpecies":
        return cls(mass=RB87_MASS, scattering_length=RB87_SCATTERING_LENGTH)


@dataclass(frozen=True)
class TrapConfig:
    """Tight harmonic transverse confinement plus a longitudinal power law.

    V(rho, z) = (1/2) (M omega_T^2 rho^2 + k z^q) for the cigar geometry
    (transverse_dims = 2).  transverse_dims = 1 describes a pancake, where
    only the closed-form constants below apply.
    """

    omega_T: float  # rad/s
    k: float  # J m^-q, longitudinal stiffness
    q: int  # even positive longitudinal power
    transverse_dims: int = 2

    def __post_init__(self):
        if not self.omega_T > 0:
            raise ValueError(f"omega_T must be positive, got {self.omega_T}")
        if not self.k > 0:
            raise ValueError(f"stiffness k must be positive, got {self.k}")
        if self.q < 2 or self.q % 2 != 0:
            raise ValueError(f"q must be an even positive integer, got {self.q}")
        if self.transverse_dims not in (1, 2):
            raise ValueError(
                f"transverse_dims must be 1 or 2, got {self.transverse_dims}"
            )

    @property
    def longitudinal_dims(self) -> int:
        return 3 - self.transverse_dims

    @classmethod
    def harmonic_cigar(
        cls, species: AtomSpecies, nu_T_hz: float, nu_L_hz: float
    ) -> "TrapConfig":
        """Cigar trap from ordinary frequencies in Hz (omega = 2 pi nu)."""
        omega_T = 2.0 * math.pi * nu_T_hz
        omega_L = 2.0 * math.pi * nu_L_hz
        return cls(omega_T=omega_T, k=species.mass * omega_L**2, q=2)

    @classmethod
    def power_law_cigar(cls, nu_T_hz: float, q: int, k: float) -> "TrapConfig":
        return cls(omega_T=2.0 * math.pi * nu_T_hz, k=k, q=q)


@dataclass(frozen=True)
class UnitSystem:
    """Trap units: lengths in rho0 = sqrt(hbar/(M omega_T)), energies in
    hbar*omega_T.  z0 = (hbar^2/(M k))^(1/(q+2)) is the bare longitudinal
    ground-state width (reduces to the oscillator length for q = 2)."""

    length: float  # rho0, m
    energy: float  # hbar*omega_T, J
    z0: float  # m

    def __post_init__(self):
        if not (self.length > 0 and self.energy > 0 and self.z0 > 0):
            raise ValueError("all units must be strictly positive")

    @classmethod
    def from_species_trap(cls, species: AtomSpecies, trap: TrapConfig) -> "UnitSystem":
        rho0 = math.sqrt(hbar / (species.mass * trap.omega_T))
        z0 = (hbar**2 / (species.mass * trap.k)) ** (1.0 / (trap.q + 2))
        return cls(length=rho0, energy=hbar * trap.omega_T, z0=z0)

    def stiffness_natural(self, trap: TrapConfig) -> float:
        """k in trap units: V_L/(hbar omega_T) = (1/2) k_nat (z/rho0)^q."""
        return trap.k * self.length**trap.q / self.energy

    @property
    def aspect_ratio(self) -> float:
        """Bare-trap aspect ratio z0/rho0 (the "1:n" number)."""
        return self.z0 / self.length


def transverse_ground_width(species: AtomSpecies, trap: TrapConfig) -> float:
    """Harmonic-oscillator width rho0 = sqrt(hbar/(M omega_T))  [m]."""
    return math.sqrt(hbar / (species.mass * trap.omega_T))


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def laguerre_eval(n_r: int, x):
    """Laguerre polynomial L_n(x) by the three-term recurrence.

    (k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}; stable for the mode indices
    used here (n_r up to ~100), unlike the factorial series.
    """
    if n_r < 0:
        raise ValueError(f"n_r must be >= 0, got {n_r}")
    x = np.asarray(x, dtype=float)
    ones = np.ones_like(x)
    if n_r == 0:
        return ones if x.ndim else float(ones)
    prev = ones
    cur = 1.0 - x
    for k in range(1, n_r):
        prev, cur = cur, ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0)
    return cur if x.ndim else float(cur)


def polylog2(z: float) -> float:
    """Dilogarithm Li_2(z) = sum_{n>=1} z^n / n^2 for real z in [0, 1).

    Direct series, summed until the next term drops below 1e-16.
    """
    if not 0.0 <= z < 1.0:
        raise ValueError(f"polylog2 requires 0 <= z < 1, got {z}")
    if z == 0.0:
        return 0.0
    total = 0.0
    zn = 1.0
    for n in range(1, 100000):
        zn *= z
        term = zn / (n * n)
        total += term
        if term < 1e-16:
            break
    return total


def laguerre_gaussian_mode(n_r: int, rho):
    """Azimuthally symmetric 2D oscillator eigenfunction, trap units.

    xi_{n_r,0}(rho) = exp(-rho^2/2) L_{n_r}(rho^2) / sqrt(pi), with energy
    2 n_r above the ground state.  Normalized under the measure
    2 pi rho d(rho).
    """
    rho = np.asarray(rho, dtype=float)
    x = rho * rho
    return np.exp(-0.5 * x) * laguerre_eval(n_r, x) / math.sqrt(math.pi)


def transverse_ground_mode(rho, transverse_dims: int = 2):
    """Bare transverse ground state in trap units (rho0 = 1)."""
    rho = np.asarray(rho, dtype=float)
    if transverse_dims == 2:
        return np.exp(-0.5 * rho * rho) / math.sqrt(math.pi)
    if transverse_dims == 1:
        return np.exp(-0.5 * rho * rho) / math.pi**0.25
    raise ValueError(f"transverse_dims must be 1 or 2, got {transverse_dims}")


# ---------------------------------------------------------------------------
# transverse overlap coefficients and coupling parameters
# ---------------------------------------------------------------------------


def eta_T_natural(transverse_dims: int) -> float:
    """Inverse effective volume of the transverse ground density in trap
    units: integral of the ground mode to the fourth power = (2 pi)^(-D/2)."""
    if transverse_dims not in (1, 2):
        raise ValueError(f"transverse_dims must be 1 or 2, got {transverse_dims}")
    return (2.0 * math.pi) ** (-0.5 * transverse_dims)


def eta_T(species: AtomSpecies, trap: TrapConfig) -> float:
    """eta_T = (sqrt(2 pi) rho0)^(-D)  [m^-D]."""
    rho0 = transverse_ground_width(species, trap)
    return eta_T_natural(trap.transverse_dims) * rho0 ** (-trap.transverse_dims)


def transverse_overlap(n: int, transverse_dims: int = 2) -> float:
    """Quartic overlap of excited mode n with the ground mode, as the
    dimensionless ratio <xi_n | xi_0^3> / eta_T.

    Cigar (D=2, azimuthally symmetric sector): 2^(-n_r).
    Pancake (D=1): 0 for odd n, (-1)^(n/2) Gamma((n+1)/2) / sqrt(pi n!)
    for even n.  Evaluated through log-gamma to stay finite at large n.
    """
    if n < 0:
        raise ValueError(f"mode index must be >= 0, got {n}")
    if transverse_dims == 2:
        return 2.0 ** (-n)
    if transverse_dims == 1:
        if n % 2 == 1:
            return 0.0
        sign = -1.0 if (n // 2) % 2 else 1.0
        log_val = (
            math.lgamma((n + 1) / 2.0)
            - 0.5 * math.log(math.pi)
            - 0.5 * math.lgamma(n + 1)
        )
        return sign * math.exp(log_val)
    raise ValueError(f"transverse_dims must be 1 or 2, got {transverse_dims}")


def upsilon_T_ratio(transverse_dims: int) -> float:
    """Mode-coupling parameter in units of eta_T^2/(hbar omega_T).

    Closed form of the spectral sum over excited transverse modes:
    ln(4/3)/2 for the cigar, ln(8 - 4 sqrt(3)) for the pancake.
    """
    if transverse_dims == 2:
        return 0.5 * math.log(4.0 / 3.0)
    if transverse_dims == 1:
        return math.log(8.0 - 4.0 * math.sqrt(3.0))
    raise ValueError(f"transverse_dims must be 1 or 2, got {transverse_dims}")


def upsilon_T_partial_sum(transverse_dims: int, n_terms: int = 60) -> float:
    """Truncated spectral sum sum_n <xi_n|xi_0^3>^2 / (E_n - E_0), in units
    of eta_T^2/(hbar omega_T).  Independent route to ``upsilon_T_ratio``.

    Cigar: excitation energies 2 n_r; pancake: n (even modes only).
    """
    total = 0.0
    if transverse_dims == 2:
        for n in range(1, n_terms + 1):
            total += transverse_overlap(n, 2) ** 2 / (2.0 * n)
    elif transverse_dims == 1:
        for n in range(2, 2 * n_terms + 1, 2):
            total += transverse_overlap(n, 1) ** 2 / float(n)
    else:
        raise ValueError(f"transverse_dims must be 1 or 2, got {transverse_dims}")
    return total


def upsilon_T(species: AtomSpecies, trap: TrapConfig) -> float:
    """Upsilon_T in SI units [m^-2D / J]."""
    eta = eta_T(species, trap)
    return upsilon_T_ratio(trap.transverse_dims) * eta**2 / (hbar * trap.omega_T)


# ---------------------------------------------------------------------------
# coupling bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingConstants:
    """SI coupling strengths for N atoms in a given species/trap."""

    g_tilde: float  # g (N-1), J m^3
    eta_T: float  # m^-D
    upsilon_T: float  # m^-2D / J
    cubic: float  # g eta_T (N-1)
    quintic: float  # 3 g^2 Upsilon_T (N-1)^2

    def __post_init__(self):
        if not self.eta_T > 0:
            raise ValueError("eta_T must be positive")
        if self.upsilon_T < 0:
            raise ValueError("upsilon_T must be nonnegative")
        if not self.cubic > 0:
            raise ValueError("cubic coupling must be positive (requires N > 1)")
        if self.quintic < 0:
            raise ValueError("quintic coupling must be nonnegative")

    @classmethod
    def for_atoms(
        cls, species: AtomSpecies, trap: TrapConfig, n_atoms: float
    ) -> "CouplingConstants":
        if n_atoms <= 1:
            raise ValueError(f"need N > 1 for interacting couplings, got {n_atoms}")
        g = species.g
        eta = eta_T(species, trap)
        ups = upsilon_T(species, trap)
        return cls(
            g_tilde=g * (n_atoms - 1),
            eta_T=eta,
            upsilon_T=ups,
            cubic=g * eta * (n_atoms - 1),
            quintic=3.0 * g**2 * ups * (n_atoms - 1) ** 2,
        )


@dataclass(frozen=True)
class NaturalCouplings:
    """Dimensionless couplings in trap units (hbar = M = omega_T = 1).

    For the cigar these reduce to g1 = 2 a (N-1) and
    g5 = 6 a^2 (N-1)^2 ln(4/3) with a measured in rho0.
    """

    a: float  # scattering length / rho0
    n_atoms: float
    g: float  # 4 pi a
    g_tilde: float  # g (N-1)
    eta_T: float  # (2 pi)^(-D/2)
    upsilon_T: float  # eta_T^2 * upsilon_T_ratio(D)
    g1: float  # cubic coefficient g_tilde * eta_T
    g5: float  # quintic coefficient 3 g_tilde^2 * upsilon_T


def natural_couplings(
    species: AtomSpecies, trap: TrapConfig, n_atoms: float
) -> NaturalCouplings:
    if n_atoms < 1:
        raise ValueError(f"atom number must be >= 1, got {n_atoms}")
    units = UnitSystem.from_species_trap(species, trap)
    a = species.scattering_length / units.length
    g = 4.0 * math.pi * a
    g_tilde = g * (n_atoms - 1)
    eta = eta_T_natural(trap.transverse_dims)
    ups = upsilon_T_ratio(trap.transverse_dims) * eta**2
    return NaturalCouplings(
        a=a,
        n_atoms=float(n_atoms),
        g=g,
        g_tilde=g_tilde,
        eta_T=eta,
        upsilon_T=ups,
        g1=g_tilde * eta,
        g5=3.0 * g_tilde**2 * ups,
    )


# ---------------------------------------------------------------------------
# Thomas-Fermi closed forms (1D longitudinal, power-law trap, trap units)
# ---------------------------------------------------------------------------


def thomas_fermi_radius(g1: float, k: float, q: int) -> float:
    """TF half-width for V = k z^q / 2 with cubic coupling g1 (d = 1)."""
    if g1 <= 0:
        return 0.0
    return ((q + 1.0) * g1 / (q * k)) ** (1.0 / (q + 1.0))


def thomas_fermi_mu(g1: float, k: float, q: int) -> float:
    """TF chemical potential mu = k z_TF^q / 2 (d = 1)."""
    if g1 <= 0:
        return 0.0
    return 0.5 * k * thomas_fermi_radius(g1, k, q) ** q


def variational_gaussian_energy(k: float, q: int) -> tuple[float, float]:
    """Gaussian variational ground-state energy and width for V = k z^q / 2.

    Exact for q = 2; for larger q a sizing estimate only.  Returns
    (energy, width) in trap units.
    """
    dfact = 1.0
    for m in range(q - 1, 1, -2):
        dfact *= m
    w = (2.0 ** (q / 2.0) / (k * q * dfact)) ** (1.0 / (q + 2.0))
    energy = 0.25 / w**2 + 0.5 * k * dfact * (0.5 * w * w) ** (q / 2.0)
    return energy, w
