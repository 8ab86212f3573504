import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisobec import core, grids
from anisobec.grids import (
    AxialGrid,
    CylGrid,
    Field1D,
    FieldRZ,
    GridMismatchError,
    RadialField,
    RadialGrid,
    ZeroNormError,
)


def make_cyl(rho_max=8.0, n_rho=96, z_max=6.0, n_z=97):
    return CylGrid.make(rho_max, n_rho, z_max, n_z)


# --- quadrature ---------------------------------------------------------------


def test_radial_quadrature_gaussian_pi():
    # int 2 pi rho e^{-rho^2} d rho = pi, at the documented resolution
    grid = RadialGrid(8.0, 256)
    val = float(grid.weights @ np.exp(-grid.rho**2))
    assert val == pytest.approx(math.pi, rel=1e-6)


def test_radial_quadrature_converges_fast():
    for n in (256, 512, 1024):
        grid = RadialGrid(8.0, n)
        val = float(grid.weights @ np.exp(-grid.rho**2))
        assert val == pytest.approx(math.pi, rel=1e-8)


def test_axial_weights_total_length():
    grid = AxialGrid(5.0, 64)
    assert float(grid.weights.sum()) == pytest.approx(10.0, rel=1e-14)
    assert grid.z[0] == -grid.z[-1]


def test_grid_validation():
    with pytest.raises(ValueError):
        AxialGrid(5.0, 8)
    with pytest.raises(ValueError):
        RadialGrid(-1.0, 64)


# --- inner products -----------------------------------------------------------


def test_inner_product_normalized_field(rng):
    grid = AxialGrid(6.0, 201)
    f = grids.normalize(Field1D(grid, np.exp(-grid.z**2) * (1 + 0.1 * rng.random(201))))
    assert grids.inner_product(f, f) == pytest.approx(1.0, abs=1e-12)


def test_inner_product_quartic_ground_overlap():
    # <chi00 | chi00^3> over the transverse plane equals eta_T
    grid = RadialGrid(10.0, 512)
    chi = RadialField(grid, core.transverse_ground_mode(grid.rho, 2))
    chi3 = RadialField(grid, chi.values**3)
    assert grids.inner_product(chi, chi3) == pytest.approx(
        core.eta_T_natural(2), rel=1e-8
    )


def test_inner_product_mode_orthogonality():
    grid = RadialGrid(12.0, 768)
    xi0 = RadialField(grid, core.laguerre_gaussian_mode(0, grid.rho))
    xi1 = RadialField(grid, core.laguerre_gaussian_mode(1, grid.rho))
    assert abs(grids.inner_product(xi0, xi1)) < 1e-6


def test_inner_product_grid_mismatch():
    f = Field1D(AxialGrid(5.0, 64), np.ones(64))
    g = Field1D(AxialGrid(5.0, 65), np.ones(65))
    with pytest.raises(GridMismatchError):
        grids.inner_product(f, g)


# --- normalize ----------------------------------------------------------------


def test_normalize_idempotent(rng):
    grid = AxialGrid(4.0, 101)
    f = grids.normalize(Field1D(grid, np.exp(-grid.z**2)))
    again = grids.normalize(f)
    np.testing.assert_allclose(again.values, f.values, rtol=1e-12)


def test_normalize_scale_invariance():
    grid = AxialGrid(4.0, 101)
    base = Field1D(grid, np.exp(-grid.z**2))
    scaled = Field1D(grid, 7.0 * base.values)
    np.testing.assert_allclose(
        grids.normalize(scaled).values, grids.normalize(base).values, rtol=1e-13
    )


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_normalize_random_positive_fields(seed):
    local = np.random.default_rng(seed)
    grid = AxialGrid(4.0, 80)
    f = Field1D(grid, local.random(80) + 0.01)
    nf = grids.normalize(f)
    assert grids.inner_product(nf, nf) == pytest.approx(1.0, abs=1e-10)
    assert nf.normalized


def test_normalize_zero_field():
    grid = AxialGrid(4.0, 64)
    with pytest.raises(ZeroNormError):
        grids.normalize(Field1D(grid, np.zeros(64)))


def test_field_shape_and_finiteness_checks():
    grid = AxialGrid(4.0, 64)
    with pytest.raises(ValueError):
        Field1D(grid, np.ones(65))
    with pytest.raises(ValueError):
        Field1D(grid, np.full(64, np.nan))


# --- Laplacians ---------------------------------------------------------------


def test_laplacian_1d_constant_interior():
    grid = AxialGrid(5.0, 201)
    lap = grids.laplacian_1d(Field1D(grid, np.ones(201)))
    assert np.max(np.abs(lap.values[1:-1])) < 1e-12  # edges feel the Dirichlet ghosts


def test_laplacian_1d_cosine_eigenvalue():
    # cos(pi z / L) vanishes at z = +-L/2: eigenvalue -(pi/L)^2
    L = 10.0
    errs = []
    for n_z in (201, 401):
        grid = AxialGrid(L / 2.0, n_z)
        f = Field1D(grid, np.cos(math.pi * grid.z / L))
        lap = grids.laplacian_1d(f)
        lam = grids.inner_product(f, lap) / grids.inner_product(f, f)
        errs.append(abs(lam + (math.pi / L) ** 2))
    assert errs[0] < 1e-3
    # halving dz cuts the eigenvalue error by ~4 (second order)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_cyl_laplacian_transverse_kinetic():
    # psi = xi00(rho) g(z): transverse kinetic part is exactly 1/2
    cyl = make_cyl(rho_max=9.0, n_rho=144, z_max=8.0, n_z=161)
    g = np.exp(-0.5 * (cyl.axial.z / 2.5) ** 2)
    psi = grids.normalize(
        FieldRZ(cyl, np.outer(core.transverse_ground_mode(cyl.radial.rho, 2), g))
    )
    kinetic_total = -0.5 * grids.inner_product(psi, grids.laplacian_cyl(psi))
    phi = grids.normalize(Field1D(cyl.axial, g))
    kinetic_z = -0.5 * grids.inner_product(phi, grids.laplacian_1d(phi))
    assert kinetic_total - kinetic_z == pytest.approx(0.5, abs=5e-4)


def test_laplacian_symmetry_1d():
    grid = AxialGrid(6.0, 301)
    f = Field1D(grid, np.exp(-2.0 * (grid.z - 1.0) ** 2))
    g = Field1D(grid, np.exp(-1.5 * (grid.z + 0.8) ** 2))
    a = grids.inner_product(f, grids.laplacian_1d(g))
    b = grids.inner_product(grids.laplacian_1d(f), g)
    assert abs(a - b) <= 1e-8 * abs(a)


def test_laplacian_symmetry_cyl():
    # interior-supported ring bumps (clear of axis and boundaries)
    cyl = make_cyl(rho_max=8.0, n_rho=128, z_max=6.0, n_z=121)
    rho = cyl.radial.rho[:, None]
    z = cyl.axial.z[None, :]
    f = FieldRZ(cyl, np.exp(-2.0 * (rho - 3.0) ** 2 - 1.5 * z**2))
    g = FieldRZ(cyl, np.exp(-1.5 * (rho - 3.5) ** 2 - 2.0 * (z - 0.5) ** 2))
    a = grids.inner_product(f, grids.laplacian_cyl(g))
    b = grids.inner_product(grids.laplacian_cyl(f), g)
    assert abs(a - b) <= 1e-8 * abs(a)


def test_refinement_second_order_convergence():
    # radial ground-mode kinetic energy error drops ~4x per refinement
    errs = []
    for n_rho in (64, 128):
        cyl = make_cyl(rho_max=8.0, n_rho=n_rho, z_max=6.0, n_z=41)
        g = np.exp(-0.5 * (cyl.axial.z / 2.0) ** 2)
        psi = grids.normalize(
            FieldRZ(cyl, np.outer(core.transverse_ground_mode(cyl.radial.rho, 2), g))
        )
        phi = grids.normalize(Field1D(cyl.axial, g))
        kin_t = -0.5 * grids.inner_product(
            psi, grids.laplacian_cyl(psi)
        ) + 0.5 * grids.inner_product(phi, grids.laplacian_1d(phi))
        errs.append(abs(kin_t - 0.5))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)


# --- default grid sizing --------------------------------------------------------


def test_default_axial_extent_scales(rb87, trap_q2):
    z1 = grids.default_axial_extent(rb87, trap_q2, 1)
    z1000 = grids.default_axial_extent(rb87, trap_q2, 1000)
    # interacting cloud is much wider than the bare oscillator state
    assert z1000 > z1 > 10.0


def test_default_cyl_grid_shape(rb87, trap_q2):
    cyl = grids.default_cyl_grid(rb87, trap_q2, 100, n_rho=64, n_z=129)
    assert cyl.shape == (64, 129)
    assert cyl.rho_max == 8.0
    refined = grids.default_cyl_grid(rb87, trap_q2, 100, n_rho=64, n_z=129, scale=2)
    assert refined.shape == (128, 257)
    assert refined.axial.z_max == cyl.axial.z_max


# --- serialization --------------------------------------------------------------


@pytest.mark.parametrize("kind", ["axial", "radial", "cyl"])
def test_binary_round_trip(tmp_path, rng, kind):
    if kind == "axial":
        field = Field1D(AxialGrid(5.0, 64), rng.normal(size=64))
    elif kind == "radial":
        field = RadialField(RadialGrid(8.0, 48), rng.normal(size=48))
    else:
        cyl = make_cyl(n_rho=24, n_z=33)
        field = FieldRZ(cyl, rng.normal(size=(24, 33)))
    path = tmp_path / "field.bin"
    grids.write_field_binary(field, path)
    back = grids.read_field_binary(path)
    assert back.grid == field.grid
    np.testing.assert_array_equal(back.values, field.values)
    assert back.normalized == field.normalized


def test_binary_rejects_other_files(tmp_path):
    path = tmp_path / "not_a_field"
    path.write_bytes(b"something else")
    with pytest.raises(ValueError):
        grids.read_field_binary(path)


def test_csv_output_columns(tmp_path):
    grid = AxialGrid(2.0, 17)
    field = Field1D(grid, np.linspace(0.0, 1.0, 17))
    path = tmp_path / "field.csv"
    grids.write_field_csv(field, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "z,value"
    assert len(lines) == 18

    cyl = make_cyl(n_rho=16, n_z=17)
    field2 = FieldRZ(cyl, np.zeros((16, 17)))
    path2 = tmp_path / "field2.csv"
    grids.write_field_csv(field2, path2)
    assert path2.read_text().splitlines()[0] == "rho,z,value"
