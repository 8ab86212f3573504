"""Acceptance suite: every headline criterion at its stated tolerance.

The paper-grid fixture solves all fifteen (q, N) points at the production
resolution (radial 128 x axial 512) through the full pipeline; expect a
few minutes per point of CPU time, parallelized over ANISOBEC_WORKERS
processes.  Set ANISOBEC_SWEEP_DIR to a directory produced by
``anisobec sweep`` (same grids) to reuse its reports instead of
recomputing.  One PASS/FAIL line per criterion is printed in the terminal
summary.
"""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from anisobec import analysis, core, grids, pipeline, schmidt, solvers
from anisobec.grids import RadialGrid

from conftest import record_criterion

Q_VALUES = (2, 4, 10)
N_VALUES = (1000, 2000, 3000, 4000, 5000)


@pytest.fixture(scope="session")
def species():
    return core.AtomSpecies.rb87()


@pytest.fixture(scope="session")
def trap_family(species):
    """Reference trap, matched companions, and the critical atom number."""
    reference = core.TrapConfig.harmonic_cigar(species, 350.0, 3.5)
    n_t = analysis.critical_atom_number(species, reference)
    traps = {2: reference}
    matches = {}
    for q in (4, 10):
        match = analysis.match_stiffness(species, reference, q, n_t)
        traps[q] = match.trap(reference.omega_T)
        matches[q] = match
    return {"traps": traps, "n_t": n_t, "matches": matches}


def _profiles_from_csv(path: Path):
    import csv as csv_mod

    rows = []
    with open(path) as fh:
        for row in csv_mod.DictReader(fh):
            rows.append(
                (
                    row["direction"],
                    float(row["coordinate"]),
                    float(row["density_3d"]),
                    float(row["density_schmidt"]),
                    float(row["density_unperturbed"]),
                )
            )
    return rows


def _load_sweep_dir(path: Path):
    results = {}
    for q in Q_VALUES:
        for n in N_VALUES:
            report = path / f"report_{q}_{n}.json"
            profiles = path / f"density_profiles_{q}_{n}.csv"
            if not report.exists() or not profiles.exists():
                return None
            scalars = json.loads(report.read_text())
            if "a_natural" not in scalars:  # stale directory from older runs
                return None
            results[(q, n)] = {
                "scalars": scalars,
                "profiles": _profiles_from_csv(profiles),
            }
    return results


@pytest.fixture(scope="session")
def paper_grid(species, trap_family):
    """Scalars and density profiles for all 15 paper-grid points at
    production resolution."""
    env_dir = os.environ.get("ANISOBEC_SWEEP_DIR")
    if env_dir:
        loaded = _load_sweep_dir(Path(env_dir))
        if loaded is not None:
            return loaded
    numerics = pipeline.NumericsConfig()
    payload = [
        (
            (species.mass, species.scattering_length),
            (t.omega_T, t.k, t.q, t.transverse_dims),
            float(n),
            numerics,
        )
        for q, t in sorted(trap_family["traps"].items())
        for n in N_VALUES
    ]
    outcomes = pipeline.run_tasks(payload)
    failed = [o for o in outcomes if o.status != "ok"]
    assert not failed, f"paper-grid solves failed: {failed}"
    return {
        (o.q, int(o.n_atoms)): {
            "scalars": o.scalars,
            "profiles": o.profiles["rows"],
        }
        for o in outcomes
    }


# --- criterion 1: closed-form constants --------------------------------------------


def test_criterion_1_closed_form_constants():
    ok = True
    detail = []

    sum_cigar = core.upsilon_T_partial_sum(2, 40)
    rel_cigar = abs(sum_cigar - core.upsilon_T_ratio(2)) / core.upsilon_T_ratio(2)
    ok &= rel_cigar < 1e-10
    detail.append(f"cigar spectral sum rel err {rel_cigar:.2e}")

    sum_pancake = core.upsilon_T_partial_sum(1, 200)
    rel_pancake = abs(sum_pancake - core.upsilon_T_ratio(1)) / abs(
        core.upsilon_T_ratio(1)
    )
    ok &= rel_pancake < 1e-10
    detail.append(f"pancake spectral sum rel err {rel_pancake:.2e}")

    # Li2(1/4) from the quadrature norm of the entangled transverse mode
    fine = RadialGrid(10.0, 1024)
    s = schmidt.radial_mode_sum(fine.rho)
    li2_quad = float(fine.weights @ s**2)
    rel_li2 = abs(li2_quad - core.polylog2(0.25)) / core.polylog2(0.25)
    ok &= rel_li2 < 1e-8
    detail.append(f"Li2(1/4) quadrature rel err {rel_li2:.2e}")

    record_criterion("1 closed-form constants", ok, "; ".join(detail))
    assert rel_cigar < 1e-10
    assert rel_pancake < 1e-10
    assert rel_li2 < 1e-8


# --- criterion 2: probability-deficit table ------------------------------------------


def test_criterion_2_deficit_table(paper_grid):
    reference = pipeline.load_reference_deficits()
    failures = []
    for (q, n), ref in sorted(reference.items()):
        computed = paper_grid[(q, n)]["scalars"]["P_D"] * 1e4
        tol = pipeline.deficit_tolerance(ref)
        if abs(computed - ref) > tol:
            failures.append(f"q={q} N={n}: {computed:.3f} vs {ref} (tol {tol:.3f})")

    # monotonic growth in N for each q, decrease in q at each N
    ordering_ok = True
    for q in Q_VALUES:
        vals = [paper_grid[(q, n)]["scalars"]["P_D"] for n in N_VALUES]
        ordering_ok &= all(a < b for a, b in zip(vals, vals[1:]))
    for n in N_VALUES:
        vals = [paper_grid[(q, n)]["scalars"]["P_D"] for q in Q_VALUES]
        ordering_ok &= all(a > b for a, b in zip(vals, vals[1:]))

    ok = not failures and ordering_ok
    worst = max(
        abs(paper_grid[(q, n)]["scalars"]["P_D"] * 1e4 - ref) / pipeline.deficit_tolerance(ref)
        for (q, n), ref in reference.items()
    )
    record_criterion(
        "2 deficit table",
        ok,
        f"15 cells, worst tolerance fraction {worst:.2f}, orderings "
        f"{'hold' if ordering_ok else 'VIOLATED'}",
    )
    assert not failures, failures
    assert ordering_ok


# --- criterion 3: chemical-potential ordering ----------------------------------------


def test_criterion_3_mu_ordering(paper_grid):
    failures = []
    for q in Q_VALUES:
        for n in (1000, 2000):
            s = paper_grid[(q, n)]["scalars"]
            gain = abs(s["mu_tilde"] - s["mu_3d"]) / abs(s["mu_1d"] - s["mu_3d"])
            if gain > 1.0:
                failures.append(f"q={q} N={n}: quintic not closer ({gain:.2f})")
    s = paper_grid[(2, 1000)]["scalars"]
    margin = abs(s["mu2"]) / abs(s["mu_tilde"] - s["mu_3d"])
    ok = not failures and margin > 5.0
    record_criterion(
        "3 chemical-potential ordering",
        ok,
        f"quintic closer at all N<=2000; |mu2|/|mu~-mu3d| = {margin:.1f} at (2,1000)",
    )
    assert not failures, failures
    assert margin > 5.0


# --- criterion 4: critical atom number and matched traps ------------------------------


def test_criterion_4_critical_number(trap_family):
    n_t = trap_family["n_t"]
    aspects = {2: 10.0, 4: 24.0, 10: 57.0}
    ok = abs(n_t - 14000.0) <= 0.10 * 14000.0
    details = [f"N_T = {n_t:.0f}"]
    units2 = core.UnitSystem.from_species_trap(
        core.AtomSpecies.rb87(), trap_family["traps"][2]
    )
    measured = {2: units2.aspect_ratio}
    for q in (4, 10):
        measured[q] = trap_family["matches"][q].aspect_ratio
    for q, target in aspects.items():
        rel = abs(measured[q] - target) / target
        ok &= rel <= 0.05
        details.append(f"1:{measured[q]:.2f} (q={q})")
    record_criterion("4 critical atom number", ok, "; ".join(details))
    assert abs(n_t - 14000.0) <= 1400.0
    for q, target in aspects.items():
        assert measured[q] == pytest.approx(target, rel=0.05)


# --- criterion 5: concurrence ----------------------------------------------------------


def test_criterion_5_concurrence(paper_grid):
    # exact formula identity for the perturbative concurrence
    identity_ok = True
    for (q, n), point in paper_grid.items():
        s = point["scalars"]
        expected = (
            2.0
            * math.sqrt(core.polylog2(0.25))
            * (n - 1)
            * s["a_natural"]
            * s["delta_eta_L"]
        )
        if not math.isclose(s["C_pert"], expected, rel_tol=1e-10):
            identity_ok = False

    small_ok = all(p["scalars"]["C_exact"] < 0.1 for p in paper_grid.values())
    dec_ok = True
    for n in N_VALUES:
        vals = [paper_grid[(q, n)]["scalars"]["C_exact"] for q in Q_VALUES]
        dec_ok &= all(a > b for a, b in zip(vals, vals[1:]))
    c_max = max(p["scalars"]["C_exact"] for p in paper_grid.values())
    ok = identity_ok and small_ok and dec_ok
    record_criterion(
        "5 concurrence",
        ok,
        f"formula exact, max C~ = {c_max:.4f} < 0.1, decreasing in q",
    )
    assert identity_ok
    assert small_ok
    assert dec_ok


# --- criterion 6: property suites -------------------------------------------------------


def test_criterion_6_property_suites(species):
    """Compact re-run of the always-available property checks; the full
    suites live in the per-module test files."""
    trap = core.TrapConfig.harmonic_cigar(species, 350.0, 3.5)
    grid = grids.default_axial_grid(species, trap, 1000, n_z=769)
    s = solvers.SolveSettings(tol_mu=1e-12)
    cubic = solvers.solve_gp1d(species, trap, 1000, s, grid=grid)
    quintic = solvers.solve_quintic(species, trap, 1000, s, grid=grid)
    model = schmidt.build_schmidt_model(
        species, trap, 1000, cubic.mu, cubic.phi, quintic.mu, quintic.phi,
        RadialGrid(8.0, 256),
    )
    m = model.moments
    w = grid.weights

    sixth = float(w @ cubic.phi.values**6)
    variance_ok = math.isclose(
        sixth, m.eta_L**2 + m.delta_eta_L**2, rel_tol=1e-10
    )

    ortho = abs(grids.inner_product(model.phi10, cubic.phi))
    nrm = grids.inner_product(model.phi10, model.phi10)
    phi10_ok = ortho < 1e-9 and abs(nrm - 1.0) < 1e-9

    overlap = float(w @ (model.phi10.values * cubic.phi.values**3))
    overlap_ok = math.isclose(overlap, m.delta_eta_L, rel_tol=1e-8)

    # homogeneous trap: zero spread, zero entanglement
    box = grids.normalize(grids.Field1D(grids.AxialGrid(5.0, 101), np.ones(101)))
    box_m = schmidt.longitudinal_moments(box)
    box_ok = box_m.delta_eta_L == 0.0 and schmidt.schmidt_c1(
        species, trap, 1000, box_m
    ) == 0.0

    # dual-route consistency for the second-order chemical potential at
    # N = 1000: the two routes agree to 1e-3 of the full chemical
    # potential (their difference is genuine third-order content)
    dual = quintic.mu - cubic.mu
    dual_err = abs(model.mu2 - dual) / model.mu_tilde
    dual_ok = dual_err < 1e-3

    ok = variance_ok and phi10_ok and overlap_ok and box_ok and dual_ok
    record_criterion(
        "6 property suites",
        ok,
        f"variance identity, phi10 orthonormal, <phi10|phi00^3>=dEta, "
        f"homogeneous zero-entanglement, mu2 dual-route ({dual_err:.1e} of mu~)",
    )
    assert variance_ok and phi10_ok and overlap_ok and box_ok
    assert dual_ok


# --- criterion 7: average density ---------------------------------------------------------


def test_criterion_7_average_density(paper_grid):
    failures = []
    for q in Q_VALUES:
        s = paper_grid[(q, 1000)]["scalars"]
        if not (
            abs(s["avg_density_pert"] - s["avg_density_dominant"])
            < abs(s["avg_density_dominant"] - s["avg_density_quasi1d"])
        ):
            failures.append(f"nonseparable correction not small at q={q}")
    for q in Q_VALUES:
        for n in (1000, 2000, 3000):
            s = paper_grid[(q, n)]["scalars"]
            if not (
                abs(s["avg_density_pert"] - s["avg_density_3d"])
                < abs(s["avg_density_quasi1d"] - s["avg_density_3d"])
            ):
                failures.append(f"full estimate beaten by quasi-1D at q={q} N={n}")
    record_criterion(
        "7 average density", not failures, "estimator orderings hold" if not failures
        else "; ".join(failures),
    )
    assert not failures, failures


# --- supporting paper-grid checks ----------------------------------------------------------


def test_projection_exactness_on_grid(paper_grid):
    # span-complement variant is nonnegative and close to the literal P_D
    for point in paper_grid.values():
        s = point["scalars"]
        assert s["span_deficit"] >= 0.0
        assert s["span_deficit"] < 25.0 * max(s["P_D"], 1e-6)


def test_regression_q2_n1000(paper_grid):
    # solver-derived regression values for the headline point (validated
    # by grid refinement during development)
    s = paper_grid[(2, 1000)]["scalars"]
    assert s["mu1"] == pytest.approx(0.2122030843, rel=1e-6)
    assert s["mu_tilde"] == pytest.approx(1.2013096796, rel=1e-6)
    assert s["mu_3d"] == pytest.approx(1.2023326265, rel=1e-5)
    assert s["P_D"] == pytest.approx(1.7127e-05, rel=1e-2)
    assert s["C_pert"] == pytest.approx(0.023822219, rel=1e-4)


def _split_profiles(rows):
    axial = np.array([r[1:] for r in rows if r[0] == "axial"])
    radial = np.array([r[1:] for r in rows if r[0] == "radial"])
    return axial, radial


def test_marginal_distribution_claims(paper_grid):
    """Figure-level claims on the 3D marginals.

    At N = 1000 the corrected profiles beat the unperturbed ones in L1
    for every q (both directions), the axial distribution flattens with
    growing q, and at N = 5000 the corrected transverse profile visibly
    over-corrects (its on-axis density undershoots the 3D value, the
    bare Gaussian overshoots)."""
    peaks = {}
    for q in Q_VALUES:
        axial, radial = _split_profiles(paper_grid[(q, 1000)]["profiles"])
        z, n3d, schmidt_d, bare = axial.T
        dz = z[1] - z[0]
        assert np.sum(np.abs(n3d - schmidt_d)) * dz < np.sum(np.abs(n3d - bare)) * dz
        rho, nt, chi_d, xi_d = radial.T
        w = 2.0 * math.pi * rho * (rho[1] - rho[0])
        assert np.sum(w * np.abs(nt - chi_d)) < np.sum(w * np.abs(nt - xi_d))
        peaks[q] = n3d.max()
    assert peaks[2] > peaks[4] > peaks[10]

    for q in Q_VALUES:
        _, radial = _split_profiles(paper_grid[(q, 5000)]["profiles"])
        rho, nt, chi_d, xi_d = radial.T
        assert chi_d[0] < nt[0] < xi_d[0]
