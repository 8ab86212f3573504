"""Point pipeline and batch orchestration.

``run_point`` executes the full chain for one (trap power, atom number)
pair: shared grids, cubic and quintic longitudinal solves, Schmidt model,
3D solve warm-started from the assembled two-term state, then the
analysis report.  ``run_sweep`` fans points out over a bounded process
pool and writes the CSV/JSON artifacts; outputs are deterministic
functions of the configuration (fixed iteration order, no timestamps in
data files, 12 significant digits).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, core, grids, schmidt, solvers

WORKERS_ENV_VAR = "ANISOBEC_WORKERS"


@dataclass(frozen=True)
class NumericsConfig:
    """Grid sizes and solver tolerances for pipeline runs."""

    n_rho: int = 128
    n_z: int = 512
    grid_scale: int = 1
    rho_max: float = 8.0
    tol_mu_1d: float = 1e-12
    tol_mu_3d: float = 5e-12
    max_steps: int = 3_000_000

    def __post_init__(self):
        if self.grid_scale < 1:
            raise ValueError("grid_scale must be >= 1")


@dataclass
class PointResult:
    report: analysis.AnalysisReport
    model: schmidt.SchmidtModel
    cubic: solvers.GroundState1D
    quintic: solvers.GroundState1D
    state3d: solvers.GroundState3D


def point_grids(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    numerics: NumericsConfig,
) -> grids.CylGrid:
    return grids.default_cyl_grid(
        species,
        trap,
        n_atoms,
        n_rho=numerics.n_rho,
        n_z=numerics.n_z,
        rho_max=numerics.rho_max,
        scale=numerics.grid_scale,
    )


def run_point(
    species: core.AtomSpecies,
    trap: core.TrapConfig,
    n_atoms: float,
    numerics: Optional[NumericsConfig] = None,
) -> PointResult:
    """Full pipeline for one point; all solves share one grid so the
    projection integrals are consistent."""
    numerics = numerics or NumericsConfig()
    cyl = point_grids(species, trap, n_atoms, numerics)
    settings_1d = solvers.SolveSettings(
        tol_mu=numerics.tol_mu_1d, max_steps=numerics.max_steps
    )
    cubic = solvers.solve_gp1d(species, trap, n_atoms, settings_1d, grid=cyl.axial)
    quintic = solvers.solve_quintic(species, trap, n_atoms, settings_1d, grid=cyl.axial)
    model = schmidt.build_schmidt_model(
        species,
        trap,
        n_atoms,
        cubic.mu,
        cubic.phi,
        quintic.mu,
        quintic.phi,
        cyl.radial,
    )
    psi1 = schmidt.assemble_model_state(model)
    settings_3d = solvers.SolveSettings(
        tol_mu=numerics.tol_mu_3d,
        max_steps=numerics.max_steps,
        initial_guess=psi1,
    )
    state3d = solvers.solve_gp3d(species, trap, n_atoms, settings_3d, grid=cyl)
    report = analysis.build_report(model, state3d, cubic.mu, trap.q, n_atoms)
    return PointResult(
        report=report, model=model, cubic=cubic, quintic=quintic, state3d=state3d
    )


# ---------------------------------------------------------------------------
# trap families
# ---------------------------------------------------------------------------


def paper_trap_family(
    species: core.AtomSpecies,
    nu_t_hz: float,
    nu_l_hz: float,
    q_values: tuple[int, ...],
) -> dict[int, core.TrapConfig]:
    """Harmonic reference trap (q = 2) plus stiffness-matched companions:
    every q in the family shares the q = 2 critical atom number."""
    reference = core.TrapConfig.harmonic_cigar(species, nu_t_hz, nu_l_hz)
    traps: dict[int, core.TrapConfig] = {}
    n_t_ref = None
    for q in q_values:
        if q == 2:
            traps[2] = reference
            continue
        if n_t_ref is None:
            n_t_ref = analysis.critical_atom_number(species, reference)
        match = analysis.match_stiffness(species, reference, q, n_t_ref)
        traps[q] = match.trap(reference.omega_T)
    return traps


# ---------------------------------------------------------------------------
# sweep execution
# ---------------------------------------------------------------------------


@dataclass
class SweepTask:
    q: int
    n_atoms: float
    trap: core.TrapConfig


@dataclass
class TaskOutcome:
    q: int
    n_atoms: float
    status: str  # ok | failed
    seconds: float
    error: str = ""
    scalars: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)  # name -> list-of-rows
    model_summary: dict = field(default_factory=dict)


def _profiles_for(result: PointResult) -> dict:
    """Axial and radial density comparisons for the figure CSVs."""
    rep = result.report
    model = result.model
    z = rep.marginal_nl.grid.z
    phi0_sq = model.phi0.values**2
    phi00_sq = model.phi00.values**2
    axial_rows = [
        ("axial", z[i], rep.marginal_nl.values[i], phi0_sq[i], phi00_sq[i])
        for i in range(len(z))
    ]
    rho = rep.marginal_nt.grid.rho
    chi0_sq = model.chi0.values**2
    xi00_sq = core.transverse_ground_mode(rho, 2) ** 2
    radial_rows = [
        ("radial", rho[i], rep.marginal_nt.values[i], chi0_sq[i], xi00_sq[i])
        for i in range(len(rho))
    ]
    return {"rows": axial_rows + radial_rows}


def _run_task(args) -> TaskOutcome:
    species_args, trap_args, n_atoms, numerics = args
    species = core.AtomSpecies(*species_args)
    trap = core.TrapConfig(*trap_args)
    start = time.perf_counter()
    try:
        result = run_point(species, trap, n_atoms, numerics)
    except Exception as exc:  # noqa: BLE001 - reported per task
        return TaskOutcome(
            q=trap.q,
            n_atoms=n_atoms,
            status="failed",
            seconds=time.perf_counter() - start,
            error=f"{type(exc).__name__}: {exc}",
        )
    scalars = result.report.scalars()
    summary = result.model.summary()
    for key in ("c1", "mu1", "mu2", "eta_L", "delta_eta_L"):
        scalars[key] = summary[key]
    scalars["a_natural"] = result.model.couplings.a
    scalars["span_deficit"] = analysis.span_deficit(result.state3d.psi, result.model)
    return TaskOutcome(
        q=trap.q,
        n_atoms=n_atoms,
        status="ok",
        seconds=time.perf_counter() - start,
        scalars=scalars,
        profiles=_profiles_for(result),
        model_summary=summary,
    )


def worker_count() -> int:
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def run_tasks(payload: list) -> list[TaskOutcome]:
    """Execute point tasks over the bounded worker pool."""
    workers = worker_count()
    if workers > 1 and len(payload) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_task, payload))
    return [_run_task(p) for p in payload]


def run_sweep(
    species: core.AtomSpecies,
    traps: dict[int, core.TrapConfig],
    n_values: list[float],
    numerics: NumericsConfig,
    out_dir: Path,
    config_hash: str = "",
    formats: tuple[str, ...] = ("csv", "json"),
) -> dict:
    """Run all (q, N) tasks, write artifacts, and return the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        SweepTask(q=q, n_atoms=n, trap=traps[q])
        for q in sorted(traps)
        for n in n_values
    ]
    payload = [
        (
            (species.mass, species.scattering_length),
            (t.trap.omega_T, t.trap.k, t.trap.q, t.trap.transverse_dims),
            t.n_atoms,
            numerics,
        )
        for t in tasks
    ]
    outcomes = run_tasks(payload)

    ok = [o for o in outcomes if o.status == "ok"]
    produced = write_artifacts(ok, out_dir, formats)
    manifest = {
        "config_hash": config_hash,
        "workers": worker_count(),
        "tasks": [
            {
                "q": o.q,
                "N": o.n_atoms,
                "status": o.status,
                "seconds": round(o.seconds, 3),
                "error": o.error,
            }
            for o in outcomes
        ],
        "outputs": sorted(str(p) for p in produced),
        "n_failed": sum(1 for o in outcomes if o.status != "ok"),
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) or float(x).is_integer():
        return f"{int(x)}"
    return f"{float(x):.12g}"


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_artifacts(
    outcomes: list[TaskOutcome], out_dir: Path, formats: tuple[str, ...]
) -> list[Path]:
    produced: list[Path] = []
    ordered = sorted(outcomes, key=lambda o: (o.q, o.n_atoms))
    if "csv" in formats:
        produced.append(
            _write_csv(
                out_dir / "mu_vs_N.csv",
                ["q", "N", "mu_1d", "mu_tilde", "mu_3d"],
                [
                    (
                        o.q,
                        o.n_atoms,
                        o.scalars["mu_1d"],
                        o.scalars["mu_tilde"],
                        o.scalars["mu_3d"],
                    )
                    for o in ordered
                ],
            )
        )
        produced.append(
            _write_csv(
                out_dir / "table1.csv",
                ["q", "N", "P_D"],
                [(o.q, o.n_atoms, o.scalars["P_D"]) for o in ordered],
            )
        )
        produced.append(
            _write_csv(
                out_dir / "concurrence.csv",
                ["q", "N", "C_pert", "C_exact"],
                [
                    (o.q, o.n_atoms, o.scalars["C_pert"], o.scalars["C_exact"])
                    for o in ordered
                ],
            )
        )
        produced.append(
            _write_csv(
                out_dir / "avg_density.csv",
                [
                    "q",
                    "N",
                    "avg_density_3d",
                    "avg_density_pert",
                    "avg_density_dominant",
                    "avg_density_quasi1d",
                ],
                [
                    (
                        o.q,
                        o.n_atoms,
                        o.scalars["avg_density_3d"],
                        o.scalars["avg_density_pert"],
                        o.scalars["avg_density_dominant"],
                        o.scalars["avg_density_quasi1d"],
                    )
                    for o in ordered
                ],
            )
        )
        for o in ordered:
            path = out_dir / f"density_profiles_{o.q}_{int(o.n_atoms)}.csv"
            produced.append(
                _write_csv(
                    path,
                    [
                        "direction",
                        "coordinate",
                        "density_3d",
                        "density_schmidt",
                        "density_unperturbed",
                    ],
                    o.profiles["rows"],
                )
            )
    if "json" in formats:
        for o in ordered:
            path = out_dir / f"report_{o.q}_{int(o.n_atoms)}.json"
            with open(path, "w") as fh:
                json.dump(o.scalars, fh, indent=2, sort_keys=True)
                fh.write("\n")
            produced.append(path)
            if o.model_summary:
                spath = out_dir / f"schmidt_{o.q}_{int(o.n_atoms)}.json"
                with open(spath, "w") as fh:
                    json.dump(o.model_summary, fh, indent=2, sort_keys=True)
                    fh.write("\n")
                produced.append(spath)
    return produced


# ---------------------------------------------------------------------------
# reference-table comparison
# ---------------------------------------------------------------------------


def load_reference_deficits() -> dict[tuple[int, int], float]:
    """Published probability-deficit values (x 1e4) for this trap family."""
    ref: dict[tuple[int, int], float] = {}
    with resources.files("anisobec.data").joinpath("table1_reference.csv").open() as fh:
        for row in csv.DictReader(filter(lambda l: not l.startswith("#"), fh)):
            ref[(int(row["q"]), int(row["N"]))] = float(row["pd_1e4"])
    return ref


def deficit_tolerance(reference_1e4: float) -> float:
    """Larger of 50% relative and 0.05 absolute, in units of 1e-4."""
    return max(0.5 * reference_1e4, 0.05)


def compare_deficits(
    outcomes: list[TaskOutcome], out_dir: Path
) -> tuple[Path, bool]:
    """Write the per-cell comparison against the reference table."""
    ref = load_reference_deficits()
    rows = []
    all_pass = True
    for o in sorted(outcomes, key=lambda o: (o.q, o.n_atoms)):
        key = (int(o.q), int(o.n_atoms))
        if key not in ref:
            continue
        computed = o.scalars["P_D"] * 1e4
        tol = deficit_tolerance(ref[key])
        ok = abs(computed - ref[key]) <= tol
        all_pass = all_pass and ok
        rows.append((o.q, o.n_atoms, computed, ref[key], tol, "pass" if ok else "fail"))
    path = _write_csv(
        out_dir / "table1_comparison.csv",
        ["q", "N", "computed_pd_1e4", "reference_pd_1e4", "tolerance", "status"],
        rows,
    )
    return path, all_pass
