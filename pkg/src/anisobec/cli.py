"""Batch front-end: config parsing, presets, and the solve / analyze /
reproduce / sweep commands.

Config files are flat INI text (key = value under named sections); the
built-in preset ``rb87-q2`` encodes the Rb-87 cigar family (350 Hz
transverse, 3.5 Hz harmonic reference, a = 100.4 Bohr radii).  Exit
codes: 0 success, 1 runtime/convergence failure, 2 configuration error.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import click

from . import analysis, core, grids, pipeline, solvers
from .pipeline import NumericsConfig

PRESETS = {
    "rb87-q2": {
        "species": {"preset": "rb87"},
        "trap": {
            "nu_T_hz": "350",
            "nu_L_hz": "3.5",
            "q": "2",
            "match_critical_number": "true",
        },
        "sweep": {"N": "1000"},
        "solver": {},
        "output": {"dir": "out", "formats": "csv,json"},
    }
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mass: float
    scattering_length: float
    nu_t_hz: float
    nu_l_hz: float
    q_values: tuple[int, ...]
    match_critical_number: bool
    explicit_k: tuple[tuple[int, float], ...]  # (q, k_SI) overrides
    n_values: tuple[int, ...]
    numerics: NumericsConfig
    out_dir: str
    formats: tuple[str, ...]

    def species(self) -> core.AtomSpecies:
        return core.AtomSpecies(self.mass, self.scattering_length)

    def reference_trap(self) -> core.TrapConfig:
        return core.TrapConfig.harmonic_cigar(self.species(), self.nu_t_hz, self.nu_l_hz)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    species_sec = parser["species"] if parser.has_section("species") else {}
    if species_sec.get("preset", "").strip().lower() == "rb87":
        mass = core.RB87_MASS
        a = core.RB87_SCATTERING_LENGTH
    else:
        try:
            mass = float(species_sec["mass_kg"])
        except KeyError as exc:
            raise ConfigError("species needs preset=rb87 or mass_kg") from exc
        if "scattering_length_m" in species_sec:
            a = float(species_sec["scattering_length_m"])
        elif "scattering_length_a0" in species_sec:
            a = float(species_sec["scattering_length_a0"]) * core.BOHR_RADIUS
        else:
            raise ConfigError(
                "species needs scattering_length_m or scattering_length_a0"
            )

    trap_sec = parser["trap"] if parser.has_section("trap") else {}
    try:
        nu_t = float(trap_sec.get("nu_T_hz", "350"))
        nu_l = float(trap_sec.get("nu_L_hz", "3.5"))
    except ValueError as exc:
        raise ConfigError(f"bad trap frequency: {exc}") from exc
    q_values = _parse_int_list(trap_sec.get("q", "2"))
    if not q_values:
        raise ConfigError("at least one q value required")
    for q in q_values:
        if q < 2 or q % 2 != 0:
            raise ConfigError(f"q values must be even positive integers, got {q}")
    match_nt = _parse_bool(trap_sec.get("match_critical_number", "true"))
    explicit_k = []
    for key, value in trap_sec.items():
        if key.startswith("k_q"):
            explicit_k.append((int(key[3:]), float(value)))
    explicit_k.sort()

    sweep_sec = parser["sweep"] if parser.has_section("sweep") else {}
    n_values = _parse_int_list(sweep_sec.get("n", sweep_sec.get("N", "1000")))
    if not n_values:
        raise ConfigError("sweep needs at least one N")
    if any(n < 1 for n in n_values):
        raise ConfigError("atom numbers must be >= 1")

    solver_sec = parser["solver"] if parser.has_section("solver") else {}
    defaults = NumericsConfig()
    try:
        numerics = NumericsConfig(
            n_rho=int(solver_sec.get("n_rho", defaults.n_rho)),
            n_z=int(solver_sec.get("n_z", defaults.n_z)),
            grid_scale=int(solver_sec.get("grid_scale", defaults.grid_scale)),
            rho_max=float(solver_sec.get("rho_max", defaults.rho_max)),
            tol_mu_1d=float(solver_sec.get("tol_mu_1d", defaults.tol_mu_1d)),
            tol_mu_3d=float(solver_sec.get("tol_mu_3d", defaults.tol_mu_3d)),
            max_steps=int(solver_sec.get("max_steps", defaults.max_steps)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad solver setting: {exc}") from exc

    out_sec = parser["output"] if parser.has_section("output") else {}
    out_dir = out_sec.get("dir", "out")
    formats = tuple(
        tok.strip() for tok in out_sec.get("formats", "csv,json").split(",") if tok.strip()
    )
    for fmt in formats:
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}")

    return RunConfig(
        mass=mass,
        scattering_length=a,
        nu_t_hz=nu_t,
        nu_l_hz=nu_l,
        q_values=q_values,
        match_critical_number=match_nt,
        explicit_k=tuple(explicit_k),
        n_values=n_values,
        numerics=numerics,
        out_dir=out_dir,
        formats=formats,
    )


def serialize_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser["species"] = {
        "mass_kg": f"{cfg.mass:.17g}",
        "scattering_length_m": f"{cfg.scattering_length:.17g}",
    }
    trap = {
        "nu_T_hz": f"{cfg.nu_t_hz:.17g}",
        "nu_L_hz": f"{cfg.nu_l_hz:.17g}",
        "q": ", ".join(str(q) for q in cfg.q_values),
        "match_critical_number": str(cfg.match_critical_number).lower(),
    }
    for q, k in cfg.explicit_k:
        trap[f"k_q{q}"] = f"{k:.17g}"
    parser["trap"] = trap
    parser["sweep"] = {"N": ", ".join(str(n) for n in cfg.n_values)}
    parser["solver"] = {
        "n_rho": str(cfg.numerics.n_rho),
        "n_z": str(cfg.numerics.n_z),
        "grid_scale": str(cfg.numerics.grid_scale),
        "rho_max": f"{cfg.numerics.rho_max:.17g}",
        "tol_mu_1d": f"{cfg.numerics.tol_mu_1d:.17g}",
        "tol_mu_3d": f"{cfg.numerics.tol_mu_3d:.17g}",
        "max_steps": str(cfg.numerics.max_steps),
    }
    parser["output"] = {"dir": cfg.out_dir, "formats": ",".join(cfg.formats)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def load_config(
    config_path: str | None, preset: str | None, overrides: dict | None = None
) -> RunConfig:
    if config_path and preset:
        raise ConfigError("give either --config or --preset, not both")
    if config_path:
        text = Path(config_path).read_text()
    else:
        name = preset or "rb87-q2"
        if name not in PRESETS:
            raise ConfigError(
                f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
            )
        parser = configparser.ConfigParser()
        parser.read_dict(PRESETS[name])
        buf = io.StringIO()
        parser.write(buf)
        text = buf.getvalue()
    cfg = parse_config_text(text)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def build_traps(cfg: RunConfig) -> dict[int, core.TrapConfig]:
    species = cfg.species()
    explicit = dict(cfg.explicit_k)
    traps: dict[int, core.TrapConfig] = {}
    missing: list[int] = []
    for q in cfg.q_values:
        if q == 2:
            traps[2] = cfg.reference_trap()
        elif q in explicit:
            traps[q] = core.TrapConfig(
                omega_T=2.0 * math.pi * cfg.nu_t_hz, k=explicit[q], q=q
            )
        else:
            missing.append(q)
    if missing:
        if not cfg.match_critical_number:
            raise ConfigError(
                f"q values {missing} need explicit k_q entries when "
                f"match_critical_number is off"
            )
        reference = cfg.reference_trap()
        n_t_ref = analysis.critical_atom_number(species, reference)
        for q in missing:
            match = analysis.match_stiffness(species, reference, q, n_t_ref)
            traps[q] = match.trap(reference.omega_T)
    return traps


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@click.group()
def main():
    """Cigar-trap condensate ground states and spatial entanglement."""


def _config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True))(fn)
    fn = click.option("--preset", type=str, default=None)(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None)(fn)
    fn = click.option("--grid-scale", type=int, default=None)(fn)
    return fn


def _effective_config(config_path, preset, out_dir, grid_scale, n, q) -> RunConfig:
    try:
        cfg = load_config(config_path, preset)
        overrides = {}
        if out_dir:
            overrides["out_dir"] = out_dir
        if n:
            overrides["n_values"] = tuple(int(v) for v in n)
        if q:
            qs = tuple(int(v) for v in q)
            for qv in qs:
                if qv < 2 or qv % 2 != 0:
                    raise ConfigError(f"q must be an even positive integer, got {qv}")
            overrides["q_values"] = qs
        if grid_scale:
            overrides["numerics"] = replace(cfg.numerics, grid_scale=grid_scale)
        if overrides:
            cfg = replace(cfg, **overrides)
        return cfg
    except (ConfigError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc


def _runtime_error(exc: Exception) -> click.ClickException:
    err = click.ClickException(f"{type(exc).__name__}: {exc}")
    err.exit_code = 1
    return err


@main.command()
@click.argument("model", type=click.Choice(["gp1d", "quintic", "gp3d"]))
@_config_options
@click.option("--n", "-N", "--N", "n", multiple=True, type=int)
@click.option("--q", multiple=True, type=int)
def solve(model, config_path, preset, out_dir, grid_scale, n, q):
    """Solve one ground state and serialize it with a summary."""
    cfg = _effective_config(config_path, preset, out_dir, grid_scale, n, q)
    if len(cfg.n_values) != 1 or len(cfg.q_values) != 1:
        raise click.UsageError("solve works on a single (q, N) point")
    n_atoms = cfg.n_values[0]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        traps = build_traps(cfg)
        trap = traps[cfg.q_values[0]]
        species = cfg.species()
        numerics = cfg.numerics
        cyl = pipeline.point_grids(species, trap, n_atoms, numerics)
        stem = f"state_{model}_{trap.q}_{n_atoms}"
        if model == "gp3d":
            settings = solvers.SolveSettings(
                tol_mu=numerics.tol_mu_3d, max_steps=numerics.max_steps
            )
            state = solvers.solve_gp3d(species, trap, n_atoms, settings, grid=cyl)
            fld = state.psi
        else:
            settings = solvers.SolveSettings(
                tol_mu=numerics.tol_mu_1d, max_steps=numerics.max_steps
            )
            solver = solvers.solve_gp1d if model == "gp1d" else solvers.solve_quintic
            state = solver(species, trap, n_atoms, settings, grid=cyl.axial)
            fld = state.phi
        field_path = out / f"{stem}.field"
        grids.write_field_binary(fld, field_path)
        written.append(field_path)
        if "csv" in cfg.formats:
            csv_path = out / f"{stem}.csv"
            grids.write_field_csv(fld, csv_path)
            written.append(csv_path)
        summary = {
            "model": model,
            "q": trap.q,
            "N": n_atoms,
            "mu": state.mu,
            "mu_si": state.mu_si,
            "residual": state.residual,
            "n_steps": state.n_steps,
            "grid": grids._grid_descriptor(fld),
        }
        summary_path = out / f"{stem}.json"
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(summary_path)
    except (
        solvers.ConvergenceError,
        solvers.PerturbativeBreakdownError,
        solvers.GridTooSmallError,
        grids.GridMismatchError,
        RuntimeError,
    ) as exc:
        for path in written:
            path.unlink(missing_ok=True)
        raise _runtime_error(exc) from exc
    click.echo(f"mu = {state.mu:.12g} (trap units); wrote {len(written)} files")


@main.command()
@_config_options
@click.option("--n", "-N", "--N", "n", multiple=True, type=int)
@click.option("--q", multiple=True, type=int)
def analyze(config_path, preset, out_dir, grid_scale, n, q):
    """Run the full pipeline for the configured points and write reports."""
    cfg = _effective_config(config_path, preset, out_dir, grid_scale, n, q)
    try:
        _run_sweep_with_config(cfg)
    except RuntimeError as exc:
        raise _runtime_error(exc) from exc
    click.echo(f"analysis artifacts in {cfg.out_dir}")


def _run_sweep_with_config(cfg: RunConfig) -> dict:
    traps = build_traps(cfg)
    manifest = pipeline.run_sweep(
        cfg.species(),
        traps,
        list(cfg.n_values),
        cfg.numerics,
        Path(cfg.out_dir),
        config_hash=config_hash(cfg),
        formats=cfg.formats,
    )
    if manifest["n_failed"]:
        failed = [t for t in manifest["tasks"] if t["status"] != "ok"]
        raise RuntimeError(
            f"{len(failed)} task(s) failed: "
            + "; ".join(f"q={t['q']} N={t['N']}: {t['error']}" for t in failed)
        )
    return manifest


REPRODUCE_TARGETS = ("table1", "fig1", "fig2", "fig3", "fig6", "fig7")
FULL_SWEEP_N = (1000, 2000, 3000, 4000, 5000)
FULL_SWEEP_Q = (2, 4, 10)


@main.command()
@click.argument("target", type=click.Choice(REPRODUCE_TARGETS))
@_config_options
@click.option("--n", "-N", "--N", "n", multiple=True, type=int)
@click.option("--q", multiple=True, type=int)
def reproduce(target, config_path, preset, out_dir, grid_scale, n, q):
    """Recompute the published-table / figure data sets as CSV bundles."""
    if not n:
        n = (1000,) if target in ("fig1", "fig3") else FULL_SWEEP_N
    if not q:
        q = FULL_SWEEP_Q
    cfg = _effective_config(config_path, preset, out_dir, grid_scale, n, q)
    try:
        traps = build_traps(cfg)
        species = cfg.species()
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tasks = [
            (
                (species.mass, species.scattering_length),
                (t.omega_T, t.k, t.q, t.transverse_dims),
                float(n_val),
                cfg.numerics,
            )
            for qv, t in sorted(traps.items())
            for n_val in cfg.n_values
        ]
        outcomes = pipeline.run_tasks(tasks)
        failed = [o for o in outcomes if o.status != "ok"]
        if failed:
            raise RuntimeError(
                "; ".join(f"q={o.q} N={o.n_atoms}: {o.error}" for o in failed)
            )
        pipeline.write_artifacts(outcomes, out, cfg.formats)
        if target == "table1":
            path, all_pass = pipeline.compare_deficits(outcomes, out)
            click.echo(f"comparison: {path} ({'all pass' if all_pass else 'FAILURES'})")
    except RuntimeError as exc:
        raise _runtime_error(exc) from exc
    click.echo(f"{target} data in {cfg.out_dir}")


@main.command()
@_config_options
@click.option("--n", "-N", "--N", "n", multiple=True, type=int)
@click.option("--q", multiple=True, type=int)
def sweep(config_path, preset, out_dir, grid_scale, n, q):
    """Run all configured (q, N) tasks and write the run manifest."""
    cfg = _effective_config(config_path, preset, out_dir, grid_scale, n, q)
    try:
        manifest = _run_sweep_with_config(cfg)
    except RuntimeError as exc:
        raise _runtime_error(exc) from exc
    click.echo(
        f"{len(manifest['tasks'])} tasks ok; manifest at "
        f"{Path(cfg.out_dir) / 'manifest.json'}"
    )


if __name__ == "__main__":
    main()
