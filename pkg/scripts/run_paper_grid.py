#!/usr/bin/env python3
"""Run the full 15-point production grid and write all CSV/JSON artifacts.

Equivalent to `anisobec reproduce table1` but kept as a plain script for
interactive tinkering: edit the atom numbers, trap powers, or grid sizes
below and rerun.  Respects ANISOBEC_WORKERS.
"""

import argparse
import time
from pathlib import Path

from anisobec import analysis, core, pipeline


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out/paper_grid"))
    parser.add_argument("--grid-scale", type=int, default=1)
    parser.add_argument("--n", type=int, nargs="*", default=[1000, 2000, 3000, 4000, 5000])
    parser.add_argument("--q", type=int, nargs="*", default=[2, 4, 10])
    args = parser.parse_args()

    species = core.AtomSpecies.rb87()
    reference = core.TrapConfig.harmonic_cigar(species, 350.0, 3.5)

    t0 = time.perf_counter()
    n_t = analysis.critical_atom_number(species, reference)
    print(f"critical atom number (q=2): {n_t:.1f}")
    traps = {}
    for q in args.q:
        if q == 2:
            traps[2] = reference
            continue
        match = analysis.match_stiffness(species, reference, q, n_t)
        traps[q] = match.trap(reference.omega_T)
        print(f"q={q}: k = {match.k:.6g} J m^-{q}, aspect 1:{match.aspect_ratio:.2f}")
    print(f"trap family ready in {time.perf_counter() - t0:.1f}s")

    numerics = pipeline.NumericsConfig(grid_scale=args.grid_scale)
    manifest = pipeline.run_sweep(
        species, traps, [float(n) for n in args.n], numerics, args.out,
        config_hash=f"script-scale{args.grid_scale}",
    )
    for task in manifest["tasks"]:
        print(task)

    ok = [o for o in manifest["tasks"] if o["status"] == "ok"]
    print(f"{len(ok)}/{len(manifest['tasks'])} points done; artifacts in {args.out}")


if __name__ == "__main__":
    main()
