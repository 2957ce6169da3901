"""Command-line front-end: presets, config-driven runs and convergence studies.

    tdbem run --config run.json
    tdbem example 2t1 --h 0.025 --out out/ex2
    tdbem convergence --example 1 --levels 3 --h 0.1

On failure the exit code is nonzero and stderr carries one JSON line
{"error": <category>, "message": ...}.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assembly import assemble_rhs, assemble_S0, assemble_S_blocks, s0_min_eig
from .config import PRESET_NAMES, RunConfig, preset
from .contact import UzawaConfig, assemble_coupling, complementarity_residual, uzawa_solve
from .errors import ConfigError, TdbemError
from .geometry import build_dof_layout
from .postprocess import (ConvergenceRow, energy, eval_interior, example1_exact,
                          l2_spacetime_error, nodal_trace, observed_orders,
                          richardson_reference, split_unknowns, write_table_csv,
                          write_trace_csv)
from .quadrature import QuadratureConfig

log = logging.getLogger("tdbem_contact")

EXIT_CODES = {"config": 2, "geometry": 2, "usage": 2, "resources": 3, "singular": 4,
              "quadrature": 4, "wavefront": 4, "uzawa_nonconvergence": 5,
              "uzawa_divergence": 5, "convergence": 6, "internal": 1}


@dataclass
class RunResult:
    config: RunConfig
    mesh: object
    grid: object
    layout: object
    system: object
    uzawa: object
    trace: np.ndarray          # (N+1, 2, n_u) nodal displacements
    energy: object
    metadata: dict = field(default_factory=dict)


def _available_memory() -> int | None:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return None


def _storage_dtype(formulation, layout, grid):
    n = layout.block_size
    rows = n if formulation == "symmetric" else 2 * layout.n_psi
    need = rows * max(grid.n_steps - 1, 0) * n * 8
    avail = _available_memory()
    if avail is not None and need > 0.75 * avail:
        if need / 2 > 0.75 * avail:
            raise MemoryError(f"block storage needs {need / 2 ** 30:.1f} GiB in float32, "
                              f"{avail / 2 ** 30:.1f} GiB available")
        return np.float32, need
    return np.float64, need


def _nearest_nodes(points: dict, mesh, layout):
    xs = mesh.vertices[layout.u_vertices]
    out = {}
    for name, p in points.items():
        d = np.hypot(*(xs - np.asarray(p, float)).T)
        j = int(np.argmin(d))
        if d[j] > 0.5 * mesh.h_max:
            raise ConfigError(f"trace_points.{name}: no displacement node near {p}")
        out[name] = j
    return out


def run_config(cfg: RunConfig, write: bool = True, interior_stride: int | None = None) -> RunResult:
    """Assemble, solve and post-process one configuration."""
    t_start = time.perf_counter()
    cfg.validate()
    mesh = cfg.build_mesh()
    mat = cfg.build_material()
    grid = cfg.build_grid()
    layout = build_dof_layout(mesh, grid)
    try:
        quad = QuadratureConfig(**cfg.quadrature)
    except TypeError as exc:
        raise ConfigError(f"quadrature: {exc}") from None
    nodes = _nearest_nodes(cfg.trace_points, mesh, layout)
    dtype, need = _storage_dtype(cfg.formulation, layout, grid)

    t0 = time.perf_counter()
    system = assemble_S_blocks(cfg.formulation, mesh, grid, mat, layout, quad,
                               cache_dir=cfg.cache_dir, dtype=dtype)
    t_assembly = time.perf_counter() - t0
    lam_min = s0_min_eig(system)
    # the symmetric part of the non-symmetric S(0) is indefinite by construction;
    # the positivity diagnostic refers to the energetic (symmetric) S(0)
    lam_energetic = lam_min if cfg.formulation == "symmetric" else \
        s0_min_eig(assemble_S0("symmetric", mesh, grid, mat, layout, quad))
    F = assemble_rhs(cfg.load_function(), mesh, grid, layout, t_breaks=cfg.t_breaks)
    coupling = assemble_coupling(mesh, grid, layout, cfg.gap_function())
    u = cfg.uzawa
    ucfg = UzawaConfig(rho=float(u["rho"]), eps=float(u["eps"]),
                       max_iter=int(u.get("max_iter", 10_000)))
    t0 = time.perf_counter()
    res = uzawa_solve(system, F.per_step, coupling, layout, ucfg)
    t_uzawa = time.perf_counter() - t0
    trace = nodal_trace(res.X, layout)
    en = energy(res.X, system)
    MU = coupling.mtilde(res.U)
    MUG = MU - coupling.MG
    compl = complementarity_residual(res.Lambda, MUG, layout)

    meta = {
        "version": __version__, "python": platform.python_version(), "numpy": np.__version__,
        "config": cfg.to_dict(),
        "h": float(cfg.mesh["h"]), "dt": grid.dt, "h_over_dt": float(cfg.mesh["h"]) / grid.dt,
        "n_elements": mesh.n_elements, "n_steps": grid.n_steps,
        "n_psi": layout.n_psi, "n_u": layout.n_u, "n_lambda": layout.n_lambda,
        "formulation": cfg.formulation,
        "material": {"rho": mat.rho, "cP": mat.cP, "cS": mat.cS},
        "quadrature": quad.as_dict(),
        "uzawa": {"rho": ucfg.rho, "eps": ucfg.eps, "max_iter": ucfg.max_iter,
                  "divergence_window": ucfg.divergence_window,
                  "divergence_factor": ucfg.divergence_factor,
                  "iterations": res.iterations, "converged": res.converged,
                  "method": "response", "initial_multiplier": 0.0},
        "s0_min_eig_sym_part": lam_min,
        "s0_energetic_min_eig": lam_energetic,
        "storage": {"dtype": np.dtype(dtype).name, "bytes": int(system.nbytes),
                    "float64_estimate": int(need)},
        "cache": system.meta.get("cache_key"), "cached": system.meta.get("cached", False),
        "energy_total": en.total,
        "complementarity_residual": compl,
        "mtilde_u_inf": float(np.max(np.abs(MU), initial=0.0)),
        "trace_nodes": {k: mesh.vertices[layout.u_vertices[j]].tolist() for k, j in nodes.items()},
        "timing_s": {"assembly": t_assembly, "uzawa": t_uzawa},
    }
    result = RunResult(cfg, mesh, grid, layout, system, res, trace, en, meta)
    meta["timing_s"]["total"] = time.perf_counter() - t_start
    if write:
        _write_outputs(result, nodes, mat, interior_stride)
        meta["timing_s"]["total"] = time.perf_counter() - t_start
        with open(os.path.join(cfg.out, "metadata.json"), "w") as fh:
            json.dump(result.metadata, fh, indent=2, default=float)
    return result


def _write_outputs(r: RunResult, nodes, mat, interior_stride):
    out = r.config.out
    os.makedirs(out, exist_ok=True)
    times = r.grid.times
    names = list(nodes)
    write_trace_csv(os.path.join(out, "traces.csv"), times,
                    r.trace[:, :, [nodes[k] for k in names]], names)
    nl = r.layout.n_lambda
    if nl:
        rows = []
        mid = (np.arange(r.grid.n_steps) + 0.5) * r.grid.dt
        for l in range(r.grid.n_steps):
            for j, e in enumerate(r.layout.contact_elements):
                rows.append((float(mid[l]), int(e), float(r.uzawa.Lambda[l, nl + j])))
        write_table_csv(os.path.join(out, "multipliers.csv"), ["t", "element", "lambda2"], rows)
    write_table_csv(os.path.join(out, "energy.csv"), ["t", "energy"],
                    [(float(t), float(e)) for t, e in zip(times[1:], r.energy.cumulative)])
    write_table_csv(os.path.join(out, "uzawa_history.csv"), ["iteration", "relative_update"],
                    [(k + 1, float(v)) for k, v in enumerate(r.uzawa.history)])
    if r.config.interior_points:
        N = r.grid.n_steps
        stride = interior_stride or max(1, N // 50)
        psi, u = split_unknowns(r.uzawa.X, r.layout)
        rows = []
        for k in range(0, N + 1, stride):
            for name, p in r.config.interior_points.items():
                v = eval_interior(p, float(times[k]), u, psi, r.mesh, r.grid, mat, r.layout)
                rows.append((float(times[k]), name, float(v[0]), float(v[1])))
        write_table_csv(os.path.join(out, "interior.csv"), ["t", "point", "u1", "u2"], rows)
        r.metadata["interior_stride"] = stride


# ---------------------------------------------------------------- convergence

def example1_errors(r: RunResult) -> dict:
    tr = r.trace
    ex = example1_exact
    l2 = l2_spacetime_error(tr, ex, r.mesh, r.grid, r.layout)
    u1 = l2_spacetime_error(tr, lambda x, t: np.zeros(np.shape(x)), r.mesh, r.grid,
                            r.layout, component=0)
    u2 = l2_spacetime_error(tr, lambda x, t: np.zeros(np.shape(x)), r.mesh, r.grid,
                            r.layout, component=1)
    return {"l2_error": l2, "u1_l2": u1, "u2_l2": u2}


EXAMPLE1_EXACT_ENERGY = 2.0


def convergence(name: str, levels: int, h: float | None = None, formulation=None,
                rho=None, eps=None, T=None, out: str = "out/convergence",
                cache_dir: str | None = None):
    """Dyadic refinement from h; returns (rows, summary) and writes CSV/JSON."""
    if levels < 3:
        raise ConfigError("levels: at least 3 are needed for extrapolation")
    base = preset(name, h=h, formulation=formulation, T=T)
    h0 = float(base.mesh["h"])
    ratio = h0 / base.dt
    energies, l2, hs, dts, failures = [], [], [], [], {}
    for k in range(levels):
        hk = h0 / 2 ** k
        try:
            cfg = preset(name, h=hk, dt=hk / ratio, T=T, formulation=formulation, rho=rho,
                         eps=eps, out=os.path.join(out, f"level{k}"))
            cfg.cache_dir = cache_dir
            r = run_config(cfg, write=True)
        except (TdbemError, MemoryError) as exc:
            failures[k] = {"error": getattr(exc, "category", "resources"), "message": str(exc)}
            log.error("level %d failed: %s", k, exc)
            energies.append(math.nan)
            l2.append(math.nan)
        else:
            energies.append(r.energy.total)
            l2.append(example1_errors(r)["l2_error"] if base.name == "example1" else math.nan)
        hs.append(hk)
        dts.append(hk / ratio)
    summary = {"example": base.name, "formulation": base.formulation, "h_over_dt": ratio,
               "levels": levels, "failures": failures}
    if base.name == "example1" and base.T == 2.0:      # exact energy known for T = 2 only
        ref, p_rich = EXAMPLE1_EXACT_ENERGY, None
        try:
            _, p_rich = richardson_reference(*energies[-3:])
        except ValueError:
            pass
        summary["richardson_order"] = p_rich
    else:
        try:
            ref, p_rich = richardson_reference(*energies[-3:])
        except ValueError as exc:
            ref, p_rich = math.nan, math.nan
            summary["richardson_failure"] = str(exc)
        summary["richardson_order"] = p_rich
    summary["energy_reference"] = ref
    eerr = [abs(e - ref) for e in energies]
    rows = []
    for k in range(levels):
        rate = (math.log(eerr[k - 1] / eerr[k]) / math.log(hs[k - 1] / hs[k])
                if k and eerr[k] > 0 and eerr[k - 1] > 0 else math.nan)
        rows.append(ConvergenceRow(hs[k], dts[k], energies[k], eerr[k], rate))
    ok = [k for k in range(levels) if np.isfinite(eerr[k]) and eerr[k] > 0]
    if len(ok) >= 2:
        summary["energy_error_order"] = observed_orders([hs[k] for k in ok],
                                                        [eerr[k] for k in ok])[1]
    if base.name == "example1":
        ok2 = [k for k in range(levels) if np.isfinite(l2[k])]
        if len(ok2) >= 2:
            summary["l2_error_order"] = observed_orders([hs[k] for k in ok2],
                                                        [l2[k] for k in ok2])[1]
    os.makedirs(out, exist_ok=True)
    table = []
    for k, row in enumerate(rows):
        l2rate = (math.log(l2[k - 1] / l2[k]) / math.log(2.0) if k else math.nan)
        table.append((row.h, row.dt, row.quantity, row.error, row.rate, float(l2[k]), l2rate))
    write_table_csv(os.path.join(out, "convergence.csv"),
                    ["h", "dt", "energy", "energy_error", "energy_rate", "l2_error", "l2_rate"],
                    table)
    with open(os.path.join(out, "convergence.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    return rows, summary


# ---------------------------------------------------------------- argparse

def _common(p):
    p.add_argument("--h", type=float, help="element length")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--formulation", choices=("symmetric", "nonsymmetric"))
    p.add_argument("--rho", type=float, help="Uzawa step")
    p.add_argument("--eps", type=float, help="Uzawa tolerance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--cache-dir", help="reuse assembled blocks from this directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tdbem", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a JSON config")
    p.add_argument("--config", required=True)
    _common(p)
    p = sub.add_parser("example", help="run an experiment preset")
    p.add_argument("name", choices=PRESET_NAMES)
    _common(p)
    p = sub.add_parser("convergence", help="dyadic refinement study")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--example", default="1", choices=PRESET_NAMES)
    _common(p)
    return ap


def _apply_overrides(cfg: RunConfig, a) -> RunConfig:
    d = cfg.to_dict()
    if a.h is not None:
        d["mesh"]["h"] = a.h
    if a.T is not None:
        d["T"] = a.T
    if a.dt is not None or a.T is not None:
        d.pop("n_steps")
        d["dt"] = a.dt if a.dt is not None else cfg.dt
    for key in ("formulation", "out"):
        if getattr(a, key) is not None:
            d[key] = getattr(a, key)
    for key in ("rho", "eps"):
        if getattr(a, key) is not None:
            d["uzawa"] = dict(d["uzawa"], **{key: getattr(a, key)})
    if a.cache_dir is not None:
        d["cache_dir"] = a.cache_dir
    return RunConfig.from_dict(d)


def _summary(r: RunResult) -> dict:
    m = r.metadata
    return {"out": r.config.out, "energy": m["energy_total"],
            "uzawa_iterations": m["uzawa"]["iterations"],
            "s0_energetic_min_eig": m["s0_energetic_min_eig"]}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            _fail("usage", "invalid command line")
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if a.command == "run":
            cfg = _apply_overrides(RunConfig.from_json(a.config), a)
            print(json.dumps(_summary(run_config(cfg))))
        elif a.command == "example":
            cfg = preset(a.name, h=a.h, dt=a.dt, T=a.T, formulation=a.formulation,
                         rho=a.rho, eps=a.eps, out=a.out)
            cfg.cache_dir = a.cache_dir
            print(json.dumps(_summary(run_config(cfg))))
        else:
            if a.dt is not None:
                raise ConfigError("--dt: convergence keeps the preset h/dt ratio; use --h")
            rows, summary = convergence(a.example, a.levels, h=a.h, formulation=a.formulation,
                                        rho=a.rho, eps=a.eps, T=a.T,
                                        out=a.out or f"out/convergence_{a.example}",
                                        cache_dir=a.cache_dir)
            print(json.dumps(summary, default=float))
            if summary["failures"]:
                return _fail("convergence", f"{len(summary['failures'])} level(s) failed")
    except TdbemError as exc:
        return _fail(exc.category, str(exc))
    except MemoryError as exc:
        return _fail("resources", str(exc) or "out of memory")
    except Exception as exc:  # noqa: BLE001  surfaced with a category, not a traceback
        log.debug("internal error", exc_info=True)
        return _fail("internal", f"{type(exc).__name__}: {exc}")
    return 0


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES.get(category, 1)


if __name__ == "__main__":
    sys.exit(main())
