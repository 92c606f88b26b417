"""Experiment pipeline: config, single runs, sweeps, and result files.

A run chains mesh -> partition -> interface classification -> KL expansion
-> chaos projection -> subdomain assembly -> preconditioner -> PCGM ->
interior recovery -> moment fields, and writes a JSON report plus VTK field
files, a convergence figure, and the eigenvalue-decay CSV/figure.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import klexp, krylov, oracle, pce, precond, schur
from .fem import DiffusionProblem, ElasticityProblem, lame_constants
from .mesh import build_box_mesh, classify_interface, partition_boxes
from .vtkio import write_vtk

logger = logging.getLogger("stochdd.runner")

PRECONDITIONERS = ("nocoarse", "vertex", "wirebasket")


class StageError(RuntimeError):
    """Pipeline failure annotated with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    problem: str = "poisson"
    nx: int = 4
    ny: int = 4
    nz: int = 4
    lx: float | None = None
    ly: float | None = None
    lz: float | None = None
    px: int = 2
    py: int = 2
    pz: int = 2
    num_rvs: int = 3
    input_order: int = 2
    output_order: int = 3
    sigma: float = 0.3
    bx: float = 1.0
    by: float = 1.0
    bz: float = 1.0
    preconditioner: str = "wirebasket"
    tol: float = 1e-5
    maxit: int = 500
    seed: int = 2024
    beam_aspect: float = 0.2
    nu: float = 0.2778
    e0: float = 2.556
    rho: float = 1.0
    mean_realization_seed: int | None = None
    forcing: float = 1.0
    coeff_fields: tuple[int, ...] = (1, 2, 4, 6)
    write_vtk: bool = True
    write_figures: bool = True

    @property
    def gravity(self) -> float:
        return 0.4 * self.beam_aspect**2

    def extents(self) -> tuple[float, float, float]:
        if self.lx is not None:
            return (self.lx, self.ly or self.lx, self.lz or self.lx)
        if self.problem == "elasticity":
            return (1.0, self.beam_aspect, self.beam_aspect)
        return (1.0, 1.0, 1.0)

    def validate(self) -> None:
        if self.problem not in ("poisson", "elasticity"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.nx % self.px or self.ny % self.py or self.nz % self.pz:
            raise ValueError(
                f"partition ({self.px},{self.py},{self.pz}) does not divide "
                f"cells ({self.nx},{self.ny},{self.nz})"
            )
        if self.input_order > self.output_order:
            warnings.warn(
                "input expansion order exceeds the output order; Galerkin "
                "projection discards the excess input terms",
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["coeff_fields"] = list(self.coeff_fields)
        data["gravity"] = self.gravity
        return data


_INT_KEYS = {
    "nx", "ny", "nz", "px", "py", "pz", "num_rvs", "input_order",
    "output_order", "maxit", "seed", "mean_realization_seed",
}
_FLOAT_KEYS = {
    "lx", "ly", "lz", "sigma", "bx", "by", "bz", "tol", "beam_aspect",
    "nu", "e0", "rho", "forcing",
}
_BOOL_KEYS = {"write_vtk", "write_figures"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        return raw.lower() in ("1", "true", "yes", "on")
    if key == "coeff_fields":
        return tuple(int(v) for v in raw.split()) if raw else ()
    return raw


def apply_overrides(config: RunConfig, pairs: dict[str, str]) -> RunConfig:
    for key, raw in pairs.items():
        if not hasattr(config, key):
            raise KeyError(f"unknown config key {key!r}")
        setattr(config, key, _coerce(key, raw))
    return config


def load_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Flat key = value config file plus command-line overrides."""
    config = RunConfig()
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            apply_overrides(config, {key: raw})
    if overrides:
        apply_overrides(config, overrides)
    config.validate()
    return config


@dataclass
class RunResult:
    config: RunConfig
    report: krylov.SolveReport
    dims: dict
    timings: dict
    summary: dict
    mean: np.ndarray
    sd: np.ndarray
    solution_blocks: np.ndarray  # (p_out, nnodes, ncomp)
    norms: np.ndarray
    regularizations: list
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "dims": self.dims,
            "timings": self.timings,
            "summary": self.summary,
            "solver": self.report.to_dict(),
            "regularizations": self.regularizations,
            "paths": {k: str(v) for k, v in self.paths.items()},
        }


def compute_moments(solution_blocks: np.ndarray, norms: np.ndarray):
    """Mean (chaos block 0) and SD sqrt(sum_{j>=1} u_j^2 <psi_j^2>) nodal fields."""
    mean = solution_blocks[0]
    var = np.tensordot(norms[1:], solution_blocks[1:] ** 2, axes=(0, 0))
    return mean, np.sqrt(var)


def _stage(timings: dict, name: str):
    class _Timer:
        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - self.start
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False

    return _Timer()


@dataclass
class ProblemSetup:
    """Mesh-level stochastic input model shared by the solver and the oracles."""

    problem: object
    tensor: object
    basis_in: pce.PCBasis
    basis_out: pce.PCBasis
    kle: klexp.KLExpansion | None
    modes: np.ndarray
    g0: np.ndarray


def build_mesh(config: RunConfig):
    lx, ly, lz = config.extents()
    dirichlet = "xmin" if config.problem == "elasticity" else "all"
    return build_box_mesh(config.nx, config.ny, config.nz, lx, ly, lz, dirichlet)


def build_problem(config: RunConfig, mesh) -> ProblemSetup:
    """KL expansion, chaos bases, and the lognormal coefficient projection."""
    if config.sigma > 0:
        kernel = klexp.CovarianceKernel(config.sigma, config.bx, config.by, config.bz)
        cov = klexp.assemble_covariance(mesh.nodes, kernel)
        kle = klexp.solve_kle(cov, mesh.lumped_weights(), config.num_rvs)
        modes = kle.modes
    else:
        kle = None
        modes = np.zeros((config.num_rvs, mesh.num_nodes))

    basis_in = pce.enumerate_basis(config.num_rvs, config.input_order)
    basis_out = pce.enumerate_basis(config.num_rvs, config.output_order)
    tensor = pce.triple_products(basis_in, basis_out)
    g0 = np.zeros(mesh.num_nodes)
    if config.problem == "elasticity":
        g0 += np.log(config.e0)
    if config.mean_realization_seed is not None and config.sigma > 0:
        rng = np.random.default_rng(config.mean_realization_seed)
        g0 = g0 + rng.standard_normal(config.num_rvs) @ modes
    coeff_pce = pce.project_lognormal(g0, modes, basis_in)
    if config.problem == "elasticity":
        problem = ElasticityProblem(
            e_pce=coeff_pce, nu=config.nu, rho=config.rho, gravity=config.gravity
        )
    else:
        problem = DiffusionProblem(coeff_pce=coeff_pce, forcing=config.forcing)
    return ProblemSetup(
        problem=problem,
        tensor=tensor,
        basis_in=basis_in,
        basis_out=basis_out,
        kle=kle,
        modes=modes,
        g0=g0,
    )


def run_single(config: RunConfig, outdir=None) -> RunResult:
    config.validate()
    timings: dict[str, float] = {}
    ncomp = 3 if config.problem == "elasticity" else 1

    with _stage(timings, "mesh"):
        mesh = build_mesh(config)

    with _stage(timings, "partition"):
        partition = partition_boxes(mesh, config.px, config.py, config.pz)
        classification = classify_interface(partition, mesh)

    with _stage(timings, "input_model"):
        setup = build_problem(config, mesh)
        problem, tensor = setup.problem, setup.tensor
        basis_in, basis_out, kle = setup.basis_in, setup.basis_out, setup.kle

    with _stage(timings, "assembly"):
        ctx = schur.build_schur_context(mesh, partition, classification, problem, tensor)

    with _stage(timings, "preconditioner"):
        state = precond.build_preconditioner(ctx, config.preconditioner)

    with _stage(timings, "rhs"):
        rhs = schur.schur_rhs(ctx)

    with _stage(timings, "pcgm"):
        u_gamma, report = krylov.pcgm(
            lambda x: schur.schur_apply(ctx, x),
            state.apply,
            rhs,
            tol=config.tol,
            maxit=config.maxit,
        )

    with _stage(timings, "recovery"):
        interiors = schur.recover_interior(ctx, u_gamma)
        blocks = np.zeros((tensor.p_out, mesh.num_nodes, ncomp))
        n_gamma = classification.num_gamma
        blocks[:, classification.gamma_nodes, :] = u_gamma.reshape(tensor.p_out, n_gamma, ncomp)
        for sub, u_i in zip(ctx.subdomains, interiors):
            blocks[:, sub.interior_nodes, :] = u_i.reshape(
                tensor.p_out, len(sub.interior_nodes), ncomp
            )

    with _stage(timings, "moments"):
        mean, sd = compute_moments(blocks, basis_out.norms)
        summary = _summarize(config, mesh, mean, sd)

    dims = {
        "nodes": mesh.num_nodes,
        "tets": mesh.num_tets,
        "subdomains": partition.num_subdomains,
        "det_dofs": ncomp * (mesh.num_nodes - len(mesh.dirichlet_nodes)),
        "interface_nodes": classification.num_gamma,
        "interface_dim": ctx.dim,
        "coarse_dim": state.coarse_dim,
        "p_in": len(basis_in),
        "p_out": len(basis_out),
        "tasks": min(partition.num_subdomains, _worker_count()),
    }
    result = RunResult(
        config=config,
        report=report,
        dims=dims,
        timings=timings,
        summary=summary,
        mean=mean if ncomp > 1 else mean[:, 0],
        sd=sd if ncomp > 1 else sd[:, 0],
        solution_blocks=blocks,
        norms=basis_out.norms,
        regularizations=state.regularizations,
    )
    if outdir is not None:
        with _stage(timings, "output"):
            _write_outputs(result, mesh, partition, classification, kle, Path(outdir))
    return result


def _worker_count() -> int:
    from ._parallel import thread_count

    return thread_count()


def _summarize(config: RunConfig, mesh, mean: np.ndarray, sd: np.ndarray) -> dict:
    if config.problem == "elasticity":
        lx, ly, lz = mesh.extents
        tip = int(np.argmin(np.linalg.norm(mesh.nodes - [lx, ly / 2, lz / 2], axis=1)))
        mean_mag = np.linalg.norm(mean, axis=1)
        sd_mag = np.linalg.norm(sd, axis=1)
        lam, mu = lame_constants(config.e0, config.nu)
        return {
            "tip_node": tip,
            "tip_mean_deflection": float(-mean[tip, 1]),
            "tip_sd_deflection": float(sd[tip, 1]),
            "max_mean_magnitude": float(mean_mag.max()),
            "max_sd_magnitude": float(sd_mag.max()),
            "lame_lambda": lam,
            "lame_mu": mu,
        }
    return {
        "max_mean": float(mean.max()),
        "max_sd": float(sd.max()),
    }


def _write_outputs(result: RunResult, mesh, partition, classification, kle, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    config = result.config
    ncomp = 3 if config.problem == "elasticity" else 1

    point_fields: dict[str, np.ndarray] = {}
    if ncomp == 1:
        point_fields["mean"] = result.mean
        point_fields["sd"] = result.sd
        for j in config.coeff_fields:
            if 0 < j < result.solution_blocks.shape[0]:
                point_fields[f"u{j}"] = result.solution_blocks[j, :, 0]
    else:
        for c, name in enumerate("xyz"):
            point_fields[f"mean_{name}"] = result.mean[:, c]
            point_fields[f"sd_{name}"] = result.sd[:, c]
        point_fields["mean_magnitude"] = np.linalg.norm(result.mean, axis=1)
        point_fields["sd_magnitude"] = np.linalg.norm(result.sd, axis=1)
        for j in config.coeff_fields:
            if 0 < j < result.solution_blocks.shape[0]:
                point_fields[f"u{j}_magnitude"] = np.linalg.norm(
                    result.solution_blocks[j], axis=1
                )

    if config.write_vtk:
        fields_path = outdir / "fields.vtk"
        write_vtk(fields_path, mesh, point_data=point_fields, title="solution moments")
        mesh_path = outdir / "mesh.vtk"
        cell_sub = partition.element_subdomain.astype(np.int32)
        write_vtk(
            mesh_path,
            mesh,
            point_data={"interface_class": classification.kind.astype(np.int32)},
            cell_data={"subdomain": cell_sub},
            title="partition and interface classes",
        )
        result.paths["fields_vtk"] = fields_path
        result.paths["mesh_vtk"] = mesh_path

    if kle is not None:
        energy_csv = outdir / "kle_energy.csv"
        klexp.dump_energy_csv(kle, energy_csv)
        result.paths["kle_energy_csv"] = energy_csv

    if config.write_figures:
        from . import plots

        conv_path = outdir / "convergence.png"
        plots.convergence_plot(result.report, conv_path)
        result.paths["convergence_png"] = conv_path
        if kle is not None:
            energy_png = outdir / "kle_energy.png"
            plots.energy_plot(kle, energy_png)
            result.paths["kle_energy_png"] = energy_png

    json_path = outdir / "result.json"
    with open(json_path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    result.paths["result_json"] = json_path


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SWEEP_CSV_COLUMNS = [
    "preset", "axis", "value", "problem", "preconditioner", "ns",
    "num_rvs", "output_order", "p_out", "iterations", "converged",
    "kappa_est", "t_assembly", "t_precond", "t_pcgm", "t_total",
    "dim_interface", "dim_coarse", "error",
]


def _with(config: RunConfig, **kw) -> RunConfig:
    data = asdict(config)
    data.update(kw)
    data["coeff_fields"] = tuple(data["coeff_fields"])
    return RunConfig(**data)


def sweep_presets(base: RunConfig) -> dict[str, list[tuple[str, object, RunConfig]]]:
    """The named experiment templates: (axis name, axis value, config) rows."""
    partitions = [(2, 1, 1), (2, 2, 1), (2, 2, 2)]

    def fit_cells(cfg: RunConfig) -> RunConfig:
        # round cells up to the nearest multiple of the partition
        return _with(
            cfg,
            nx=-(-cfg.nx // cfg.px) * cfg.px,
            ny=-(-cfg.ny // cfg.py) * cfg.py,
            nz=-(-cfg.nz // cfg.pz) * cfg.pz,
        )

    presets: dict[str, list[tuple[str, object, RunConfig]]] = {}

    presets["iters-vs-mesh"] = [
        ("cells", n, fit_cells(_with(base, nx=n, ny=n, nz=n)))
        for n in sorted({max(base.px, base.nx), base.nx + 2, base.nx + 4})
    ]
    presets["iters-vs-subdomains"] = [
        ("subdomains", px * py * pz, fit_cells(_with(base, px=px, py=py, pz=pz)))
        for (px, py, pz) in partitions
    ]
    per_sub = max(2, base.nx // max(base.px, 1))
    presets["iters-vs-subdomains-weak"] = [
        (
            "subdomains",
            px * py * pz,
            _with(
                base,
                px=px, py=py, pz=pz,
                nx=per_sub * px, ny=per_sub * py, nz=per_sub * pz,
                num_rvs=rvs,
            ),
        )
        for (px, py, pz), rvs in zip(partitions, (2, 3, 4))
    ]
    presets["iters-vs-pce"] = [
        ("num_rvs", rvs, _with(base, num_rvs=rvs)) for rvs in (2, 3, 4)
    ]
    presets["iters-vs-order"] = [
        ("output_order", p, _with(base, output_order=p)) for p in (2, 3, 4)
    ]
    presets["precond-compare"] = [
        ("preconditioner", kind, _with(base, preconditioner=kind))
        for kind in PRECONDITIONERS
    ]
    return presets


def run_sweep(preset: str, base: RunConfig, outdir=None) -> list[dict]:
    presets = sweep_presets(base)
    if preset not in presets:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(presets)}")
    rows: list[dict] = []
    for axis, value, config in presets[preset]:
        row = {
            "preset": preset,
            "axis": axis,
            "value": value,
            "problem": config.problem,
            "preconditioner": config.preconditioner,
            "ns": config.px * config.py * config.pz,
            "num_rvs": config.num_rvs,
            "output_order": config.output_order,
            "error": "",
        }
        try:
            result = run_single(config)
            row.update(
                p_out=result.dims["p_out"],
                iterations=result.report.iterations,
                converged=result.report.converged,
                kappa_est=result.report.condition_estimate,
                t_assembly=result.timings.get("assembly", 0.0),
                t_precond=result.timings.get("preconditioner", 0.0),
                t_pcgm=result.timings.get("pcgm", 0.0),
                t_total=sum(result.timings.values()),
                dim_interface=result.dims["interface_dim"],
                dim_coarse=result.dims["coarse_dim"],
            )
        except Exception as exc:  # failures are flagged, the sweep continues
            logger.warning("sweep run %s=%r failed: %s", axis, value, exc)
            row.update(
                p_out=None, iterations=None, converged=False, kappa_est=None,
                t_assembly=None, t_precond=None, t_pcgm=None, t_total=None,
                dim_interface=None, dim_coarse=None, error=str(exc),
            )
        rows.append(row)

    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, outdir / "sweep.csv")
        from . import plots

        plots.sweep_plot(rows, outdir / "sweep.png")
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=SWEEP_CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in SWEEP_CSV_COLUMNS})


def oracle_check(config: RunConfig) -> dict:
    """Cross-check the DD solution against the dense direct solve."""
    result = run_single(_with(config, write_vtk=False, write_figures=False))
    mesh = build_mesh(config)
    setup = build_problem(config, mesh)
    ref = oracle.dense_solve(mesh, setup.problem, setup.tensor)
    dd = result.solution_blocks[:, ref.free_nodes, :].reshape(-1)
    rel = float(np.linalg.norm(dd - ref.solution) / np.linalg.norm(ref.solution))
    return {
        "relative_l2_error": rel,
        "iterations": result.report.iterations,
        "converged": result.report.converged,
        "dense_dim": int(ref.solution.shape[0]),
    }
