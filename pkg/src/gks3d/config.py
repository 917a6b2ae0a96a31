"""Case configuration: INI file parsing, mesh sourcing, solver options.

Sections: [mesh] [scheme] [physics] [solver] [patches] [output].  Patch
lines read `<name> = <kind> key=value ...`; vector values are
comma-separated.  Defaults follow the reference run parameters: CFL=2,
Krylov dimension 10, 3 restarts, 2 Jacobi sweeps, linear weight 0.025,
specific-heat ratio 1.4.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .boundary import PatchSpec
from .mesh import Mesh, generate_box_mesh, load_mesh
from .stepping import SolverOptions


class ConfigError(ValueError):
    pass


@dataclass
class CaseConfig:
    # mesh
    mesh_source: str = "box"
    mesh_path: str | None = None
    extent: tuple = (1.0, 1.0, 1.0)
    divisions: tuple = (8, 8, 8)
    split: str = "tet"
    perturb: float = 0.0
    seed: int | None = None
    periodic: tuple = ()
    # scheme
    scheme: str = "weno_gmres"
    weno_eps: float = 1e-6
    linear_weight: float = 0.025
    weights: str = "nonlinear"
    # physics
    model: str = "inviscid"
    mu: float = 0.0
    gamma: float = 1.4
    reference: tuple = (1.0, 0.0, 0.0, 0.0, 1.0 / 1.4)
    # solver
    cfl: float = 2.0
    krylov_dim: int = 10
    restarts: int = 3
    jacobi_sweeps: int = 2
    gmres_rtol: float = 0.0
    time_step: str = "local"
    threshold: float = 1e-10
    max_steps: int = 1000
    # patches
    patches: dict = field(default_factory=dict)
    # output
    outdir: str = "out"
    cadence: int = 100
    write_gradients: bool = False

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            scheme=self.scheme,
            model=self.model,
            mu=self.mu,
            gamma=self.gamma,
            cfl=self.cfl,
            krylov_dim=self.krylov_dim,
            restarts=self.restarts,
            jacobi_sweeps=self.jacobi_sweeps,
            gmres_rtol=self.gmres_rtol,
            weno_eps=self.weno_eps,
            linear_weight=self.linear_weight,
            weights=self.weights,
            time_step=self.time_step,
            patches=self.patches,
        )

    def build_mesh(self) -> Mesh:
        if self.mesh_source == "box":
            return generate_box_mesh(
                self.extent,
                self.divisions,
                split=self.split,
                perturb=self.perturb,
                seed=self.seed,
                periodic=self.periodic,
            )
        if self.mesh_source == "file":
            if not self.mesh_path:
                raise ConfigError("[mesh] source=file needs path=")
            pairs = _periodic_pairs(self.patches)
            return load_mesh(self.mesh_path, periodic_pairs=pairs)
        raise ConfigError(f"unknown mesh source {self.mesh_source!r}")


def _periodic_pairs(patches):
    pairs = []
    seen = set()
    for name, spec in patches.items():
        if spec.kind != "periodic" or name in seen:
            continue
        if not spec.mate or spec.mate not in patches:
            raise ConfigError(f"periodic patch {name!r} needs mate=<existing patch>")
        pairs.append((name, spec.mate))
        seen.add(name)
        seen.add(spec.mate)
    return pairs


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _parse_patch(name, text, default_reference):
    tokens = text.split()
    if not tokens:
        raise ConfigError(f"patch {name!r}: empty spec")
    kind = tokens[0]
    kwargs = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"patch {name!r}: expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        if key == "reference":
            kwargs["reference"] = np.array(_floats(val))
        elif key == "lambda_wall":
            kwargs["lambda_wall"] = float(val)
        elif key == "velocity":
            kwargs["velocity"] = np.array(_floats(val))
        elif key == "mate":
            kwargs["mate"] = val
        else:
            raise ConfigError(f"patch {name!r}: unknown key {key!r}")
    if kind in ("farfield_riemann", "supersonic_inlet") and "reference" not in kwargs:
        kwargs["reference"] = np.array(default_reference)
    try:
        return PatchSpec(name, kind, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> CaseConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = CaseConfig()

    if parser.has_section("mesh"):
        m = parser["mesh"]
        cfg.mesh_source = m.get("source", cfg.mesh_source)
        cfg.mesh_path = m.get("path", cfg.mesh_path)
        if "extent" in m:
            cfg.extent = _floats(m["extent"])
        if "divisions" in m:
            cfg.divisions = _ints(m["divisions"])
        cfg.split = m.get("split", cfg.split)
        cfg.perturb = m.getfloat("perturb", cfg.perturb)
        if "seed" in m:
            cfg.seed = m.getint("seed")
        if "periodic" in m:
            axes = m["periodic"].split()
            if any(a not in ("x", "y", "z") for a in axes):
                raise ConfigError(f"[mesh] periodic must list axes, got {m['periodic']!r}")
            cfg.periodic = tuple(axes)

    if parser.has_section("scheme"):
        s = parser["scheme"]
        cfg.scheme = s.get("name", cfg.scheme)
        cfg.weno_eps = s.getfloat("epsilon", cfg.weno_eps)
        cfg.linear_weight = s.getfloat("linear_weight", cfg.linear_weight)
        cfg.weights = s.get("weights", cfg.weights)

    if parser.has_section("physics"):
        p = parser["physics"]
        cfg.model = p.get("model", cfg.model)
        cfg.mu = p.getfloat("mu", cfg.mu)
        cfg.gamma = p.getfloat("gamma", cfg.gamma)
        if "reference" in p:
            cfg.reference = _floats(p["reference"])
            if len(cfg.reference) != 5:
                raise ConfigError("[physics] reference needs 5 values: rho U V W p")

    if parser.has_section("solver"):
        s = parser["solver"]
        cfg.cfl = s.getfloat("cfl", cfg.cfl)
        cfg.krylov_dim = s.getint("krylov_dim", cfg.krylov_dim)
        cfg.restarts = s.getint("restarts", cfg.restarts)
        cfg.jacobi_sweeps = s.getint("jacobi_sweeps", cfg.jacobi_sweeps)
        cfg.gmres_rtol = s.getfloat("gmres_rtol", cfg.gmres_rtol)
        cfg.time_step = s.get("time_step", cfg.time_step)
        cfg.threshold = s.getfloat("threshold", cfg.threshold)
        cfg.max_steps = s.getint("max_steps", cfg.max_steps)

    if parser.has_section("patches"):
        for name in parser["patches"]:
            cfg.patches[name] = _parse_patch(name, parser["patches"][name], cfg.reference)

    if parser.has_section("output"):
        o = parser["output"]
        cfg.outdir = o.get("directory", cfg.outdir)
        cfg.cadence = o.getint("cadence", cfg.cadence)
        cfg.write_gradients = o.getboolean("gradients", cfg.write_gradients)

    return cfg
