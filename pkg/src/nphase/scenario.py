"""Run configuration, initial conditions, the time loop and file outputs.

Configs are flat ``key = value`` text with ``#`` comments.  Phase labels in
configs and file names are 1-based.
"""
from __future__ import annotations

import contextlib
import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .allen_cahn import SCHEMES, SEMI_IMPLICIT, AcConfig, AllenCahnSolver
from .cahn_hilliard import DEFAULT_M0, CahnHilliardSolver, ChConfig
from .diagnostics import StepReport, report
from .fem import Mesh, PhaseField, assemble_operators, build_uniform_mesh, integrate_energy
from .potential import HOMOGENEOUS, INHOMOGENEOUS, PotentialSpec
from .sparsesolve import SolverError
from .tension import SurfaceTensionMatrix, TensionError, assemble_lambda_special, spd_check, validate_sigma

log = logging.getLogger(__name__)

ALLEN_CAHN = "allen_cahn"
CAHN_HILLIARD = "cahn_hilliard"

EXIT_OK = 0
EXIT_NOT_SPD = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class ConfigError(ValueError):
    pass


# -- initial conditions -----------------------------------------------------


@dataclass(frozen=True)
class GrainsIC:
    count: int = 1000
    r_min: float = 0.01
    r_max: float = 0.04


@dataclass(frozen=True)
class SpinodalIC:
    rho: tuple = ()
    amplitude: float = 0.04


@dataclass(frozen=True)
class RegionsIC:
    regions: tuple = ()  # ((x0, x1, y0, y1), phase) with 0-based phase, later wins


def _indicator_field(mesh: Mesh, labels: np.ndarray, n_phases: int) -> PhaseField:
    c = np.zeros((mesh.n_nodes, n_phases))
    c[np.arange(mesh.n_nodes), labels] = 1.0
    return PhaseField.from_full(mesh, c)


def init_grains(mesh: Mesh, n_phases: int, count: int, r_min: float, r_max: float, seed: int) -> PhaseField:
    """Overlapping random discs; a node takes the phase of the last disc covering it.

    For each disc the generator (PCG64) draws four uniforms in the order
    centre x, centre y, radius, phase.  Nodes outside every disc take the
    phase of the nearest centre.
    """
    if count < 1 or not 0 < r_min <= r_max:
        raise ValueError("need count >= 1 and 0 < r_min <= r_max")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.random((count, 4))
    centres = draws[:, :2]
    radii = r_min + (r_max - r_min) * draws[:, 2]
    phases = np.minimum((n_phases * draws[:, 3]).astype(int), n_phases - 1)
    labels = np.full(mesh.n_nodes, -1)
    for centre, r, phase in zip(centres, radii, phases):
        inside = np.sum((mesh.nodes - centre) ** 2, axis=1) <= r * r
        labels[inside] = phase
    uncovered = labels < 0
    if np.any(uncovered):
        _, nearest = cKDTree(centres).query(mesh.nodes[uncovered])
        labels[uncovered] = phases[nearest]
    return _indicator_field(mesh, labels, n_phases)


def init_spinodal(mesh: Mesh, rho, amplitude: float, seed: int) -> PhaseField:
    """``c = rho + (amplitude N / 2) P xi`` with ``xi`` uniform on ``[0, 1]^N`` per node.

    ``P`` removes the nodal mean of ``xi``, so every node sums to one and no
    component moves by more than ``amplitude`` from ``rho``.
    """
    rho = np.asarray(rho, dtype=float)
    if abs(rho.sum() - 1.0) > 1e-9:
        raise ValueError(f"rho must sum to 1, got {rho.sum()}")
    n_phases = rho.size
    rng = np.random.Generator(np.random.PCG64(seed))
    xi = rng.random((mesh.n_nodes, n_phases))
    xi -= xi.mean(axis=1, keepdims=True)
    return PhaseField.from_full(mesh, rho + 0.5 * amplitude * n_phases * xi)


def init_regions(mesh: Mesh, regions, n_phases: int) -> PhaseField:
    """Sharp field from closed rectangles ``((x0, x1, y0, y1), phase)``; later entries win."""
    labels = np.full(mesh.n_nodes, -1)
    x, y = mesh.nodes.T
    for (x0, x1, y0, y1), phase in regions:
        if not 0 <= phase < n_phases:
            raise ValueError(f"phase {phase + 1} out of range")
        labels[(x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)] = phase
    if np.any(labels < 0):
        i = int(np.flatnonzero(labels < 0)[0])
        raise ValueError(f"node at {tuple(mesh.nodes[i])} is not covered by any region")
    return _indicator_field(mesh, labels, n_phases)


def smooth_interfaces(field: PhaseField, width: float) -> PhaseField:
    """Replace sharp indicators by a clamped linear profile of the signed distance.

    Interfaces are taken halfway between nodes; the profiles are normalised
    so the phases still sum to one.
    """
    if width <= 0:
        return field
    mesh = field.mesh
    c = field.full()
    h = mesh.h
    profiles = np.empty_like(c)
    for i in range(c.shape[1]):
        inside = (c[:, i] > 0.5).reshape(mesh.shape)
        d_in = ndimage.distance_transform_edt(inside) * h - 0.5 * h
        d_out = ndimage.distance_transform_edt(~inside) * h - 0.5 * h
        signed = np.where(inside, d_in, -d_out).ravel()
        profiles[:, i] = np.clip(0.5 + signed / width, 0.0, 1.0)
    profiles /= profiles.sum(axis=1, keepdims=True)
    return PhaseField.from_full(mesh, profiles)


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    model: str = ALLEN_CAHN
    scheme: str = SEMI_IMPLICIT
    n: int = 64
    n_phases: int = 3
    eta: float = 0.01
    gamma: float | None = None
    m0: float = DEFAULT_M0
    s: float = 0.0
    potential: str | None = None  # homogeneous / inhomogeneous; None picks by tensions
    k: float = 1e-5
    ramp: tuple = ()  # ((step, k), ...) sorted by step
    steps: int = 100
    snapshot_every: int = 0
    seed: int = 0
    sigma_default: float = 1.0
    sigma_pairs: dict = field(default_factory=dict)  # {(i, j): value}, 0-based, i < j
    initial: object = field(default_factory=SpinodalIC)
    smooth_width: float = 0.0
    output_dir: str = "output"
    newton_rtol: float = 1e-5
    newton_atol: float = 1e-12
    newton_max_iter: int = 50
    linear_tol: float = 1e-10

    def tensions(self) -> SurfaceTensionMatrix:
        return SurfaceTensionMatrix.from_pairs(self.n_phases, self.sigma_pairs, self.sigma_default)

    def potential_spec(self) -> PotentialSpec:
        t = self.tensions()
        kind = self.potential
        if kind is None:
            kind = HOMOGENEOUS if t.is_homogeneous() and self.s == 0 else INHOMOGENEOUS
        if kind == HOMOGENEOUS:
            if not t.is_homogeneous():
                raise ConfigError("the homogeneous potential needs equal tensions")
            return PotentialSpec.homogeneous(t.sigma[0, 1], self.n_phases)
        return PotentialSpec.inhomogeneous(t, self.s)

    def step_size(self, step: int) -> float:
        """Time step used to go from ``step`` to ``step + 1``."""
        k = self.k
        for start, value in self.ramp:
            if step >= start:
                k = value
        return k

    def scheme_config(self):
        common = dict(
            eta=self.eta,
            k=self.k,
            scheme=self.scheme,
            newton_rtol=self.newton_rtol,
            newton_atol=self.newton_atol,
            newton_max_iter=self.newton_max_iter,
            linear_tol=self.linear_tol,
        )
        if self.model == ALLEN_CAHN:
            return AcConfig(gamma=self.gamma, **common)
        return ChConfig(m0=self.m0, **common)


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _integer(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def _vector(text: str) -> tuple:
    return tuple(_number(t) for t in text.split(","))


_SCALARS = {
    "n": ("n", _integer),
    "phases": ("n_phases", _integer),
    "eta": ("eta", _number),
    "gamma": ("gamma", _number),
    "m0": ("m0", _number),
    "s": ("s", _number),
    "k": ("k", _number),
    "steps": ("steps", _integer),
    "snapshot_every": ("snapshot_every", _integer),
    "seed": ("seed", _integer),
    "sigma.default": ("sigma_default", _number),
    "smooth_width": ("smooth_width", _number),
    "output_dir": ("output_dir", str.strip),
    "newton.rtol": ("newton_rtol", _number),
    "newton.atol": ("newton_atol", _number),
    "newton.max_iter": ("newton_max_iter", _integer),
    "linear.tol": ("linear_tol", _number),
}

_CHOICES = {
    "model": (ALLEN_CAHN, CAHN_HILLIARD),
    "scheme": SCHEMES,
    "potential": (HOMOGENEOUS, INHOMOGENEOUS),
    "initial": ("grains", "spinodal", "regions"),
}

_SIGMA_KEY = re.compile(r"sigma\.(\d+)\.(\d+)$")
_REGION_KEY = re.compile(r"region\.(\d+)$")


def parse_lines(text: str) -> dict:
    """``key = value`` pairs in file order; later duplicates win."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        entries[key] = value
    return entries


def _parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def config_from_entries(entries: dict) -> RunConfig:
    values = {}
    sigma_pairs = {}
    grains, spinodal = {}, {}
    regions = []
    initial = None
    for key, value in entries.items():
        if key in _SCALARS:
            name, conv = _SCALARS[key]
            values[name] = conv(value)
        elif key in _CHOICES:
            if value not in _CHOICES[key]:
                raise ConfigError(f"{key} must be one of {', '.join(_CHOICES[key])}; got {value!r}")
            if key == "initial":
                initial = value
            else:
                values[key] = value
        elif key == "ramp":
            ramp = []
            for item in filter(None, (t.strip() for t in value.split(","))):
                if ":" not in item:
                    raise ConfigError(f"ramp entry {item!r} is not step:k")
                step, k = item.split(":", 1)
                ramp.append((_integer(step), _number(k)))
            values["ramp"] = tuple(sorted(ramp))
        elif m := _SIGMA_KEY.match(key):
            i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
            if i == j:
                raise ConfigError(f"{key}: diagonal tensions are fixed at zero")
            sigma_pairs[(min(i, j), max(i, j))] = _number(value)
        elif key == "grains.count":
            grains["count"] = _integer(value)
        elif key in ("grains.r_min", "grains.r_max"):
            grains[key.split(".")[1]] = _number(value)
        elif key == "spinodal.rho":
            spinodal["rho"] = _vector(value)
        elif key == "spinodal.amplitude":
            spinodal["amplitude"] = _number(value)
        elif m := _REGION_KEY.match(key):
            if ":" not in value:
                raise ConfigError(f"{key}: expected 'x0,x1,y0,y1:phase'")
            rect, phase = value.rsplit(":", 1)
            box = _vector(rect)
            if len(box) != 4:
                raise ConfigError(f"{key}: rectangle needs four numbers")
            regions.append((int(m.group(1)), box, _integer(phase) - 1))
        else:
            raise ConfigError(f"unknown key {key!r}")

    cfg = RunConfig(**values, sigma_pairs=sigma_pairs)
    if initial is None:
        initial = "regions" if regions else "grains" if grains else "spinodal"
    if initial == "grains":
        ic = GrainsIC(**grains)
    elif initial == "spinodal":
        rho = spinodal.pop("rho", (1.0 / cfg.n_phases,) * cfg.n_phases)
        ic = SpinodalIC(rho=rho, **spinodal)
    else:
        ic = RegionsIC(tuple((box, phase) for _, box, phase in sorted(regions, key=lambda r: r[0])))
    cfg = replace(cfg, initial=ic)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    positive = ["n", "n_phases", "eta", "m0", "k"]
    for name in positive:
        value = getattr(cfg, name)
        if not (math.isfinite(value) and value > 0):
            raise ConfigError(f"{name} must be positive, got {value}")
    if cfg.n < 2:
        raise ConfigError("n must be at least 2")
    if cfg.n_phases < 2:
        raise ConfigError("need at least two phases")
    if cfg.gamma is not None and not cfg.gamma > 0:
        raise ConfigError("gamma must be positive")
    if cfg.steps < 0 or cfg.snapshot_every < 0:
        raise ConfigError("steps and snapshot_every must be nonnegative")
    if not (math.isfinite(cfg.s) and cfg.s >= 0):
        raise ConfigError("s must be nonnegative")
    for step, k in cfg.ramp:
        if step < 0 or not k > 0:
            raise ConfigError(f"bad ramp entry {step}:{k}")
    for i, j in cfg.sigma_pairs:
        if not (0 <= i < cfg.n_phases and 0 <= j < cfg.n_phases):
            raise ConfigError(f"sigma.{i + 1}.{j + 1} refers to a phase beyond {cfg.n_phases}")
    problems = validate_sigma(cfg.tensions())
    if problems:
        raise ConfigError("invalid tensions: " + "; ".join(problems))
    ic = cfg.initial
    if isinstance(ic, SpinodalIC):
        if len(ic.rho) != cfg.n_phases:
            raise ConfigError(f"spinodal.rho needs {cfg.n_phases} entries")
        if abs(sum(ic.rho) - 1.0) > 1e-9:
            raise ConfigError("spinodal.rho must sum to 1")
        if ic.amplitude < 0:
            raise ConfigError("spinodal.amplitude must be nonnegative")
    elif isinstance(ic, GrainsIC):
        if ic.count < 1 or not 0 < ic.r_min <= ic.r_max:
            raise ConfigError("grains need count >= 1 and 0 < r_min <= r_max")
    elif isinstance(ic, RegionsIC):
        if not ic.regions:
            raise ConfigError("initial = regions needs at least one region.K entry")
        for (x0, x1, y0, y1), phase in ic.regions:
            if not (0 <= x0 <= x1 <= 1 and 0 <= y0 <= y1 <= 1):
                raise ConfigError(f"rectangle {(x0, x1, y0, y1)} is not inside the unit square")
            if not 0 <= phase < cfg.n_phases:
                raise ConfigError(f"region phase {phase + 1} out of range")
    try:
        cfg.potential_spec()
    except (TensionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides=()) -> RunConfig:
    """Read a config file and apply ``key=value`` overrides on top."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, overrides)


def parse_config(text: str, overrides=()) -> RunConfig:
    entries = parse_lines(text)
    for item in overrides:
        key, value = _parse_override(item)
        entries[key] = value
    return config_from_entries(entries)


# -- running ----------------------------------------------------------------


def initial_field(cfg: RunConfig, mesh: Mesh) -> PhaseField:
    ic = cfg.initial
    if isinstance(ic, GrainsIC):
        field_ = init_grains(mesh, cfg.n_phases, ic.count, ic.r_min, ic.r_max, cfg.seed)
    elif isinstance(ic, SpinodalIC):
        field_ = init_spinodal(mesh, ic.rho, ic.amplitude, cfg.seed)
    else:
        field_ = init_regions(mesh, ic.regions, cfg.n_phases)
    return smooth_interfaces(field_, cfg.smooth_width)


class NotSpdError(ValueError):
    pass


class StepFailure(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"solver failed on step {step}: {cause}")
        self.step = step
        self.cause = cause


class Simulation:
    """Mesh, operators, solver and state for one run; iterate with :meth:`reports`."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        tensions = cfg.tensions()
        if not spd_check(tensions).is_spd:
            raise NotSpdError("tensions do not satisfy the simplex condition")
        self.coeff = assemble_lambda_special(tensions)
        self.spec = cfg.potential_spec()
        self.mesh = build_uniform_mesh(cfg.n)
        self.ops = assemble_operators(self.mesh)
        self.scheme_cfg = cfg.scheme_config()
        solver_cls = AllenCahnSolver if cfg.model == ALLEN_CAHN else CahnHilliardSolver
        self.solver = solver_cls(self.scheme_cfg, self.coeff, self.spec, self.ops)
        self.field = initial_field(cfg, self.mesh)
        self.potential = None
        self.time = 0.0

    def energy(self, field_=None) -> float:
        return integrate_energy(field_ or self.field, self.coeff, self.spec, self.cfg.eta, self.ops)

    def reports(self):
        """Yield the initial report, then one report per step."""
        rep = report(self.field, None, self.coeff, self.spec, self.scheme_cfg, self.ops)
        yield rep
        for step in range(self.cfg.steps):
            k = self.cfg.step_size(step)
            prev, prev_energy = self.field, rep.energy
            try:
                out = self.solver.step(prev, k)
            except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
                raise StepFailure(step + 1, exc) from exc
            if self.cfg.model == ALLEN_CAHN:
                self.field, info = out
            else:
                self.field, self.potential, info = out
            self.time += k
            rep = report(
                self.field, prev, self.coeff, self.spec, self.scheme_cfg, self.ops,
                step=step + 1, time=self.time, info=info, potential=self.potential,
                k=k, prev_energy=prev_energy,
            )
            if not math.isfinite(rep.energy):
                raise StepFailure(step + 1, "energy is not finite")
            yield rep


# fixed display colours, cycled for more phases
PALETTE = np.array(
    [
        (228, 26, 28), (55, 126, 184), (77, 175, 74), (255, 200, 0),
        (152, 78, 163), (255, 127, 0), (166, 86, 40), (247, 129, 191),
    ],
    dtype=float,
)


def _image_rows(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Nodal values as image rows with y pointing up."""
    return nodal.reshape(mesh.shape + nodal.shape[1:])[::-1]


def write_pgm(path, mesh: Mesh, values: np.ndarray) -> None:
    img = np.round(255 * np.clip(_image_rows(mesh, values), 0, 1)).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_ppm(path, mesh: Mesh, c_full: np.ndarray) -> None:
    colours = PALETTE[np.arange(c_full.shape[1]) % len(PALETTE)]
    rgb = np.clip(c_full, 0, 1) @ colours
    img = np.round(np.clip(_image_rows(mesh, rgb), 0, 255)).astype(np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_snapshot(out_dir: Path, field_: PhaseField, step: int) -> None:
    c = field_.full()
    for i in range(c.shape[1]):
        write_pgm(out_dir / f"phase_{i + 1:02}_step{step:08}.pgm", field_.mesh, c[:, i])
    write_ppm(out_dir / f"composite_step{step:08}.ppm", field_.mesh, c)


@contextlib.contextmanager
def thread_limit():
    """Cap BLAS/OpenMP threads from ``NPHASE_THREADS`` when it is set."""
    value = os.environ.get("NPHASE_THREADS")
    if not value:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=max(1, int(value))):
        yield


def run(cfg: RunConfig, output_dir=None, stream=sys.stderr) -> int:
    """Run a configured simulation, writing ``energy.csv`` and snapshots.

    Returns a process exit status (0 ok, 1 tensions rejected, 3 solver
    failure).  On failure the step number goes to ``status.txt`` in the
    output directory.
    """
    out_dir = Path(output_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = out_dir / "status.txt"
    try:
        sim = Simulation(cfg)
    except NotSpdError as exc:
        status.write_text(f"rejected: {exc}\n")
        print(f"error: {exc}", file=stream)
        return EXIT_NOT_SPD
    with thread_limit(), open(out_dir / "energy.csv", "w", newline="\n") as csv:
        csv.write(StepReport.csv_header(cfg.n_phases) + "\n")
        try:
            for rep in sim.reports():
                csv.write(rep.csv_row() + "\n")
                if rep.step == 0 or (cfg.snapshot_every and rep.step % cfg.snapshot_every == 0):
                    write_snapshot(out_dir, sim.field, rep.step)
                log.info("step %d energy %.10g", rep.step, rep.energy)
        except StepFailure as exc:
            csv.flush()
            status.write_text(f"failed at step {exc.step}: {exc.cause}\n")
            print(f"error: {exc}", file=stream)
            return EXIT_SOLVER
    status.write_text(f"completed {cfg.steps} steps\n")
    return EXIT_OK
