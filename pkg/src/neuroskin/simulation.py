"""Coupled time-domain engine: excitation + neuron feedback driving the FE mesh.

Coupling is staggered explicit: the neuro forces entering step n+1 are
evaluated at the converged displacements of step n, so each step is a
single linear Newmark solve. The output series starts at t = dt (state
after the first step), giving exactly n_steps samples.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, SimulationDivergedError
from .fe import Material, NewmarkIntegrator, assemble_global
from .mesh import Mesh, build_grid_mesh, node_dofs
from .neuro import ActivationKind, NeuroLayout, assemble_neuro_force_vector, broadcast_design

WAVEFORMS = ("half_sine", "sine", "step")


@dataclass(frozen=True)
class Excitation:
    """Scalar force applied to a set of nodes inside a time window."""

    node_ids: tuple
    direction: str = "x"          # "x" or "y"
    amplitude: float = 50.0       # N, per node
    waveform: str = "half_sine"
    t_start: float = 0.0
    t_end: float = 0.05
    frequency: float = 0.0        # Hz, used by "sine"

    def __post_init__(self):
        if self.waveform not in WAVEFORMS:
            raise ConfigError(f"unknown waveform {self.waveform!r}")
        if self.direction not in ("x", "y"):
            raise ConfigError(f"direction must be 'x' or 'y', got {self.direction!r}")
        if not (self.t_end > self.t_start >= 0.0):
            raise ConfigError(
                f"need t_end > t_start >= 0, got [{self.t_start}, {self.t_end}]")
        if not math.isfinite(self.amplitude):
            raise ConfigError("amplitude must be finite")


def excitation_force(spec: Excitation, t: float) -> float:
    """Force value [N] at time ``t`` (zero outside the window)."""
    if t < spec.t_start or t > spec.t_end:
        return 0.0
    if spec.waveform == "half_sine":
        return spec.amplitude * math.sin(
            math.pi * (t - spec.t_start) / (spec.t_end - spec.t_start))
    if spec.waveform == "sine":
        return spec.amplitude * math.sin(
            2.0 * math.pi * spec.frequency * (t - spec.t_start))
    return spec.amplitude  # step


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar history."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=float).ravel())

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)


def write_series(path, values) -> None:
    """One float per line, 17 significant digits, LF line endings."""
    values = np.asarray(values, dtype=float).ravel()
    with open(path, "w", newline="\n") as fh:
        for v in values:
            fh.write(f"{v:.17g}\n")


def read_series(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=float))


@dataclass(frozen=True)
class SimConfig:
    """Full description of one forward simulation."""

    nx: int = 10
    ny: int = 20
    elem_size: float = 0.05
    material: Material = field(default_factory=lambda: Material(
        E=2.0e7, nu=0.3, rho=1200.0, thickness=5.0e-7,
        rayleigh_a0=5.0, rayleigh_a1=1.0e-4))
    activation: ActivationKind = ActivationKind.TANH
    input_weights: tuple = (-5.0e-4, 5.0e-4, 5.0e-4, -5.0e-4)
    design_dim: int = 1
    default_w_o: float = 450000.0
    bounds: tuple = ((400000.0, 550000.0),)
    excitation: Excitation = field(default_factory=lambda: Excitation(
        node_ids=(224, 225, 226), amplitude=50.0, waveform="sine",
        t_start=0.0, t_end=0.5, frequency=90.0))
    dt: float = 1.0e-3
    n_steps: int = 500
    output_node: int = 60
    output_dof: str = "x"
    newmark_beta: float = 0.25
    newmark_gamma: float = 0.5

    @property
    def n_elems(self) -> int:
        return self.nx * self.ny

    def validate(self) -> None:
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        n_nodes = (self.nx + 1) * (self.ny + 1)
        if not 0 <= self.output_node < n_nodes:
            raise ConfigError(f"output_node {self.output_node} out of range")
        if self.output_dof not in ("x", "y"):
            raise ConfigError(f"output_dof must be 'x' or 'y'")
        if self.n_elems % self.design_dim != 0:
            raise ConfigError(
                f"design_dim {self.design_dim} does not divide "
                f"element count {self.n_elems}")
        if len(self.bounds) not in (1, self.design_dim):
            raise ConfigError("bounds must have 1 or design_dim pairs")
        supported = set(range(self.nx + 1))
        for n in self.excitation.node_ids:
            if not 0 <= n < n_nodes:
                raise ConfigError(f"excitation node {n} out of range")
            if n in supported:
                raise ConfigError(f"excitation node {n} is constrained")

    def design_bounds(self) -> np.ndarray:
        """Bounds expanded to shape (design_dim, 2)."""
        b = np.asarray(self.bounds, dtype=float)
        if b.shape[0] == 1 and self.design_dim > 1:
            b = np.tile(b, (self.design_dim, 1))
        return b


def _dof_index(node: int, dof: str) -> int:
    ux, uy = node_dofs(node)
    return ux if dof == "x" else uy


def simulate(config: SimConfig, w_o) -> TimeSeries:
    """Run the coupled simulation; returns the output-probe history.

    ``w_o`` is the per-element output-weight vector (length = element
    count). Deterministic: identical inputs give bit-identical output.
    """
    config.validate()
    w_o = np.asarray(w_o, dtype=float).ravel()
    if w_o.size != config.n_elems:
        raise ValueError(
            f"w_o length {w_o.size} != element count {config.n_elems}")

    mesh = build_grid_mesh(config.nx, config.ny, config.elem_size)
    system = assemble_global(mesh, config.material)
    layout = NeuroLayout.uniform(mesh.n_elems, config.input_weights,
                                 config.activation, w_o,
                                 design_dim=config.design_dim)

    exc = config.excitation
    exc_dofs = np.array([_dof_index(n, exc.direction) for n in exc.node_ids],
                        dtype=np.int64)
    out_dof = _dof_index(config.output_node, config.output_dof)

    integ = NewmarkIntegrator(system, config.dt,
                              config.newmark_beta, config.newmark_gamma)

    from .fe import DynState
    ndof = mesh.ndof
    f0 = np.zeros(ndof)
    f0[exc_dofs] += excitation_force(exc, 0.0)
    state = DynState(t=0.0, u=np.zeros(ndof), v=np.zeros(ndof),
                     a=integ.initial_acceleration(np.zeros(ndof),
                                                  np.zeros(ndof), f0))

    out = np.empty(config.n_steps)
    for n in range(config.n_steps):
        t_next = (n + 1) * config.dt
        f = assemble_neuro_force_vector(mesh, layout, state.u)
        f[exc_dofs] += excitation_force(exc, t_next)
        state = integ.step(state, f)
        if not np.all(np.isfinite(state.u)):
            raise SimulationDivergedError(n + 1)
        out[n] = state.u[out_dof]
    return TimeSeries(t0=config.dt, dt=config.dt, values=out)


def run_and_write(run_dir, config: SimConfig, x) -> TimeSeries:
    """Expand the design vector, simulate, and persist params + output.

    Writes ``params.csv`` (element_index,w_o) and ``output.out`` (one float
    per line) into ``run_dir``, creating it if absent. Reruns overwrite.
    """
    os.makedirs(run_dir, exist_ok=True)
    w_o = broadcast_design(x, config.n_elems)
    with open(os.path.join(run_dir, "params.csv"), "w", newline="\n") as fh:
        fh.write("element_index,w_o\n")
        for e, w in enumerate(w_o):
            fh.write(f"{e},{w:.17g}\n")
    series = simulate(config, w_o)
    write_series(os.path.join(run_dir, "output.out"), series.values)
    return series
