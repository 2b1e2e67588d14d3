"""Neuron-per-element traction layer.

Each element hosts one neuron. The neuron reads the horizontal (u_x)
displacements of the element's four nodes, forms the potential
z = sum(input_weight_k * u_x_k), maps it through a bounded activation
into [-1, +1], and scales by its output weight and the element area to
get the total traction force. A quarter of that force is applied to each
node along x.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh


class ActivationKind(str, enum.Enum):
    TANH = "tanh"
    BIPOLAR_SIGMOID = "bipolar_sigmoid"
    HARD_LIMIT = "hard_limit"
    SATURATING_LINEAR = "saturating_linear"


def _activate(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    """Vectorized activation; every kind maps into [-1, 1] with f(0) = 0."""
    if kind == ActivationKind.TANH:
        return np.tanh(z)
    if kind == ActivationKind.BIPOLAR_SIGMOID:
        return 2.0 / (1.0 + np.exp(-z)) - 1.0
    if kind == ActivationKind.HARD_LIMIT:
        return np.sign(z)  # sign(0) = 0 keeps the zero fixed point
    if kind == ActivationKind.SATURATING_LINEAR:
        return np.clip(z, -1.0, 1.0)
    raise ValueError(f"unknown activation kind: {kind!r}")


def activation_eval(kind: ActivationKind, z: float) -> float:
    """Scalar activation value in [-1, 1]."""
    if not math.isfinite(z):
        raise ValueError(f"activation input must be finite, got {z}")
    return float(_activate(ActivationKind(kind), np.asarray(z, dtype=float)))


def neuron_potential(u_x, input_weights) -> float:
    """Neuron potential z = sum of input weights times nodal u_x."""
    return float(np.dot(np.asarray(u_x, dtype=float),
                        np.asarray(input_weights, dtype=float)))


@dataclass(frozen=True)
class Neuron:
    """One element's neuron: 4 input weights [1/m], activation, w_o [Pa]."""

    input_weights: np.ndarray
    activation: ActivationKind
    output_weight: float


def element_neuro_forces(neuron: Neuron, u_x, area: float) -> np.ndarray:
    """Nodal x-forces [N] from one neuro-element.

    Total force is f(z) * w_o * area, split equally over the 4 nodes.
    """
    if not area > 0:
        raise ValueError(f"area must be > 0, got {area}")
    z = neuron_potential(u_x, neuron.input_weights)
    f_total = activation_eval(neuron.activation, z) * neuron.output_weight * area
    return np.full(4, f_total / 4.0)


def broadcast_design(x, P: int) -> np.ndarray:
    """Block-constant expansion of a length-d design vector to P elements.

    Block size k = P // d; element order is preserved. Raises if d does not
    divide P.
    """
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    if d < 1 or P < 1:
        raise ValueError(f"need d >= 1 and P >= 1, got d={d}, P={P}")
    if P % d != 0:
        raise ValueError(f"design dimension {d} does not divide element count {P}")
    return np.repeat(x, P // d)


@dataclass
class NeuroLayout:
    """Per-element neuron data for a whole mesh, in vectorized form.

    ``input_weights`` has shape (P, 4); ``w_o`` has length P. ``design_dim``
    must divide P (block-constant broadcast of the design vector).
    """

    input_weights: np.ndarray
    activation: ActivationKind
    w_o: np.ndarray
    design_dim: int = 1

    def __post_init__(self):
        self.input_weights = np.asarray(self.input_weights, dtype=float)
        self.w_o = np.asarray(self.w_o, dtype=float).ravel()
        P = self.w_o.size
        if self.input_weights.shape != (P, 4):
            raise ValueError(
                f"input_weights shape {self.input_weights.shape} != ({P}, 4)")
        if P % self.design_dim != 0:
            raise ValueError(
                f"design_dim {self.design_dim} does not divide element count {P}")
        self.activation = ActivationKind(self.activation)

    @property
    def n_elems(self) -> int:
        return self.w_o.size

    @property
    def block_size(self) -> int:
        return self.w_o.size // self.design_dim

    def neuron(self, e: int) -> Neuron:
        return Neuron(input_weights=self.input_weights[e],
                      activation=self.activation,
                      output_weight=float(self.w_o[e]))

    @classmethod
    def uniform(cls, n_elems: int, input_weights4, activation,
                w_o, design_dim: int = 1) -> "NeuroLayout":
        """Layout with the same 4 input weights for every element."""
        iw = np.tile(np.asarray(input_weights4, dtype=float), (n_elems, 1))
        w = np.asarray(w_o, dtype=float)
        if w.ndim == 0:
            w = np.full(n_elems, float(w))
        return cls(input_weights=iw, activation=activation, w_o=w,
                   design_dim=design_dim)


def assemble_neuro_force_vector(mesh: Mesh, layout: NeuroLayout,
                                u: np.ndarray) -> np.ndarray:
    """Scatter-add all element neuro forces into a global force vector.

    Only x-DOFs receive force; constrained DOFs are computed but discarded
    at solve time.
    """
    u = np.asarray(u, dtype=float)
    if u.size != mesh.ndof:
        raise ValueError(f"displacement length {u.size} != ndof {mesh.ndof}")
    conn = mesh.connectivity
    ux = u[2 * conn]                                  # (P, 4)
    z = np.einsum("ij,ij->i", layout.input_weights, ux)
    fz = _activate(layout.activation, z)
    area = mesh.elem_size * mesh.elem_size
    f_node = fz * layout.w_o * area / 4.0             # (P,)
    out = np.zeros(mesh.ndof)
    np.add.at(out, 2 * conn, f_node[:, None])
    return out
