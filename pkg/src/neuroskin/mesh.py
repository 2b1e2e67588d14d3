"""Structured grid of square 4-node membrane elements with pinned supports.

Node numbering is row-major starting at the supported edge (y = 0) with x
varying fastest, which fixes the global DOF ordering for reproducible
matrices and file outputs. Each node carries two in-plane DOFs:
``2*node`` is u_x, ``2*node + 1`` is u_y.
"""

from dataclasses import dataclass, field

import numpy as np

DOFS_PER_NODE = 2


def node_dofs(node: int) -> tuple[int, int]:
    """Global (u_x, u_y) DOF indices of a node."""
    return 2 * node, 2 * node + 1


def x_dof(node: int) -> int:
    return 2 * node


def y_dof(node: int) -> int:
    return 2 * node + 1


@dataclass(frozen=True)
class Mesh:
    """Rectangular grid of square elements.

    Attributes
    ----------
    nx, ny : int
        Element counts along the short (x) and long (y) dimensions.
    elem_size : float
        Side length of every (square) element, in meters.
    node_coords : (n_nodes, 2) float array
        Node positions, row-major from the supported edge.
    connectivity : (n_elems, 4) int array
        Corner nodes of each element, counter-clockwise from lower-left.
    constrained_dofs : frozenset[int]
        Global DOF indices pinned to zero (supported edge).
    """

    nx: int
    ny: int
    elem_size: float
    node_coords: np.ndarray = field(repr=False)
    connectivity: np.ndarray = field(repr=False)
    constrained_dofs: frozenset = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elems(self) -> int:
        return self.nx * self.ny

    @property
    def ndof(self) -> int:
        return DOFS_PER_NODE * self.n_nodes


def build_grid_mesh(nx: int, ny: int, elem_size: float) -> Mesh:
    """Build an ``nx`` x ``ny`` grid of square elements of side ``elem_size``.

    The supported edge is y = 0; both DOFs of every node on it are
    constrained (simple supports realized as pins).
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"element counts must be >= 1, got nx={nx}, ny={ny}")
    if not elem_size > 0:
        raise ValueError(f"elem_size must be > 0, got {elem_size}")

    xs = elem_size * np.arange(nx + 1)
    ys = elem_size * np.arange(ny + 1)
    gx, gy = np.meshgrid(xs, ys)  # row-major: y varies over rows
    coords = np.column_stack([gx.ravel(), gy.ravel()])

    conn = np.empty((nx * ny, 4), dtype=np.int64)
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            conn[j * nx + i] = (n0, n0 + 1, n0 + nx + 2, n0 + nx + 1)

    constrained = frozenset(
        d for node in range(nx + 1) for d in node_dofs(node)
    )

    coords.setflags(write=False)
    conn.setflags(write=False)
    return Mesh(nx=nx, ny=ny, elem_size=float(elem_size),
                node_coords=coords, connectivity=conn,
                constrained_dofs=constrained)


def supported_edge_dofs(mesh: Mesh) -> set[int]:
    """Both DOFs of every node on the supported edge (y = 0)."""
    return {d for node in range(mesh.nx + 1) for d in node_dofs(node)}


def element_node_ids(mesh: Mesh, e: int) -> np.ndarray:
    """Corner nodes of element ``e``, counter-clockwise from lower-left."""
    if not 0 <= e < mesh.n_elems:
        raise IndexError(f"element index {e} out of range [0, {mesh.n_elems})")
    return mesh.connectivity[e]
