"""Plane-stress Q4 membrane elements, global assembly, Newmark integration.

All quantities are SI. The element is the standard bilinear isoparametric
quadrilateral with 2x2 Gauss quadrature, specialized to square geometry.
Mass is lumped (a quarter of the element mass per node, per DOF) and
damping is Rayleigh: C = a0*M + a1*K.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyRankError
from .mesh import Mesh

# 2x2 Gauss points on [-1, 1], weight 1 each
_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class Material:
    """Isotropic plane-stress material with Rayleigh damping coefficients."""

    E: float            # Young's modulus [Pa]
    nu: float           # Poisson ratio
    rho: float          # density [kg/m^3]
    thickness: float    # plate thickness [m]
    rayleigh_a0: float = 0.0  # mass-proportional damping [1/s]
    rayleigh_a1: float = 0.0  # stiffness-proportional damping [s]

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"E must be > 0, got {self.E}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"nu must be in [0, 0.5), got {self.nu}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not self.thickness > 0:
            raise ValueError(f"thickness must be > 0, got {self.thickness}")
        if self.rayleigh_a0 < 0 or self.rayleigh_a1 < 0:
            raise ValueError("Rayleigh coefficients must be >= 0")


@dataclass
class GlobalSystem:
    """Assembled global matrices; immutable after construction.

    ``M`` is stored as the diagonal vector of the lumped mass matrix.
    """

    K: sp.csr_matrix
    M: np.ndarray
    C: sp.csr_matrix
    ndof: int
    free_dofs: np.ndarray
    constrained_dofs: np.ndarray
    _newmark_cache: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass
class DynState:
    """Displacement / velocity / acceleration at time ``t``."""

    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray


def _plane_stress_d(material: Material) -> np.ndarray:
    E, nu = material.E, material.nu
    c = E / (1.0 - nu * nu)
    return c * np.array([[1.0, nu, 0.0],
                         [nu, 1.0, 0.0],
                         [0.0, 0.0, (1.0 - nu) / 2.0]])


def q4_membrane_stiffness(elem_size: float, material: Material) -> np.ndarray:
    """8x8 stiffness of a square bilinear plane-stress element.

    DOF order is (u_x1, u_y1, ..., u_x4, u_y4) with nodes counter-clockwise
    from the lower-left corner.
    """
    if not elem_size > 0:
        raise ValueError(f"elem_size must be > 0, got {elem_size}")
    D = _plane_stress_d(material)
    a = elem_size
    # square element: constant Jacobian a/2 * I
    detj = (a / 2.0) ** 2
    ke = np.zeros((8, 8))
    for xi in _GAUSS:
        for eta in _GAUSS:
            # derivatives of bilinear shape functions wrt xi, eta
            dn_dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
            dn_deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
            dn_dx = dn_dxi * (2.0 / a)
            dn_dy = dn_deta * (2.0 / a)
            b = np.zeros((3, 8))
            b[0, 0::2] = dn_dx
            b[1, 1::2] = dn_dy
            b[2, 0::2] = dn_dy
            b[2, 1::2] = dn_dx
            ke += b.T @ D @ b * material.thickness * detj
    return 0.5 * (ke + ke.T)  # enforce exact symmetry


def q4_lumped_mass(elem_size: float, material: Material) -> np.ndarray:
    """8-vector of diagonal element mass entries (quarter mass per node)."""
    if not elem_size > 0:
        raise ValueError(f"elem_size must be > 0, got {elem_size}")
    m = material.rho * material.thickness * elem_size * elem_size / 4.0
    return np.full(8, m)


def assemble_global(mesh: Mesh, material: Material) -> GlobalSystem:
    """Scatter-add element matrices into the global system.

    Constrained DOFs are recorded; elimination happens at solve time.
    Raises :class:`AssemblyRankError` if the constrained stiffness is
    singular (insufficient supports).
    """
    ndof = mesh.ndof
    ke = q4_membrane_stiffness(mesh.elem_size, material)
    me = q4_lumped_mass(mesh.elem_size, material)

    n_elems = mesh.n_elems
    # element DOF indices, shape (n_elems, 8)
    edofs = np.empty((n_elems, 8), dtype=np.int64)
    edofs[:, 0::2] = 2 * mesh.connectivity
    edofs[:, 1::2] = 2 * mesh.connectivity + 1

    rows = np.repeat(edofs, 8, axis=1).ravel()
    cols = np.tile(edofs, (1, 8)).ravel()
    vals = np.tile(ke.ravel(), n_elems)
    K = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()

    M = np.zeros(ndof)
    np.add.at(M, edofs.ravel(), np.tile(me, n_elems))

    C = (material.rayleigh_a0 * sp.diags(M) + material.rayleigh_a1 * K).tocsr()

    constrained = np.array(sorted(mesh.constrained_dofs), dtype=np.int64)
    mask = np.ones(ndof, dtype=bool)
    mask[constrained] = False
    free = np.nonzero(mask)[0]

    kff = K[free][:, free].tocsc()
    try:
        lu = spla.splu(kff)
        dmin = np.abs(lu.U.diagonal()).min()
        dmax = np.abs(lu.U.diagonal()).max()
        if dmin <= 1e-12 * dmax:
            raise AssemblyRankError("constrained stiffness is numerically singular")
    except RuntimeError as exc:  # splu raises RuntimeError on exact singularity
        raise AssemblyRankError(f"constrained stiffness factorization failed: {exc}")

    return GlobalSystem(K=K, M=M, C=C, ndof=ndof,
                        free_dofs=free, constrained_dofs=constrained)


class NewmarkIntegrator:
    """Newmark-beta stepper with the effective matrix factored once.

    The time step is constant per run, so the factorization of
    ``K_eff = K + (gamma/(beta dt)) C + (1/(beta dt^2)) M`` is amortized
    over all steps.
    """

    def __init__(self, system: GlobalSystem, dt: float,
                 beta: float = 0.25, gamma: float = 0.5):
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        if not (2.0 * beta >= gamma >= 0.5):
            raise ValueError(
                f"require 2*beta >= gamma >= 1/2 for unconditional "
                f"stability, got beta={beta}, gamma={gamma}")
        self.system = system
        self.dt = dt
        self.beta = beta
        self.gamma = gamma

        self.c0 = 1.0 / (beta * dt * dt)
        self.c1 = gamma / (beta * dt)
        self.c2 = 1.0 / (beta * dt)
        self.c3 = 1.0 / (2.0 * beta) - 1.0
        self.c4 = gamma / beta - 1.0
        self.c5 = dt / 2.0 * (gamma / beta - 2.0)

        free = system.free_dofs
        self._free = free
        self._mf = system.M[free]
        self._kf = system.K[free][:, free].tocsr()
        self._cf = system.C[free][:, free].tocsr()
        keff = (self._kf + self.c1 * self._cf + sp.diags(self.c0 * self._mf)).tocsc()
        try:
            self._solve = spla.splu(keff).solve
        except RuntimeError as exc:
            raise AssemblyRankError(f"effective matrix factorization failed: {exc}")

    def initial_acceleration(self, u: np.ndarray, v: np.ndarray,
                             f_ext: np.ndarray) -> np.ndarray:
        """Consistent acceleration M a = f - C v - K u on the free DOFs."""
        free = self._free
        a = np.zeros_like(u)
        rhs = f_ext[free] - self._cf @ v[free] - self._kf @ u[free]
        a[free] = rhs / self._mf
        return a

    def step(self, state: DynState, f_ext: np.ndarray) -> DynState:
        free = self._free
        uf, vf, af = state.u[free], state.v[free], state.a[free]
        rhs = (f_ext[free]
               + self.c0 * self._mf * uf + self.c2 * self._mf * vf
               + self.c3 * self._mf * af
               + self._cf @ (self.c1 * uf + self.c4 * vf + self.c5 * af))
        uf1 = self._solve(rhs)
        af1 = self.c0 * (uf1 - uf) - self.c2 * vf - self.c3 * af
        vf1 = vf + self.dt * ((1.0 - self.gamma) * af + self.gamma * af1)

        n = state.u.size
        u1 = np.zeros(n)
        v1 = np.zeros(n)
        a1 = np.zeros(n)
        u1[free], v1[free], a1[free] = uf1, vf1, af1
        return DynState(t=state.t + self.dt, u=u1, v=v1, a=a1)


def newmark_step(system: GlobalSystem, state: DynState, f_ext: np.ndarray,
                 dt: float, beta: float = 0.25, gamma: float = 0.5) -> DynState:
    """Advance one Newmark step, caching the factorization per (dt, beta, gamma)."""
    key = (dt, beta, gamma)
    integ = system._newmark_cache.get(key)
    if integ is None:
        integ = NewmarkIntegrator(system, dt, beta, gamma)
        system._newmark_cache[key] = integ
    return integ.step(state, f_ext)
