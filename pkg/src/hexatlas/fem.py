"""Trilinear hexahedral finite elements for the quasi-static EEG forward problem.

Solves ``-div(sigma grad u) = f`` with flux boundary conditions
``n . (sigma grad u) = g`` and optional fixed potentials.  Units are SI
inside this module (m, S/m, A, V); coordinates come in as mm and potentials
leave as microvolts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import (
    IncompatibleSource,
    InvertedElement,
    LengthMismatch,
    NoConvergence,
    SingularPoint,
    SourceOutsideDomain,
    ZeroSeparation,
)
from .hexmesh import HEX_CORNERS

MM = 1e-3          # metres per millimetre
MICROVOLT = 1e6    # microvolts per volt

PURE_NEUMANN = "pure-neumann-zero-mean"
DIRICHLET = "dirichlet"

# reference-cube corner signs, VTK order
_SIGNS = 2.0 * HEX_CORNERS - 1.0
_GP = 1.0 / math.sqrt(3.0)
_GAUSS_POINTS = np.array([[a, b, c] for c in (-_GP, _GP) for b in (-_GP, _GP) for a in (-_GP, _GP)])

# local faces, ordered so the right-hand normal points out of the cell
HEX_FACES = np.array([
    [0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4],
    [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7],
])


def _shape_gradients(xi):
    """d N_a / d xi_r at reference points ``xi`` (q, 3) -> (q, 3, 8)."""
    xi = np.atleast_2d(xi)
    lin = 1.0 + xi[:, None, :] * _SIGNS[None, :, :]          # (q, 8, 3)
    grads = np.empty((len(xi), 3, 8))
    for r in range(3):
        others = [c for c in range(3) if c != r]
        grads[:, r, :] = 0.125 * _SIGNS[:, r] * lin[:, :, others[0]] * lin[:, :, others[1]]
    return grads


_DN = _shape_gradients(_GAUSS_POINTS)                        # (8 qp, 3, 8)


def _stiffness_batch(xyz, sigma):
    """Element matrices for corner coordinates ``xyz`` (m, 8, 3) in metres."""
    jac = np.einsum("qra,mac->mqrc", _DN, xyz)               # (m, q, 3, 3)
    det = np.linalg.det(jac)
    if np.any(det <= 0):
        raise InvertedElement("element with non-positive Jacobian determinant")
    grad = np.linalg.solve(jac, np.broadcast_to(_DN, jac.shape[:2] + (3, 8)))
    k = np.einsum("mq,mqra,mqrb->mab", det, grad, grad)      # unit Gauss weights
    return k * np.asarray(sigma, dtype=float)[:, None, None]


def element_stiffness(corner_coords, sigma, length_scale=MM):
    """8x8 stiffness matrix of one trilinear hexahedron.

    Parameters
    ----------
    corner_coords : array_like, shape (8, 3)
        Corners in VTK order, in units of ``length_scale`` metres (mm by
        default).
    sigma : float
        Conductivity in S/m.

    Returns
    -------
    ndarray, shape (8, 8)
        Maps nodal potentials in V to nodal currents in A.
    """
    xyz = np.asarray(corner_coords, dtype=float).reshape(1, 8, 3) * length_scale
    return _stiffness_batch(xyz, [sigma])[0]


@dataclass(frozen=True, eq=False)
class FemSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    gauge: str = PURE_NEUMANN
    mesh: object = field(default=None, repr=False)

    @property
    def size(self):
        return self.matrix.shape[0]

    def with_rhs(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.size,):
            raise LengthMismatch(f"rhs has {rhs.size} entries, system has {self.size}")
        return FemSystem(self.matrix, rhs, self.gauge, self.mesh)


def _congruent(xyz, ref, tol=1e-12):
    """True if every cell in ``xyz`` is a translate of the reference corners."""
    rel = xyz - xyz[:, :1, :]
    return bool(np.all(np.abs(rel - ref) <= tol * max(np.abs(ref).max(), 1e-300)))


def assemble(mesh, sigma, chunk=200_000):
    """Global stiffness matrix (CSR, S*m) for per-cell conductivities ``sigma``.

    Lattice meshes consist of translated copies of one parallelepiped, so a
    single reference element matrix is scaled by each cell's conductivity.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (mesh.n_cells,):
        raise LengthMismatch(f"{sigma.size} conductivities for {mesh.n_cells} cells")
    n = mesh.n_nodes
    cells = np.asarray(mesh.cells)
    matrix = sp.csr_matrix((n, n))
    if mesh.n_cells == 0:
        return FemSystem(matrix, np.zeros(n), PURE_NEUMANN, mesh)
    xyz0 = mesh.nodes[cells[:1]] * MM
    ref = xyz0[0] - xyz0[0, 0]
    shared = _stiffness_batch(xyz0, [1.0])[0]

    for start in range(0, mesh.n_cells, chunk):
        c = cells[start:start + chunk]
        s = sigma[start:start + chunk]
        xyz = mesh.nodes[c] * MM
        if _congruent(xyz, ref):
            ke = s[:, None, None] * shared
        else:
            ke = _stiffness_batch(xyz, s)
        rows = np.repeat(c, 8, axis=1).ravel()
        cols = np.tile(c, (1, 8)).ravel()
        matrix = matrix + sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()
    return FemSystem(matrix.tocsr(), np.zeros(n), PURE_NEUMANN, mesh)


@dataclass(frozen=True)
class DipoleSource:
    """Current dipole: position in mm, moment in A*m, monopole separation in mm.

    ``separation=None`` means twice the smallest voxel spacing of the mesh.
    """

    position: tuple
    moment: tuple
    separation: float | None = None


def _locate(mesh, point):
    """Containing cell and trilinear node weights for a physical point (mm)."""
    if not mesh.has_lattice:
        raise ValueError("dipole placement needs a mesh built from a label volume")
    logical = mesh.to_logical(point)
    candidates = []
    for value in logical:
        base = math.floor(value)
        near = round(value)
        opts = [base]
        if abs(value - near) <= 1e-9:
            opts = [near, near - 1]
        candidates.append(opts)
    for i in candidates[0]:
        for j in candidates[1]:
            for k in candidates[2]:
                cell = mesh.cell_of_voxel(i, j, k)
                if cell >= 0:
                    t = np.clip(logical - np.array([i, j, k]), 0.0, 1.0)
                    w = np.prod(np.where(HEX_CORNERS == 1, t, 1.0 - t), axis=1)
                    return cell, w
    raise SourceOutsideDomain(f"point {tuple(np.round(point, 6))} mm is outside the mesh")


_WEIGHT_BITS = 22
_CURRENT_BITS = 30


def _dyadic_weights(w):
    # Weights become integer multiples of 2**-22 summing to exactly 1 and the
    # current keeps 30 significant bits, so every product and partial sum is
    # exact and the rhs sums to zero in any order.
    scale = 1 << _WEIGHT_BITS
    k = np.rint(w * scale).astype(np.int64)
    k[np.argmax(k)] += scale - k.sum()
    return k.astype(float) / scale


def _round_current(current):
    mant, exp = math.frexp(current)
    return math.ldexp(round(mant * (1 << _CURRENT_BITS)), exp - _CURRENT_BITS)


def dipole_rhs(mesh, source):
    """Nodal current vector (A) of a dipole split into a +I/-I monopole pair."""
    moment = np.asarray(source.moment, dtype=float)
    separation = source.separation
    if separation is None:
        separation = 2.0 * min(mesh.spacing)
    if not separation > 0:
        raise ZeroSeparation(f"dipole separation must be positive, got {separation}")
    rhs = np.zeros(mesh.n_nodes)
    magnitude = float(np.linalg.norm(moment))
    if magnitude == 0.0:
        return rhs
    unit = moment / magnitude
    current = _round_current(magnitude / (separation * MM))
    centre = np.asarray(source.position, dtype=float)
    for sign in (1.0, -1.0):
        cell, w = _locate(mesh, centre + sign * 0.5 * separation * unit)
        np.add.at(rhs, mesh.cells[cell], sign * current * _dyadic_weights(w))
    return rhs


def boundary_faces(mesh):
    """Node ids (k, 4) of faces belonging to exactly one cell, outward oriented."""
    faces = mesh.cells[:, HEX_FACES].reshape(-1, 4)
    key = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return faces[counts[inverse.ravel()] == 1]


def boundary_nodes(mesh):
    return np.unique(boundary_faces(mesh))


def neumann_load(mesh, flux):
    """Nodal currents (A) from a boundary flux density ``flux`` in A/m^2.

    ``flux`` is a constant or a callable taking physical points (k, 3) in mm.
    """
    faces = boundary_faces(mesh)
    xyz = mesh.nodes[faces] * MM                                  # (f, 4, 3)
    s = np.array([-_GP, _GP, _GP, -_GP])
    t = np.array([-_GP, -_GP, _GP, _GP])
    sa = np.array([-1.0, 1.0, 1.0, -1.0])
    ta = np.array([-1.0, -1.0, 1.0, 1.0])
    n_q = 0.25 * (1 + s[:, None] * sa) * (1 + t[:, None] * ta)     # (q, 4)
    dn_s = 0.25 * sa * (1 + t[:, None] * ta)
    dn_t = 0.25 * ta * (1 + s[:, None] * sa)
    x_s = np.einsum("qa,fac->fqc", dn_s, xyz)
    x_t = np.einsum("qa,fac->fqc", dn_t, xyz)
    area = np.linalg.norm(np.cross(x_s, x_t), axis=-1)             # (f, q)
    points = np.einsum("qa,fac->fqc", n_q, mesh.nodes[faces])
    if callable(flux):
        g = np.asarray(flux(points.reshape(-1, 3)), dtype=float).reshape(area.shape)
    else:
        g = np.full(area.shape, float(flux))
    local = np.einsum("fq,qa->fa", g * area, n_q)
    load = np.zeros(mesh.n_nodes)
    np.add.at(load, faces.ravel(), local.ravel())
    return load


@dataclass(frozen=True)
class BoundaryConditions:
    """Flux density on the free boundary and optional fixed node potentials.

    ``dirichlet`` maps node id -> potential in microvolts.
    """

    neumann_flux: float | Callable = 0.0
    dirichlet: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class PotentialField:
    values: np.ndarray      # microvolts, one per node
    gauge: str
    iterations: int = 0
    residual: float = 0.0
    wall_time: float = 0.0

    def report(self):
        return {
            "iterations": int(self.iterations),
            "relative_residual": float(self.residual),
            "wall_time_s": float(self.wall_time),
            "gauge": self.gauge,
            "nodes": int(self.values.size),
        }


def pcg(matrix, b, tol=1e-8, maxit=None, project=False):
    """Jacobi-preconditioned conjugate gradients from a zero initial guess.

    With ``project=True`` the operator is taken to have the constant vector as
    its nullspace: residuals and search directions are kept mean-free and the
    returned iterate has zero mean.

    Returns ``(x, iterations, relative_residual)``; raises
    :class:`NoConvergence` when ``maxit`` is reached.
    """
    n = len(b)
    if maxit is None:
        maxit = 10 * n
    center = (lambda v: v - v.mean()) if project else (lambda v: v)
    b = center(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, 0, 0.0
    diag = matrix.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)

    r = b.copy()
    z = center(inv_diag * r)
    p = z.copy()
    rz = r @ z
    res = 1.0
    for it in range(1, maxit + 1):
        ap = matrix @ p
        pap = p @ ap
        if pap <= 0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        r = center(r)
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        z = center(inv_diag * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        it = maxit
    x = center(x)
    true_res = np.linalg.norm(center(b - matrix @ x)) / bnorm
    if true_res > tol and res > tol:
        raise NoConvergence(it, true_res)
    return x, it, max(true_res, 0.0)


def solve(system, bc=None, tol=1e-8, maxit=None):
    """Solve ``system`` under ``bc`` and return the nodal potential in microvolts.

    Without fixed potentials the problem is singular; the source must sum to
    zero and the returned field has zero mean.  Fixed potentials are removed
    from the unknowns and their contribution moved to the right-hand side.
    """
    bc = bc or BoundaryConditions()
    t0 = time.perf_counter()
    rhs = np.asarray(system.rhs, dtype=float).copy()
    n = system.size
    if callable(bc.neumann_flux) or bc.neumann_flux != 0:
        if system.mesh is None:
            raise ValueError("a boundary flux needs the mesh the system was assembled on")
        rhs += neumann_load(system.mesh, bc.neumann_flux)

    if not bc.dirichlet:
        scale = np.abs(rhs).max() if n else 0.0
        total = math.fsum(rhs)
        if abs(total) > 1e-12 * scale:
            raise IncompatibleSource(
                f"source sums to {total:.3e} A; a pure flux problem needs zero net current"
            )
        x, iters, res = pcg(system.matrix, rhs, tol, maxit, project=True)
        gauge = PURE_NEUMANN
    else:
        fixed = np.array(sorted(bc.dirichlet), dtype=np.int64)
        if fixed.min() < 0 or fixed.max() >= n:
            raise IndexError("Dirichlet node id out of range")
        values = np.array([bc.dirichlet[i] for i in fixed.tolist()], dtype=float) / MICROVOLT
        free = np.setdiff1d(np.arange(n), fixed)
        a = system.matrix
        a_ff = a[free][:, free]
        b_f = rhs[free] - a[free][:, fixed] @ values
        x = np.empty(n)
        x[fixed] = values
        if free.size:
            x[free], iters, res = pcg(a_ff.tocsr(), b_f, tol, maxit)
        else:
            iters, res = 0, 0.0
        gauge = DIRICHLET
    return PotentialField(x * MICROVOLT, gauge, iters, res, time.perf_counter() - t0)


def analytic_infinite_dipole(sigma, moment, source_pos, eval_pos):
    """Potential (microvolts) of a point dipole in an unbounded uniform medium.

    ``moment`` in A*m, positions in mm; ``eval_pos`` may be (3,) or (k, 3).
    """
    rel = (np.atleast_2d(np.asarray(eval_pos, dtype=float)) - np.asarray(source_pos, dtype=float)) * MM
    dist = np.linalg.norm(rel, axis=1)
    if np.any(dist == 0):
        raise SingularPoint("evaluation point coincides with the dipole")
    u = rel @ np.asarray(moment, dtype=float) / (4.0 * np.pi * sigma * dist ** 3) * MICROVOLT
    return float(u[0]) if np.ndim(eval_pos) == 1 else u


def forward_solve(mesh, sigma, source, tol=1e-8, maxit=None):
    """Assemble, load with ``source`` and solve with insulating boundaries."""
    system = assemble(mesh, sigma)
    return solve(system.with_rhs(dipole_rhs(mesh, source)), BoundaryConditions(), tol, maxit)
