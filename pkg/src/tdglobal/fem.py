"""Boundary-value solves on the ternary diagram.

* :func:`solve_laplace` -- P1 elements, Dirichlet data on the whole boundary.
* :func:`solve_biharmonic` -- clamped plate (value and normal derivative
  prescribed) with continuous P2 elements and a symmetric interior-penalty
  treatment of the normal-derivative jumps and of the Neumann condition.

Boundary data are callables of ``(edge, t)`` using the edge parameterisations
of :func:`tdglobal.mesh.edge_point`.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import mesh as M

PENALTY = 20.0  # multiplied by degree**2 / h
GAUSS3 = np.polynomial.legendre.leggauss(3)


class SolveError(RuntimeError):
    pass


@dataclass
class NodalField:
    """Scalar P1 or P2 field on a :class:`TriMesh`.

    P1 values live on the mesh nodes, P2 values on the level ``2n`` lattice.
    """

    mesh: M.TriMesh
    values: np.ndarray
    order: int = 1
    residual: float = 0.0

    def __post_init__(self):
        expected = M.lattice_size(self.mesh.n * self.order)
        if self.values.shape != (expected,):
            raise ValueError(f"expected {expected} values, got {self.values.shape}")

    def _gather(self, s1, s3):
        n = self.mesh.n
        s1 = np.asarray(s1, dtype=float)
        s3 = np.asarray(s3, dtype=float)
        if np.any(s1 < -1e-9) or np.any(s3 < -1e-9) or np.any(s1 + s3 > 1 + 1e-9):
            raise ValueError("point outside the ternary diagram")
        i, j, up, xi, eta = M.locate(n, np.clip(s1, 0, 1), np.clip(s3, 0, 1))
        N = n * self.order
        if self.order == 1:
            vi = np.stack([np.where(up, i, i + 1), np.where(up, i + 1, i), np.where(up, i, i + 1)], -1)
            vj = np.stack([np.where(up, j, j + 1), np.where(up, j, j + 1), np.where(up, j + 1, j)], -1)
        else:
            a0i, a0j = np.where(up, 2 * i, 2 * i + 2), np.where(up, 2 * j, 2 * j + 2)
            a1i, a1j = np.where(up, 2 * i + 2, 2 * i), np.where(up, 2 * j, 2 * j + 2)
            a2i, a2j = np.where(up, 2 * i, 2 * i + 2), np.where(up, 2 * j + 2, 2 * j)
            vi = np.stack([a0i, a1i, a2i, (a0i + a1i) // 2, (a1i + a2i) // 2, (a0i + a2i) // 2], -1)
            vj = np.stack([a0j, a1j, a2j, (a0j + a1j) // 2, (a1j + a2j) // 2, (a0j + a2j) // 2], -1)
        ids = M.lattice_id(vi, vj, N)
        return self.values[ids], up, xi, eta

    def __call__(self, s1, s3):
        vals, up, xi, eta = self._gather(s1, s3)
        phi = M.p1_basis(xi, eta) if self.order == 1 else M.p2_basis(xi, eta)
        return np.sum(vals * phi, axis=-1)

    def gradient(self, s1, s3):
        """(d/ds1, d/ds3) of the field, element-local."""
        vals, up, xi, eta = self._gather(s1, s3)
        if self.order == 1:
            g = np.broadcast_to(M.p1_grad_ref(), vals.shape + (2,))
        else:
            g = M.p2_grad_ref(xi, eta)
        dxi = np.sum(vals * g[..., 0], axis=-1)
        deta = np.sum(vals * g[..., 1], axis=-1)
        sign = np.where(up, 1.0, -1.0)
        n = self.mesh.n
        du, dv = sign * dxi * n, sign * deta * n  # derivatives in (s2, s3) * 1
        return -du, dv - du


def eval_field(field: NodalField, s1, s3):
    return field(s1, s3)


def grad_field(field: NodalField, s1, s3):
    return field.gradient(s1, s3)


# --- P1 Laplace -------------------------------------------------------------


def _p1_element_matrix(n):
    J = M.reference_jacobian(n, True)
    Jinv = np.linalg.inv(J)
    area = abs(np.linalg.det(J)) / 2
    G = M.p1_grad_ref() @ Jinv  # (3, 2) physical gradients
    return area * G @ G.T


def _boundary_values(mesh_nodes_boundary, data: Callable):
    vals = {}
    for k, tags in enumerate(mesh_nodes_boundary):
        if tags:
            edge, t = tags[0]
            vals[k] = float(data(edge, t))
    return vals


def _solve_reduced(A, rhs, fixed_ids, fixed_vals):
    n = A.shape[0]
    fixed = np.zeros(n, dtype=bool)
    fixed[fixed_ids] = True
    free = ~fixed
    u = np.zeros(n)
    u[fixed_ids] = fixed_vals
    A = A.tocsr()
    Aff = A[free][:, free].tocsc()
    b = rhs[free] - A[free][:, fixed] @ u[fixed]
    try:
        lu = splu(Aff, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:  # singular factor
        raise SolveError(f"singular system: {exc}") from exc
    x = lu.solve(b)
    res = np.linalg.norm(Aff @ x - b) / max(np.linalg.norm(b), 1e-300)
    u[free] = x
    return u, res, Aff


def assemble_laplace(mesh: M.TriMesh):
    Ke = _p1_element_matrix(mesh.n)
    el = mesh.elements
    rows = np.repeat(el, 3, axis=1).ravel()
    cols = np.tile(el, (1, 3)).ravel()
    data = np.tile(Ke.ravel(), len(el))
    N = mesh.n_nodes
    return sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()


def solve_laplace(mesh: M.TriMesh, dirichlet: Callable) -> NodalField:
    """Discrete harmonic P1 field with ``u = dirichlet(edge, t)`` on the boundary."""
    A = assemble_laplace(mesh)
    bvals = _boundary_values(mesh.boundary, dirichlet)
    ids = np.fromiter(bvals.keys(), dtype=np.int64)
    vals = np.fromiter(bvals.values(), dtype=float)
    u, res, _ = _solve_reduced(A, np.zeros(mesh.n_nodes), ids, vals)
    return NodalField(mesh, u, order=1, residual=res)


# --- P2 interior-penalty biharmonic -------------------------------------------


def _p2_physical(n, up, xi, eta):
    """Physical gradients (…, 6, 2) and constant Laplacians (6,) of P2 basis functions."""
    J = M.reference_jacobian(n, up)
    Jinv = np.linalg.inv(J)
    G = M.p2_grad_ref(xi, eta) @ Jinv
    H = np.einsum("ki,aij,jl->akl", Jinv.T, M.p2_hess_ref(), Jinv)
    lap = H[:, 0, 0] + H[:, 1, 1]
    return G, lap


# reference-edge endpoints (local vertex indices) for local edges 0: v0-v1, 1: v1-v2, 2: v2-v0
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))
REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _edge_ref_points(local_edge, tq):
    a, b = LOCAL_EDGES[local_edge]
    P = REF_VERTS[a] + np.outer(tq, REF_VERTS[b] - REF_VERTS[a])
    return P[:, 0], P[:, 1]


@functools.lru_cache(maxsize=None)
def _element_matrix_p2(n):
    _, lap = _p2_physical(n, True, np.array(0.3), np.array(0.3))
    area = np.sqrt(3.0) / 4 / n**2
    return area * np.outer(lap, lap)


def _mesh_faces(mesh: M.TriMesh):
    """Faces as (elem_a, local_a, elem_b or -1, local_b, edge_tag, t0, t1)."""
    owner = {}
    faces = []
    for k, el in enumerate(mesh.elements):
        for le, (a, b) in enumerate(LOCAL_EDGES):
            key = tuple(sorted((int(el[a]), int(el[b]))))
            if key in owner:
                ka, la = owner.pop(key)
                faces.append((ka, la, k, le, None))
            else:
                owner[key] = (k, le)
    bmap = {}
    for k, tags in enumerate(mesh.boundary):
        for edge, t in tags:
            bmap.setdefault(k, {})[edge] = t
    for (va, vb), (k, le) in owner.items():
        common = set(bmap[va]) & set(bmap[vb])
        if len(common) != 1:
            raise RuntimeError("boundary face classification failed")
        faces.append((k, le, -1, -1, common.pop()))
    return faces


def _face_normal(mesh, k, le):
    el = mesh.elements[k]
    a, b = LOCAL_EDGES[le]
    c = 3 - a - b
    pa, pb, pc = mesh.xy[el[a]], mesh.xy[el[b]], mesh.xy[el[c]]
    t = pb - pa
    nrm = np.array([t[1], -t[0]]) / np.linalg.norm(t)
    if np.dot(nrm, pc - pa) > 0:
        nrm = -nrm
    return nrm, pa, pb


def assemble_biharmonic(mesh: M.TriMesh, penalty: float = PENALTY):
    """Interior-penalty matrix on the level-2n lattice plus boundary-face data needed for the RHS."""
    n = mesh.n
    h = 1.0 / n
    sigma = penalty * 4.0 / h
    dofs = M.p2_element_dofs(mesh)
    ndof = M.lattice_size(2 * n)
    Ke = _element_matrix_p2(n)
    rows = [np.repeat(dofs, 6, axis=1).ravel()]
    cols = [np.tile(dofs, (1, 6)).ravel()]
    data = [np.tile(Ke.ravel(), len(dofs))]

    tq, wq = GAUSS3
    tq = 0.5 * (tq + 1.0)
    wq = 0.5 * wq * h  # physical edge length h
    bfaces = []
    for ka, la, kb, lb, tag in _mesh_faces(mesh):
        nrm, pa, pb = _face_normal(mesh, ka, la)
        xi, eta = _edge_ref_points(la, tq)
        Ga, lapa = _p2_physical(n, bool(mesh.up[ka]), xi, eta)
        dn_a = Ga @ nrm  # (q, 6)
        if kb < 0:
            loc = dofs[ka]
            jump = dn_a
            avg = np.broadcast_to(lapa, (len(tq), 6))
            Kf = (
                -np.einsum("q,qa,qb->ab", wq, avg, jump)
                - np.einsum("q,qa,qb->ab", wq, jump, avg)
                + sigma * np.einsum("q,qa,qb->ab", wq, jump, jump)
            )
            xq = pa + np.outer(tq, pb - pa)
            bfaces.append((loc, xq, wq, jump, avg, tag))
        else:
            # quadrature points of the shared edge seen from element b
            xq = pa + np.outer(tq, pb - pa)
            Jb = M.reference_jacobian(n, bool(mesh.up[kb]))
            v0b = mesh.xy[mesh.elements[kb][0]]
            ref_b = np.linalg.solve(Jb, (xq - v0b).T).T
            Gb, lapb = _p2_physical(n, bool(mesh.up[kb]), ref_b[:, 0], ref_b[:, 1])
            dn_b = -(Gb @ nrm)
            loc = np.concatenate([dofs[ka], dofs[kb]])
            jump = np.concatenate([dn_a, dn_b], axis=1)
            avg = 0.5 * np.concatenate(
                [np.broadcast_to(lapa, (len(tq), 6)), np.broadcast_to(lapb, (len(tq), 6))], axis=1
            )
            Kf = (
                -np.einsum("q,qa,qb->ab", wq, avg, jump)
                - np.einsum("q,qa,qb->ab", wq, jump, avg)
                + sigma * np.einsum("q,qa,qb->ab", wq, jump, jump)
            )
        m = len(loc)
        rows.append(np.repeat(loc, m))
        cols.append(np.tile(loc, m))
        data.append(Kf.ravel())
    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(ndof, ndof)
    ).tocsr()
    A.sum_duplicates()
    return A, bfaces, sigma


def _neumann_rhs(bfaces, sigma, ndof, neumann: Callable):
    rhs = np.zeros(ndof)
    for loc, xq, wq, jump, avg, tag in bfaces:
        s1, s3 = M.from_xy(xq[:, 0], xq[:, 1])
        t = 1.0 - s1 if tag in ("12", "13") else s3
        g = np.asarray(neumann(tag, t), dtype=float) * np.ones(len(wq))
        contrib = -np.einsum("q,qa,q->a", wq, avg, g) + sigma * np.einsum("q,qa,q->a", wq, jump, g)
        np.add.at(rhs, loc, contrib)
    return rhs


def solve_biharmonic(mesh: M.TriMesh, dirichlet: Callable, neumann: Callable, penalty: float = PENALTY) -> NodalField:
    """Clamped biharmonic P2 field: value ``dirichlet(edge, t)`` and outward
    normal derivative ``neumann(edge, t)`` on the boundary."""
    A, bfaces, sigma = assemble_biharmonic(mesh, penalty)
    N = 2 * mesh.n
    ndof = A.shape[0]
    rhs = _neumann_rhs(bfaces, sigma, ndof, neumann)
    bclass = M.boundary_classification(N)
    bvals = _boundary_values(bclass, dirichlet)
    ids = np.fromiter(bvals.keys(), dtype=np.int64)
    vals = np.fromiter(bvals.values(), dtype=float)
    u, res, Aff = _solve_reduced(A, rhs, ids, vals)
    if not np.isfinite(u).all():
        raise SolveError("biharmonic solve produced non-finite values")
    return NodalField(mesh, u, order=2, residual=res)


def discrete_energy(mesh: M.TriMesh, field: NodalField, neumann: Callable, penalty: float = PENALTY) -> float:
    """Quadratic functional ``a(u, u)/2 - L(u)`` minimised by the biharmonic solution."""
    A, bfaces, sigma = assemble_biharmonic(mesh, penalty)
    rhs = _neumann_rhs(bfaces, sigma, A.shape[0], neumann)
    u = field.values
    return 0.5 * float(u @ (A @ u)) - float(rhs @ u)


def reduced_system(mesh: M.TriMesh, kind: str = "laplace", penalty: float = PENALTY):
    """Assembled matrix restricted to free (interior) dofs, for diagnostics."""
    if kind == "laplace":
        A = assemble_laplace(mesh)
        free = ~mesh.boundary_mask()
    else:
        A, _, _ = assemble_biharmonic(mesh, penalty)
        free = ~np.array([bool(t) for t in M.boundary_classification(2 * mesh.n)])
    A = A.tocsr()
    return A[free][:, free]


# --- error norms ------------------------------------------------------------


def l2_error(field: NodalField, exact: Callable) -> float:
    """L2 norm over the diagram of ``field - exact(s1, s3)``."""
    mesh = field.mesh
    el = mesh.elements
    p0 = mesh.xy[el[:, 0]]
    total = 0.0
    for up in (True, False):
        sel = mesh.up == up
        J = M.reference_jacobian(mesh.n, up)
        detJ = abs(np.linalg.det(J))
        xq = p0[sel][:, None, :] + np.einsum("ij,qj->qi", J, M.TRI_QUAD_PTS)[None, :, :]
        s1, s3 = M.from_xy(xq[..., 0], xq[..., 1])
        s1 = np.clip(s1, 0, 1)
        s3 = np.clip(s3, 0, 1 - s1)
        diff = field(s1, s3) - exact(s1, s3)
        total += detJ * np.sum(diff**2 * M.TRI_QUAD_W[None, :])
    return float(np.sqrt(total))


def observed_orders(hs, errors):
    hs = np.asarray(hs, dtype=float)
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(hs[:-1] / hs[1:])
