"""Structured triangulation of the ternary diagram and P1/P2 element evaluation.

The diagram is embedded as the unit-side equilateral triangle
``X = s2 * (1, 0) + s3 * (1/2, sqrt(3)/2)``: water corner at (0, 0), oil at
(1, 0), gas at (1/2, sqrt(3)/2). This is the embedding in which the outward
normal derivatives on the three edges carry the ``sqrt(3)/3`` factors.

Lattice nodes of level ``N`` are indexed by ``(i, j)`` with ``s2 = i/N``,
``s3 = j/N`` and ``i + j <= N``; rows of constant ``j`` are stored
contiguously. A P2 field on mesh level ``n`` stores its degrees of freedom on
the level ``2n`` lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT3 = np.sqrt(3.0)
# edge -> outward unit normal in the embedding
NORMALS = {
    "12": np.array([0.0, -1.0]),
    "13": np.array([-SQRT3 / 2, 0.5]),
    "23": np.array([SQRT3 / 2, 0.5]),
}


def to_xy(s1, s3):
    s1 = np.asarray(s1, dtype=float)
    s3 = np.asarray(s3, dtype=float)
    s2 = 1.0 - s1 - s3
    return s2 + 0.5 * s3, 0.5 * SQRT3 * s3


def from_xy(x, y):
    s3 = 2.0 * np.asarray(y) / SQRT3
    s2 = np.asarray(x) - np.asarray(y) / SQRT3
    return 1.0 - s2 - s3, s3


def grad_xy_to_s(gx, gy):
    """Map an embedding gradient to (d/ds1 at fixed s3, d/ds3 at fixed s1)."""
    return -gx, -0.5 * gx + 0.5 * SQRT3 * gy


def grad_s_to_xy(g1, g3):
    gx = -np.asarray(g1)
    gy = (np.asarray(g3) + 0.5 * gx) * 2.0 / SQRT3
    return gx, gy


def edge_point(edge: str, t):
    """(s1, s3) of the point with parameter t on an edge: C12=(1-t,0), C23=(0,t), C13=(1-t,t)."""
    t = np.asarray(t, dtype=float)
    if edge == "12":
        return 1.0 - t, np.zeros_like(t)
    if edge == "23":
        return np.zeros_like(t), t
    if edge == "13":
        return 1.0 - t, t
    raise ValueError(f"unknown edge {edge!r}")


def normal_derivative(edge: str, d1, d3):
    """Outward normal derivative on an edge from (d/ds1, d/ds3)."""
    c = SQRT3 / 3.0
    if edge == "12":
        return c * (d1 - 2.0 * d3)
    if edge == "13":
        return c * (d1 + d3)
    if edge == "23":
        return c * (d3 - 2.0 * d1)
    raise ValueError(f"unknown edge {edge!r}")


# --- lattice ----------------------------------------------------------------


def lattice_size(N: int) -> int:
    return (N + 1) * (N + 2) // 2


def lattice_id(i, j, N):
    i = np.asarray(i)
    j = np.asarray(j)
    return j * (N + 1) - (j * (j - 1)) // 2 + i


def lattice_nodes(N: int):
    """Index arrays ``(i, j)`` of all lattice nodes in storage order."""
    ii, jj = [], []
    for j in range(N + 1):
        ii.append(np.arange(N - j + 1))
        jj.append(np.full(N - j + 1, j))
    return np.concatenate(ii), np.concatenate(jj)


def lattice_saturations(N: int):
    i, j = lattice_nodes(N)
    s2 = i / N
    s3 = j / N
    s1 = np.clip(1.0 - s2 - s3, 0.0, 1.0)
    return s1, s3


def boundary_classification(N: int):
    """Per lattice node: list of (edge, t) pairs; interior nodes get an empty list."""
    i, j = lattice_nodes(N)
    out = []
    for a, b in zip(i, j):
        tags = []
        if b == 0:
            tags.append(("12", a / N))
        if a + b == N:
            tags.append(("23", b / N))
        if a == 0:
            tags.append(("13", b / N))
        out.append(tags)
    return out


# --- mesh -------------------------------------------------------------------


@dataclass
class TriMesh:
    """Uniform subdivision of the diagram into ``n**2`` equilateral triangles."""

    n: int
    xy: np.ndarray = field(repr=False)
    s1: np.ndarray = field(repr=False)
    s3: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)  # (n^2, 3) vertex ids; ordered as reference vertices
    up: np.ndarray = field(repr=False)  # bool per element
    origin: np.ndarray = field(repr=False)  # (n^2, 2) lattice (i, j) of the owning cell
    boundary: list = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.s1)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def element_areas(self) -> np.ndarray:
        p = self.xy[self.elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_mask(self) -> np.ndarray:
        return np.array([bool(tags) for tags in self.boundary])


def make_mesh(n: int) -> TriMesh:
    if n < 2:
        raise ValueError(f"mesh level must be >= 2, got {n}")
    s1, s3 = lattice_saturations(n)
    x, y = to_xy(s1, s3)
    elems, up, origin = [], [], []
    for j in range(n):
        for i in range(n - j):
            elems.append((lattice_id(i, j, n), lattice_id(i + 1, j, n), lattice_id(i, j + 1, n)))
            up.append(True)
            origin.append((i, j))
            if i + j <= n - 2:
                elems.append((lattice_id(i + 1, j + 1, n), lattice_id(i, j + 1, n), lattice_id(i + 1, j, n)))
                up.append(False)
                origin.append((i, j))
    return TriMesh(
        n=n,
        xy=np.column_stack([x, y]),
        s1=s1,
        s3=s3,
        elements=np.array(elems, dtype=np.int64),
        up=np.array(up),
        origin=np.array(origin, dtype=np.int64),
        boundary=boundary_classification(n),
    )


def p2_element_dofs(mesh: TriMesh) -> np.ndarray:
    """Level-2n lattice ids of the six P2 dofs per element: v0, v1, v2, m01, m12, m02."""
    n = mesh.n
    N = 2 * n
    i, j = mesh.origin[:, 0], mesh.origin[:, 1]
    up = mesh.up
    # vertex lattice coordinates at level 2n
    v0 = np.where(up[:, None], np.column_stack([2 * i, 2 * j]), np.column_stack([2 * i + 2, 2 * j + 2]))
    v1 = np.where(up[:, None], np.column_stack([2 * i + 2, 2 * j]), np.column_stack([2 * i, 2 * j + 2]))
    v2 = np.where(up[:, None], np.column_stack([2 * i, 2 * j + 2]), np.column_stack([2 * i + 2, 2 * j]))
    pts = [v0, v1, v2, (v0 + v1) // 2, (v1 + v2) // 2, (v0 + v2) // 2]
    return np.column_stack([lattice_id(p[:, 0], p[:, 1], N) for p in pts])


# --- reference elements -------------------------------------------------------


def p1_basis(xi, eta):
    return np.stack([1.0 - xi - eta, xi, eta], axis=-1)


def p1_grad_ref():
    return np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_basis(xi, eta):
    l0 = 1.0 - xi - eta
    l1 = xi
    l2 = eta
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l0 * l2],
        axis=-1,
    )


def p2_grad_ref(xi, eta):
    """Reference gradients, shape (..., 6, 2)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    l0 = 1.0 - xi - eta
    g = np.empty(xi.shape + (6, 2))
    g[..., 0, 0] = g[..., 0, 1] = -(4 * l0 - 1)
    g[..., 1, 0], g[..., 1, 1] = 4 * xi - 1, 0.0
    g[..., 2, 0], g[..., 2, 1] = 0.0, 4 * eta - 1
    g[..., 3, 0], g[..., 3, 1] = 4 * (l0 - xi), -4 * xi
    g[..., 4, 0], g[..., 4, 1] = 4 * eta, 4 * xi
    g[..., 5, 0], g[..., 5, 1] = -4 * eta, 4 * (l0 - eta)
    return g


def p2_hess_ref():
    """Constant reference Hessians, shape (6, 2, 2)."""
    return np.array(
        [
            [[4, 4], [4, 4]],
            [[4, 0], [0, 0]],
            [[0, 0], [0, 4]],
            [[-8, -4], [-4, 0]],
            [[0, 4], [4, 0]],
            [[0, -4], [-4, -8]],
        ],
        dtype=float,
    )


def reference_jacobian(n: int, up: bool) -> np.ndarray:
    """d(x, y)/d(xi, eta); columns are the images of the reference axes."""
    J = np.array([[1.0, 0.5], [0.0, 0.5 * SQRT3]]) / n
    return J if up else -J


# --- point location ---------------------------------------------------------


def locate(n: int, s1, s3):
    """Element origin, orientation and reference coordinates of points.

    Returns ``(i, j, up, xi, eta)``; ``(xi, eta)`` follow the vertex ordering
    used by :func:`make_mesh`.
    """
    s1 = np.asarray(s1, dtype=float)
    s3 = np.asarray(s3, dtype=float)
    u = (1.0 - s1 - s3) * n
    v = s3 * n
    j = np.clip(np.floor(v).astype(np.int64), 0, n - 1)
    i = np.clip(np.floor(u).astype(np.int64), 0, None)
    i = np.minimum(i, n - 1 - j)
    r = u - i
    q = v - j
    down = (r + q > 1.0) & (i + j <= n - 2)
    up = ~down
    xi = np.where(up, r, 1.0 - r)
    eta = np.where(up, q, 1.0 - q)
    return i, j, up, xi, eta


def element_index_table(mesh: TriMesh) -> dict:
    return {(int(a), int(b), bool(u)): k for k, ((a, b), u) in enumerate(zip(mesh.origin, mesh.up))}


def element_lookup(mesh: TriMesh):
    """Dense array mapping (i, j, up) -> element index."""
    n = mesh.n
    table = -np.ones((n, n, 2), dtype=np.int64)
    table[mesh.origin[:, 0], mesh.origin[:, 1], mesh.up.astype(int)] = np.arange(len(mesh.up))
    return table


# --- quadrature -------------------------------------------------------------

# degree-5, 7-point rule on the reference triangle (weights sum to 1/2)
_a1, _b1 = 0.059715871789770, 0.470142064105115
_a2, _b2 = 0.797426985353087, 0.101286507323456
_w0, _w1, _w2 = 0.225, 0.132394152788506, 0.125939180544827
TRI_QUAD_PTS = np.array(
    [
        [1 / 3, 1 / 3],
        [_b1, _b1], [_a1, _b1], [_b1, _a1],
        [_b2, _b2], [_a2, _b2], [_b2, _a2],
    ]
)
TRI_QUAD_W = 0.5 * np.array([_w0, _w1, _w1, _w1, _w2, _w2, _w2])
