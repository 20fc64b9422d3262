"""Discrete realization of the coupled bulk-surface energy form.

P1 finite elements on a labeled mesh produce the operator pencil

    T       stiffness on free bulk dofs: bulk gradient term plus the
            tangential surface terms pulled back through the traces,
    M_blk   block-diagonal relaxation-weighted mass on (bulk, dynamic
            boundary, interface) values,
    J       0/1 trace map from free bulk dofs into the block space,
    M_form  Gram matrix of the form-domain inner product (unweighted
            bulk mass + envelope-weighted gradient terms).

Dirichlet conditions are imposed by eliminating the dofs of the closed
Dirichlet boundary part (vertices of Dirichlet edges, plus any
explicitly constrained surface endpoints).

Element contributions accumulate associatively (element-parallel
assembly would be safe); assembled operators are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (ConsistencyError, EnvelopeViolationError, SizeLimitError)
from .geometry.mesh import DIRICHLET, DYNAMIC
from .geometry.surface import INTERFACE, SurfaceMesh
from .weights import (WeightSpec, adaptive_line_integral,
                      adaptive_triangles_integral, triangle_rule,
                      weighted_cell_integral)


# -- coefficient handling -------------------------------------------------------

def _matrix_of(value):
    """Normalize a scalar or 2x2 array to a 2x2 matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(2)
    if arr.shape == (2, 2):
        return arr
    raise ValueError("bulk coefficient entries must be scalars or 2x2 matrices")


def _eval_matrix_callable(fn, points):
    """Evaluate a user matrix coefficient at (n, 2) points -> (n, 2, 2)."""
    try:
        vals = np.asarray(fn(points), dtype=float)
        if vals.shape == (len(points), 2, 2):
            return vals
        if vals.shape == (len(points),):
            return vals[:, None, None] * np.eye(2)
    except Exception:
        pass
    out = np.empty((len(points), 2, 2))
    for k, p in enumerate(points):
        v = np.asarray(fn(p), dtype=float)
        out[k] = float(v) * np.eye(2) if v.ndim == 0 else v
    return out


def _eval_scalar_callable(fn, points, tau=None):
    """Evaluate a surface coefficient at points, reduced to its
    tangential scalar action when matrix-valued."""
    def reduce(vals):
        vals = np.asarray(vals, dtype=float)
        if vals.ndim == 3 and vals.shape[1:] == (2, 2):
            return np.einsum("i,nij,j->n", tau, vals, tau)
        return vals.reshape(len(points))

    if tau is not None:
        try:
            return reduce(fn(points, tau))
        except TypeError:
            pass
    try:
        return reduce(fn(points))
    except Exception:
        out = np.empty(len(points))
        for k, p in enumerate(points):
            v = np.asarray(fn(p), dtype=float)
            out[k] = float(tau @ v @ tau) if v.ndim == 2 else float(v)
        return out


class CoefficientSet:
    """Diffusion and relaxation coefficients with their envelopes.

    Parameters
    ----------
    mu_bulk : scalar, 2x2 array, dict, or callable
        Bulk diffusion matrix.  A dict maps triangle region ids to
        scalars/matrices.  Callables receive point arrays (n, 2) and
        return (n, 2, 2) (or a single point -> 2x2).
    mu_gd, mu_sigma : scalar, 2x2 array, or callable
        Surface diffusion on the dynamic boundary / interface.  Only the
        tangential scalar action (mu tau, tau) enters in 2-D.
    bulk_weight : WeightSpec, optional
        Degenerate scalar envelope multiplying ``mu_bulk``; when given,
        ``mu_bulk_star`` is this weight.
    mu_bulk_star : scalar, optional
        Constant envelope for the nondegenerate case (default 1).
    mu_gd_star, mu_sigma_star : scalar or callable, optional
        Surface envelopes; default to the tangential coefficient itself.
    zeta_bulk, zeta_gd, zeta_sigma : scalar or callable
        Relaxation coefficient per block, bounded away from zero.
    c1, c2 : float
        Declared envelope constants of the two-sided coefficient bounds.
    zeta_lower : float, optional
        Declared lower bound for the relaxation coefficient.
    """

    def __init__(self, mu_bulk=1.0, mu_gd=1.0, mu_sigma=1.0, *,
                 bulk_weight=None, mu_bulk_star=None,
                 mu_gd_star=None, mu_sigma_star=None,
                 zeta_bulk=1.0, zeta_gd=1.0, zeta_sigma=1.0,
                 c1=1.0, c2=1.0, zeta_lower=None):
        self.mu_bulk = mu_bulk
        self.mu_gd = mu_gd
        self.mu_sigma = mu_sigma
        self.bulk_weight = bulk_weight
        if bulk_weight is not None and not isinstance(bulk_weight, WeightSpec):
            raise TypeError("bulk_weight must be a WeightSpec")
        self.mu_bulk_star = 1.0 if mu_bulk_star is None else float(mu_bulk_star)
        self.mu_gd_star = mu_gd_star
        self.mu_sigma_star = mu_sigma_star
        self.zeta_bulk = zeta_bulk
        self.zeta_gd = zeta_gd
        self.zeta_sigma = zeta_sigma
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.zeta_lower = zeta_lower

    # bulk ---------------------------------------------------------------

    def bulk_base_matrix(self, region):
        """Constant base matrix for a region, or None if callable."""
        mu = self.mu_bulk
        if isinstance(mu, dict):
            mu = mu.get(int(region), mu.get("default", 1.0))
        if callable(mu):
            return None
        return _matrix_of(mu)

    def bulk_values(self, points, region):
        """Full bulk coefficient (weight included) at (n, 2) points."""
        base = self.bulk_base_matrix(region)
        if base is None:
            vals = _eval_matrix_callable(self._bulk_callable(region), points)
        else:
            vals = np.broadcast_to(base, (len(points), 2, 2)).copy()
        if self.bulk_weight is not None:
            vals = vals * self.bulk_weight.eval(points)[:, None, None]
        return vals

    def _bulk_callable(self, region):
        mu = self.mu_bulk
        if isinstance(mu, dict):
            mu = mu.get(int(region), mu.get("default", 1.0))
        return mu

    def bulk_envelope_values(self, points):
        """Scalar envelope of the bulk coefficient at (n, 2) points."""
        if self.bulk_weight is not None:
            return self.bulk_weight.eval(points)
        return np.full(len(points), self.mu_bulk_star)

    # surfaces -----------------------------------------------------------

    def surface_values(self, which, points, tau):
        mu = self.mu_gd if which == DYNAMIC else self.mu_sigma
        if callable(mu):
            return _eval_scalar_callable(mu, points, tau)
        arr = np.asarray(mu, dtype=float)
        if arr.ndim == 2:
            return np.full(len(points), float(tau @ arr @ tau))
        return np.full(len(points), float(arr))

    def surface_envelope_values(self, which, points, tau):
        star = self.mu_gd_star if which == DYNAMIC else self.mu_sigma_star
        if star is None:
            return self.surface_values(which, points, tau)
        if isinstance(star, WeightSpec):
            return star.eval(points)
        if callable(star):
            return _eval_scalar_callable(star, points, tau)
        return np.full(len(points), float(star))

    # relaxation -----------------------------------------------------------

    def zeta_values(self, which, points):
        zeta = {None: self.zeta_bulk, "bulk": self.zeta_bulk,
                DYNAMIC: self.zeta_gd, INTERFACE: self.zeta_sigma}[which]
        if callable(zeta):
            return np.asarray(zeta(points), dtype=float).reshape(len(points))
        return np.full(len(points), float(zeta))


# -- degrees of freedom -----------------------------------------------------------

@dataclass
class DofMap:
    """Free bulk dofs and trace injections for the surface dofs.

    ``vertex_free[v]`` is the free-dof index of mesh vertex ``v`` or -1
    when the vertex is Dirichlet-constrained.  Surface node lists keep
    the local ordering of their SurfaceMesh restricted to free vertices.
    """

    n_vertices: int
    free_vertices: np.ndarray
    vertex_free: np.ndarray
    constrained_vertices: np.ndarray
    gd_vertices: np.ndarray
    sigma_vertices: np.ndarray

    @property
    def n_free(self):
        return len(self.free_vertices)

    @property
    def n_gd(self):
        return len(self.gd_vertices)

    @property
    def n_sigma(self):
        return len(self.sigma_vertices)

    def surface_vertices(self, which):
        return self.gd_vertices if which == DYNAMIC else self.sigma_vertices


def build_dofmap(mesh, smesh_gd=None, smesh_sigma=None, extra_constrained=()):
    """Constrain the closed Dirichlet part and list the surface dofs.

    Vertices of Dirichlet edges are always constrained (the Dirichlet
    part is closed, so vertices it shares with Neumann or dynamic edges
    are constrained too).  ``extra_constrained`` adds surface-endpoint
    vertices that should satisfy a Dirichlet condition as well.
    """
    constrained = set(int(v) for v in extra_constrained)
    for k in mesh.boundary_edges_with_label(DIRICHLET):
        constrained.update(int(v) for v in mesh.boundary_edges[k])
    free = [v for v in range(mesh.num_vertices) if v not in constrained]
    vertex_free = np.full(mesh.num_vertices, -1, dtype=int)
    for idx, v in enumerate(free):
        vertex_free[v] = idx

    def surf_list(smesh):
        if smesh is None:
            return np.zeros(0, dtype=int)
        return np.array([int(v) for v in smesh.node_vertices
                         if vertex_free[v] >= 0], dtype=int)

    return DofMap(
        n_vertices=mesh.num_vertices,
        free_vertices=np.array(free, dtype=int),
        vertex_free=vertex_free,
        constrained_vertices=np.array(sorted(constrained), dtype=int),
        gd_vertices=surf_list(smesh_gd),
        sigma_vertices=surf_list(smesh_sigma),
    )


@dataclass
class BlockField:
    """Element of the discrete block space: bulk + surface node values."""

    bulk: np.ndarray
    gd: np.ndarray
    sigma: np.ndarray

    def stacked(self):
        return np.concatenate([self.bulk, self.gd, self.sigma])

    def copy(self):
        return BlockField(self.bulk.copy(), self.gd.copy(), self.sigma.copy())

    @classmethod
    def zeros(cls, dofmap):
        return cls(np.zeros(dofmap.n_free), np.zeros(dofmap.n_gd),
                   np.zeros(dofmap.n_sigma))

    @classmethod
    def from_functions(cls, mesh, dofmap, f_bulk=None, f_gd=None, f_sigma=None):
        """Sample callables (points (n,2) -> values) at the dof nodes."""
        def sample(f, verts, n):
            if f is None:
                return np.zeros(n)
            pts = mesh.vertices[verts]
            if callable(f):
                return np.asarray(f(pts), dtype=float).reshape(n)
            return np.full(n, float(f))

        return cls(sample(f_bulk, dofmap.free_vertices, dofmap.n_free),
                   sample(f_gd, dofmap.gd_vertices, dofmap.n_gd),
                   sample(f_sigma, dofmap.sigma_vertices, dofmap.n_sigma))

    @classmethod
    def split(cls, dofmap, stacked):
        n, m = dofmap.n_free, dofmap.n_gd
        return cls(np.asarray(stacked[:n]),
                   np.asarray(stacked[n:n + m]),
                   np.asarray(stacked[n + m:]))


# -- element kernels --------------------------------------------------------------

def p1_gradients(tri):
    """Constant P1 basis gradients (2x3) and the triangle area."""
    tri = np.asarray(tri, dtype=float)
    e0 = tri[2] - tri[1]
    e1 = tri[0] - tri[2]
    e2 = tri[1] - tri[0]
    area = 0.5 * (e2[0] * (-e1[1]) - e2[1] * (-e1[0]))
    grads = np.array([[-e0[1], -e1[1], -e2[1]],
                      [e0[0], e1[0], e2[0]]]) / (2.0 * area)
    return grads, area


def _bulk_coefficient_integral(mesh, coeff, k, quad_order, weight_tol,
                               use_envelope):
    """Matrix integral of the (enveloped) coefficient over triangle ``k``."""
    tri = mesh.vertices[mesh.triangles[k]]
    region = mesh.tri_regions[k]
    weight = coeff.bulk_weight

    if use_envelope:
        if weight is None:
            _, area = p1_gradients(tri)
            return coeff.mu_bulk_star * area * np.eye(2)
        return weighted_cell_integral(weight, tri, tol_rel=weight_tol) * np.eye(2)

    base = coeff.bulk_base_matrix(region)
    if base is not None:
        if weight is None:
            _, area = p1_gradients(tri)
            return area * base
        return weighted_cell_integral(weight, tri, tol_rel=weight_tol) * base

    # general callable coefficient
    def f(points):
        return coeff.bulk_values(points, region).reshape(len(points), 4)

    if weight is None:
        bary, wts = triangle_rule(quad_order)
        pts = bary @ tri
        _, area = p1_gradients(tri)
        vals = f(pts)
        return (wts @ vals).reshape(2, 2) * area
    value, _ = adaptive_triangles_integral(
        f, tri[None], tol_rel=weight_tol, order=quad_order,
        weight_fn=weight.eval)
    return np.asarray(value).reshape(2, 2)


def assemble_bulk_stiffness(mesh, coeff, quad_order=2, *, dofmap=None,
                            weight_tol=1e-8, use_envelope=False):
    """P1 bulk stiffness with Dirichlet dofs eliminated symmetrically.

    Entry (i, j) carries the bulk energy pairing of trial function j
    against test function i.  With ``use_envelope`` the scalar envelope
    (times identity) is integrated instead of the full coefficient,
    which yields the gradient part of the form-domain Gram matrix.
    """
    if dofmap is None:
        dofmap = build_dofmap(mesh)
    rows, cols, vals = [], [], []
    for k in range(mesh.num_triangles):
        tri_idx = mesh.triangles[k]
        grads, _ = p1_gradients(mesh.vertices[tri_idx])
        c_mat = _bulk_coefficient_integral(mesh, coeff, k, quad_order,
                                           weight_tol, use_envelope)
        elem = grads.T @ c_mat @ grads
        free = dofmap.vertex_free[tri_idx]
        for a in range(3):
            if free[a] < 0:
                continue
            for b in range(3):
                if free[b] < 0:
                    continue
                rows.append(free[a])
                cols.append(free[b])
                vals.append(elem[a, b])
    n = dofmap.n_free
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _edge_coefficient_integral(smesh, coeff, which, k, envelope, tol=1e-12):
    """Integral of the tangential (or envelope) coefficient over edge k."""
    i, j = smesh.edges[k]
    p0, p1 = smesh.mesh.vertices[i], smesh.mesh.vertices[j]
    tau = smesh.edge_tangent(k)

    if envelope:
        fn = lambda pts: coeff.surface_envelope_values(which, pts, tau)
    else:
        fn = lambda pts: coeff.surface_values(which, pts, tau)

    # constants integrate exactly (asymmetric probe points so symmetric
    # nonconstant profiles cannot masquerade as constants)
    ts = np.array([0.0, 0.31, 0.5, 0.77, 1.0])
    probe = fn(p0 + np.outer(ts, p1 - p0))
    if np.min(probe) < -1e-12 * max(1.0, float(np.max(np.abs(probe)))):
        raise EnvelopeViolationError(
            f"negative tangential coefficient sampled on {which} edge {k}")
    if np.ptp(probe) == 0.0:
        return float(probe[0]) * smesh.edge_lengths[k]
    value, _ = adaptive_line_integral(fn, p0, p1, tol_rel=tol)
    if value < -1e-12 * smesh.edge_lengths[k] * max(1.0, abs(value)):
        raise EnvelopeViolationError(
            f"negative tangential coefficient integral on {which} edge {k}")
    return value


def assemble_surface_stiffness(smesh, coeff=None, which=None, *,
                               mu_s=None, mu_s_star=None, envelope=False,
                               tol=1e-12):
    """Tangential P1 stiffness on all nodes of a surface mesh.

    Each edge contributes ``(integral of mu_t / L^2) [[1,-1],[-1,1]]``;
    nodes all of whose incident edges carry a vanishing coefficient get
    zero rows, so arbitrarily supported (degenerate) surface diffusion
    assembles naturally.

    Either pass a :class:`CoefficientSet` plus ``which`` (``dynamic`` or
    ``interface``), or a standalone coefficient ``mu_s`` (scalar, 2x2 or
    callable) with optional envelope ``mu_s_star``.
    """
    if coeff is not None and not isinstance(coeff, CoefficientSet):
        mu_s, coeff = coeff, None
    if coeff is None:
        coeff = CoefficientSet(mu_gd=mu_s if mu_s is not None else 1.0,
                               mu_sigma=mu_s if mu_s is not None else 1.0,
                               mu_gd_star=mu_s_star, mu_sigma_star=mu_s_star)
        which = which or DYNAMIC
    n = smesh.num_nodes
    mat = sp.lil_matrix((n, n))
    for k in range(len(smesh.edges)):
        s_e = _edge_coefficient_integral(smesh, coeff, which, k, envelope, tol)
        length = smesh.edge_lengths[k]
        a, b = smesh.edge_nodes[k]
        w = s_e / length ** 2
        mat[a, a] += w
        mat[b, b] += w
        mat[a, b] -= w
        mat[b, a] -= w
    return mat.tocsr()


def assemble_surface_mass(smesh, coeff=None, which=None, *, lumped=False,
                          weighted=True, order=2):
    """Edge P1 mass on all nodes of a surface mesh.

    ``weighted`` applies the relaxation coefficient; lumping row-sums
    the consistent matrix.
    """
    if coeff is None:
        coeff = CoefficientSet()
        which = which or DYNAMIC
    n = smesh.num_nodes
    mat = sp.lil_matrix((n, n))
    xg = np.array([0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)])
    wg = np.array([0.5, 0.5])
    for k in range(len(smesh.edges)):
        i, j = smesh.edges[k]
        p0, p1 = smesh.mesh.vertices[i], smesh.mesh.vertices[j]
        length = smesh.edge_lengths[k]
        pts = p0 + np.outer(xg, p1 - p0)
        z = coeff.zeta_values(which, pts) if weighted else np.ones(len(pts))
        phi0, phi1 = 1.0 - xg, xg
        m00 = length * np.sum(wg * z * phi0 * phi0)
        m01 = length * np.sum(wg * z * phi0 * phi1)
        m11 = length * np.sum(wg * z * phi1 * phi1)
        a, b = smesh.edge_nodes[k]
        if lumped:
            mat[a, a] += m00 + m01
            mat[b, b] += m11 + m01
        else:
            mat[a, a] += m00
            mat[b, b] += m11
            mat[a, b] += m01
            mat[b, a] += m01
    return mat.tocsr()


def assemble_bulk_mass(mesh, coeff=None, *, dofmap=None, lumped=False,
                       weighted=True, order=2):
    """P1 bulk mass on free dofs, optionally relaxation-weighted/lumped."""
    if coeff is None:
        coeff = CoefficientSet()
    if dofmap is None:
        dofmap = build_dofmap(mesh)
    bary, wts = triangle_rule(max(order, 2))
    rows, cols, vals = [], [], []
    for k in range(mesh.num_triangles):
        tri_idx = mesh.triangles[k]
        tri = mesh.vertices[tri_idx]
        _, area = p1_gradients(tri)
        pts = bary @ tri
        z = coeff.zeta_values("bulk", pts) if weighted else np.ones(len(pts))
        elem = area * np.einsum("q,q,qa,qb->ab", wts, z, bary, bary)
        if lumped:
            elem = np.diag(elem.sum(axis=1))
        free = dofmap.vertex_free[tri_idx]
        for a in range(3):
            if free[a] < 0:
                continue
            for b in range(3):
                if free[b] < 0:
                    continue
                rows.append(free[a])
                cols.append(free[b])
                vals.append(elem[a, b])
    n = dofmap.n_free
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _surface_selection(smesh, dofmap, which):
    """Selection matrices P (free surface nodes <- all smesh nodes) and
    R (free surface nodes <- free bulk dofs)."""
    verts = dofmap.surface_vertices(which)
    n_all = smesh.num_nodes
    n_freesurf = len(verts)
    p_rows, p_cols = [], []
    r_rows, r_cols = [], []
    for out, v in enumerate(verts):
        p_rows.append(out)
        p_cols.append(smesh.local_index(v))
        r_rows.append(out)
        r_cols.append(dofmap.vertex_free[v])
    ones = np.ones(n_freesurf)
    p_mat = sp.csr_matrix((ones, (p_rows, p_cols)), shape=(n_freesurf, n_all))
    r_mat = sp.csr_matrix((ones, (r_rows, r_cols)),
                          shape=(n_freesurf, dofmap.n_free))
    return p_mat, r_mat


def assemble_trace_map(dofmap):
    """Stacked 0/1 selection: bulk identity over the Gamma_d and Sigma
    restrictions, mapping free bulk dofs into the block space."""
    n = dofmap.n_free
    blocks = [sp.identity(n, format="csr")]
    for verts in (dofmap.gd_vertices, dofmap.sigma_vertices):
        rows = np.arange(len(verts))
        cols = dofmap.vertex_free[verts]
        if np.any(cols < 0):
            raise ConsistencyError("surface node without a free bulk counterpart")
        blocks.append(sp.csr_matrix((np.ones(len(verts)), (rows, cols)),
                                    shape=(len(verts), n)))
    return sp.vstack(blocks, format="csr")


def assemble_block_mass(mesh, smeshes, coeff, lumped=False, *, dofmap=None,
                        weighted=True):
    """Block-diagonal (relaxation-weighted) mass on bulk + surface dofs.

    ``smeshes`` maps ``dynamic``/``interface`` to SurfaceMesh instances
    (missing surfaces contribute empty blocks).
    """
    smesh_gd = smeshes.get(DYNAMIC)
    smesh_sigma = smeshes.get(INTERFACE)
    if dofmap is None:
        dofmap = build_dofmap(mesh, smesh_gd, smesh_sigma)
    blocks = [assemble_bulk_mass(mesh, coeff, dofmap=dofmap, lumped=lumped,
                                 weighted=weighted)]
    for which, smesh in ((DYNAMIC, smesh_gd), (INTERFACE, smesh_sigma)):
        n_surf = len(dofmap.surface_vertices(which))
        if smesh is None or smesh.num_nodes == 0 or n_surf == 0:
            blocks.append(sp.csr_matrix((n_surf, n_surf)))
            continue
        m_all = assemble_surface_mass(smesh, coeff, which, lumped=lumped,
                                      weighted=weighted)
        p_mat, _ = _surface_selection(smesh, dofmap, which)
        blocks.append(p_mat @ m_all @ p_mat.T)
    return sp.block_diag(blocks, format="csr")


# -- the pencil ---------------------------------------------------------------------

class DiscreteOperator:
    """Matrix pencil realizing the energy form and the block geometry.

    Attributes
    ----------
    T : csr_matrix
        Stiffness on free bulk dofs (bulk + pulled-back surface terms).
    M_blk : csr_matrix
        Relaxation-weighted block mass.
    J : csr_matrix
        Trace map, free bulk dofs -> block space.
    M_form : csr_matrix
        Gram matrix of the form-domain inner product.
    K_bulk : csr_matrix
        Bulk-only part of the stiffness (used for flux recovery).
    """

    def __init__(self, mesh, coeff, dofmap, smeshes, T, K_bulk, M_blk,
                 M_blk_plain, J, M_form, surface_parts, lumped):
        self.mesh = mesh
        self.coeff = coeff
        self.dofmap = dofmap
        self.smeshes = smeshes
        self.T = T
        self.K_bulk = K_bulk
        self.M_blk = M_blk
        self.M_blk_plain = M_blk_plain
        self.J = J
        self.M_form = M_form
        self.surface_parts = surface_parts
        self.lumped = lumped
        self._mtilde = None
        self._mtilde_plain = None
        self._eig_cache = None

    @property
    def n_free(self):
        return self.dofmap.n_free

    def mtilde(self):
        """Gram matrix J^T M_blk J of the block norm on bulk dofs."""
        if self._mtilde is None:
            self._mtilde = (self.J.T @ self.M_blk @ self.J).tocsr()
        return self._mtilde

    def mtilde_plain(self):
        """Same without the relaxation weight."""
        if self._mtilde_plain is None:
            self._mtilde_plain = (self.J.T @ self.M_blk_plain @ self.J).tocsr()
        return self._mtilde_plain

    def is_symmetric(self, tol=1e-12):
        diff = abs(self.T - self.T.T)
        scale = max(abs(self.T).max(), 1e-300)
        return diff.max() <= tol * scale

    def form_value(self, u, v):
        """Energy pairing t(u, v) evaluated through the stiffness."""
        return float(v @ (self.T @ u))

    def block_l2_norm(self, u):
        """Relaxation-weighted block L2 norm of a bulk-dof vector."""
        return float(np.sqrt(max(u @ (self.mtilde() @ u), 0.0)))

    def lumped_block_weights(self):
        """Positive block measure weights (lumped M_blk diagonal)."""
        ones = np.ones(self.M_blk.shape[0])
        return np.asarray(self.M_blk @ ones).ravel()

    def block_lp_norm(self, u, p):
        """Discrete block Lp norm (lumped measure) of a bulk-dof vector."""
        v = np.abs(np.asarray(self.J @ u).ravel())
        if np.isinf(p):
            return float(v.max()) if v.size else 0.0
        w = self.lumped_block_weights()
        return float((w @ v ** p) ** (1.0 / p))

    def total_mass(self, u):
        """Relaxation-weighted total mass <M_blk J u, 1>."""
        return float(np.sum(self.M_blk @ (self.J @ u)))

    def j_ellipticity_constant(self, dense_limit=2500):
        """Smallest generalized eigenvalue of (sym(T) + Mtilde, M_form).

        A positive value witnesses coercivity of the form plus the block
        norm against the form-domain norm.
        """
        a_mat = 0.5 * (self.T + self.T.T) + self.mtilde()
        b_mat = self.M_form
        n = a_mat.shape[0]
        if n <= dense_limit:
            lam = scipy.linalg.eigh(a_mat.toarray(), b_mat.toarray(),
                                    eigvals_only=True,
                                    subset_by_index=[0, 0])
            return float(lam[0])
        lam, _ = spla.eigsh(a_mat.tocsc(), k=1, M=b_mat.tocsc(), sigma=0.0,
                            which="LM")
        return float(lam[0])


def build_pencil(mesh, coeff, *, lumped=False, quad_order=2, weight_tol=1e-8,
                 extra_constrained=(), surface_tol=1e-12):
    """Assemble the full discrete operator pencil for a labeled mesh."""
    smesh_gd = SurfaceMesh.from_mesh(mesh, DYNAMIC)
    smesh_sigma = SurfaceMesh.from_mesh(mesh, INTERFACE)
    smeshes = {DYNAMIC: smesh_gd, INTERFACE: smesh_sigma}
    dofmap = build_dofmap(mesh, smesh_gd, smesh_sigma, extra_constrained)

    k_bulk = assemble_bulk_stiffness(mesh, coeff, quad_order, dofmap=dofmap,
                                     weight_tol=weight_tol)
    k_env = assemble_bulk_stiffness(mesh, coeff, quad_order, dofmap=dofmap,
                                    weight_tol=weight_tol, use_envelope=True)
    t_mat = k_bulk.copy()
    m_form = assemble_bulk_mass(mesh, coeff, dofmap=dofmap,
                                weighted=False) + k_env

    surface_parts = {}
    for which, smesh in smeshes.items():
        n_surf = len(dofmap.surface_vertices(which))
        if smesh.num_nodes == 0 or n_surf == 0:
            surface_parts[which] = None
            continue
        p_mat, r_mat = _surface_selection(smesh, dofmap, which)
        k_all = assemble_surface_stiffness(smesh, coeff, which, tol=surface_tol)
        k_env_all = assemble_surface_stiffness(smesh, coeff, which,
                                               envelope=True, tol=surface_tol)
        m_all = assemble_surface_mass(smesh, coeff, which, lumped=lumped)
        m_plain_all = assemble_surface_mass(smesh, coeff, which, lumped=False,
                                            weighted=False)
        k_free = (p_mat @ k_all @ p_mat.T).tocsr()
        t_mat = t_mat + (r_mat.T @ k_free @ r_mat)
        m_form = m_form + (r_mat.T @ (p_mat @ k_env_all @ p_mat.T) @ r_mat)
        surface_parts[which] = {
            "smesh": smesh,
            "P": p_mat,
            "R": r_mat,
            "K": k_free,
            "M": (p_mat @ m_all @ p_mat.T).tocsr(),
            "M_plain": (p_mat @ m_plain_all @ p_mat.T).tocsr(),
        }

    m_blk = assemble_block_mass(mesh, smeshes, coeff, lumped=lumped,
                                dofmap=dofmap)
    m_blk_plain = assemble_block_mass(mesh, smeshes, coeff, lumped=lumped,
                                      dofmap=dofmap, weighted=False)
    j_mat = assemble_trace_map(dofmap)

    return DiscreteOperator(mesh, coeff, dofmap, smeshes, t_mat.tocsr(),
                            k_bulk.tocsr(), m_blk, m_blk_plain, j_mat,
                            m_form.tocsr(), surface_parts, lumped)


def project_initial_data(raw, pencil):
    """Block-mass-orthogonal projection of raw block data onto traces.

    Solves ``(J^T M_blk J) u = J^T M_blk raw`` for the bulk-dof vector
    whose trace triple is closest to the (possibly unrelated) components
    of ``raw`` in the weighted block norm.
    """
    rhs = pencil.J.T @ (pencil.M_blk @ raw.stacked())
    mt = pencil.mtilde().tocsc()
    u = np.asarray(spla.spsolve(mt, rhs)).ravel()
    if not np.all(np.isfinite(u)):
        raise ConsistencyError("projection normal matrix is singular")
    return u


# -- envelope validation ---------------------------------------------------------------

def validate_envelopes(mesh, coeff, order=4):
    """Sample the coefficient bounds at quadrature points.

    Returns ``(diagnostics, observed)`` where observed carries the
    tightest constants seen: ``c1_obs = min lambda_min(sym mu)/mu*`` and
    ``c2_obs = max ||mu|| / mu*`` over bulk quadrature points, plus the
    minimum relaxation values per block.
    """
    diags = []
    bary, _ = triangle_rule(order)
    c1_obs = np.inf
    c2_obs = 0.0
    zeta_min = np.inf
    for k in range(mesh.num_triangles):
        tri = mesh.vertices[mesh.triangles[k]]
        pts = bary @ tri
        mu = coeff.bulk_values(pts, mesh.tri_regions[k])
        env = coeff.bulk_envelope_values(pts)
        sym = 0.5 * (mu + np.swapaxes(mu, 1, 2))
        tr = sym[:, 0, 0] + sym[:, 1, 1]
        det = sym[:, 0, 0] * sym[:, 1, 1] - sym[:, 0, 1] * sym[:, 1, 0]
        disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
        lam_min = 0.5 * tr - disc
        norm2 = np.linalg.norm(mu, ord=2, axis=(1, 2))
        pos = env > 0
        if np.any(pos):
            c1_obs = min(c1_obs, float(np.min(lam_min[pos] / env[pos])))
            c2_obs = max(c2_obs, float(np.max(norm2[pos] / env[pos])))
        if np.any(lam_min + 1e-13 * np.maximum(env, 1.0) < coeff.c1 * env):
            diags.append(f"bulk coefficient below c1 * envelope on triangle {k}")
        if np.any(norm2 > coeff.c2 * env * (1 + 1e-13) + 1e-13):
            diags.append(f"bulk coefficient above c2 * envelope on triangle {k}")
        zeta_min = min(zeta_min, float(np.min(coeff.zeta_values("bulk", pts))))

    for which in (DYNAMIC, INTERFACE):
        smesh = SurfaceMesh.from_mesh(mesh, which)
        for k in range(len(smesh.edges)):
            i, j = smesh.edges[k]
            p0, p1 = mesh.vertices[i], mesh.vertices[j]
            pts = p0 + np.outer(np.linspace(0.1, 0.9, 5), p1 - p0)
            tau = smesh.edge_tangent(k)
            mu_t = coeff.surface_values(which, pts, tau)
            env = coeff.surface_envelope_values(which, pts, tau)
            if np.any(mu_t < -1e-13):
                diags.append(f"surface coefficient violates nonnegativity "
                             f"({which} edge {k})")
            if np.any(mu_t + 1e-13 < coeff.c1 * env - 1e-13):
                diags.append(f"surface coefficient below c1 * envelope "
                             f"({which} edge {k})")
            zeta_min = min(zeta_min, float(np.min(coeff.zeta_values(which, pts))))

    lower = coeff.zeta_lower
    if lower is not None and zeta_min < lower:
        diags.append(f"relaxation coefficient {zeta_min:.3e} below declared "
                     f"lower bound {lower:.3e}")
    if zeta_min <= 0:
        diags.append("relaxation coefficient is not positive")

    observed = {"c1_obs": c1_obs if np.isfinite(c1_obs) else None,
                "c2_obs": c2_obs,
                "zeta_min": zeta_min}
    return sorted(set(diags)), observed
