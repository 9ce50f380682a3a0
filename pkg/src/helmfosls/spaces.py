"""Global conforming finite element spaces.

Two kinds are provided: the scalar space S_p (continuous, H1-conforming)
and the vector space BDM_p = P_p^2 per element (normal-trace continuous,
H(div)-conforming), mapped from the reference triangle by the
contravariant Piola transform

    phi(F(x)) = A phi_hat(x) / det A,   div phi o F = div_hat phi_hat / det A.

Inter-element continuity is handled through per-element sign tables: an
edge function whose Legendre kernel has odd degree flips sign when the
local edge direction disagrees with the global one (ascending vertex
index), and a normal-trace dof additionally flips with the orientation
of the global facet normal.

In 1D, H(div) coincides with H1 and the scalar space doubles as the flux
space (the normal trace at an endpoint is +/- the point value), so
``build_hdiv_space`` is reserved for 2D meshes.
"""

import numpy as np
from numpy.polynomial import legendre as npleg

from .mesh import REFERENCE_VERTICES
from .polyquad import ScalarBasis, gauss01, make_scalar_basis

KIND_H1 = "scalar-h1"
KIND_HDIV = "vector-hdiv"

# outward unit normals of the reference triangle edges (0,1), (0,2), (1,2)
REF_EDGE_NORMALS = np.array([
    [0.0, -1.0],
    [-1.0, 0.0],
    [1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0)],
])
REF_EDGE_LENGTHS = np.array([1.0, 1.0, np.sqrt(2.0)])


def edge_reference_points(local_edge, t):
    """Reference coordinates on a local triangle edge at parameters t."""
    i, j = ScalarBasis.EDGES[local_edge]
    a, b = REFERENCE_VERTICES[2][i], REFERENCE_VERTICES[2][j]
    t = np.asarray(t, dtype=float)
    return a[None, :] * (1 - t)[:, None] + b[None, :] * t[:, None]


class BdmBasis:
    """Reference basis of P_p^2 adapted to normal-trace moments.

    The first 3(p+1) functions carry one unit Legendre moment of the
    normal trace on one edge each and zero moments on the others; the
    remaining (p+1)(p-1) span the subspace with vanishing normal trace.
    Built numerically: the moment map is assembled on the vector-valued
    hierarchical basis, edge functions are its pseudo-inverse columns and
    interior functions an orthonormal basis of its null space.
    """

    def __init__(self, p):
        self.p = p
        self.scalar = make_scalar_basis(2, p)
        ns = self.scalar.dim
        self.dim = 2 * ns
        self.n_edge = p + 1
        self.n_interior = (p + 1) * (p - 1)

        t, w = gauss01(p + 2)
        legv = npleg.legvander(2 * t - 1, p)
        rows = []
        for l in range(3):
            pts = edge_reference_points(l, t)
            sv = self.scalar.eval(pts)
            n_hat = REF_EDGE_NORMALS[l]
            normal_comp = np.concatenate([sv * n_hat[0], sv * n_hat[1]], axis=1)
            for m in range(p + 1):
                rows.append(
                    REF_EDGE_LENGTHS[l]
                    * np.einsum("q,q,qj->j", w, legv[:, m], normal_comp)
                )
        T = np.array(rows)
        edge_cols = np.linalg.pinv(T)
        _, s, vh = np.linalg.svd(T)
        null_cols = vh[len(s):].T
        self.coeffs = np.hstack([edge_cols, null_cols])
        # sanity: the dual pairing must come out as the identity
        check = T @ self.coeffs
        target = np.zeros_like(check)
        target[:, : T.shape[0]] = np.eye(T.shape[0])
        if not np.allclose(check, target, atol=1e-9):
            raise RuntimeError(f"BDM dual basis construction failed for p={p}")

    def eval(self, points):
        """Vector basis values; shape (n_points, dim, 2)."""
        sv = self.scalar.eval(points)
        ns = self.scalar.dim
        out = np.empty((sv.shape[0], self.dim, 2))
        out[:, :, 0] = sv @ self.coeffs[:ns]
        out[:, :, 1] = sv @ self.coeffs[ns:]
        return out

    def div(self, points):
        """Reference divergences; shape (n_points, dim)."""
        sg = self.scalar.grad(points)
        ns = self.scalar.dim
        return sg[:, :, 0] @ self.coeffs[:ns] + sg[:, :, 1] @ self.coeffs[ns:]


class FunctionSpace:
    """Global conforming space over a mesh.

    ``elem_dofs``/``elem_signs`` map local basis indices to (global dof,
    orientation sign) per element; ``boundary_dof_info`` lists the global
    dofs supported on each boundary facet.  Immutable after construction.
    """

    def __init__(self, kind, mesh, p, n_dofs, elem_dofs, elem_signs, basis,
                 bdm=None):
        self.kind = kind
        self.mesh = mesh
        self.p = p
        self.n_dofs = n_dofs
        self.elem_dofs = elem_dofs
        self.elem_signs = elem_signs
        self.basis = basis
        self.bdm = bdm
        self.boundary_dof_info = self._collect_boundary_dofs()
        self.elem_dofs.flags.writeable = False
        self.elem_signs.flags.writeable = False

    def _collect_boundary_dofs(self):
        info = {}
        for fid in self.mesh.boundary_facets:
            elem = self.mesh.facets[fid].elems[0]
            li, _ = self.mesh.facet_element_side(fid, elem)
            if self.kind == KIND_H1:
                if self.mesh.dim == 1:
                    local = [li]  # facet vertex is local vertex li
                else:
                    i, j = ScalarBasis.EDGES[li]
                    local = [i, j] + self.basis.dof_classes["edge"][li]
            else:
                nle = self.bdm.n_edge
                local = list(range(li * nle, (li + 1) * nle))
            info[fid] = [int(self.elem_dofs[elem, l]) for l in local]
        return info

    def local_dim(self):
        return self.elem_dofs.shape[1]


def build_h1_space(mesh, p):
    """Continuous scalar space S_p over the mesh."""
    basis = make_scalar_basis(mesh.dim, p)
    nv = len(mesh.vertices)
    ne = len(mesh.elements)
    if mesh.dim == 1:
        n_int = p - 1
        n_dofs = nv + ne * n_int
        elem_dofs = np.empty((ne, basis.dim), dtype=int)
        elem_dofs[:, :2] = mesh.elements
        for e in range(ne):
            elem_dofs[e, 2:] = nv + e * n_int + np.arange(n_int)
        elem_signs = np.ones((ne, basis.dim))
        return FunctionSpace(KIND_H1, mesh, p, n_dofs, elem_dofs, elem_signs, basis)

    n_edge = p - 1
    n_int = (p - 1) * (p - 2) // 2
    nf = len(mesh.facets)
    n_dofs = nv + nf * n_edge + ne * n_int
    elem_dofs = np.empty((ne, basis.dim), dtype=int)
    elem_signs = np.ones((ne, basis.dim))
    kernel_parity = np.array([(-1.0) ** m for m in range(n_edge)])
    for e in range(ne):
        elem = mesh.elements[e]
        elem_dofs[e, :3] = elem
        col = 3
        for l, (i, j) in enumerate(ScalarBasis.EDGES):
            fid = mesh.elem_facets[e, l]
            elem_dofs[e, col:col + n_edge] = nv + fid * n_edge + np.arange(n_edge)
            if elem[i] > elem[j]:  # local direction opposes the global one
                elem_signs[e, col:col + n_edge] = kernel_parity
            col += n_edge
        elem_dofs[e, col:] = nv + nf * n_edge + e * n_int + np.arange(n_int)
    return FunctionSpace(KIND_H1, mesh, p, n_dofs, elem_dofs, elem_signs, basis)


def build_hdiv_space(mesh, p):
    """BDM_p space over a 2D mesh (p+1 normal moments per edge)."""
    if mesh.dim != 2:
        raise ValueError(
            "build_hdiv_space requires a 2D mesh; in 1D the scalar space "
            "doubles as the flux space (use build_h1_space)"
        )
    if p < 1:
        raise ValueError("degree p must be at least 1")
    bdm = BdmBasis(p)
    ne = len(mesh.elements)
    nf = len(mesh.facets)
    nle = bdm.n_edge
    n_int = bdm.n_interior
    n_dofs = nf * nle + ne * n_int
    elem_dofs = np.empty((ne, bdm.dim), dtype=int)
    elem_signs = np.ones((ne, bdm.dim))
    moment_parity = np.array([(-1.0) ** m for m in range(nle)])

    # normal-trace dofs are oriented by a canonical per-facet normal built
    # from vertex ids alone (rotate the ascending-vertex tangent), so the
    # numbering and signs do not depend on the element ordering
    canon_match = np.empty(nf)
    for fid, facet in enumerate(mesh.facets):
        a, b = mesh.vertices[facet.vertex_ids[0]], mesh.vertices[facet.vertex_ids[1]]
        canon = np.array([b[1] - a[1], a[0] - b[0]])
        canon_match[fid] = 1.0 if facet.normal @ canon > 0 else -1.0

    for e in range(ne):
        elem = mesh.elements[e]
        for l, (i, j) in enumerate(ScalarBasis.EDGES):
            fid = mesh.elem_facets[e, l]
            _, side = mesh.facet_element_side(fid, e)
            sigma = side * canon_match[fid]
            cols = slice(l * nle, (l + 1) * nle)
            elem_dofs[e, cols] = fid * nle + np.arange(nle)
            signs = np.full(nle, sigma)
            if elem[i] > elem[j]:
                signs = signs * moment_parity
            elem_signs[e, cols] = signs
        elem_dofs[e, 3 * nle:] = nf * nle + e * n_int + np.arange(n_int)
    return FunctionSpace(KIND_HDIV, mesh, p, n_dofs, elem_dofs, elem_signs,
                         bdm.scalar, bdm=bdm)


def piola_transform(A, phi_hat):
    """Contravariant Piola push-forward of a reference vector field.

    Returns a callable giving phi o F_K at reference points, where
    phi = A phi_hat / det A.  Rejects singular or orientation-reversing
    maps.
    """
    A = np.asarray(A, dtype=float)
    det = np.linalg.det(A)
    if det <= 0:
        raise ValueError("Piola transform requires det A > 0")

    def pushed(points):
        vals = np.asarray(phi_hat(np.atleast_2d(points)))
        return vals @ A.T / det

    return pushed


def piola_divergence(A, div_hat):
    """Divergence of a Piola-mapped field: (div phi) o F = div_hat / det A."""
    det = np.linalg.det(np.asarray(A, dtype=float))
    if det <= 0:
        raise ValueError("Piola transform requires det A > 0")
    return lambda points: np.asarray(div_hat(np.atleast_2d(points))) / det


# -- evaluation of global fields --------------------------------------


def local_coeffs(space, coeffs, elem):
    """Element coefficients (orientation signs applied)."""
    return space.elem_signs[elem] * coeffs[space.elem_dofs[elem]]


def scalar_eval(space, coeffs, elem, ref_points):
    return space.basis.eval(ref_points) @ local_coeffs(space, coeffs, elem)


def scalar_grad_eval(space, coeffs, elem, ref_points):
    """Physical gradients of a scalar field: grad = A^{-T} grad_hat."""
    g_ref = np.einsum(
        "nid,i->nd", space.basis.grad(ref_points), local_coeffs(space, coeffs, elem)
    )
    return g_ref @ space.mesh.inv_A[elem]


def vector_eval(space, coeffs, elem, ref_points):
    """Physical values of a flux field (Piola-mapped in 2D)."""
    lc = local_coeffs(space, coeffs, elem)
    if space.kind == KIND_H1:  # 1D flux space
        return (space.basis.eval(ref_points) @ lc)[:, None]
    vals = np.einsum("nid,i->nd", space.bdm.eval(ref_points), lc)
    mesh = space.mesh
    return vals @ mesh.maps_A[elem].T / mesh.det_A[elem]


def vector_div_eval(space, coeffs, elem, ref_points):
    """Physical divergence of a flux field."""
    lc = local_coeffs(space, coeffs, elem)
    mesh = space.mesh
    if space.kind == KIND_H1:
        g_ref = np.einsum("nid,i->nd", space.basis.grad(ref_points), lc)
        return (g_ref @ mesh.inv_A[elem])[:, 0]
    return (space.bdm.div(ref_points) @ lc) / mesh.det_A[elem]


# -- polynomial interpolation helpers (exact on per-element polynomials)


def _lattice(d, q):
    if d == 1:
        return np.linspace(0.0, 1.0, q + 1)[:, None]
    pts = [(i / q, j / q) for j in range(q + 1) for i in range(q + 1 - j)]
    return np.array(pts)


def interpolate_h1_polynomial(space, u):
    """Coefficients representing ``u`` exactly when u|_K is in P_p.

    ``u`` maps physical points (n, d) to values.  Each element is fitted
    on a unisolvent lattice; for globally continuous u the element fits
    agree on shared dofs.
    """
    mesh = space.mesh
    pts_ref = _lattice(mesh.dim, space.p)
    V = space.basis.eval(pts_ref)
    coeffs = np.zeros(space.n_dofs, dtype=complex)
    for e in range(len(mesh.elements)):
        phys = pts_ref @ mesh.maps_A[e].T + mesh.maps_b[e]
        local = np.linalg.solve(V, np.asarray(u(phys), dtype=complex))
        coeffs[space.elem_dofs[e]] = space.elem_signs[e] * local
    return coeffs


def interpolate_hdiv_polynomial(space, phi):
    """BDM coefficients representing ``phi`` exactly when phi|_K is in P_p^2.

    ``phi`` maps physical points (n, 2) to values (n, 2).  The field is
    pulled back by the Piola transform and matched on a lattice.
    """
    if space.kind != KIND_HDIV:
        raise ValueError("expected a vector-hdiv space")
    mesh = space.mesh
    bdm = space.bdm
    pts_ref = _lattice(2, space.p)
    V = bdm.scalar.eval(pts_ref)
    coeffs = np.zeros(space.n_dofs, dtype=complex)
    for e in range(len(mesh.elements)):
        phys = pts_ref @ mesh.maps_A[e].T + mesh.maps_b[e]
        pulled = (
            mesh.det_A[e] * np.asarray(phi(phys), dtype=complex) @ mesh.inv_A[e].T
        )
        comp = [np.linalg.solve(V, pulled[:, i]) for i in range(2)]
        local = np.linalg.solve(
            bdm.coeffs.astype(complex), np.concatenate(comp)
        )
        coeffs[space.elem_dofs[e]] = space.elem_signs[e] * local
    return coeffs
