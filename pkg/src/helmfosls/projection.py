"""Constrained-minimization polynomial projections on the reference simplex.

The operator fixes a degree-p polynomial in consecutive steps: vertex
values first, then each edge trace as the minimizer of

    p ||u - pi||^2_{L2(e)} + ||u - pi||^2_{H1/2_00(e)}

subject to the vertex values, and finally (triangles only) the interior
as the minimizer of p^2 ||u - pi||^2_{L2(K)} + ||u - pi||^2_{H1(K)}
subject to the boundary trace.  On the interval the element itself is
the edge entity, so the edge step already determines every interior
coefficient and the volume stage is void.  Each step only sees the trace
of u on its entity, which is what makes an elementwise H(div)-conforming
construction possible: mapping the componentwise operator through the
Piola transform yields a global flux projection whose normal trace on a
facet is the one-dimensional edge projection of the normal trace data.

The H^{1/2}_00 inner product on the unit interval combines the L2
product, the Aronszajn-Slobodeckij seminorm

    (u, v) -> int int (u(x)-u(y)) (v(x)-v(y)) / (x-y)^2 dx dy,

and the endpoint-distance weighted product int u v / dist(t, {0,1}) dt.
The double integral is split along the diagonal and collapsed by the
Duffy substitution y = x(1-s); polynomial factors enter through their
divided-difference form (q(x)-q(y))/(x-y), which removes the singularity
algebraically, so the rule is exact on polynomials.  The weighted term
uses endpoint-split Gauss-Jacobi quadrature after factoring out the
quadratic vanishing of the integrand.

Gram matrices are precomputed once per degree and shared read-only;
individual projections are independent of each other.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

from .mesh import REFERENCE_VERTICES
from .polyquad import (
    ScalarBasis,
    gauss01,
    gauss_jacobi01,
    make_scalar_basis,
    simplex_quadrature,
)
from .spaces import KIND_HDIV


@dataclass(frozen=True)
class EdgeNormGram:
    """Gram matrices of the edge polynomial basis on (0, 1).

    ``gram_L2`` covers the full (p+1)-dimensional trace basis
    {1-t, t, bubbles}; ``gram_H12_00`` holds the H^{1/2}_00 inner product
    on the (p-1)-dimensional bubble sub-basis, where the vertex-matching
    constraint has been eliminated (the product is finite only for
    functions vanishing at the endpoints).
    """

    p: int
    gram_L2: np.ndarray
    gram_H12_00: np.ndarray


@dataclass
class ReferenceProjection:
    """Result of the staged projection: coefficients in the hierarchical
    basis plus a per-step trace of sub-solutions and KKT residuals."""

    p: int
    d: int
    result: np.ndarray
    step_trace: dict


def _edge_bubble_polys(p):
    """Monomial form of the bubbles t(1-t) P_m(2t-1), m = 0..p-2."""
    shift = nppoly.Polynomial([-1.0, 2.0])
    weight = nppoly.Polynomial([0.0, 1.0, -1.0])
    out = []
    for m in range(p - 1):
        leg = nppoly.Polynomial(npleg.leg2poly([0.0] * m + [1.0]))
        out.append(weight * leg(shift))
    return out


def _divided_difference_coeffs(poly):
    """Bivariate coefficients of (q(x) - q(y)) / (x - y)."""
    c = poly.coef
    deg = len(c) - 1
    size = max(deg, 1)
    D = np.zeros((size, size))
    for k in range(1, deg + 1):
        for i in range(k):
            D[i, k - 1 - i] += c[k]
    return D


class _EdgeWork:
    """Quadrature tables and Grams for the edge minimization at degree p."""

    def __init__(self, p):
        self.p = p
        nb = p - 1
        bubbles = _edge_bubble_polys(p)

        # plain Gauss data for L2 terms (and the full trace-basis Gram)
        tq, wq = gauss01(p + 6)
        self.tq, self.wq = tq, wq
        vals = np.column_stack([1 - tq, tq] + [b(tq) for b in bubbles])
        self.gram_l2_full = np.einsum("q,qi,qj->ij", wq, vals, vals)
        self.bub_l2 = vals[:, 2:]

        # diagonal-split Duffy grid for the Slobodeckij double integral
        n = 2 * p + 6
        x, wx = gauss01(n)
        s, ws = gauss01(n)
        self.X = np.repeat(x[:, None], n, axis=1)
        self.Y = x[:, None] * (1 - s)[None, :]
        self.XmY = x[:, None] * s[None, :]
        self.W = 2.0 * wx[:, None] * ws[None, :] * x[:, None]
        self.dd_bub = np.array(
            [
                nppoly.polyval2d(self.X, self.Y, _divided_difference_coeffs(b))
                for b in bubbles
            ]
        ).reshape(nb, n, n)

        # endpoint-split Gauss-Jacobi data for the distance-weighted term:
        # int_0^(1/2) F(t) t dt with F = uv / t^2 smooth for bubble pairs
        sj, wj = gauss_jacobi01(p + 6, 0, 1)
        self.t_left = sj / 2
        self.w_dist = wj / 4
        self.t_right = 1 - self.t_left
        self.bub_left = np.array(
            [b(self.t_left) for b in bubbles]
        ).reshape(nb, len(self.t_left))
        self.bub_right = np.array(
            [b(self.t_right) for b in bubbles]
        ).reshape(nb, len(self.t_right))
        inv_left = 1.0 / self.t_left**2
        inv_right = inv_left  # dist weight mirrors under t -> 1-t

        gram_sem = np.einsum("xy,axy,bxy->ab", self.W, self.dd_bub, self.dd_bub)
        gram_dist = np.einsum(
            "q,aq,bq->ab", self.w_dist * inv_left, self.bub_left, self.bub_left
        ) + np.einsum(
            "q,aq,bq->ab", self.w_dist * inv_right, self.bub_right, self.bub_right
        )
        gram_l2_bub = self.gram_l2_full[2:, 2:]
        self.gram_h12 = gram_l2_bub + gram_sem + gram_dist
        self.inv_left = inv_left

        # objective Gram p*L2 + H12_00 on bubbles, factorized once
        self.objective = p * gram_l2_bub + self.gram_h12
        self.chol = scipy.linalg.cho_factor(self.objective) if nb else None
        self.norm_gram = np.linalg.norm(self.objective) if nb else 0.0

    def moments(self, r):
        """Objective moments of a residual trace r vanishing at 0 and 1."""
        p = self.p
        if p == 1:
            return np.zeros(0, dtype=complex)
        m_l2 = np.einsum("q,q,qa->a", self.wq, r(self.tq), self.bub_l2)
        rx = r(self.X.ravel()).reshape(self.X.shape)
        ry = r(self.Y.ravel()).reshape(self.Y.shape)
        dd_r = (rx - ry) / self.XmY
        m_sem = np.einsum("xy,xy,axy->a", self.W, dd_r, self.dd_bub)
        m_dist = np.einsum(
            "q,q,aq->a", self.w_dist * self.inv_left, r(self.t_left), self.bub_left
        ) + np.einsum(
            "q,q,aq->a", self.w_dist * self.inv_left, r(self.t_right), self.bub_right
        )
        return p * m_l2 + (m_l2 + m_sem + m_dist)

    def solve(self, r):
        """Minimize the edge objective over bubbles; returns (coeffs, kkt)."""
        if self.p == 1:
            return np.zeros(0, dtype=complex), 0.0
        m = self.moments(r)
        c = scipy.linalg.cho_solve(self.chol, m)
        kkt = np.linalg.norm(self.objective @ c - m) / (
            self.norm_gram * np.linalg.norm(c) + np.linalg.norm(m) + 1e-300
        )
        return c, float(kkt)


class _VolumeWork:
    """Interior-minimization tables for the triangle at degree p >= 3."""

    def __init__(self, p):
        self.p = p
        self.basis = make_scalar_basis(2, p)
        rule = simplex_quadrature(2, 2 * p + 8)
        self.points = rule.points
        self.weights = rule.weights
        self.N, self.G = self.basis.eval_with_grad(rule.points)
        self.interior = self.basis.dof_classes["interior"]
        Ni = self.N[:, self.interior]
        Gi = self.G[:, self.interior, :]
        mass = np.einsum("q,qi,qj->ij", self.weights, Ni, Ni)
        stiff = np.einsum("q,qia,qja->ij", self.weights, Gi, Gi)
        self.objective = (p**2 + 1) * mass + stiff
        self.chol = scipy.linalg.cho_factor(self.objective)
        self.norm_gram = np.linalg.norm(self.objective)
        self.Ni, self.Gi = Ni, Gi

    def solve(self, r_vals, r_grads):
        p = self.p
        m = (p**2 + 1) * np.einsum(
            "q,q,qi->i", self.weights, r_vals, self.Ni
        ) + np.einsum("q,qa,qia->i", self.weights, r_grads, self.Gi)
        c = scipy.linalg.cho_solve(self.chol, m)
        kkt = np.linalg.norm(self.objective @ c - m) / (
            self.norm_gram * np.linalg.norm(c) + np.linalg.norm(m) + 1e-300
        )
        return c, float(kkt)


_EDGE_CACHE = {}
_VOLUME_CACHE = {}


def _edge_work(p):
    if p not in _EDGE_CACHE:
        _EDGE_CACHE[p] = _EdgeWork(p)
    return _EDGE_CACHE[p]


def _volume_work(p):
    if p not in _VOLUME_CACHE:
        _VOLUME_CACHE[p] = _VolumeWork(p)
    return _VOLUME_CACHE[p]


def h12_00_gram(p):
    """Edge Gram matrices at degree p (cached, shared read-only)."""
    if p < 1:
        raise ValueError("degree p must be at least 1")
    work = _edge_work(p)
    return EdgeNormGram(p=p, gram_L2=work.gram_l2_full, gram_H12_00=work.gram_h12)


def project_reference(u, d, p, grad_u=None):
    """Run the staged minimization for u on the reference simplex.

    ``u`` maps reference points (n, d) to (complex) values; ``grad_u``
    maps them to (n, d) gradients and is required only where an interior
    stage exists (d = 2, p >= 3).  Smoothness sufficient for point
    evaluation at vertices is the caller's responsibility.
    """
    if d == 3:
        raise NotImplementedError(
            "d = 3 is unsupported: the face stage of the construction is "
            "not implemented"
        )
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}")
    if p < 1:
        raise ValueError("degree p must be at least 1")

    basis = make_scalar_basis(d, p)
    verts = REFERENCE_VERTICES[d]
    vertex_vals = np.asarray(u(verts), dtype=complex)
    coeffs = np.zeros(basis.dim, dtype=complex)
    coeffs[: d + 1] = vertex_vals
    trace = {"vertex": vertex_vals, "edge": [], "volume": None}
    work = _edge_work(p)

    if d == 1:
        def r(t):
            pts = np.asarray(t, dtype=float)[:, None]
            lin = vertex_vals[0] * (1 - pts[:, 0]) + vertex_vals[1] * pts[:, 0]
            return np.asarray(u(pts), dtype=complex) - lin

        c, kkt = work.solve(r)
        coeffs[2:] = c
        trace["edge"].append({"coeffs": c, "kkt": kkt})
        return ReferenceProjection(p=p, d=d, result=coeffs, step_trace=trace)

    for l, (i, j) in enumerate(ScalarBasis.EDGES):
        a, b = verts[i], verts[j]
        ui, uj = vertex_vals[i], vertex_vals[j]

        def r(t, a=a, b=b, ui=ui, uj=uj):
            t = np.asarray(t, dtype=float)
            pts = a[None, :] * (1 - t)[:, None] + b[None, :] * t[:, None]
            return np.asarray(u(pts), dtype=complex) - (ui * (1 - t) + uj * t)

        c, kkt = work.solve(r)
        coeffs[basis.dof_classes["edge"][l]] = c
        trace["edge"].append({"coeffs": c, "kkt": kkt})

    if p >= 3:
        if grad_u is None:
            raise ValueError("grad_u is required for the interior stage (d=2, p>=3)")
        vol = _volume_work(p)
        pts = vol.points
        r_vals = np.asarray(u(pts), dtype=complex) - vol.N @ coeffs
        r_grads = np.asarray(grad_u(pts), dtype=complex) - np.einsum(
            "qia,i->qa", vol.G, coeffs
        )
        c, kkt = vol.solve(r_vals, r_grads)
        coeffs[vol.interior] = c
        trace["volume"] = {"coeffs": c, "kkt": kkt}
    return ReferenceProjection(p=p, d=d, result=coeffs, step_trace=trace)


def project_hdiv_global(phi, space, jac_phi=None, return_max_mismatch=False):
    """Project a smooth vector field into the global flux space.

    Per element the field is pulled back by the Piola transform, the
    staged projection is applied componentwise and the result is pushed
    into the global coefficient vector.  Because each edge stage depends
    only on the trace there, the two elements adjacent to a facet assign
    the same normal-moment dofs (up to roundoff, reported as the optional
    mismatch), so the result is H(div)-conforming.

    ``phi`` maps physical points (n, 2) to values (n, 2); ``jac_phi``
    returns (n, 2, 2) Jacobians d phi_i / d x_j and is required for
    p >= 3.
    """
    if space.kind != KIND_HDIV:
        raise ValueError("project_hdiv_global expects a vector-hdiv space")
    p = space.p
    if p >= 3 and jac_phi is None:
        raise ValueError("jac_phi is required for p >= 3")
    mesh = space.mesh
    bdm = space.bdm
    coeffs = np.zeros(space.n_dofs, dtype=complex)
    written = np.zeros(space.n_dofs, dtype=bool)
    mismatch = 0.0

    for e in range(len(mesh.elements)):
        A, det, inv, b0 = (
            mesh.maps_A[e],
            mesh.det_A[e],
            mesh.inv_A[e],
            mesh.maps_b[e],
        )

        def pull(pts):
            phys = np.atleast_2d(pts) @ A.T + b0
            return det * np.asarray(phi(phys), dtype=complex) @ inv.T

        def pull_jac(pts):
            phys = np.atleast_2d(pts) @ A.T + b0
            J = np.asarray(jac_phi(phys), dtype=complex)
            return det * np.einsum("ij,nja,ab->nib", inv, J, A)

        comp = []
        for i in (0, 1):
            ui = lambda pts, i=i: pull(pts)[:, i]
            gi = None
            if jac_phi is not None:
                gi = lambda pts, i=i: pull_jac(pts)[:, i, :]
            comp.append(project_reference(ui, 2, p, grad_u=gi).result)
        local = np.linalg.solve(bdm.coeffs.astype(complex), np.concatenate(comp))
        glob = space.elem_dofs[e]
        vals = space.elem_signs[e] * local
        seen = written[glob]
        if np.any(seen):
            mismatch = max(mismatch, float(np.max(np.abs(
                coeffs[glob][seen] - vals[seen]
            ))))
        coeffs[glob] = vals
        written[glob] = True

    if return_max_mismatch:
        return coeffs, mismatch
    return coeffs
