"""Error norms, resolution measures and empirical convergence rates.

Error integrals sample the exact solution directly at quadrature points
(exactness 2p + 8 by default) and re-run with a doubled rule; the
relative drift between the two is reported so that quadrature-limited
numbers are visible.  The least-squares residual components

    e1 = || ik (phi - phi_h) + grad(u - u_h) ||_{L2}
    e2 = || ik (u - u_h) + div(phi - phi_h) ||_{L2}

are tracked separately because they converge at different orders.
Everything here is pure post-processing over immutable solutions.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .fosls import _facet_quadrature, element_panels
from .polyquad import simplex_quadrature
from .spaces import scalar_eval, scalar_grad_eval, vector_div_eval, vector_eval


@dataclass(frozen=True)
class ErrorReport:
    """Error norms of a discrete solution against the exact one.

    Flux-based entries (e1, e2, flux_l2, e_bnd) are NaN for classical FEM
    solutions, which carry no discrete flux.  ``quad_drift`` is the
    largest relative change of any entry when the quadrature rule is
    doubled.
    """

    l2_rel: float
    h1_err: float
    bnd_l2: float
    e1: float
    e2: float
    flux_l2: float
    e_bnd: float
    u_l2: float
    quad_drift: float


@dataclass(frozen=True)
class RunRecord:
    """One convergence-study run: mesh/degree parameters plus errors."""

    problem: str
    method: str
    d: int
    k: float
    p: int
    n_elems: int
    h: float
    dof: int
    n_lambda: float
    errors: ErrorReport


@dataclass
class ConvergenceTable:
    """Study rows, refined meshes within fixed (method, p, k)."""

    rows: list = field(default_factory=list)

    def add(self, record):
        self.rows.append(record)

    def series(self):
        """Group rows by (method, p); rows keep their insertion order."""
        out = {}
        for row in self.rows:
            out.setdefault((row.method, row.p), []).append(row)
        return out


def _accumulate(sol, problem, exactness):
    w_space = sol.w_space
    mesh = w_space.mesh
    k = problem.k
    exact = problem.exact
    has_flux = sol.phi_coeffs is not None
    rule = simplex_quadrature(mesh.dim, exactness)

    acc = dict.fromkeys(
        ("u2", "eu2", "geu2", "e12", "e22", "ephi2"), 0.0
    )
    for e in range(len(mesh.elements)):
        pts, wts = element_panels(mesh, e, rule, problem.breakpoints)
        phys = pts @ mesh.maps_A[e].T + mesh.maps_b[e]
        wdet = wts * mesh.det_A[e]

        u_ex = np.asarray(exact.u(phys), dtype=complex)
        gu_ex = np.asarray(exact.grad_u(phys), dtype=complex)
        u_h = scalar_eval(w_space, sol.u_coeffs, e, pts)
        gu_h = scalar_grad_eval(w_space, sol.u_coeffs, e, pts)
        eu = u_ex - u_h
        geu = gu_ex - gu_h

        acc["u2"] += np.sum(wdet * np.abs(u_ex) ** 2)
        acc["eu2"] += np.sum(wdet * np.abs(eu) ** 2)
        acc["geu2"] += np.sum(wdet * np.einsum("qd->q", np.abs(geu) ** 2))

        if has_flux:
            phi_ex = np.asarray(exact.phi(phys), dtype=complex)
            dphi_ex = np.asarray(exact.div_phi(phys), dtype=complex)
            phi_h = vector_eval(sol.v_space, sol.phi_coeffs, e, pts)
            dphi_h = vector_div_eval(sol.v_space, sol.phi_coeffs, e, pts)
            ephi = phi_ex - phi_h
            e1 = 1j * k * ephi + geu
            e2 = 1j * k * eu + (dphi_ex - dphi_h)
            acc["e12"] += np.sum(wdet * np.einsum("qd->q", np.abs(e1) ** 2))
            acc["e22"] += np.sum(wdet * np.abs(e2) ** 2)
            acc["ephi2"] += np.sum(wdet * np.einsum("qd->q", np.abs(ephi) ** 2))

    bnd = {"eu2": 0.0, "imp2": 0.0}
    n_bnd = w_space.p + 6
    for fid in mesh.boundary_facets:
        e = mesh.facets[fid].elems[0]
        ref, phys, w, jac, normal = _facet_quadrature(mesh, fid, e, n_bnd)
        wj = w * jac
        u_ex = np.asarray(exact.u(phys), dtype=complex)
        u_h = scalar_eval(w_space, sol.u_coeffs, e, ref)
        eu = u_ex - u_h
        bnd["eu2"] += np.sum(wj * np.abs(eu) ** 2)
        if has_flux:
            phi_ex = np.asarray(exact.phi(phys), dtype=complex)
            phi_h = vector_eval(sol.v_space, sol.phi_coeffs, e, ref)
            imp = (phi_ex - phi_h) @ normal + eu
            bnd["imp2"] += np.sum(wj * np.abs(imp) ** 2)

    nan = float("nan")
    return {
        "l2_rel": math.sqrt(acc["eu2"] / acc["u2"]) if acc["u2"] > 0 else nan,
        "h1_err": math.sqrt(acc["geu2"]),
        "bnd_l2": math.sqrt(bnd["eu2"]),
        "e1": math.sqrt(acc["e12"]) if has_flux else nan,
        "e2": math.sqrt(acc["e22"]) if has_flux else nan,
        "flux_l2": math.sqrt(acc["ephi2"]) if has_flux else nan,
        "e_bnd": math.sqrt(bnd["imp2"]) if has_flux else nan,
        "u_l2": math.sqrt(acc["u2"]),
    }


def compute_errors(sol, problem, exactness=None):
    """Error report for a discrete solution; needs an exact solution."""
    if problem.exact is None:
        raise ValueError("compute_errors requires a problem with an exact solution")
    if exactness is None:
        exactness = 2 * sol.w_space.p + 8
    base = _accumulate(sol, problem, exactness)
    fine = _accumulate(sol, problem, 2 * exactness)
    drift = 0.0
    for key, val in base.items():
        ref = fine[key]
        if math.isnan(val) or math.isnan(ref):
            continue
        scale = max(abs(ref), 1e-300)
        drift = max(drift, abs(val - ref) / scale)
    return ErrorReport(quad_drift=drift, **base)


def dofs_per_wavelength(dof, k, volume, d):
    """Resolution measure 2 pi DOF^(1/d) / (k |Omega|^(1/d))."""
    if dof <= 0 or k <= 0 or volume <= 0 or d <= 0:
        raise ValueError("all arguments must be positive")
    return 2 * math.pi * dof ** (1.0 / d) / (k * volume ** (1.0 / d))


def eoc_pairs(h, errors):
    """Pairwise empirical orders log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


def tail_slope(h, errors, n_tail=3):
    """Least-squares slope of log(e) vs log(h) over the last rows."""
    h = np.asarray(h, dtype=float)[-n_tail:]
    e = np.asarray(errors, dtype=float)[-n_tail:]
    if len(h) < 2:
        raise ValueError("need at least 2 rows for a slope")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def empirical_order(table, quantity="l2_rel"):
    """Per-series rates: pairwise orders and the asymptotic tail slope.

    Rows outside the asymptotic regime still show up in the pairwise
    list; the tail slope uses the last three refinement levels only.
    """
    out = {}
    for key, rows in table.series().items():
        if len(rows) < 2:
            raise ValueError(
                f"series {key} has fewer than 2 rows; cannot form rates"
            )
        h = [r.h for r in rows]
        e = [getattr(r.errors, quantity) for r in rows]
        out[key] = {
            "h": h,
            "pairwise": eoc_pairs(h, e),
            "tail": tail_slope(h, e),
        }
    return out
