import numpy as np
import pytest

from helmfosls.problems import ExactBundle, WaveProblem, robin_data_from_exact


def polynomial_problem(dim, k=3.0):
    """Manufactured problem whose exact solution is a degree-2 polynomial.

    Any degree >= 2 discretization must reproduce it to roundoff, which
    makes it a sharp consistency probe for assembly and error norms.
    """
    if dim == 1:
        def u(pts):
            x = np.atleast_2d(pts)[:, 0]
            return (x**2 + 2 * x + 3).astype(complex)

        def grad_u(pts):
            x = np.atleast_2d(pts)[:, 0]
            return (2 * x + 2).astype(complex)[:, None]
    else:
        def u(pts):
            pts = np.atleast_2d(pts)
            x, y = pts[:, 0], pts[:, 1]
            return (1 + x + x**2 + x * y).astype(complex)

        def grad_u(pts):
            pts = np.atleast_2d(pts)
            x, y = pts[:, 0], pts[:, 1]
            return np.column_stack([1 + 2 * x + y, x]).astype(complex)

    def laplacian_u(pts):
        return np.full(len(np.atleast_2d(pts)), 2.0, dtype=complex)

    def f(pts):
        return -laplacian_u(pts) - k**2 * u(pts)

    bundle = ExactBundle(
        u=u,
        grad_u=grad_u,
        phi=lambda pts: 1j / k * grad_u(pts),
        div_phi=lambda pts: 1j / k * laplacian_u(pts),
        laplacian_u=laplacian_u,
    )
    return WaveProblem(
        name=f"poly-{dim}d", dim=dim, k=k, f=f, g=robin_data_from_exact(u, grad_u, k),
        exact=bundle,
    )


def zero_problem(dim, k=2.0):
    """Homogeneous data: f = 0, g = 0."""
    def f(pts):
        return np.zeros(len(np.atleast_2d(pts)), dtype=complex)

    def g(pts, normals):
        return np.zeros(len(np.atleast_2d(pts)), dtype=complex)

    return WaveProblem(name=f"zero-{dim}d", dim=dim, k=k, f=f, g=g)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
