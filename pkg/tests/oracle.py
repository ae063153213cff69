"""Standalone scalar two-phase Allen-Cahn / Cahn-Hilliard solvers.

Written against the classical two-phase equations for phi in [-1, 1] with
double well W(phi) = (phi^2 - 1)^2 / 4, independently of the N-phase code:
own mesh, own element loop, direct sparse solves.  Mass terms in time and
in the chemical potential use row-sum lumping, like the nonlinear terms.
"""
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def grid(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    nodes = np.array([(x, y) for y in xs for x in xs])
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            tris += [(a, b, c), (a, c, d)]
    return nodes, tris


def p1_matrices(nodes, tris):
    size = len(nodes)
    mass = sp.lil_matrix((size, size))
    stiff = sp.lil_matrix((size, size))
    for tri in tris:
        p = nodes[list(tri)]
        jac = np.array([p[1] - p[0], p[2] - p[0]]).T
        area = abs(np.linalg.det(jac)) / 2
        grads = np.linalg.solve(jac.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])).T
        for a in range(3):
            for b in range(3):
                mass[tri[a], tri[b]] += area * (2.0 if a == b else 1.0) / 12.0
                stiff[tri[a], tri[b]] += area * grads[a] @ grads[b]
    return mass.tocsr(), stiff.tocsr()


def well_prime(phi):
    return phi**3 - phi


def well_secant(new, old):
    return (new + old) * (new**2 + old**2 - 2.0) / 4.0


def well_secant_prime(new, old):
    return (new**2 + old**2 - 2.0) / 4.0 + (new + old) * new / 2.0


def _newton(residual, jacobian, x0, tol=1e-13, max_iter=50):
    x = x0.copy()
    r0 = np.linalg.norm(residual(x))
    for _ in range(max_iter):
        r = residual(x)
        if np.linalg.norm(r) <= tol * max(r0, 1.0):
            return x
        x = x - spla.spsolve(jacobian(x).tocsc(), r)
    raise RuntimeError("oracle Newton did not converge")


class ScalarAllenCahn:
    """(gamma/(k eta)) M_L (phi' - phi) + K phi~ + (1/eps^2) M_L W'(phi~) = 0."""

    def __init__(self, n, eta, gamma, k):
        nodes, tris = grid(n)
        _, self.stiff = p1_matrices(nodes, tris)
        mass, _ = p1_matrices(nodes, tris)
        self.lumped = sp.diags(np.asarray(mass.sum(axis=1)).ravel())
        self.eps2 = (3.0 * eta / (2.0 * math.sqrt(2.0))) ** 2
        self.rate = gamma / (k * eta)

    def step(self, phi, scheme):
        ml, kk, rate, eps2 = self.lumped, self.stiff, self.rate, self.eps2
        if scheme == "semi_implicit":
            lhs = rate * ml + kk
            return spla.spsolve(lhs.tocsc(), rate * (ml @ phi) - ml @ well_prime(phi) / eps2)
        if scheme == "fully_implicit":
            res = lambda x: rate * ml @ (x - phi) + kk @ x + ml @ well_prime(x) / eps2  # noqa: E731
            jac = lambda x: rate * ml + kk + ml @ sp.diags(3 * x**2 - 1) / eps2  # noqa: E731
        else:
            res = lambda x: rate * ml @ (x - phi) + kk @ (x + phi) / 2 + ml @ well_secant(x, phi) / eps2  # noqa: E731
            jac = lambda x: rate * ml + kk / 2 + ml @ sp.diags(well_secant_prime(x, phi)) / eps2  # noqa: E731
        return _newton(res, jac, phi)


class ScalarCahnHilliard:
    """M_L (phi' - phi) + k m K mu' = 0,  M_L mu' = eps K phi~ + (1/eps) M_L W'(phi~)."""

    def __init__(self, n, eta, m0, k):
        nodes, tris = grid(n)
        mass, self.stiff = p1_matrices(nodes, tris)
        self.lumped = sp.diags(np.asarray(mass.sum(axis=1)).ravel())
        self.eps = 3.0 * eta / (2.0 * math.sqrt(2.0))
        self.mobility = 2.0 * math.sqrt(2.0) / 3.0 * m0
        self.k = k
        self.size = mass.shape[0]

    def _blocks(self, theta, nonlinear):
        ml, kk, eps = self.lumped, self.stiff, self.eps
        return sp.bmat([[ml, self.k * self.mobility * kk], [-theta * eps * kk - nonlinear, ml]])

    def step(self, phi, scheme):
        """Returns ``(phi', mu')``."""
        ml, kk, eps, n = self.lumped, self.stiff, self.eps, self.size
        if scheme == "semi_implicit":
            lhs = self._blocks(1.0, sp.csr_matrix((n, n)))
            rhs = np.concatenate([ml @ phi, ml @ well_prime(phi) / eps])
            x = spla.spsolve(lhs.tocsc(), rhs)
            return x[:n], x[n:]

        def res(x):
            p, mu = x[:n], x[n:]
            if scheme == "fully_implicit":
                chem = eps * kk @ p + ml @ well_prime(p) / eps
            else:
                chem = eps * kk @ (p + phi) / 2 + ml @ well_secant(p, phi) / eps
            return np.concatenate([ml @ (p - phi) + self.k * self.mobility * kk @ mu, ml @ mu - chem])

        def jac(x):
            p = x[:n]
            if scheme == "fully_implicit":
                return self._blocks(1.0, ml @ sp.diags(3 * p**2 - 1) / eps)
            return self._blocks(0.5, ml @ sp.diags(well_secant_prime(p, phi)) / eps)

        x = _newton(res, jac, np.concatenate([phi, np.zeros(n)]))
        return x[:n], x[n:]
