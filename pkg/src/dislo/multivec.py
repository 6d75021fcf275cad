"""Exact multilinear algebra on R^3 and space-time R^{1+3}.

Conventions:
  * Vec3 / Mat3 are plain float arrays of shape (3,) / (3, 3).
  * BiVec3 components are stored in the basis (e2^e3, e3^e1, e1^e2), so the
    components of a ^ b coincide with the cross product a x b and the Hodge
    star is the identity on components.
  * BiVec4 components (space-time, e0 = time) are stored in the basis
    (e0^e1, e0^e2, e0^e3, e2^e3, e3^e1, e1^e2): time-spanned block first,
    purely spatial block last.

The mass norm of a simple 2-vector equals the Euclidean norm of its
component vector (valid in dimensions 3 and 4); every 2-vector arising here
comes from a triangle and is therefore simple.
"""

import numpy as np

ATOL = 1e-12


def wedge(a, b):
    """Wedge product of two spatial vectors; components equal cross(a, b)."""
    return np.cross(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def hodge_star(xi):
    """Hodge star of a spatial 2-vector: identity on components, star(a^b) = a x b."""
    return np.asarray(xi, dtype=float).copy()


def wedge4(u, w):
    """Wedge of two space-time vectors (t, x1, x2, x3) as a BiVec4."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.empty(6)
    out[0] = u[0] * w[1] - u[1] * w[0]
    out[1] = u[0] * w[2] - u[2] * w[0]
    out[2] = u[0] * w[3] - u[3] * w[0]
    out[3] = u[2] * w[3] - u[3] * w[2]
    out[4] = u[3] * w[1] - u[1] * w[3]
    out[5] = u[1] * w[2] - u[2] * w[1]
    return out


def spatial_projection(xi4):
    """Drop every component containing e0; returns the purely spatial BiVec3.

    For simple xi4 = u ^ w this equals p(u) ^ p(w) with p(t, x) = x.
    """
    return np.asarray(xi4, dtype=float)[..., 3:6].copy()


def cofactor(P):
    """Cofactor matrix: cof(P)_{ij} = d det(P) / d P_{ij} = det(P) P^{-T}."""
    P = np.asarray(P, dtype=float)
    c = np.empty((3, 3))
    c[0, 0] = P[1, 1] * P[2, 2] - P[1, 2] * P[2, 1]
    c[0, 1] = P[1, 2] * P[2, 0] - P[1, 0] * P[2, 2]
    c[0, 2] = P[1, 0] * P[2, 1] - P[1, 1] * P[2, 0]
    c[1, 0] = P[0, 2] * P[2, 1] - P[0, 1] * P[2, 2]
    c[1, 1] = P[0, 0] * P[2, 2] - P[0, 2] * P[2, 0]
    c[1, 2] = P[0, 1] * P[2, 0] - P[0, 0] * P[2, 1]
    c[2, 0] = P[0, 1] * P[1, 2] - P[0, 2] * P[1, 1]
    c[2, 1] = P[0, 2] * P[1, 0] - P[0, 0] * P[1, 2]
    c[2, 2] = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
    return c


def pushforward2(P, xi):
    """Linear pushforward of a spatial 2-vector: P(a^b) = (Pa)^(Pb).

    In components this is the cofactor matrix acting on xi.
    """
    return cofactor(P) @ np.asarray(xi, dtype=float)


def proj_perp(n, v):
    """Orthogonal projection of v onto the plane orthogonal to n."""
    n = np.asarray(n, dtype=float)
    v = np.asarray(v, dtype=float)
    nn = float(n @ n)
    if nn == 0.0:
        raise ValueError("proj_perp: zero normal vector")
    return v - (float(v @ n) / nn) * n


def mass_norm(xi):
    """Mass norm of a simple 2-vector (3 or 6 components): Euclidean norm."""
    return float(np.linalg.norm(np.asarray(xi, dtype=float)))


def triangle_bivector(v0, v1, v2):
    """Orienting 2-vector (v1-v0) ^ (v2-v0) of a space-time triangle.

    Its mass norm is twice the triangle area; orientation follows the vertex
    order.
    """
    v0 = np.asarray(v0, dtype=float)
    return wedge4(np.asarray(v1, dtype=float) - v0, np.asarray(v2, dtype=float) - v0)


def time_gradient_norm(v0, v1, v2):
    """Norm of the projection of e0 onto the triangle plane (|grad^R t|).

    Satisfies |grad^R t|^2 + |p(unit 2-vector)|^2 = 1 for non-degenerate
    triangles.
    """
    u = np.asarray(v1, dtype=float) - np.asarray(v0, dtype=float)
    w = np.asarray(v2, dtype=float) - np.asarray(v0, dtype=float)
    # Gram-Schmidt basis of the triangle plane
    nu = np.linalg.norm(u)
    if nu == 0.0:
        return 0.0
    q1 = u / nu
    w2 = w - (w @ q1) * q1
    nw = np.linalg.norm(w2)
    if nw == 0.0:
        return abs(q1[0])
    q2 = w2 / nw
    return float(np.hypot(q1[0], q2[0]))
