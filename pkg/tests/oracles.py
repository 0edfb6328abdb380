"""Independent reference solutions used by the tests."""
import math

import numpy as np
from numpy.polynomial.legendre import leggauss


def uniform_vorticity_velocity(x, theta, radius, terms=4000):
    """Exact velocity ``perp(grad Phi)`` for omega = 1 in the sector, where
    ``Laplace(Phi) = 1`` and ``Phi = 0`` on the boundary.

    ``Phi = r^2/4 (1 - cos(2 phi - theta)/cos(theta)) - sum b_k (r/R)^(k beta) sin(k beta phi)``;
    the series removes the particular solution's trace on the arc.  Not valid
    at theta = pi/2.
    """
    beta = math.pi / theta
    c = math.cos(theta)
    nodes, weights = leggauss(400)
    phi_q = 0.5 * theta * (nodes + 1.0)
    w_q = 0.5 * theta * weights
    g = radius**2 / 4.0 * (1.0 - np.cos(2 * phi_q - theta) / c)
    k = np.arange(1, terms + 1)
    b = (2.0 / theta) * (np.sin(np.outer(k * beta, phi_q)) @ (g * w_q))
    z = np.asarray(x, dtype=complex)
    r = np.abs(z)
    phi = np.angle(z)
    phi = np.where(phi < -0.5 * (2 * math.pi - theta), phi + 2 * math.pi, phi)
    # particular part
    pr = r / 2.0 * (1.0 - np.cos(2 * phi - theta) / c)
    pphi = r**2 / 4.0 * (2.0 * np.sin(2 * phi - theta) / c)
    # harmonic part
    rr = (r[..., None] / radius)
    kb = k * beta
    hr = -np.sum(b * kb / np.maximum(r[..., None], 1e-300) * rr**kb * np.sin(kb * phi[..., None]), axis=-1)
    hphi = -np.sum(b * kb * rr**kb * np.cos(kb * phi[..., None]), axis=-1)
    dr = pr + hr
    dphi_over_r = (pphi + hphi) / np.where(r > 0, r, 1.0)
    # gradient in Cartesian components, then perp(g1, g2) = (g2, -g1)
    g1 = dr * np.cos(phi) - dphi_over_r * np.sin(phi)
    g2 = dr * np.sin(phi) + dphi_over_r * np.cos(phi)
    return np.stack([g2, -g1], axis=-1)
