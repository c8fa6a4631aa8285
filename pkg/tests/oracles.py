"""Independent reference computations used by the tests.

The Morse-cell oracle integrates the gradient flow on the unit sphere in
embedding coordinates (projected gradient, fixed-step RK4, all seeds at
once), so it shares neither the chart nor the integrator with the package.
"""

import numpy as np


def embed(theta, phi):
    s = np.sin(theta)
    return np.stack([s * np.cos(phi), s * np.sin(phi), np.cos(theta)], axis=-1)


def perturbed_grad(eps):
    """Ambient gradient of z + eps * x * sqrt(x^2 + y^2) (= cos t + eps sin^2 t cos p on the sphere)."""

    def grad(p):
        x, y = p[..., 0], p[..., 1]
        rho = np.maximum(np.hypot(x, y), 1e-300)
        return np.stack([eps * (rho + x * x / rho), eps * x * y / rho, np.ones_like(x)], axis=-1)

    return grad


def tilted_grad(kappa):
    """Ambient gradient of z - kappa x^2."""

    def grad(p):
        return np.stack([-2.0 * kappa * p[..., 0], np.zeros_like(p[..., 0]), np.ones_like(p[..., 0])], axis=-1)

    return grad


def _tangent(grad, p, sign):
    g = grad(p)
    g -= np.sum(g * p, axis=-1, keepdims=True) * p
    return -sign * g


def flow_endpoints(grad, points, sign=1.0, dt=0.1, t_end=30.0):
    p = np.array(points, dtype=float)
    for _ in range(int(round(t_end / dt))):
        k1 = _tangent(grad, p, sign)
        k2 = _tangent(grad, p + 0.5 * dt * k1, sign)
        k3 = _tangent(grad, p + 0.5 * dt * k2, sign)
        k4 = _tangent(grad, p + dt * k3, sign)
        p = p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        p /= np.linalg.norm(p, axis=-1, keepdims=True)
    return p


def classify(grad, critical_xyz, indices, n_theta, n_phi, tol=1e-2):
    """Per seed of a cell-centred (n_theta, n_phi) grid: (source_id, sink_id) or -1.

    ``critical_xyz`` are embedded critical points and ``indices`` their
    Morse indices; a seed is classified when its forward flow ends within
    ``tol`` of a minimum and its backward flow within ``tol`` of a maximum.
    """
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    seeds = embed(tt.ravel(), pp.ravel())
    crit = np.asarray(critical_xyz)
    labels = np.full((seeds.shape[0], 2), -1)
    for col, sign, want in ((1, 1.0, 0), (0, -1.0, 2)):
        end = flow_endpoints(grad, seeds, sign)
        d = np.linalg.norm(end[:, None, :] - crit[None, :, :], axis=-1)
        k = np.argmin(d, axis=1)
        ok = (d[np.arange(len(k)), k] < tol) & (np.asarray(indices)[k] == want)
        labels[:, col] = np.where(ok, k, -1)
    bad = (labels < 0).any(axis=1)
    labels[bad] = -1
    return labels


def nearest_oracle_labels(seeds, oracle_labels, n_theta, n_phi):
    """Oracle labels at the grid node nearest each (theta, phi) seed."""
    i = np.clip(np.floor(seeds[:, 0] / np.pi * n_theta).astype(int), 0, n_theta - 1)
    j = np.clip(np.floor((seeds[:, 1] % (2 * np.pi)) / (2 * np.pi) * n_phi).astype(int), 0, n_phi - 1)
    return oracle_labels[i * n_phi + j]
