"""Dynamic sub-grid scales.

The update formulas are written with plain arithmetic so the same functions
serve numpy arrays (diagnostics, tests) and traced jax arrays inside the
element kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# gamma_1 of the second-derivative stencil: BDF2 and the BDF1 start-up step
GAMMA_BDF2 = 2.0
GAMMA_BDF1 = 1.0


def tau_t(tau_K, rho, gamma1, dt):
    """Effective parameter of the second-order sub-scale ODE,
    ``(rho * gamma1 / dt^2 + 1 / tau_K)^-1``; ``dt = inf`` gives ``tau_K``."""
    return 1.0 / (rho * gamma1 / dt ** 2 + 1.0 / tau_K)


def theta_history(h0, h1, h2, first_step=False):
    """History combination of the displacement sub-scale stencil.

    BDF2: ``5 y^n - 4 y^{n-1} + y^{n-2}``; BDF1 start-up: ``2 y^n - y^{n-1}``.
    """
    if first_step:
        return 2.0 * h0 - h1
    return 5.0 * h0 - 4.0 * h1 + h2


def solid_subscales(R1, tau1, rho, dt, theta, gamma1=GAMMA_BDF2):
    """Displacement sub-scale and the sub-scale inertia ``rho * a_sub``.

    Returns ``(d_sub, rho_a_sub, tt)`` with ``d_sub = tt (R1 + rho theta/dt^2)``
    and ``rho_a_sub = (1 - tt/tau1) R1 - (tt/tau1) rho theta/dt^2`` so that
    ``rho_a_sub + d_sub / tau1 = R1``.
    """
    tt = tau_t(tau1, rho, gamma1, dt)
    c = tt / tau1
    hist = rho * theta / dt ** 2
    d_sub = tt * (R1 + hist)
    rho_a = (1.0 - c) * R1 - c * hist
    return d_sub, rho_a, tt


def subscale_acceleration_term(R1, tau1, tt, rho, dt, theta):
    """Integrand tested against the displacement test function."""
    c = tt / tau1
    return (1.0 - c) * R1 - c * rho * theta / dt ** 2


def fluid_velocity_subscale(R1, tau1, rho, dt, u_prev):
    """Backward-Euler velocity sub-scale,
    ``(rho/dt + 1/tau1)^-1 (R1 + rho u_prev / dt)``; returns it together with
    its time-derivative term ``rho (u - u_prev) / dt``."""
    if dt is None:
        u = tau1 * R1
        return u, 0.0 * u
    u = (R1 + rho * u_prev / dt) / (rho / dt + 1.0 / tau1)
    return u, rho * (u - u_prev) / dt


@dataclass
class SubscaleStore:
    """Per quadrature point sub-scales, flattened as ``(ne, nq, ...)`` arrays.

    ``v`` holds the vector sub-scale (displacement for the solid, velocity for
    the fluid) with ``history`` previous levels, newest first. ``s`` and ``p``
    are current values only.
    """

    ne: int
    nq: int
    nd: int
    levels: int
    v: np.ndarray = field(init=False)
    hist: np.ndarray = field(init=False)
    s: np.ndarray = field(init=False)
    p: np.ndarray = field(init=False)
    tau: Optional[np.ndarray] = None

    def __post_init__(self):
        ns = self.nd * (self.nd + 1) // 2
        self.v = np.zeros((self.ne, self.nq, self.nd))
        self.hist = np.zeros((self.levels, self.ne, self.nq, self.nd))
        self.s = np.zeros((self.ne, self.nq, ns))
        self.p = np.zeros((self.ne, self.nq))

    @property
    def n_points(self) -> int:
        return self.ne * self.nq

    def set_current(self, v, s=None, p=None, tau=None):
        self.v = np.asarray(v, dtype=float).reshape(self.v.shape)
        if s is not None:
            self.s = np.asarray(s, dtype=float).reshape(self.s.shape)
        if p is not None:
            self.p = np.asarray(p, dtype=float).reshape(self.p.shape)
        if tau is not None:
            self.tau = np.asarray(tau, dtype=float)

    def rotate(self):
        """Push the current value into history; called on step acceptance only."""
        if self.levels:
            self.hist = np.roll(self.hist, 1, axis=0)
            self.hist[0] = self.v

    def cell_average(self):
        return self.v.mean(axis=1), self.s.mean(axis=1), self.p.mean(axis=1)

    def copy(self) -> "SubscaleStore":
        out = SubscaleStore(self.ne, self.nq, self.nd, self.levels)
        out.v, out.hist, out.s, out.p = self.v.copy(), self.hist.copy(), self.s.copy(), self.p.copy()
        out.tau = None if self.tau is None else self.tau.copy()
        return out


def update_solid_subscales(store: SubscaleStore, R1, R2, R3, tau1, tau2, tau3, rho, dt,
                           first_step=False) -> SubscaleStore:
    """Store ``d_sub``, ``s_sub = tau2 R2`` and ``p_sub = tau3 R3`` computed
    from residuals at the quadrature points. ``tau1`` is per element."""
    tau1 = np.asarray(tau1, float)[:, None, None]
    th = theta_history(store.hist[0], store.hist[1], store.hist[2], first_step)
    g = GAMMA_BDF1 if first_step else GAMMA_BDF2
    d, _, _ = solid_subscales(np.asarray(R1, float), tau1, rho, dt, th, g)
    store.set_current(d, tau2 * np.asarray(R2, float), tau3 * np.asarray(R3, float))
    return store


def update_fluid_subscales(store: SubscaleStore, R1, R2, divu, tau1, tau2, tau3, rho, dt) -> SubscaleStore:
    """``u_sub`` from the backward-Euler recurrence; ``s_sub = -tau2 R2``
    where ``R2 = s/(2 mu) - grad^s u`` and ``p_sub = -tau3 div u``."""
    tau1 = np.asarray(tau1, float)[:, None, None]
    u, _ = fluid_velocity_subscale(np.asarray(R1, float), tau1, rho, dt, store.hist[0])
    store.set_current(u, -tau2 * np.asarray(R2, float), -tau3 * np.asarray(divu, float))
    return store
