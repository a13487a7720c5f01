"""Independent reference computations for the tests.

Nothing here imports tdglobal: the beta ODE is re-derived by hand for
linear kr, unit viscosities, Pc12 = -A(1 - s1), Pc32 = B s3, and integrated
with a fixed-step classical RK4 along the canonical path
(1, 0) -> (s1, 0) -> (s1, s3).
"""

import numpy as np

A = 1e4
B = 2e4
P_REF = 1e7
C_GAS = 1e-6

# frozen values (hand-computed)
LIN_AT_HALF_QUARTER = -3125.0  # A(0.25 - 1)/2 + B 0.0625/2
BL_SHOCK_QUADRATIC = 1.0 / np.sqrt(2.0)  # Welge tangent for f = s^2 / (s^2 + (1 - s)^2)
BL_SHOCK_SPEED = (1.0 + np.sqrt(2.0)) / 2.0  # f(s_f) / s_f


def lin_closed_form(s1, s3, a=A, b=B):
    return a * (np.asarray(s1) ** 2 - 1.0) / 2.0 + b * np.asarray(s3) ** 2 / 2.0


def rk4(f, y0, t0, t1, n):
    h = (t1 - t0) / n
    y, t = float(y0), t0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def _mob(p, compressible):
    return np.exp(C_GAS * (p - P_REF)) if compressible else 1.0


def beta_oracle(s1, s3, p, a=A, b=B, gas_compressible=False, n=400):
    """beta at (s1, s3) on the canonical path, linear kr, unit viscosity."""

    def f3(u1, u3, beta):
        p2 = p - beta
        d3 = _mob(p2 + b * u3, gas_compressible)
        a1, a2, a3 = u1, 1.0 - u1 - u3, u3 * d3
        return a3 / (a1 + a2 + a3)

    def f1(u1, u3, beta):
        p2 = p - beta
        d3 = _mob(p2 + b * u3, gas_compressible)
        a1, a2, a3 = u1, 1.0 - u1 - u3, u3 * d3
        return a1 / (a1 + a2 + a3)

    # leg 1: s1 from 1 to s1 at s3 = 0, dPc12/ds1 = a
    leg1 = rk4(lambda t, y: f1(1.0 + t * (s1 - 1.0), 0.0, y) * a * (s1 - 1.0), 0.0, 0.0, 1.0, n)
    # leg 2: s3 from 0 to s3 at fixed s1, dPc32/ds3 = b
    return rk4(lambda t, y: f3(s1, t * s3, y) * b * s3, leg1, 0.0, 1.0, n)


def dbeta_dp_oracle(s1, s3, p, h=1.0, **kw):
    """Centred difference in p of the RK4 oracle."""
    return (beta_oracle(s1, s3, p + h, **kw) - beta_oracle(s1, s3, p - h, **kw)) / (2 * h)


def quadratic_bl_flux(s):
    s = np.asarray(s, dtype=float)
    return s**2 / (s**2 + (1.0 - s) ** 2)


# --- manufactured FEM solutions, in embedding coordinates -----------------------

SQRT3 = np.sqrt(3.0)
OUTWARD = {"12": (0.0, -1.0), "13": (-SQRT3 / 2, 0.5), "23": (SQRT3 / 2, 0.5)}


def xy_of(s1, s3):
    s1, s3 = np.asarray(s1, float), np.asarray(s3, float)
    return (1.0 - s1 - s3) + 0.5 * s3, 0.5 * SQRT3 * s3


def edge_s(edge, t):
    return {"12": (1.0 - t, 0.0 * t), "23": (0.0 * t, t), "13": (1.0 - t, t)}[edge]


def harmonic(s1, s3):
    x, y = xy_of(s1, s3)
    return x**2 - y**2


def cubic(s1, s3):
    x, _ = xy_of(s1, s3)
    return x**3


def cubic_normal(edge, t):
    x, _ = xy_of(*edge_s(edge, np.asarray(t, float)))
    return 3 * x**2 * OUTWARD[edge][0]


def lin_normal(edge, t, a=A, b=B):
    """Outward normal derivative of the LIN closed form, by the chain rule."""
    s1, s3 = edge_s(edge, np.asarray(t, float))
    g1, g3 = a * s1, b * s3  # d/ds1, d/ds3 at fixed other
    gx = -g1
    gy = (g3 + 0.5 * gx) * 2.0 / SQRT3
    nx, ny = OUTWARD[edge]
    return gx * nx + gy * ny
