"""Pure-NumPy fallback for the compiled swing-equation RK4 core.

Same contract as ``_simcore.simulate_swing``: integrate the perturbed swing
dynamics with classical RK4, record every step, and truncate on blow-up
(non-finite state or norm above the threshold).
"""

import numpy as np

COMPILED = False


def _make_deriv(inertia, damping, winv, ts, sa, sb):
    m = len(inertia)

    def deriv(x):
        psi_a = np.where(sa >= 0, x[np.clip(sa, 0, None)], 0.0)
        psi_b = np.where(sb >= 0, x[np.clip(sb, 0, None)], 0.0)
        flow = winv * (np.sin(ts) - np.sin(ts + psi_a - psi_b))
        acc = np.zeros(m)
        np.add.at(acc, sa[sa >= 0], flow[sa >= 0])
        np.add.at(acc, sb[sb >= 0], -flow[sb >= 0])
        out = np.empty(2 * m)
        out[:m] = x[m:]
        out[m:] = (acc - damping * x[m:]) / inertia
        return out

    return deriv


def simulate_swing(inertia, damping, winv, ts, sa, sb, x0, dt, n_steps, blowup):
    """Integrate and record; returns (states, n_recorded, truncated).

    states has shape (n_steps + 1, 2m); rows past n_recorded are undefined
    when truncated is True.
    """
    m = len(inertia)
    deriv = _make_deriv(inertia, damping, winv, ts, sa, sb)
    states = np.empty((n_steps + 1, 2 * m))
    x = np.asarray(x0, dtype=float).copy()
    states[0] = x
    half = 0.5 * dt
    for i in range(1, n_steps + 1):
        k1 = deriv(x)
        k2 = deriv(x + half * k1)
        k3 = deriv(x + half * k2)
        k4 = deriv(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.dot(x, x) > blowup * blowup:
            return states, i, True
        states[i] = x
    return states, n_steps + 1, False
