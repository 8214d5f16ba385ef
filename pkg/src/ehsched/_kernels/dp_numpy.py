"""Pure-numpy backward-induction layer kernel.

One call advances the value function by one time step: for every
(energy, fade) grid cell it maximizes

    phi(p) = rate_coeff * log1p(h * p) + W(e - delta * p)

over ``p in [0, e/delta]``, where ``W`` is the event-averaged continuation
value, linearly interpolated on the uniform energy grid.  ``phi`` is concave
in ``p`` (log plus a piecewise-linear concave interpolant), so a coarse
uniform scan brackets the maximum and a fixed number of golden-section
steps refines it.  The compiled kernel implements the identical algorithm.
"""

from __future__ import annotations

import math

import numpy as np

_INVGR = (math.sqrt(5.0) - 1.0) / 2.0


def _interp_columns(w_event: np.ndarray, x: np.ndarray, de: float) -> np.ndarray:
    """Interpolate each column of ``w_event`` at energies ``x``.

    ``x`` has shape (n_e,) or (n_e, k); the result gains a trailing fade
    axis: (n_e, n_h) or (n_e, k, n_h).
    """
    pos = x / de
    idx = np.clip(pos.astype(np.int64), 0, w_event.shape[0] - 2)
    frac = pos - idx
    lo = w_event[idx]
    hi = w_event[idx + 1]
    return lo + frac[..., None] * (hi - lo)


def layer_update(
    w_event: np.ndarray,
    e_grid: np.ndarray,
    h_points: np.ndarray,
    rate_coeff: float,
    delta: float,
    n_coarse: int,
    n_golden: int,
):
    """One backward step; returns (values, powers), each (n_e, n_h)."""
    n_e = e_grid.shape[0]
    n_h = h_points.shape[0]
    de = float(e_grid[1] - e_grid[0])
    h_row = h_points[None, None, :]

    # Coarse scan over fractions of the drain power e/delta.  The
    # post-consumption energy e*(1-c) is grid-independent of h.
    fracs = np.linspace(0.0, 1.0, n_coarse)
    p_cand = (e_grid / delta)[:, None] * fracs[None, :]  # (n_e, n_coarse)
    x_cand = e_grid[:, None] * (1.0 - fracs)[None, :]
    vals = rate_coeff * np.log1p(h_row * p_cand[:, :, None])
    vals += _interp_columns(w_event, x_cand, de)  # (n_e, n_coarse, n_h)

    best_idx = np.argmax(vals, axis=1)  # (n_e, n_h)
    rows = np.arange(n_e)[:, None]
    cols = np.arange(n_h)[None, :]
    best_f = vals[rows, best_idx, cols]
    best_p = p_cand[rows, best_idx]

    lo = p_cand[rows, np.maximum(best_idx - 1, 0)]
    hi = p_cand[rows, np.minimum(best_idx + 1, n_coarse - 1)]

    def phi(p):
        x = e_grid[:, None] - delta * p
        pos = x / de
        idx = np.clip(pos.astype(np.int64), 0, n_e - 2)
        frac = pos - idx
        w_lo = w_event[idx, cols]
        w_hi = w_event[idx + 1, cols]
        return rate_coeff * np.log1p(h_points[None, :] * p) + w_lo + frac * (w_hi - w_lo)

    c = hi - _INVGR * (hi - lo)
    d = lo + _INVGR * (hi - lo)
    fc = phi(c)
    fd = phi(d)
    for probe, f_probe in ((c, fc), (d, fd)):
        better = f_probe > best_f
        best_f = np.where(better, f_probe, best_f)
        best_p = np.where(better, probe, best_p)

    for _ in range(n_golden):
        take = fc >= fd
        hi = np.where(take, d, hi)
        lo = np.where(take, lo, c)
        new_c = hi - _INVGR * (hi - lo)
        new_d = lo + _INVGR * (hi - lo)
        probe = np.where(take, new_c, new_d)
        f_probe = phi(probe)
        c_next = np.where(take, new_c, d)
        d_next = np.where(take, c, new_d)
        fc_next = np.where(take, f_probe, fd)
        fd_next = np.where(take, fc, f_probe)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
        better = f_probe > best_f
        best_f = np.where(better, f_probe, best_f)
        best_p = np.where(better, probe, best_p)

    return best_f, best_p
