"""Spherical Bessel functions of real positive argument by recurrence.

``j_n`` is taken from upward recurrence while ``n <= x`` and from Miller's
downward recurrence above that; ``y_n`` always recurs upward from the
closed forms of ``y_0`` and ``y_1``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import ParameterError

_RESCALE_AT = 1e200


class BesselTable(NamedTuple):
    """Arrays of shape ``(n_max + 1, *x.shape)`` indexed by order first."""

    j: np.ndarray
    y: np.ndarray
    jp: np.ndarray
    yp: np.ndarray


def _miller_start(n_max, x_max):
    return int(np.ceil(max(n_max, x_max) + 12.0 * np.cbrt(max(x_max, 1.0)) + 25))


def _j_downward(n_hi, x):
    """Unnormalized minimal solution, rescaled on the fly to avoid overflow."""
    start = _miller_start(n_hi, float(x.max()))
    out = np.zeros((n_hi + 1,) + x.shape)
    f_next = np.zeros_like(x)
    f_cur = np.full_like(x, 1e-30)
    if start <= n_hi:
        out[start] = f_cur
    for k in range(start, 0, -1):
        f_prev = (2 * k + 1) / x * f_cur - f_next
        if k - 1 <= n_hi:
            out[k - 1] = f_prev
        big = np.abs(f_prev) > _RESCALE_AT
        if big.any():
            scale = np.where(big, 1.0 / np.abs(f_prev), 1.0)
            f_prev = f_prev * scale
            f_cur = f_cur * scale
            lo = max(k - 1, 0)
            if lo <= n_hi:
                out[lo:] *= scale
        f_next, f_cur = f_cur, f_prev
    return out


def spherical_bessel_table(n_max: int, x) -> BesselTable:
    """Tabulate ``j_n, y_n`` and their derivatives for ``n = 0..n_max``.

    Raises ``ParameterError`` for non-positive arguments and
    ``OverflowError`` when ``y_n`` leaves the double range.
    """
    if n_max < 0:
        raise ParameterError(f"n_max must be non-negative (was {n_max})")
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ParameterError("spherical Bessel argument must be finite and > 0")
    shape = x.shape
    x = x.reshape(-1)
    n_hi = max(n_max, 1) + 1
    s, c = np.sin(x), np.cos(x)

    y = np.empty((n_hi + 1, x.size))
    y[0] = -c / x
    y[1] = -c / x**2 - s / x
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_hi):
            y[n + 1] = (2 * n + 1) / x * y[n] - y[n - 1]
    if not np.all(np.isfinite(y[: n_max + 1])):
        bad = np.argwhere(~np.isfinite(y[: n_max + 1]))[0]
        raise OverflowError(
            f"y_n overflows at n={bad[0]}, x={x[bad[1]]:.6g}"
        )

    j_up = np.empty_like(y)
    j_up[0] = s / x
    j_up[1] = s / x**2 - c / x
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_hi):
            j_up[n + 1] = (2 * n + 1) / x * j_up[n] - j_up[n - 1]

    j = j_up
    need_down = x < n_hi
    if need_down.any():
        xd = x[need_down]
        raw = _j_downward(n_hi, xd)
        j0 = np.sin(xd) / xd
        j1 = np.sin(xd) / xd**2 - np.cos(xd) / xd
        use0 = np.abs(j0) >= np.abs(j1)
        norm = np.where(use0, j0 / raw[0], j1 / raw[1])
        down = raw * norm
        orders = np.arange(n_hi + 1)[:, None]
        j = j_up.copy()
        sub = j[:, need_down]
        upward_ok = orders <= xd[None, :]
        j[:, need_down] = np.where(upward_ok, sub, down)

    n = np.arange(1, n_max + 1)[:, None]
    jp = np.empty((n_max + 1, x.size))
    yp = np.empty_like(jp)
    jp[0] = -j[1]
    yp[0] = -y[1]
    jp[1:] = j[: n_max] - (n + 1) / x * j[1 : n_max + 1]
    yp[1:] = y[: n_max] - (n + 1) / x * y[1 : n_max + 1]

    out_shape = (n_max + 1,) + shape
    return BesselTable(
        j[: n_max + 1].reshape(out_shape),
        y[: n_max + 1].reshape(out_shape),
        jp.reshape(out_shape),
        yp.reshape(out_shape),
    )
