"""Backscattering form functions from partial-wave series.

Time dependence is ``exp(-i w t)`` with outgoing waves ``h_n = j_n + i y_n``.
The far field is ``p_s = p_0 (a / 2r) f exp(ikr)``, which gives

    f = 2 / (i k a) * sum_n (2n + 1) (-1)^n A_n

for scattering coefficients ``A_n`` of a unit-amplitude incident wave.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ParameterError
from .bessel import spherical_bessel_table
from .materials import FluidMedium, ShellTarget

log = logging.getLogger(__name__)

_PERTURB = 1e-9
_PIVOT_FLOOR = 1e-14


@dataclass(frozen=True)
class FormFunction:
    """Complex backscatter form function on a frequency grid.

    ``outer_radius_m`` is NaN for estimates whose target size is unknown;
    ``perturbed`` flags bins solved at a slightly shifted frequency.
    """

    freq_hz: np.ndarray
    values: np.ndarray
    outer_radius_m: float = float("nan")
    perturbed: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        freq = np.asarray(self.freq_hz, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if freq.shape != values.shape or freq.ndim != 1:
            raise ParameterError("form function grid and values must be equal-length 1-D arrays")
        if freq.size > 1 and np.any(np.diff(freq) <= 0):
            raise ParameterError("form function grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise NumericalError("form function contains non-finite values")
        perturbed = self.perturbed
        if perturbed is None:
            perturbed = np.zeros(freq.size, dtype=bool)
        object.__setattr__(self, "freq_hz", freq)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "perturbed", np.asarray(perturbed, dtype=bool))

    def ka(self, sound_speed: float) -> np.ndarray:
        return 2.0 * np.pi * self.freq_hz * self.outer_radius_m / sound_speed

    def __len__(self):
        return self.freq_hz.size


def truncation_order(ka_max: float) -> int:
    """Number of partial waves needed for a converged sum up to ``ka_max``."""
    if not ka_max > 0:
        raise ParameterError(f"ka_max must be positive (was {ka_max})")
    return int(math.ceil(ka_max + 4.0 * ka_max ** (1.0 / 3.0) + 10.0))


def _check_grid(freq_hz):
    freq = np.asarray(freq_hz, dtype=float).reshape(-1)
    if freq.size == 0 or np.any(~np.isfinite(freq)) or np.any(freq <= 0):
        raise ParameterError("frequency grid must be non-empty, finite and positive")
    return freq


def _series(ka, coeffs):
    n = np.arange(coeffs.shape[-1])
    weights = (2 * n + 1) * (-1.0) ** n
    return 2.0 / (1j * ka) * (coeffs @ weights)


def form_function_rigid(freq_hz, radius_m: float, host: FluidMedium, n_max: int | None = None) -> FormFunction:
    """Backscatter form function of a rigid, immovable sphere."""
    freq = _check_grid(freq_hz)
    if not radius_m > 0:
        raise ParameterError(f"radius must be positive (was {radius_m})")
    ka = 2.0 * np.pi * freq * radius_m / host.sound_speed
    if n_max is None:
        n_max = truncation_order(float(ka.max()))
    t = spherical_bessel_table(n_max, ka)
    coeffs = -t.jp / (t.jp + 1j * t.yp)
    return FormFunction(freq, _series(ka, coeffs.T), radius_m)


def _shell_columns(n, r, kl, kt, lam, mu, tl, tt):
    """Displacement and stress contributions of one radial solution pair.

    ``tl``/``tt`` hold (R, R') for the longitudinal and shear potentials,
    each shaped ``(F, N)``; returns ``(ur, srr, srt)`` for both columns.
    """
    xl = kl * r
    xt = kt * r
    nn = n * (n + 1.0)
    rl, rlp = tl
    rll = -2.0 / xl * rlp - (1.0 - nn / xl**2) * rl
    long_ur = kl * rlp
    long_srr = kl**2 * (2.0 * mu * rll - lam * rl)
    long_srt = 2.0 * mu / r**2 * (xl * rlp - rl)
    rt, rtp = tt
    shear_ur = nn * rt / r
    shear_srr = 2.0 * mu * nn / r**2 * (xt * rtp - rt)
    shear_srt = mu / r**2 * ((2.0 * nn - 2.0 - xt**2) * rt - 2.0 * xt * rtp)
    return (long_ur, long_srr, long_srt), (shear_ur, shear_srr, shear_srt)


def _assemble(target: ShellTarget, omega, n_max):
    """Boundary-condition systems ``M x = rhs`` with shape ``(F, N, 6, 6)``.

    Unknowns: scattered amplitude in the host, longitudinal j/y and shear
    j/y amplitudes in the shell, transmitted amplitude in the filler.
    Rows: radial displacement, radial stress, tangential stress at the
    outer surface, then the same three at the inner surface.
    """
    a, b = target.outer_radius_m, target.inner_radius_m
    host, fill, shell = target.host, target.filler, target.shell
    lam, mu = shell.lame
    k0 = omega / host.sound_speed
    kl = omega / shell.longitudinal_speed
    kt = omega / shell.shear_speed
    k2 = omega / fill.sound_speed

    def tab(x):
        t = spherical_bessel_table(n_max, x)
        return t.j.T, t.y.T, t.jp.T, t.yp.T

    j0, y0, j0p, y0p = tab(k0 * a)
    h0, h0p = j0 + 1j * y0, j0p + 1j * y0p
    jla, yla, jlap, ylap = tab(kl * a)
    jlb, ylb, jlbp, ylbp = tab(kl * b)
    jta, yta, jtap, ytap = tab(kt * a)
    jtb, ytb, jtbp, ytbp = tab(kt * b)
    j2, _, j2p, _ = tab(k2 * b)

    F = omega.size
    N = n_max + 1
    n = np.arange(N)[None, :].astype(float)
    col = lambda v: v[:, None]  # noqa: E731
    kl_, kt_ = col(kl), col(kt)

    M = np.zeros((F, N, 6, 6), dtype=complex)
    rhs = np.zeros((F, N, 6), dtype=complex)
    for row0, r, tabs in (
        (0, a, ((jla, jlap), (yla, ylap), (jta, jtap), (yta, ytap))),
        (3, b, ((jlb, jlbp), (ylb, ylbp), (jtb, jtbp), (ytb, ytbp))),
    ):
        lj, sj = _shell_columns(n, r, kl_, kt_, lam, mu, tabs[0], tabs[2])
        ly, sy = _shell_columns(n, r, kl_, kt_, lam, mu, tabs[1], tabs[3])
        for i in range(3):
            M[..., row0 + i, 1] = lj[i]
            M[..., row0 + i, 2] = ly[i]
            M[..., row0 + i, 3] = sj[i]
            M[..., row0 + i, 4] = sy[i]

    w2_host = host.density * col(omega) ** 2
    M[..., 0, 0] = -col(k0) * h0p / w2_host
    rhs[..., 0] = col(k0) * j0p / w2_host
    M[..., 1, 0] = h0
    rhs[..., 1] = -j0
    w2_fill = fill.density * col(omega) ** 2
    M[..., 3, 5] = -col(k2) * j2p / w2_fill
    M[..., 4, 5] = j2

    # n = 0 carries no shear motion: tangential rows pin the shear amplitudes.
    M[:, 0, 2, :] = 0.0
    M[:, 0, 5, :] = 0.0
    M[:, 0, 2, 3] = 1.0
    M[:, 0, 5, 4] = 1.0
    return M, rhs


def solve_batched(M, rhs):
    """Gaussian elimination with partial pivoting over a stack of systems.

    Columns, then rows, are equilibrated first. Returns ``(x, singular)``
    where ``singular`` flags systems whose pivot fell below the floor.
    """
    M = np.array(M, dtype=complex)
    rhs = np.array(rhs, dtype=complex)
    batch = M.shape[:-2]
    m = M.shape[-1]
    M = M.reshape(-1, m, m)
    rhs = rhs.reshape(-1, m)
    # Columns first: radial solutions at the two interfaces can differ by
    # hundreds of decades at high order.
    cs = np.abs(M).max(axis=1)
    cs[cs == 0] = 1.0
    M /= cs[:, None, :]
    rs = np.abs(M).max(axis=2)
    rs[rs == 0] = 1.0
    M /= rs[:, :, None]
    rhs /= rs

    aug = np.concatenate([M, rhs[:, :, None]], axis=2)
    idx = np.arange(aug.shape[0])
    singular = np.zeros(aug.shape[0], dtype=bool)
    for k in range(m):
        p = np.argmax(np.abs(aug[:, k:, k]), axis=1) + k
        row_k = aug[idx, k].copy()
        aug[idx, k] = aug[idx, p]
        aug[idx, p] = row_k
        piv = aug[:, k, k]
        bad = np.abs(piv) < _PIVOT_FLOOR
        singular |= bad
        piv = np.where(bad, 1.0, piv)
        aug[:, k, k] = piv
        if k + 1 < m:
            factors = aug[:, k + 1 :, k] / piv[:, None]
            aug[:, k + 1 :, k:] -= factors[:, :, None] * aug[:, None, k, k:]
    x = np.zeros((aug.shape[0], m), dtype=complex)
    for k in range(m - 1, -1, -1):
        acc = aug[:, k, m] - np.einsum("bj,bj->b", aug[:, k, k + 1 : m], x[:, k + 1 :])
        x[:, k] = acc / aug[:, k, k]
    x /= cs
    return x.reshape(batch + (m,)), singular.reshape(batch)


def _shell_coefficients(target, freq, n_max):
    omega = 2.0 * np.pi * freq
    M, rhs = _assemble(target, omega, n_max)
    x, singular = solve_batched(M, rhs)
    return x[..., 0], singular.any(axis=1)


def form_function_shell(
    target: ShellTarget,
    freq_hz,
    n_max: int | None = None,
    chunk: int = 256,
) -> FormFunction:
    """Backscatter form function of a fluid-filled elastic spherical shell.

    Bins whose boundary-condition system is numerically singular are
    re-solved at a frequency shifted by one part in 1e9 and flagged in
    ``FormFunction.perturbed``.
    """
    freq = _check_grid(freq_hz)
    a = target.outer_radius_m
    ka = 2.0 * np.pi * freq * a / target.host.sound_speed
    if n_max is None:
        n_max = truncation_order(float(ka.max()))
    values = np.empty(freq.size, dtype=complex)
    perturbed = np.zeros(freq.size, dtype=bool)
    for lo in range(0, freq.size, chunk):
        sl = slice(lo, lo + chunk)
        f = freq[sl]
        coeffs, singular = _shell_coefficients(target, f, n_max)
        if singular.any():
            redo = np.flatnonzero(singular)
            log.debug("singular shell system at %d bins; perturbing", redo.size)
            c2, s2 = _shell_coefficients(target, f[redo] * (1.0 + _PERTURB), n_max)
            coeffs[redo] = c2
            perturbed[lo + redo] = True
            if s2.any():
                bad = lo + redo[np.flatnonzero(s2)[0]]
                raise NumericalError(f"boundary system singular at {freq[bad]:.3f} Hz after perturbation")
        if not np.all(np.isfinite(coeffs)):
            fi, ni = np.argwhere(~np.isfinite(coeffs))[0]
            raise NumericalError(f"non-finite scattering coefficient at mode n={ni}, f={f[fi]:.3f} Hz")
        values[sl] = _series(ka[sl], coeffs)
    return FormFunction(freq, values, a, perturbed)
