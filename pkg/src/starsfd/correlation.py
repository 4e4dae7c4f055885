"""Spatial correlation matrices and cascaded-channel covariances."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import path_loss, place_users

PSD_CLIP = -1e-10
TRACE_IMAG_TOL = 1e-9


def psd_repair(R, clip=PSD_CLIP):
    """Symmetrize ``R`` and zero eigenvalues that are negative only by round-off.

    Eigenvalues below ``clip * max|eig|`` indicate a genuinely indefinite
    input and are left alone so the caller's checks can catch them.
    """
    R = 0.5 * (R + R.conj().T)
    lam, U = np.linalg.eigh(R)
    scale = max(np.max(np.abs(lam)), 1e-300)
    if np.all(lam >= 0):
        return R
    lam = np.where((lam < 0) & (lam >= clip * scale), 0.0, lam)
    out = (U * lam) @ U.conj().T
    out = 0.5 * (out + out.conj().T)
    # keep the exact diagonal of the input (unit diagonal for correlation matrices)
    np.fill_diagonal(out, np.real(np.diag(R)))
    return out


def psd_sqrt(R, clip=PSD_CLIP):
    """Hermitian square root via eigendecomposition with small negatives clipped."""
    R = 0.5 * (R + R.conj().T)
    lam, U = np.linalg.eigh(R)
    scale = max(np.max(np.abs(lam)), 1e-300)
    if np.any(lam < clip * scale):
        raise ValueError("matrix is not positive semidefinite")
    lam = np.clip(lam, 0.0, None)
    return (U * np.sqrt(lam)) @ U.conj().T


def element_positions(N_h, N_v, d_H, d_V):
    """Planar grid coordinates, row-major with the horizontal index fastest."""
    col, row = np.meshgrid(np.arange(N_h), np.arange(N_v))
    return np.column_stack([col.ravel() * d_H, row.ravel() * d_V])


def stars_correlation(N_h, N_v, d_H, d_V, lambda_m):
    """Isotropic-scattering surface correlation ``sinc(2 d_nm / lambda)``."""
    pos = element_positions(N_h, N_v, d_H, d_V)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    R = np.sinc(2.0 * dist / lambda_m).astype(complex)
    return psd_repair(R)


def bs_correlation(M, spacing_frac=0.5, angle_spread_deg=20.0, mean_angle_deg=0.0, n_angles=200):
    """Local-scattering correlation of an M-element uniform linear array.

    Entry (p, q) averages ``exp(j 2 pi spacing (p - q) sin(phi))`` over
    ``n_angles`` equally spaced angles within ``mean +- spread``.
    """
    if n_angles == 1 or angle_spread_deg == 0:
        angles = np.array([np.deg2rad(mean_angle_deg)])
    else:
        angles = np.deg2rad(np.linspace(mean_angle_deg - angle_spread_deg,
                                        mean_angle_deg + angle_spread_deg, n_angles))
    lag = np.arange(M)[:, None] - np.arange(M)[None, :]
    R = np.exp(1j * 2 * np.pi * spacing_frac * lag[..., None] * np.sin(angles)).mean(axis=-1)
    return psd_repair(R)


def trace_factor(R_s, theta):
    """``tr(R_s diag(theta) R_s diag(theta)^H)``, checked to be real."""
    value = np.einsum("nm,m,mn,n->", R_s, theta, R_s, theta.conj())
    if abs(value.imag) > TRACE_IMAG_TOL * max(abs(value.real), 1e-300):
        raise ValueError(f"trace factor has imaginary part {value.imag:.3e}; "
                         "correlation matrix is not Hermitian")
    return float(value.real)


def diag_A(R_s, theta):
    """Diagonal of ``R_s diag(theta) R_s``, the gradient of the trace factor."""
    return np.einsum("nm,m,mn->n", R_s, theta, R_s)


def trace_kernel(R_s):
    """Hermitian PSD kernel ``K`` with ``trace_factor(R_s, theta) = theta^H K theta``."""
    return R_s * R_s.T


@dataclass(frozen=True)
class CorrelationSet:
    """Deterministic large-scale statistics of one deployment.

    ``delta_h``/``delta_ht`` hold the per-user DL/UL surface-to-user path
    losses; ``region`` holds 'r' or 't' per user.
    """

    R_b: np.ndarray = field(repr=False)
    R_bt: np.ndarray = field(repr=False)
    R_s: np.ndarray = field(repr=False)
    delta_g: float
    delta_gt: float
    delta_h: np.ndarray
    delta_ht: np.ndarray
    region: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _cached(self, name, build):
        if name not in self._cache:
            self._cache[name] = build()
        return self._cache[name]

    def eig_b(self):
        """Eigendecomposition ``(lam, U)`` of the transmit-array correlation."""
        return self._cached("eig_b", lambda: np.linalg.eigh(self.R_b))

    def eig_bt(self):
        return self._cached("eig_bt", lambda: np.linalg.eigh(self.R_bt))

    def kernel(self):
        return self._cached("kernel", lambda: trace_kernel(self.R_s))

    @property
    def K(self):
        return len(self.region)

    @property
    def reflect(self):
        return np.array([w == "r" for w in self.region])

    def with_R_s(self, R_s):
        return CorrelationSet(self.R_b, self.R_bt, R_s, self.delta_g, self.delta_gt,
                              self.delta_h, self.delta_ht, self.region)


def build_correlations(cfg, geometry=None, R_s=None):
    """Assemble the correlation set for ``cfg`` (placing users if needed)."""
    geometry = geometry or place_users(cfg)
    d = cfg.elem_size_m
    if R_s is None:
        R_s = stars_correlation(cfg.N_h, cfg.N_v, d, d, cfg.lambda_m)
    bs_args = (cfg.bs_spacing_frac, cfg.bs_angle_spread_deg, cfg.bs_mean_angle_deg,
               cfg.bs_angle_points)
    R_b = bs_correlation(cfg.M_T, *bs_args)
    R_bt = bs_correlation(cfg.M_R, *bs_args)
    stars = np.asarray(cfg.stars_xy, dtype=float)
    bs_dist = np.linalg.norm(stars - np.asarray(cfg.bs_xy, dtype=float))
    ue_dist = np.linalg.norm(geometry.positions - stars, axis=1)
    delta_g = path_loss(bs_dist, d, d, cfg.alpha)
    delta_h = np.atleast_1d(path_loss(ue_dist, d, d, cfg.alpha))
    return CorrelationSet(R_b=R_b, R_bt=R_bt, R_s=R_s, delta_g=delta_g, delta_gt=delta_g,
                          delta_h=delta_h, delta_ht=delta_h.copy(), region=geometry.region)


def cascaded_ul_cov(cfg, corr, pbm, k):
    """Covariance of the user-k -> surface -> BS receive-array channel."""
    t = trace_factor(corr.R_s, pbm.theta_r)
    return corr.delta_gt * corr.delta_ht[k] * t * corr.R_bt


def cascaded_dl_cov(cfg, corr, pbm, k):
    """Covariance of the BS transmit-array -> surface -> user-k channel."""
    theta = pbm.theta_r if corr.region[k] == "r" else pbm.theta_t
    t = trace_factor(corr.R_s, theta)
    return corr.delta_g * corr.delta_h[k] * t * corr.R_b


# -- binary matrix dump ------------------------------------------------------------
# 16-byte header: b"CMAT", uint32 rows, uint32 cols, uint32 reserved (0);
# then rows*cols little-endian complex64 values, row-major.
_HEADER = struct.Struct("<4sIII")


def write_cmat(path, matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"CMAT", rows, cols, 0))
        fh.write(np.ascontiguousarray(matrix, dtype="<c8").tobytes())


def read_cmat(path):
    blob = Path(path).read_bytes()
    magic, rows, cols, _ = _HEADER.unpack_from(blob)
    if magic != b"CMAT":
        raise ValueError(f"{path}: bad magic {magic!r}")
    data = np.frombuffer(blob, dtype="<c8", offset=_HEADER.size, count=rows * cols)
    return data.reshape(rows, cols).astype(complex)
