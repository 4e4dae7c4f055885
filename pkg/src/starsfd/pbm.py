"""Energy-splitting coefficients of the surface and their feasibility projection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-10


@dataclass(frozen=True)
class PBM:
    """Reflection and transmission coefficient vectors (diagonals of the PBMs)."""

    theta_r: np.ndarray = field(repr=False)
    theta_t: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.asarray(self.theta_r, dtype=complex).ravel()
        t = np.asarray(self.theta_t, dtype=complex).ravel()
        object.__setattr__(self, "theta_r", r)
        object.__setattr__(self, "theta_t", t)

    @property
    def N(self):
        return self.theta_r.size

    def stacked(self):
        return np.concatenate([self.theta_r, self.theta_t])

    @classmethod
    def from_stacked(cls, theta):
        n = theta.size // 2
        return cls(theta[:n], theta[n:])

    def energy_residual(self):
        return np.abs(np.abs(self.theta_r) ** 2 + np.abs(self.theta_t) ** 2 - 1.0)

    def is_feasible(self, tol=FEAS_TOL):
        return self.theta_r.size == self.theta_t.size and bool(np.all(self.energy_residual() <= tol))

    def rotated(self, phase_r, phase_t):
        return PBM(self.theta_r * np.exp(1j * phase_r), self.theta_t * np.exp(1j * phase_t))

    def to_json(self):
        pairs = lambda v: [[float(z.real), float(z.imag)] for z in v]
        return json.dumps({"theta_r": pairs(self.theta_r), "theta_t": pairs(self.theta_t)})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        vec = lambda pairs: np.array([complex(re, im) for re, im in pairs], dtype=complex)
        return cls(vec(data["theta_r"]), vec(data["theta_t"]))


def project(theta_hat_r, theta_hat_t):
    """Euclidean projection onto ``|theta_r,n|^2 + |theta_t,n|^2 = 1``.

    Each pair is divided by its norm; a pair that is exactly zero maps to
    ``(sqrt(0.5), sqrt(0.5))``.
    """
    r = np.asarray(theta_hat_r, dtype=complex)
    t = np.asarray(theta_hat_t, dtype=complex)
    if r.shape != t.shape:
        raise ValueError("coefficient vectors differ in length")
    # rescale each pair by an exact power of two so that tiny or huge inputs
    # neither underflow nor overflow when squared
    zero = (r == 0) & (t == 0)
    parts = np.stack([r.real, r.imag, t.real, t.imag])
    _, exp = np.frexp(np.abs(parts).max(axis=0))
    r, t = (np.ldexp(v.real, -exp) + 1j * np.ldexp(v.imag, -exp) for v in (r, t))
    norm = np.sqrt(np.abs(r) ** 2 + np.abs(t) ** 2)
    safe = np.where(zero, 1.0, norm)
    r = np.where(zero, np.sqrt(0.5), r / safe)
    t = np.where(zero, np.sqrt(0.5), t / safe)
    return PBM(r, t)


def project_unit_modulus(theta_hat):
    """Projection onto unit-modulus vectors (zero entries map to 1)."""
    theta_hat = np.asarray(theta_hat, dtype=complex)
    mag = np.abs(theta_hat)
    return np.where(mag == 0, 1.0 + 0j, theta_hat / np.where(mag == 0, 1.0, mag))


def random_pbm(N, seed=None):
    """Random feasible coefficients: amplitudes (cos psi, sin psi), psi ~ U[0, pi/2]."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    psi = rng.uniform(0.0, 0.5 * np.pi, N)
    phase_r = rng.uniform(0.0, 2 * np.pi, N)
    phase_t = rng.uniform(0.0, 2 * np.pi, N)
    return PBM(np.cos(psi) * np.exp(1j * phase_r), np.sin(psi) * np.exp(1j * phase_t))


def random_unit_modulus(n, seed=None):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, n))
