"""Seeded random streams and samplers for Haar, sphere and simplex measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DegenerateVector


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream)``.

    Substreams are addressed by extra integer keys; the same address always
    yields the same sequence, and distinct addresses are statistically
    independent (numpy ``SeedSequence`` spawn keys).
    """

    seed: int
    stream: int = 0

    def generator(self, *substream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *substream))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def ginibre(n: int, rng, size=None) -> np.ndarray:
    """Standard complex Gaussian matrices, ``E|Z_ij|^2 = 1``."""
    shape = (n, n) if size is None else (size, n, n)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_haar_unitary(n: int, rng, size: int | None = None) -> np.ndarray:
    """Haar-distributed unitary matrices.

    QR of a complex Ginibre matrix, then each column of ``Q`` is multiplied
    by the phase of the matching diagonal entry of ``R``.  Without that
    correction the result is not Haar distributed.

    Parameters
    ----------
    n : int
        Matrix size, ``n >= 1``.
    rng : numpy.random.Generator or RngStream
    size : int, optional
        Return a stack of ``size`` matrices, shape ``(size, n, n)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    z = ginibre(n, rng, size)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    phase = d / np.abs(d)
    return q * phase[..., None, :]


def naive_qr_unitary(n: int, rng, size: int | None = None) -> np.ndarray:
    """QR of a Ginibre matrix *without* the phase fix (not Haar; for tests)."""
    rng = as_generator(rng)
    q, _ = np.linalg.qr(ginibre(n, rng, size))
    return q


def sample_unit_sphere_complex(n_plus_1: int, rng, size: int | None = None) -> np.ndarray:
    """Uniform points on the unit sphere of C^(n+1) (normalized complex Gaussians)."""
    if n_plus_1 < 1:
        raise ValueError("dimension must be >= 1")
    rng = as_generator(rng)
    shape = (n_plus_1,) if size is None else (size, n_plus_1)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sample_simplex(n: int, rng, size: int | None = None) -> np.ndarray:
    """Uniform barycentric coordinates ``(s_0..s_n)`` on the n-simplex."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = as_generator(rng)
    shape = (n + 1,) if size is None else (size, n + 1)
    e = rng.standard_exponential(shape)
    return e / e.sum(axis=-1, keepdims=True)


def householder_complement(v: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the complement of a unit vector ``v`` in C^(n+1).

    Builds the Householder reflection ``H = I - 2 u u^H / |u|^2`` with
    ``u = e_1 + conj(phase) v`` (phase of ``v_0``), which maps ``e_1`` to a
    unit multiple of ``v``; the last ``n`` columns of ``H`` are returned.
    Accepts a stack of vectors with shape ``(..., n+1)``.

    Raises
    ------
    DegenerateVector
        If ``| |v| - 1 | > tol``.
    """
    v = np.asarray(v, dtype=complex)
    norms = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise DegenerateVector(f"vector norm deviates from 1 by more than {tol:g}")
    v0 = v[..., 0]
    mag = np.abs(v0)
    phase = np.where(mag > 0, v0 / np.where(mag > 0, mag, 1.0), 1.0)
    w = v * np.conj(phase)[..., None]
    u = w.copy()
    u[..., 0] += 1.0
    unorm2 = np.sum(np.abs(u) ** 2, axis=-1)
    m = v.shape[-1]
    h = np.eye(m, dtype=complex) - 2.0 * u[..., :, None] * np.conj(u)[..., None, :] / unorm2[..., None, None]
    return h[..., :, 1:]
