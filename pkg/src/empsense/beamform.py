"""Transmit beamformer design that flattens the pixel-response Gram.

Mutual coherence of the pixel responses is driven by the off-diagonal mass
of ``|(W D_p)^H (W D_p)|`` with ``D_p = H1^T``. Since any realizable Gram
``(W D_p)^H (W D_p)`` is PSD with rank at most the number of pilots and is
confined to the row space of ``D_p``, the design compresses the entrywise
magnitude target ``T = |D_p^H D_p|`` into that row space and takes its best
PSD low-rank approximation (truncated eigendecomposition, optimal in
Frobenius norm). Factoring the approximation and undoing the channel
singular values yields the beamformer.

The returned transmit matrix absorbs an even share of the power budget;
scaling a channel leaves the design direction unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .emfwd import ChannelSet
from .errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

# Singular values below this fraction of the largest are treated as zero
# when restricting to the channel row space.
RANK_TOLERANCE = 1.0e-10


def gram_target(d_p: np.ndarray) -> np.ndarray:
    """Entrywise magnitude of the pixel-response Gram, ``|D_p^H D_p|``."""
    d_p = np.asarray(d_p)
    if d_p.ndim != 2:
        raise ConfigError(f"gram_target needs a 2D matrix, got shape {d_p.shape}")
    return np.abs(d_p.conj().T @ d_p)


@dataclass
class BeamformDesign:
    """Result of one per-subcarrier beamformer design.

    Attributes
    ----------
    w : np.ndarray
        (N_t, n_pilots) transmit-side beamforming matrix; its squared
        Frobenius norm equals the allotted power share.
    gram_error : float
        Frobenius distance between the achieved rank-limited PSD Gram and
        the row-space-compressed target.
    rank : int
        Numerical rank of the channel ``D_p``.
    n_nonneg : int
        Count of nonnegative eigenvalues of the compressed target; the
        achievable rank is ``min(n_pilots, n_nonneg)``.
    psi : np.ndarray
        (n_pilots, rank) factor with ``psi^H psi`` equal to the achieved
        Gram approximation (kept for verification).
    g_psi : np.ndarray
        (rank, rank) achieved PSD approximation of the compressed target.
    z : np.ndarray
        (rank, rank) compressed target itself.
    """

    w: np.ndarray
    gram_error: float
    rank: int
    n_nonneg: int
    psi: np.ndarray = field(repr=False)
    g_psi: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)


def design_beamformer(
    d_p: np.ndarray,
    n_pilots: int,
    power_share: float,
    *,
    rank_tolerance: float = RANK_TOLERANCE,
) -> BeamformDesign:
    """Design the transmit matrix for one subcarrier.

    Parameters
    ----------
    d_p : np.ndarray
        (N_t, M) transposed cell-response channel for this subcarrier.
    n_pilots : int
        Number of pilot streams the design may use.
    power_share : float
        Power absorbed by the returned matrix (``||W||_F^2``).
    """
    d_p = np.asarray(d_p, dtype=complex)
    if d_p.ndim != 2:
        raise ConfigError(f"design_beamformer needs a 2D channel, got shape {d_p.shape}")
    if int(n_pilots) != n_pilots or n_pilots < 1:
        raise ConfigError(f"n_pilots must be a positive integer, got {n_pilots}")
    if power_share <= 0:
        raise ConfigError(f"power share must be positive, got {power_share}")
    n_pilots = int(n_pilots)

    u, sv, vh = np.linalg.svd(d_p, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        raise NumericalError("beamformer design: channel matrix is zero")
    r = int(np.sum(sv > rank_tolerance * sv[0]))
    u = u[:, :r]
    sv = sv[:r]
    v = vh[:r].conj().T  # (M, r) orthonormal row-space basis

    t = gram_target(d_p)
    z = v.conj().T @ t @ v
    z = 0.5 * (z + z.conj().T)  # clip asymmetry from rounding

    lam, q = np.linalg.eigh(z)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    q = q[:, order]
    n_nonneg = int(np.sum(lam >= 0.0))
    t_keep = min(n_pilots, n_nonneg)
    if t_keep == 0:
        raise NumericalError("beamformer design: compressed target has no nonnegative modes")

    lam_keep = lam[:t_keep]
    q_keep = q[:, :t_keep]
    g_psi = (q_keep * lam_keep[np.newaxis, :]) @ q_keep.conj().T

    # Factor so psi^H psi reproduces g_psi exactly; pad unused pilot rows.
    psi = np.sqrt(lam_keep)[:, np.newaxis] * q_keep.conj().T  # (t_keep, r)
    if t_keep < n_pilots:
        psi = np.vstack([psi, np.zeros((n_pilots - t_keep, r), dtype=complex)])

    w_u = psi @ ((1.0 / sv)[:, np.newaxis] * u.conj().T)  # (n_pilots, N_t)
    fro = np.linalg.norm(w_u)
    if fro == 0.0:
        raise NumericalError("beamformer design produced a zero matrix")
    # Plain transpose: with d_p = H1^T the channel applies from the other
    # side, and only conj(u) restores u^T conj(u) = I in the realized Gram.
    w = np.sqrt(power_share) * (w_u / fro).T  # transmit-side (N_t, n_pilots)

    gram_error = float(np.linalg.norm(g_psi - z))
    return BeamformDesign(
        w=w,
        gram_error=gram_error,
        rank=r,
        n_nonneg=n_nonneg,
        psi=psi,
        g_psi=g_psi,
        z=z,
    )


def beamformer_for_all_subcarriers(
    channels: ChannelSet,
    n_pilots: int,
    total_power: float,
) -> list[BeamformDesign]:
    """Design every subcarrier's beamformer with an even power split."""
    ks = channels.n_subcarriers
    share = total_power / ks
    designs = []
    for k_idx in range(ks):
        designs.append(design_beamformer(channels.h1(k_idx).T, n_pilots, share))
    logger.debug(
        "designed %d beamformers: mean gram error %.3g",
        ks,
        float(np.mean([d.gram_error for d in designs])),
    )
    return designs


def random_beamformer(
    n_tx: int,
    n_pilots: int,
    power_share: float,
    rng_seed: int,
) -> np.ndarray:
    """Gaussian transmit matrix normalized to the same power share.

    Baseline for coherence comparisons against the designed beamformer.
    """
    rng = np.random.default_rng(rng_seed)
    w = rng.standard_normal((n_tx, n_pilots)) + 1j * rng.standard_normal((n_tx, n_pilots))
    return np.sqrt(power_share) * w / np.linalg.norm(w)
