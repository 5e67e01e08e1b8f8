"""Linear measurement models and their diagnostics.

For one subcarrier the noiseless pilot observation is

``vec(Y) = ((W^T H1^T (I - G diag(chi))^-T) kr H2) chi``

where ``kr`` is the column-wise Khatri-Rao product, so each pixel owns a
single column of the sensing matrix. Vectorization is column-major:
``vec(Y)[i * N_rx + p] = Y[p, i]``.

Real-valued stacking splits each complex system into the two property
blocks ``s = [eps_r - 1, sigma / (omega_c eps0)]``: with ``rho_k`` the
center-to-subcarrier angular frequency ratio,

``E_k = [[Re D_k, -rho_k Im D_k], [Im D_k, rho_k Re D_k]]``

and subcarrier blocks are stacked by rows. Coherence and effective degrees
of freedom are the two scalar diagnostics used to compare setups.
"""

from __future__ import annotations

import logging

import numpy as np

from .emfwd import ChannelSet, _resolvent_apply
from .errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

# Above this many columns the coherence Gram is swept in blocks instead of
# materialized whole.
_FULL_GRAM_COLS = 4096


def _khatri_rao_cols(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Column-wise Kronecker: (a kr b)[:, m] = kron(a[:, m], b[:, m]).
    i, m = a.shape
    p, m2 = b.shape
    if m != m2:
        raise ConfigError(f"Khatri-Rao factors need equal column counts, got {m} and {m2}")
    return np.einsum("im,pm->ipm", a, b).reshape(i * p, m)


def sensing_matrix(
    channels: ChannelSet,
    beams,
    contrast_per_k: list[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Per-subcarrier complex sensing matrices ``D_k`` of shape (I * N_rx, M).

    ``contrast_per_k`` holds the linearization point for each subcarrier;
    ``None`` linearizes at zero contrast (first Born approximation), where
    the resolvent is the identity.
    """
    ks = channels.n_subcarriers
    if len(beams) != ks:
        raise ConfigError(f"need one beam matrix per subcarrier: got {len(beams)} for {ks}")
    if contrast_per_k is not None and len(contrast_per_k) != ks:
        raise ConfigError(f"need one contrast per subcarrier: got {len(contrast_per_k)} for {ks}")

    out = []
    for k_idx in range(ks):
        w = np.asarray(getattr(beams[k_idx], "w", beams[k_idx]), dtype=complex)
        if w.shape[0] != channels.n_tx:
            raise ConfigError(f"beam matrix {k_idx} has {w.shape[0]} rows, expected {channels.n_tx}")
        b = channels.h1(k_idx) @ w  # (M, I) incident fields
        if contrast_per_k is not None:
            c = _resolvent_apply(channels.green(k_idx), contrast_per_k[k_idx], b)
        else:
            c = b
        out.append(_khatri_rao_cols(c.T, channels.h2(k_idx)))
    return out


def stack_real(
    d_list: list[np.ndarray],
    frequencies: np.ndarray,
    f_c: float,
) -> np.ndarray:
    """Row-stack the real-valued property-block systems of all subcarriers."""
    frequencies = np.asarray(frequencies, dtype=float).ravel()
    if len(d_list) != frequencies.size:
        raise ConfigError(f"got {len(d_list)} matrices for {frequencies.size} frequencies")
    blocks = []
    for d, f in zip(d_list, frequencies):
        rho = f_c / f
        re, im = d.real, d.imag
        top = np.hstack([re, -rho * im])
        bot = np.hstack([im, rho * re])
        blocks.append(np.vstack([top, bot]))
    return np.vstack(blocks)


def stack_measurements(observations) -> np.ndarray:
    """Stack received pilot matrices into the real measurement vector.

    Per subcarrier the complex samples are vectorized column-major and split
    as ``[Re vec(Y); Im vec(Y)]``, matching the row layout of
    :func:`stack_real`.
    """
    parts = []
    for obs in observations:
        y = np.asarray(getattr(obs, "y", obs), dtype=complex)
        v = y.flatten(order="F")
        parts.append(np.concatenate([v.real, v.imag]))
    return np.concatenate(parts)


def noise_equivalent_radius(observations) -> float:
    """Discrepancy radius matching the expected noise norm of the stack.

    Each complex sample contributes two real entries of standard deviation
    ``noise_sigma / sqrt(2)``, so the expected squared norm of the stacked
    noise is ``I * N_rx * sum_k sigma_k^2``.
    """
    total = 0.0
    for obs in observations:
        y = np.asarray(obs.y)
        total += y.size * float(obs.noise_sigma) ** 2
    return float(np.sqrt(total))


def mutual_coherence(a: np.ndarray) -> float:
    """Largest normalized off-diagonal inner product between columns.

    Raises
    ------
    NumericalError
        If a column is identically zero (coherence undefined), naming the
        offending column index.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[1] < 2:
        raise ConfigError(f"mutual coherence needs a 2D matrix with >= 2 columns, got {a.shape}")
    norms = np.linalg.norm(a, axis=0)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise NumericalError(f"mutual coherence undefined: column {int(bad[0])} is zero")
    an = a / norms[np.newaxis, :]
    ah = an.conj().T
    n = a.shape[1]
    if n <= _FULL_GRAM_COLS:
        g = np.abs(ah @ an)
        np.fill_diagonal(g, 0.0)
        return float(g.max())
    best = 0.0
    step = _FULL_GRAM_COLS
    for j0 in range(0, n, step):
        block = np.abs(ah @ an[:, j0 : j0 + step])
        cols = block.shape[1]
        block[j0 : j0 + cols, :][np.diag_indices(cols)] = 0.0
        best = max(best, float(block.max()))
    return best


def edof(h1: np.ndarray) -> float:
    """Effective degrees of freedom of a transmit channel matrix.

    With ``R = H1 H1^H``, returns ``(tr R)^2 / ||R||_F^2``; computed from
    the singular values of ``H1`` (never forming R), this lies between 1
    and the rank of ``H1``.
    """
    h1 = np.asarray(h1)
    if h1.ndim != 2 or min(h1.shape) == 0:
        raise ConfigError(f"edof needs a non-empty 2D matrix, got {h1.shape}")
    sv = np.linalg.svd(h1, compute_uv=False)
    p = sv * sv
    total = p.sum()
    if total == 0.0:
        raise NumericalError("edof undefined for an all-zero matrix")
    return float(total * total / np.sum(p * p))
