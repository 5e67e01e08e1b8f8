"""Discrete 2D TM forward scattering model and pilot observation synthesis.

Method-of-moments discretization with pulse basis functions and point
matching on the pixel grid. Each square cell is integrated as the disk of
equal area (radius ``a = sqrt(cell_area / pi)``), which gives closed-form
cell integrals of the 2D free-space kernel:

* self cell:   ``1 + (j*pi*k*a/2) * H1_2(k*a)``
* other cell:  ``(j*pi*k*a/2) * J1(k*a) * H0_2(k*d)`` at center distance d

where ``H0_2`` / ``H1_2`` are Hankel functions of the second kind. The
total field then satisfies ``(I - G diag(chi)) E_t = E_inc`` and the
received scattered field is ``Y = H2 diag(chi) E_t`` for beamformed
incident fields ``E_inc = H1 W``.

All solves go through a dense LU factorization with a 1-norm condition
estimate; systems worse than ``COND_LIMIT`` are rejected instead of
silently returning garbage. When the contrast vanishes outside a small
support, the solve is restricted to that support (exact block reduction,
not an approximation), which keeps oversampled forward grids cheap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg as sla
from scipy.constants import c as C0
from scipy.spatial.distance import cdist
from scipy.special import hankel2, jv

from .errors import ConfigError, NumericalError
from .scene import ContrastMap, GridGeometry

logger = logging.getLogger(__name__)

# Reject Lippmann-Schwinger systems with a worse 1-norm condition estimate.
COND_LIMIT = 1.0e12

# Pulse-basis discretization is only physically defensible for cells small
# against the wavelength; k*a beyond this is refused unless opted out.
MAX_KA = 2.0

MATRIX_MAGIC = b"EMPSMAT1"


def hankel_h0_2(x) -> np.ndarray:
    """Hankel function of the second kind, order zero: ``J0(x) - j*Y0(x)``.

    Defined for positive real arguments; the kernel is singular at zero.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("hankel_h0_2 requires strictly positive finite arguments")
    return hankel2(0, x)


# ---------------------------------------------------------------------------
# Discrete operators
# ---------------------------------------------------------------------------


def _cell_weight(k: float, radius: float) -> complex:
    # Radiation weight of one equal-area disk cell observed from outside.
    ka = k * radius
    return 1j * np.pi * ka / 2.0 * jv(1, ka)


def _check_ka(k: float, grid: GridGeometry, strict: bool) -> float:
    ka = k * grid.radius
    if not np.isfinite(ka) or ka <= 0.0:
        raise ConfigError(f"wavenumber must be positive and finite, got k={k}")
    if ka >= MAX_KA:
        if strict:
            raise ConfigError(
                f"grid too coarse for wavelength: k*a = {ka:.3g} >= {MAX_KA} "
                "(refine the grid or lower the frequency; pass strict=False to "
                "run the self-consistent discrete model anyway)"
            )
        logger.debug("running beyond pulse-basis validity: k*a = %.3g", ka)
    return ka


def green_matrix(grid: GridGeometry, k: float, *, strict: bool = True) -> np.ndarray:
    """Cell-to-cell interaction matrix of the region of interest.

    ``G[m, n]`` maps the contrast current of cell n to the field it radiates
    onto the center of cell m; the diagonal holds the self-cell integral
    including the depolarization unit term.
    """
    ka = _check_ka(k, grid, strict)
    d = cdist(grid.centers, grid.centers)
    np.fill_diagonal(d, 1.0)  # placeholder; overwritten below
    g = _cell_weight(k, grid.radius) * hankel2(0, k * d)
    np.fill_diagonal(g, 1.0 + 1j * np.pi * ka / 2.0 * hankel2(1, ka))
    return g


def radiation_operators(
    grid: GridGeometry,
    tx_positions: np.ndarray,
    rx_positions: np.ndarray,
    k: float,
    *,
    strict: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Antenna-to-cell and cell-to-antenna propagation matrices.

    Returns
    -------
    h1 : np.ndarray
        (M, N_t) incident field at each cell center per unit transmit
        current, kernel ``(j/4) H0_2(k r)``.
    h2 : np.ndarray
        (N_rx, M) received field per unit cell contrast current,
        including the equal-area-disk cell weighting.

    Raises
    ------
    ConfigError
        If any antenna lies inside the region of interest (the model
        requires sources and observers outside the scattering domain).
    """
    _check_ka(k, grid, strict)
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=float))
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    for name, pos in (("transmit", tx), ("receive", rx)):
        inside = grid.contains(pos)
        if inside.any():
            idx = int(np.flatnonzero(inside)[0])
            raise ConfigError(
                f"{name} antenna {idx} at {tuple(pos[idx])} lies inside the region of interest"
            )
    h1 = 0.25j * hankel2(0, k * cdist(grid.centers, tx))
    h2 = _cell_weight(k, grid.radius) * hankel2(0, k * cdist(rx, grid.centers))
    return h1, h2


# ---------------------------------------------------------------------------
# Lippmann-Schwinger solves
# ---------------------------------------------------------------------------


def _solve_guarded(a: np.ndarray, b: np.ndarray, context: str) -> np.ndarray:
    """Dense LU solve with a 1-norm condition estimate guard."""
    if a.shape[0] == 0:
        return np.zeros_like(b)
    anorm = np.linalg.norm(a, 1)
    lu, piv = sla.lu_factor(a, check_finite=False)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or rcond <= 0.0:
        raise NumericalError(f"{context}: singular system matrix", condition=np.inf)
    cond = 1.0 / rcond
    if cond > COND_LIMIT:
        raise NumericalError(
            f"{context}: system condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}",
            condition=cond,
        )
    return sla.lu_solve((lu, piv), b, check_finite=False)


def _resolvent_apply(green: np.ndarray, chi: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(I - G diag(chi)) x = b`` exploiting zero-contrast pixels.

    Rows outside the contrast support are trivial (``x = b + G_cols_S ...``),
    so only the support block is factorized. Algebraically exact.
    """
    chi = np.asarray(chi).ravel()
    s = np.flatnonzero(chi)
    if s.size == 0:
        return np.array(b, copy=True)
    if s.size == chi.size:
        a = -green * chi[np.newaxis, :]
        a[np.diag_indices_from(a)] += 1.0
        return _solve_guarded(a, b, "total-field solve")
    vector = b.ndim == 1
    b2 = b[:, np.newaxis] if vector else b
    a = -green[np.ix_(s, s)] * chi[s][np.newaxis, :]
    a[np.diag_indices_from(a)] += 1.0
    x_s = _solve_guarded(a, b2[s], "total-field solve (support block)")
    out = b2 + green[:, s] @ (chi[s][:, np.newaxis] * x_s)
    return out[:, 0] if vector else out


def ls_total_field(green: np.ndarray, contrast: np.ndarray, incident: np.ndarray) -> np.ndarray:
    """Total field(s) inside the region for given incident field column(s).

    Solves ``(I - G diag(chi)) E_t = E_inc`` by dense LU with a condition
    guard. ``incident`` may be a vector or an (M, n) block of columns.
    """
    green = np.asarray(green)
    contrast = np.asarray(contrast, dtype=complex).ravel()
    incident = np.asarray(incident, dtype=complex)
    m = green.shape[0]
    if green.shape != (m, m) or contrast.shape != (m,) or incident.shape[0] != m:
        raise ConfigError(
            f"shape mismatch: green {green.shape}, contrast {contrast.shape}, incident {incident.shape}"
        )
    return _resolvent_apply(green, contrast, incident)


def scattering_operator(green: np.ndarray, contrast: np.ndarray) -> np.ndarray:
    """Map from incident field to contrast current: ``diag(chi) (I - G diag(chi))^-1``.

    Rows outside the contrast support are identically zero, and so are
    their columns: the operator acts entirely within the support block.
    """
    green = np.asarray(green)
    chi = np.asarray(contrast, dtype=complex).ravel()
    m = green.shape[0]
    if green.shape != (m, m) or chi.shape != (m,):
        raise ConfigError(f"shape mismatch: green {green.shape}, contrast {chi.shape}")
    x = np.zeros((m, m), dtype=complex)
    s = np.flatnonzero(chi)
    if s.size == 0:
        return x
    a = -green[np.ix_(s, s)] * chi[s][np.newaxis, :]
    a[np.diag_indices_from(a)] += 1.0
    inv_block = _solve_guarded(a, np.eye(s.size, dtype=complex), "scattering operator")
    x[np.ix_(s, s)] = chi[s][:, np.newaxis] * inv_block
    return x


# ---------------------------------------------------------------------------
# Channel sets
# ---------------------------------------------------------------------------


@dataclass
class ChannelSet:
    """Per-subcarrier discrete operators for one geometry.

    Operators are built on demand from the stored geometry; with
    ``cache=True`` the full matrices are memoized per subcarrier (sized for
    inversion grids), while ``cache=False`` recomputes, which is the right
    trade for large oversampled forward grids where only small sub-blocks
    are ever requested.
    """

    grid: GridGeometry
    tx_positions: np.ndarray
    rx_positions: np.ndarray
    frequencies: np.ndarray
    cache: bool = True
    strict: bool = True
    _green: dict = field(default_factory=dict, repr=False)
    _h1: dict = field(default_factory=dict, repr=False)
    _h2: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.tx_positions = np.atleast_2d(np.asarray(self.tx_positions, dtype=float))
        self.rx_positions = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        self.frequencies = np.asarray(self.frequencies, dtype=float).ravel()
        if self.frequencies.size == 0 or np.any(self.frequencies <= 0):
            raise ConfigError("channel set requires at least one positive frequency")
        for name, pos in (("transmit", self.tx_positions), ("receive", self.rx_positions)):
            if self.grid.contains(pos).any():
                raise ConfigError(f"{name} array intersects the region of interest")
        # Validate the discretization once up front.
        for k in self.wavenumbers():
            _check_ka(float(k), self.grid, self.strict)

    @property
    def n_subcarriers(self) -> int:
        return self.frequencies.size

    @property
    def n_tx(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def n_rx(self) -> int:
        return self.rx_positions.shape[0]

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.frequencies / C0

    def omega(self, k_index: int) -> float:
        return float(2.0 * np.pi * self.frequencies[k_index])

    def _k(self, k_index: int) -> float:
        return float(self.wavenumbers()[k_index])

    def green(self, k_index: int) -> np.ndarray:
        if k_index in self._green:
            return self._green[k_index]
        g = green_matrix(self.grid, self._k(k_index), strict=self.strict)
        if self.cache:
            self._green[k_index] = g
        return g

    def h1(self, k_index: int) -> np.ndarray:
        if k_index in self._h1:
            return self._h1[k_index]
        h1, h2 = radiation_operators(
            self.grid, self.tx_positions, self.rx_positions, self._k(k_index), strict=self.strict
        )
        if self.cache:
            self._h1[k_index] = h1
            self._h2[k_index] = h2
        return h1

    def h2(self, k_index: int) -> np.ndarray:
        if k_index in self._h2:
            return self._h2[k_index]
        self.h1(k_index)
        if k_index in self._h2:
            return self._h2[k_index]
        k = self._k(k_index)
        return _cell_weight(k, self.grid.radius) * hankel2(
            0, k * cdist(self.rx_positions, self.grid.centers)
        )

    # -- restricted accessors (avoid materializing full forward-grid matrices)

    def green_block(self, k_index: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        if k_index in self._green:
            return self._green[k_index][np.ix_(rows, cols)]
        k = self._k(k_index)
        pr = self.grid.centers[rows]
        pc = self.grid.centers[cols]
        d = cdist(pr, pc)
        same = d == 0.0
        d[same] = 1.0
        g = _cell_weight(k, self.grid.radius) * hankel2(0, k * d)
        ka = k * self.grid.radius
        g[same] = 1.0 + 1j * np.pi * ka / 2.0 * hankel2(1, ka)
        return g

    def h1_rows(self, k_index: int, rows: np.ndarray) -> np.ndarray:
        if k_index in self._h1:
            return self._h1[k_index][rows]
        k = self._k(k_index)
        return 0.25j * hankel2(0, k * cdist(self.grid.centers[rows], self.tx_positions))

    def h2_cols(self, k_index: int, cols: np.ndarray) -> np.ndarray:
        if k_index in self._h2:
            return self._h2[k_index][:, cols]
        k = self._k(k_index)
        return _cell_weight(k, self.grid.radius) * hankel2(
            0, k * cdist(self.rx_positions, self.grid.centers[cols])
        )


def channels_for_scenario(scenario, grid: GridGeometry | None = None, *, cache: bool = True) -> ChannelSet:
    """Build the channel set a scenario implies, on its inversion grid by default.

    Scenario-driven channels opt out of the coarse-grid guard: the discrete
    model stays self-consistent at any pixel size, and realistic setups sit
    far beyond the pulse-basis validity bound.
    """
    if grid is None:
        grid = scenario.grid()
    return ChannelSet(
        grid=grid,
        tx_positions=scenario.tx_positions(),
        rx_positions=scenario.rx_positions(),
        frequencies=scenario.frequencies(),
        cache=cache,
        strict=False,
    )


# ---------------------------------------------------------------------------
# Observation synthesis
# ---------------------------------------------------------------------------


@dataclass
class PilotObservation:
    """Received pilot matrix for one subcarrier.

    Attributes
    ----------
    k_index : int
        Zero-based subcarrier index.
    frequency : float
        Subcarrier frequency, Hz.
    y : np.ndarray
        (N_rx, n_pilots) complex received samples.
    noise_sigma : float
        Standard deviation of the complex noise per sample (0 if noiseless).
    signal_power : float
        Mean squared magnitude of the noiseless samples.
    """

    k_index: int
    frequency: float
    y: np.ndarray
    noise_sigma: float
    signal_power: float


def synthesize_observation(
    channels: ChannelSet,
    truth: ContrastMap,
    beams,
    snr_db: float | None,
    rng_seed: int,
) -> list[PilotObservation]:
    """Simulate the received pilot matrices ``Y_k = H2 diag(chi) E_t + N_k``.

    Parameters
    ----------
    channels : ChannelSet
        Operators on the grid the truth map lives on.
    truth : ContrastMap
        Ground-truth properties; its grid must match ``channels.grid``.
    beams : sequence
        Per-subcarrier transmit matrices (N_t, n_pilots), either raw arrays
        or design objects exposing ``.w``.
    snr_db : float | None
        Per-sample SNR; ``None`` or infinite disables noise.
    rng_seed : int
        Root seed. Each subcarrier draws from an independent substream
        derived from ``(rng_seed, k)``, so observations are reproducible
        per subcarrier regardless of evaluation order.

    Raises
    ------
    ConfigError
        Grid mismatch, or zero signal power with a finite SNR requested.
    """
    if truth.grid.n_pixels != channels.grid.n_pixels or truth.grid.extent != channels.grid.extent:
        raise ConfigError("truth map and channel set are on different grids")
    if len(beams) != channels.n_subcarriers:
        raise ConfigError(
            f"need one beam matrix per subcarrier: got {len(beams)} for {channels.n_subcarriers}"
        )
    noisy = snr_db is not None and np.isfinite(snr_db)
    support = truth.support()
    n_rx = channels.n_rx

    out: list[PilotObservation] = []
    for k_idx in range(channels.n_subcarriers):
        w = np.asarray(getattr(beams[k_idx], "w", beams[k_idx]), dtype=complex)
        if w.shape[0] != channels.n_tx:
            raise ConfigError(f"beam matrix {k_idx} has {w.shape[0]} rows, expected {channels.n_tx}")
        chi = truth.contrast(channels.omega(k_idx))
        if support.size:
            chi_s = chi[support]
            b_s = channels.h1_rows(k_idx, support) @ w
            a = -channels.green_block(k_idx, support, support) * chi_s[np.newaxis, :]
            a[np.diag_indices_from(a)] += 1.0
            e_s = _solve_guarded(a, b_s, f"observation synthesis (subcarrier {k_idx})")
            y0 = channels.h2_cols(k_idx, support) @ (chi_s[:, np.newaxis] * e_s)
        else:
            y0 = np.zeros((n_rx, w.shape[1]), dtype=complex)

        p_sig = float(np.mean(np.abs(y0) ** 2))
        sigma = 0.0
        y = y0
        if noisy:
            if p_sig == 0.0:
                raise ConfigError(
                    "zero signal power: cannot realize a finite SNR for an empty scene"
                )
            sigma = float(np.sqrt(p_sig / 10.0 ** (snr_db / 10.0)))
            rng = np.random.default_rng([int(rng_seed), k_idx])
            noise = rng.standard_normal(y0.shape) + 1j * rng.standard_normal(y0.shape)
            y = y0 + (sigma / np.sqrt(2.0)) * noise
        out.append(
            PilotObservation(
                k_index=k_idx,
                frequency=float(channels.frequencies[k_idx]),
                y=y,
                noise_sigma=sigma,
                signal_power=p_sig,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Binary matrix files
# ---------------------------------------------------------------------------


def write_matrix(path: str | Path, a: np.ndarray) -> None:
    """Persist a 2D complex matrix.

    Layout: 8-byte magic ``EMPSMAT1``, two little-endian uint32 dimensions
    (rows, cols), then the row-major complex64 payload. The fixed layout is
    deliberately minimal so other tools can consume the files.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise ConfigError(f"matrix files hold 2D arrays, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(np.asarray(a.shape, dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(a, dtype="<c8").tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MATRIX_MAGIC:
        raise ConfigError(f"{path}: not a matrix file (bad magic or truncated header)")
    rows, cols = np.frombuffer(raw[8:16], dtype="<u4")
    expect = 16 + int(rows) * int(cols) * 8
    if len(raw) != expect:
        raise ConfigError(f"{path}: payload size mismatch (expected {expect} bytes, got {len(raw)})")
    data = np.frombuffer(raw[16:], dtype="<c8").astype(np.complex64)
    return data.reshape(int(rows), int(cols))
