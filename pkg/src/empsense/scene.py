"""Scenario description: geometry, materials, and ground-truth property maps.

Everything downstream (channel operators, beam design, inversion, material
classification) consumes the objects defined here. A scenario is a small
OFDM sensing setup: a transmit array illuminates a square region of interest
discretized into square pixels, a receive array observes the scattered
field, and each pixel carries a relative permittivity and a conductivity.

Conventions fixed here and relied on everywhere else:

* pixels are enumerated row-major, ``m = iy * grid_side + ix``, with the x
  index varying fastest and cell centers used for all kernel evaluations;
* both antenna arrays are uniform lines parallel to the y axis, centered on
  their respective array centers, spaced in units of the center wavelength;
* subcarrier ``k`` (1-based) sits at ``f_c + (2k - K - 1) * delta_f / 2``,
  so the comb is symmetric around the center frequency ``f_c``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.constants import c as C0
from scipy.constants import epsilon_0 as EPS0

from .errors import ConfigError

logger = logging.getLogger(__name__)

# Properties of free space used as the background medium.
AIR_EPS_R = 1.0
AIR_SIGMA = 0.0

# Built-in material table. Conductivities alternate between the low and high
# end of the range so that no two records are close in both coordinates at
# once; this keeps them mutually separable after scene whitening.
_MATERIAL_TABLE: tuple[tuple[str, float, float], ...] = (
    ("wood-dry", 2.0, 0.005),
    ("polymer-sheet", 2.9, 0.35),
    ("glass-pane", 3.8, 0.012),
    ("gypsum-board", 4.7, 0.45),
    ("brick-fired", 5.6, 0.03),
    ("concrete-like", 6.5, 0.22),
    ("marble-slab", 7.4, 0.06),
    ("asphalt-block", 8.3, 0.5),
    ("ceramic-tile", 9.1, 0.1),
    ("soil-moist", 10.0, 0.28),
)

PHANTOM_SHAPES = ("disk", "rect", "T", "custom-mask")


@dataclass(frozen=True)
class MaterialRecord:
    """One entry of the material lookup table.

    Attributes
    ----------
    name : str
        Human-readable label, unique within a database.
    eps_r : float
        Relative permittivity (dimensionless, >= 1).
    sigma : float
        Conductivity in S/m (>= 0).
    """

    name: str
    eps_r: float
    sigma: float

    def __post_init__(self):
        if self.eps_r < 1.0:
            raise ConfigError(f"material {self.name!r}: eps_r must be >= 1, got {self.eps_r}")
        if self.sigma < 0.0:
            raise ConfigError(f"material {self.name!r}: sigma must be >= 0, got {self.sigma}")


def material_database() -> list[MaterialRecord]:
    """Return the built-in ten-record material database.

    Records span relative permittivities from 2 to 10 and conductivities
    from 0.005 to 0.5 S/m. The background (air) is deliberately not a
    record: classification treats it as the reference cluster instead.
    """
    return [MaterialRecord(*row) for row in _MATERIAL_TABLE]


def material_by_name(name: str, database: list[MaterialRecord] | None = None) -> MaterialRecord:
    """Look up a material record by name.

    Raises
    ------
    ConfigError
        If no record with that name exists.
    """
    db = material_database() if database is None else database
    for rec in db:
        if rec.name == name:
            return rec
    raise ConfigError(f"unknown material {name!r}; known: {[r.name for r in db]}")


# ---------------------------------------------------------------------------
# Grid geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridGeometry:
    """Square pixel grid over the region of interest.

    Attributes
    ----------
    extent : tuple[float, float]
        (lo, hi) bounds shared by both axes, in meters.
    side : int
        Number of pixels per axis; the grid has ``side ** 2`` pixels.
    centers : np.ndarray
        (M, 2) cell-center coordinates in row-major order (x fastest).
    cell_area : float
        Area of one square pixel, m^2.
    radius : float
        Radius of the equal-area disk used for cell integration,
        ``sqrt(cell_area / pi)``.
    """

    extent: tuple[float, float]
    side: int
    centers: np.ndarray = field(repr=False)
    cell_area: float
    radius: float

    @property
    def n_pixels(self) -> int:
        return self.side * self.side

    def index_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (ix, iy) integer coordinates for every pixel, row-major."""
        iy, ix = np.divmod(np.arange(self.n_pixels), self.side)
        return ix, iy

    def contains(self, points: np.ndarray) -> np.ndarray:
        """True for rows of ``points`` lying inside the closed region bounds."""
        lo, hi = self.extent
        pts = np.atleast_2d(points)
        return (
            (pts[:, 0] >= lo) & (pts[:, 0] <= hi) & (pts[:, 1] >= lo) & (pts[:, 1] <= hi)
        )


def build_grid(extent: tuple[float, float], side: int) -> GridGeometry:
    """Discretize the square region into ``side x side`` centered pixels.

    Parameters
    ----------
    extent : tuple[float, float]
        (lo, hi) bounds of the square region, in meters.
    side : int
        Pixels per axis, >= 1.
    """
    lo, hi = float(extent[0]), float(extent[1])
    if not np.isfinite(lo) or not np.isfinite(hi) or lo >= hi:
        raise ConfigError(f"domain extent must satisfy lo < hi, got ({lo}, {hi})")
    if int(side) != side or side < 1:
        raise ConfigError(f"grid side must be a positive integer, got {side}")
    side = int(side)

    cell = (hi - lo) / side
    coords = lo + (np.arange(side) + 0.5) * cell
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    centers = np.column_stack([xx.ravel(), yy.ravel()])
    area = cell * cell
    return GridGeometry(
        extent=(lo, hi),
        side=side,
        centers=centers,
        cell_area=area,
        radius=float(np.sqrt(area / np.pi)),
    )


# ---------------------------------------------------------------------------
# Property maps
# ---------------------------------------------------------------------------


@dataclass
class ContrastMap:
    """Per-pixel relative permittivity and conductivity over a grid.

    Attributes
    ----------
    grid : GridGeometry
        The pixel grid the properties live on.
    eps_r : np.ndarray
        (M,) relative permittivity per pixel.
    sigma : np.ndarray
        (M,) conductivity per pixel, S/m.
    """

    grid: GridGeometry
    eps_r: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.eps_r = np.asarray(self.eps_r, dtype=float).ravel()
        self.sigma = np.asarray(self.sigma, dtype=float).ravel()
        m = self.grid.n_pixels
        if self.eps_r.shape != (m,) or self.sigma.shape != (m,):
            raise ConfigError(
                f"property arrays must have shape ({m},), got "
                f"{self.eps_r.shape} and {self.sigma.shape}"
            )

    def contrast(self, omega: float) -> np.ndarray:
        """Complex contrast against air at angular frequency ``omega``.

        Real part is ``eps_r - 1``; the imaginary part carries conductive
        loss scaled to the probing frequency, ``sigma / (eps0 * omega)``.
        """
        return (self.eps_r - 1.0) + 1j * self.sigma / (EPS0 * omega)

    def property_vector(self, omega_c: float) -> np.ndarray:
        """Stack both quantities into the real unknown vector of length 2M.

        The first M entries are ``eps_r - 1``; the last M entries are the
        conductivity normalized by the center angular frequency,
        ``sigma / (omega_c * eps0)``, so both blocks share a common scale.
        """
        return np.concatenate([self.eps_r - 1.0, self.sigma / (omega_c * EPS0)])

    @classmethod
    def from_property_vector(cls, grid: GridGeometry, s: np.ndarray, omega_c: float) -> "ContrastMap":
        """Inverse of :meth:`property_vector`."""
        s = np.asarray(s, dtype=float).ravel()
        m = grid.n_pixels
        if s.shape != (2 * m,):
            raise ConfigError(f"property vector must have length {2 * m}, got {s.shape}")
        return cls(grid=grid, eps_r=s[:m] + 1.0, sigma=s[m:] * omega_c * EPS0)

    def support(self) -> np.ndarray:
        """Indices of pixels that differ from air in either property."""
        return np.flatnonzero((self.eps_r != AIR_EPS_R) | (self.sigma != AIR_SIGMA))

    @classmethod
    def air(cls, grid: GridGeometry) -> "ContrastMap":
        """A map with every pixel at background properties."""
        m = grid.n_pixels
        return cls(grid=grid, eps_r=np.full(m, AIR_EPS_R), sigma=np.zeros(m))

    def upsample(self, factor: int) -> "ContrastMap":
        """Replicate each pixel into a ``factor x factor`` block on a finer grid.

        The phantom is piecewise constant on its own grid, so replication is
        exact; this is how a truth map is moved to the oversampled forward
        grid without interpolation artifacts.
        """
        if int(factor) != factor or factor < 1:
            raise ConfigError(f"oversample factor must be a positive integer, got {factor}")
        factor = int(factor)
        if factor == 1:
            return ContrastMap(grid=self.grid, eps_r=self.eps_r.copy(), sigma=self.sigma.copy())
        fine = build_grid(self.grid.extent, self.grid.side * factor)
        n = self.grid.side
        rep = np.ones((factor, factor))
        eps = np.kron(self.eps_r.reshape(n, n), rep).ravel()
        sig = np.kron(self.sigma.reshape(n, n), rep).ravel()
        return ContrastMap(grid=fine, eps_r=eps, sigma=sig)

    # -- serialization ------------------------------------------------------

    def to_csv(self, path: str | Path | io.TextIOBase) -> None:
        """Write the full map as ``ix,iy,eps_r,sigma`` rows (one per pixel)."""
        ix, iy = self.grid.index_grid()
        own = isinstance(path, (str, Path))
        fh = open(path, "w", newline="") if own else path
        try:
            w = csv.writer(fh)
            w.writerow(["ix", "iy", "eps_r", "sigma"])
            for m in range(self.grid.n_pixels):
                w.writerow([int(ix[m]), int(iy[m]), repr(float(self.eps_r[m])), repr(float(self.sigma[m]))])
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path: str | Path | io.TextIOBase, grid: GridGeometry) -> "ContrastMap":
        """Read a map previously written by :meth:`to_csv`.

        Round-tripping preserves values exactly: floats are serialized with
        shortest-round-trip decimal representation.
        """
        own = isinstance(path, (str, Path))
        fh = open(path, "r", newline="") if own else path
        try:
            rows = list(csv.reader(fh))
        finally:
            if own:
                fh.close()
        if not rows or rows[0] != ["ix", "iy", "eps_r", "sigma"]:
            raise ConfigError("property CSV must start with header ix,iy,eps_r,sigma")
        m = grid.n_pixels
        eps = np.full(m, np.nan)
        sig = np.full(m, np.nan)
        for row in rows[1:]:
            if len(row) != 4:
                raise ConfigError(f"malformed property CSV row: {row}")
            ix, iy = int(row[0]), int(row[1])
            if not (0 <= ix < grid.side and 0 <= iy < grid.side):
                raise ConfigError(f"pixel index ({ix}, {iy}) outside {grid.side}x{grid.side} grid")
            idx = iy * grid.side + ix
            eps[idx] = float(row[2])
            sig[idx] = float(row[3])
        if np.isnan(eps).any() or np.isnan(sig).any():
            raise ConfigError("property CSV does not cover every pixel of the grid")
        return cls(grid=grid, eps_r=eps, sigma=sig)


# ---------------------------------------------------------------------------
# Phantoms
# ---------------------------------------------------------------------------


def _resolve_material(material, database: list[MaterialRecord] | None) -> tuple[float, float]:
    if isinstance(material, MaterialRecord):
        return material.eps_r, material.sigma
    if isinstance(material, str):
        rec = material_by_name(material, database)
        return rec.eps_r, rec.sigma
    try:
        eps_r, sigma = float(material[0]), float(material[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"material must be a record, a name, or an (eps_r, sigma) pair: {material!r}") from exc
    return eps_r, sigma


def make_phantom(
    shape: str,
    material,
    grid: GridGeometry,
    *,
    center: tuple[float, float] = (0.0, 0.0),
    radius: float | None = None,
    width: float | None = None,
    height: float | None = None,
    scale: float = 0.75,
    mask: np.ndarray | None = None,
    database: list[MaterialRecord] | None = None,
) -> ContrastMap:
    """Paint a homogeneous target of the given shape onto an air background.

    Parameters
    ----------
    shape : str
        One of ``disk``, ``rect``, ``T``, or ``custom-mask``.
    material : MaterialRecord | str | tuple[float, float]
        Target properties, either a record, a database name, or a raw
        ``(eps_r, sigma)`` pair.
    grid : GridGeometry
        Pixel grid to paint on. Membership is decided at cell centers.
    center : tuple[float, float]
        Shape center for ``disk`` and ``rect``, meters.
    radius : float
        Disk radius, meters. Defaults to 15 % of the region width.
    width, height : float
        Rectangle dimensions, meters. Default to 30 % / 20 % of the width.
    scale : float
        Fraction of the region half-width occupied by the T glyph.
    mask : np.ndarray
        Boolean array (M,) or (side, side), required for ``custom-mask``.
    database : list[MaterialRecord] | None
        Material table for name lookups; defaults to the built-in one.

    Raises
    ------
    ConfigError
        Unknown shape, missing parameters, or an empty painted region.
    """
    if shape not in PHANTOM_SHAPES:
        raise ConfigError(f"unknown phantom shape {shape!r}; expected one of {PHANTOM_SHAPES}")
    eps_val, sig_val = _resolve_material(material, database)

    x = grid.centers[:, 0]
    y = grid.centers[:, 1]
    lo, hi = grid.extent
    half = 0.5 * (hi - lo)
    cx0, cy0 = 0.5 * (lo + hi), 0.5 * (lo + hi)

    if shape == "disk":
        r = 0.15 * (hi - lo) if radius is None else float(radius)
        if r <= 0:
            raise ConfigError(f"disk radius must be positive, got {r}")
        sel = (x - center[0]) ** 2 + (y - center[1]) ** 2 <= r * r
    elif shape == "rect":
        w = 0.3 * (hi - lo) if width is None else float(width)
        h = 0.2 * (hi - lo) if height is None else float(height)
        if w <= 0 or h <= 0:
            raise ConfigError(f"rect dimensions must be positive, got {w} x {h}")
        sel = (np.abs(x - center[0]) <= 0.5 * w) & (np.abs(y - center[1]) <= 0.5 * h)
    elif shape == "T":
        if not 0.0 < scale <= 1.0:
            raise ConfigError(f"T scale must lie in (0, 1], got {scale}")
        # Upright block letter: a crossbar along the top and a narrow stem.
        ell = scale * half
        xr = x - cx0
        yr = y - cy0
        bar = (np.abs(xr) <= ell) & (yr >= 0.6 * ell) & (yr <= ell)
        stem = (np.abs(xr) <= 0.15 * ell) & (yr >= -ell) & (yr <= 0.6 * ell)
        sel = bar | stem
    else:  # custom-mask
        if mask is None:
            raise ConfigError("custom-mask phantom requires a mask array")
        sel = np.asarray(mask, dtype=bool).ravel()
        if sel.shape != (grid.n_pixels,):
            raise ConfigError(
                f"mask must have {grid.n_pixels} entries for a {grid.side}x{grid.side} grid, got {sel.size}"
            )

    if not sel.any():
        raise ConfigError(f"phantom {shape!r} selects no pixels on this grid")

    out = ContrastMap.air(grid)
    out.eps_r[sel] = eps_val
    out.sigma[sel] = sig_val
    logger.debug("phantom %s: %d of %d pixels", shape, int(sel.sum()), grid.n_pixels)
    return out


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one sensing setup.

    Attributes
    ----------
    n_tx : int
        Transmit antennas (uniform line array parallel to the y axis).
    n_rx : int
        Receive antennas (same orientation as the transmitter).
    n_pilots : int
        Pilot symbols (beamformed streams) per subcarrier.
    n_subcarriers : int
        OFDM subcarriers used for sensing.
    f_c : float
        Center frequency, Hz.
    delta_f : float
        Subcarrier spacing, Hz.
    tx_center, rx_center : tuple[float, float]
        Array centers in the scene plane, meters.
    array_spacing_wavelengths : float
        Element spacing in units of the center wavelength.
    domain_extent : tuple[float, float]
        (lo, hi) bounds of the square region of interest, meters.
    grid_side : int
        Inversion grid resolution per axis.
    power_budget : float
        Total transmit power split evenly across subcarriers.
    snr_db : float | None
        Per-sample receive SNR; ``None`` disables noise.
    rng_seed : int
        Seed for the observation noise streams.
    forward_oversample : int
        Grid refinement factor for forward synthesis (1 reuses the
        inversion grid; larger values avoid committing the inverse crime).
    """

    n_tx: int = 64
    n_rx: int = 8
    n_pilots: int = 16
    n_subcarriers: int = 16
    f_c: float = 30.0e9
    delta_f: float = 200.0e3
    tx_center: tuple[float, float] = (10.0, 0.0)
    rx_center: tuple[float, float] = (-20.0, -20.0)
    array_spacing_wavelengths: float = 0.5
    domain_extent: tuple[float, float] = (-1.0, 1.0)
    grid_side: int = 16
    power_budget: float = 1.0
    snr_db: float | None = 30.0
    rng_seed: int = 0
    forward_oversample: int = 2

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_pilots", "n_subcarriers", "grid_side", "forward_oversample"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.f_c <= 0 or self.delta_f <= 0:
            raise ConfigError("f_c and delta_f must be positive")
        if self.array_spacing_wavelengths <= 0:
            raise ConfigError("array spacing must be positive")
        if self.power_budget <= 0:
            raise ConfigError("power budget must be positive")
        lo, hi = self.domain_extent
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise ConfigError(f"domain extent must satisfy lo < hi, got {self.domain_extent}")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            object.__setattr__(self, "snr_db", None)

    # -- derived quantities --------------------------------------------------

    @property
    def wavelength(self) -> float:
        return C0 / self.f_c

    @property
    def omega_c(self) -> float:
        return 2.0 * np.pi * self.f_c

    def frequencies(self) -> np.ndarray:
        """Subcarrier frequencies, symmetric comb around ``f_c``."""
        k = np.arange(1, self.n_subcarriers + 1)
        return self.f_c + (2 * k - self.n_subcarriers - 1) * (self.delta_f / 2.0)

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.frequencies() / C0

    def _array_positions(self, center: tuple[float, float], n: int) -> np.ndarray:
        spacing = self.array_spacing_wavelengths * self.wavelength
        offsets = (np.arange(n) - (n - 1) / 2.0) * spacing
        pos = np.zeros((n, 2))
        pos[:, 0] = center[0]
        pos[:, 1] = center[1] + offsets
        return pos

    def tx_positions(self) -> np.ndarray:
        return self._array_positions(self.tx_center, self.n_tx)

    def rx_positions(self) -> np.ndarray:
        return self._array_positions(self.rx_center, self.n_rx)

    def grid(self) -> GridGeometry:
        return build_grid(self.domain_extent, self.grid_side)

    def forward_grid(self) -> GridGeometry:
        return build_grid(self.domain_extent, self.grid_side * self.forward_oversample)

    def standoff_distance(self) -> float:
        """Distance from the transmit array center to the region center."""
        lo, hi = self.domain_extent
        cx = 0.5 * (lo + hi)
        return float(np.hypot(self.tx_center[0] - cx, self.tx_center[1] - cx))

    def with_updates(self, **kwargs) -> "ScenarioConfig":
        """Return a copy with the given fields replaced (re-validated)."""
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# JSON configuration files
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "n_tx", "n_rx", "n_pilots", "n_subcarriers", "f_c", "delta_f",
    "tx_center", "rx_center", "array_spacing_wavelengths", "domain_extent",
    "grid_side", "power_budget", "snr_db", "rng_seed", "forward_oversample",
}

_PHANTOM_KEYS = {"shape", "material", "center", "radius", "width", "height", "scale", "mask"}


@dataclass
class SceneDescription:
    """Parsed contents of a scenario JSON file."""

    scenario: ScenarioConfig
    materials: list[MaterialRecord]
    phantom: ContrastMap | None
    phantom_material: str | None = None
    experiment: dict | None = None


def _parse_scenario(raw: dict) -> ScenarioConfig:
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    kwargs = dict(raw)
    for key in ("tx_center", "rx_center", "domain_extent"):
        if key in kwargs:
            val = kwargs[key]
            if not isinstance(val, (list, tuple)) or len(val) != 2:
                raise ConfigError(f"{key} must be a two-element list, got {val!r}")
            kwargs[key] = (float(val[0]), float(val[1]))
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad scenario section: {exc}") from exc


def _parse_materials(raw) -> list[MaterialRecord]:
    if raw is None:
        return material_database()
    if not isinstance(raw, list) or not raw:
        raise ConfigError("materials section must be a non-empty list")
    records = []
    for entry in raw:
        try:
            records.append(MaterialRecord(str(entry["name"]), float(entry["eps_r"]), float(entry["sigma"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad material entry {entry!r}: {exc}") from exc
    names = [r.name for r in records]
    if len(set(names)) != len(names):
        raise ConfigError("material names must be unique")
    return records


def _parse_phantom(raw, grid: GridGeometry, database: list[MaterialRecord]) -> ContrastMap | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("phantom section must be an object")
    unknown = set(raw) - _PHANTOM_KEYS
    if unknown:
        raise ConfigError(f"unknown phantom keys: {sorted(unknown)}")
    if "shape" not in raw or "material" not in raw:
        raise ConfigError("phantom section requires 'shape' and 'material'")
    kwargs = {}
    for key in ("radius", "width", "height", "scale"):
        if key in raw:
            kwargs[key] = float(raw[key])
    if "center" in raw:
        val = raw["center"]
        if not isinstance(val, (list, tuple)) or len(val) != 2:
            raise ConfigError(f"phantom center must be a two-element list, got {val!r}")
        kwargs["center"] = (float(val[0]), float(val[1]))
    if "mask" in raw:
        kwargs["mask"] = np.asarray(raw["mask"], dtype=bool)
    material = raw["material"]
    if isinstance(material, dict):
        try:
            material = (float(material["eps_r"]), float(material["sigma"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad inline phantom material {raw['material']!r}: {exc}") from exc
    return make_phantom(str(raw["shape"]), material, grid, database=database, **kwargs)


def load_config(source: str | Path | dict) -> SceneDescription:
    """Load a scenario description from a JSON file, JSON text, or dict.

    The document has up to three top-level sections: ``scenario`` (required),
    ``materials`` (optional, defaults to the built-in database), and
    ``phantom`` (optional ground truth painted on the inversion grid).
    """
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if path.exists():
            text = path.read_text()
        elif str(source).lstrip().startswith("{"):
            text = str(source)
        else:
            raise ConfigError(f"config file not found: {source}")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - {"scenario", "materials", "phantom", "experiment"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    if "scenario" not in doc:
        raise ConfigError("config requires a 'scenario' section")

    scenario = _parse_scenario(doc["scenario"])
    materials = _parse_materials(doc.get("materials"))
    phantom = _parse_phantom(doc.get("phantom"), scenario.grid(), materials)
    phantom_material = None
    if isinstance(doc.get("phantom"), dict) and isinstance(doc["phantom"].get("material"), str):
        phantom_material = doc["phantom"]["material"]
    experiment = doc.get("experiment")
    if experiment is not None and not isinstance(experiment, dict):
        raise ConfigError("experiment section must be an object")
    return SceneDescription(
        scenario=scenario,
        materials=materials,
        phantom=phantom,
        phantom_material=phantom_material,
        experiment=experiment,
    )
