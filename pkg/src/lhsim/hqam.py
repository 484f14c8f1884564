"""Hierarchical 16QAM: geometry, mapping, and maximum-likelihood demapping.

The constellation is four Gray-labeled "clouds" (one per quadrant, selected
by the two high-priority bits) of four "satellite" points each (selected by
the two low-priority bits). The shape is controlled by the ratio
alpha = satellite offset / cloud offset, with alpha = 0.5 giving uniform
Gray-coded 16QAM and alpha = 0 collapsing to plain QPSK.

Bit order is (hp_I, hp_Q, lp_I, lp_Q); point index = that 4-bit word.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from lhsim.kernels import demap_indices

ALPHA_VALUES = (0.0, 0.1, 0.3, 0.5)

# Bit tables indexed by point index (hp_I hp_Q lp_I lp_Q, MSB first).
_IDX = np.arange(16)
HP_BITS_OF_INDEX = _IDX >> 2          # 2-bit hp word per point index
LP_BITS_OF_INDEX = _IDX & 0b11        # 2-bit lp word per point index


def validate_alpha(alpha: float) -> float:
    """Check 0 <= alpha <= 0.5 (0 is the QPSK degenerate mode)."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must be in [0, 0.5], got {alpha}")
    return alpha


@dataclass(frozen=True)
class LayeredBits:
    """One modulation symbol's worth of bits: 2 high-priority + 2 low-priority."""
    hp: int
    lp: int

    def __post_init__(self):
        if not (0 <= self.hp <= 3 and 0 <= self.lp <= 3):
            raise ValueError(f"hp and lp must each be 2-bit values, got {self}")

    @property
    def index(self) -> int:
        return (self.hp << 2) | self.lp

    @classmethod
    def from_index(cls, idx: int) -> "LayeredBits":
        return cls(hp=(idx >> 2) & 0b11, lp=idx & 0b11)


@dataclass(frozen=True, eq=False)
class HqamGeometry:
    """Unit-energy hierarchical 16QAM point set for one alpha."""
    alpha: float
    cloud_offset: float
    satellite_offset: float
    points: np.ndarray  # 16 complex points indexed by LayeredBits.index


def _axis_coord(hp_bit, lp_bit, c, s):
    # hp bit picks the sign, lp bit picks outer (0) vs inner (1) satellite.
    sign = 1.0 - 2.0 * hp_bit
    return sign * np.where(lp_bit == 0, c + s, c - s)


def geometry_from_alpha(alpha: float) -> HqamGeometry:
    """Build the unit-average-energy constellation for a given alpha.

    Normalization: 2 c^2 (1 + alpha^2) = 1 with s = alpha * c, so the mean
    power over the 16 equiprobable points is exactly 1. alpha = 0 yields the
    QPSK set {(+-1 +-1j)/sqrt(2)} with the lp bits mapping to the same point.
    """
    alpha = validate_alpha(alpha)
    c = 1.0 / np.sqrt(2.0 * (1.0 + alpha * alpha))
    s = alpha * c
    hp_i = (HP_BITS_OF_INDEX >> 1) & 1
    hp_q = HP_BITS_OF_INDEX & 1
    lp_i = (LP_BITS_OF_INDEX >> 1) & 1
    lp_q = LP_BITS_OF_INDEX & 1
    pts = _axis_coord(hp_i, lp_i, c, s) + 1j * _axis_coord(hp_q, lp_q, c, s)
    pts = np.ascontiguousarray(pts, dtype=np.complex128)
    pts.setflags(write=False)
    return HqamGeometry(alpha=alpha, cloud_offset=c, satellite_offset=s, points=pts)


def map_symbol(bits: LayeredBits, geom: HqamGeometry) -> complex:
    """Constellation point for a bit pattern."""
    return complex(geom.points[bits.index])


def demap_ml(received: complex, geom: HqamGeometry, h: complex) -> LayeredBits:
    """Hard ML decision assuming perfect channel knowledge.

    Picks the point minimizing |received - h * point|^2; ties break to the
    lowest point index.
    """
    if h == 0:
        raise ValueError("channel gain h must be nonzero")
    idx = demap_indices(
        np.array([received], dtype=np.complex128),
        np.ascontiguousarray(h * geom.points),
    )[0]
    return LayeredBits.from_index(int(idx))


@dataclass(frozen=True, eq=False)
class CompositeConstellation:
    """Superposition of up to 3 co-transmitting constellations.

    Every transmitter sends the same LayeredBits, so the receiver sees 16
    composite hypotheses: point(b) = sum_k h_k * point_k(b).
    """
    geometries: tuple
    gains: tuple

    def __post_init__(self):
        if not 1 <= len(self.geometries) <= 3:
            raise ValueError("composite supports 1 to 3 transmitters")
        if len(self.gains) != len(self.geometries):
            raise ValueError("one channel gain per transmitter required")

    @property
    def points(self) -> np.ndarray:
        pts = np.zeros(16, dtype=np.complex128)
        for geom, h in zip(self.geometries, self.gains):
            pts += complex(h) * geom.points
        return pts


def composite_points(geometries, gains) -> np.ndarray:
    """16 composite hypotheses for arbitrary gain/alpha combinations."""
    return CompositeConstellation(tuple(geometries), tuple(gains)).points


def demap_composite(received: complex, comp: CompositeConstellation) -> LayeredBits:
    """ML decision over the 16 composite hypotheses."""
    if all(h == 0 for h in comp.gains):
        raise ValueError("all channel gains are zero")
    idx = demap_indices(
        np.array([received], dtype=np.complex128),
        np.ascontiguousarray(comp.points),
    )[0]
    return LayeredBits.from_index(int(idx))


def _qfunc(x):
    return 0.5 * erfc(x / np.sqrt(2.0))


def analytic_reference_ser(modulation: str, esn0_db: float) -> float:
    """Closed-form AWGN symbol error rate, used as a Monte-Carlo oracle.

    qpsk: SER = 1 - (1 - Q(sqrt(Es/N0)))^2
    uniform16qam: per-axis P = 1.5 Q(sqrt(0.2 Es/N0)), SER = 1 - (1 - P)^2
    """
    if not np.isfinite(esn0_db):
        raise ValueError("esn0_db must be finite")
    g = 10.0 ** (esn0_db / 10.0)
    if modulation == "qpsk":
        p_axis = _qfunc(np.sqrt(g))
    elif modulation == "uniform16qam":
        p_axis = 1.5 * _qfunc(np.sqrt(0.2 * g))
    else:
        raise ValueError(f"unknown modulation {modulation!r}")
    return float(1.0 - (1.0 - p_axis) ** 2)
