"""Link-level Monte-Carlo characterization.

Produces BLER-vs-SNR curves per (alpha, layer, channel kind) and extracts
the 1%-BLER SNR thresholds. The subgrouping threshold used by the scheduler
is the (alpha=0.1, LP) point on the flat-Rayleigh curve. Blocks are uncoded:
a block of `block_bits` bits is in error for a layer if any bit of that
layer is wrong; a pluggable coder can replace this seam later.

Curves are cached in a versioned plain-text table keyed by a config hash
and protected by a checksum.
"""
import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from lhsim.hqam import HP_BITS_OF_INDEX, LP_BITS_OF_INDEX, geometry_from_alpha
from lhsim.kernels import demap_indices

LAYERS = ("HP", "LP")
CHANNEL_KINDS = ("awgn", "rayleigh_flat")
CACHE_VERSION = 1

_LAYER_CODE = {"HP": 0, "LP": 1}
_KIND_CODE = {"awgn": 0, "rayleigh_flat": 1}


class CacheError(RuntimeError):
    """Curve cache missing, corrupted, or built from a different config."""


@dataclass(frozen=True, eq=False)
class LinkCurve:
    alpha: float
    layer: str
    channel_kind: str
    snr_db: np.ndarray
    bler: np.ndarray
    blocks: int
    block_bits: int

    def __post_init__(self):
        if np.any(np.diff(self.snr_db) <= 0):
            raise ValueError("snr grid must be strictly increasing")
        if np.any((self.bler < 0) | (self.bler > 1)):
            raise ValueError("bler values must lie in [0, 1]")


@dataclass(frozen=True)
class ThresholdSet:
    """1%-BLER SNR per (alpha, layer, channel kind), plus the CQI split point."""
    snr_at_target: dict  # (alpha, layer, channel_kind) -> snr dB
    target_bler: float
    cqi_subgroup_threshold: float

    def threshold(self, alpha, layer, channel_kind="awgn"):
        return self.snr_at_target[(round(float(alpha), 3), layer, channel_kind)]


@dataclass(frozen=True)
class LinkcharConfig:
    alphas: tuple = (0.0, 0.1, 0.3, 0.5)
    snr_start_db: float = 0.0
    snr_stop_db: float = 62.0
    snr_step_db: float = 2.0
    blocks_per_point: int = 4000
    block_bits: int = 256
    target_bler: float = 0.01
    seed: int = 1

    def snr_grid(self):
        n = int(round((self.snr_stop_db - self.snr_start_db) / self.snr_step_db)) + 1
        return self.snr_start_db + self.snr_step_db * np.arange(n)

    def config_hash(self) -> str:
        blob = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _point_rng(seed, alpha, layer, channel_kind, point_index):
    key = [
        int(seed),
        int(round(alpha * 1000)),
        _LAYER_CODE[layer],
        _KIND_CODE[channel_kind],
        int(point_index),
    ]
    return np.random.default_rng(np.random.SeedSequence(key))


def simulate_bler_curve(alpha, layer, channel_kind, snr_grid_db, blocks_per_point,
                        block_bits, seed) -> LinkCurve:
    """Monte-Carlo BLER curve for one (alpha, layer, channel kind).

    Each block carries block_bits bits, 4 per symbol (2 HP + 2 LP). The
    channel is AWGN (h = 1) or per-symbol i.i.d. flat Rayleigh with perfect
    CSI at the ML demapper. Per-point RNG streams are derived from
    (seed, alpha, layer, kind, point index), so results do not depend on
    evaluation order.
    """
    snr_grid_db = np.asarray(snr_grid_db, dtype=float)
    if snr_grid_db.size == 0:
        raise ValueError("snr grid is empty")
    if blocks_per_point < 100:
        raise ValueError("need at least 100 blocks per SNR point")
    if block_bits < 2:
        raise ValueError("block_bits must be >= 2")
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}")
    if channel_kind not in CHANNEL_KINDS:
        raise ValueError(f"unknown channel kind {channel_kind!r}")

    geom = geometry_from_alpha(alpha)
    layer_bits = HP_BITS_OF_INDEX if layer == "HP" else LP_BITS_OF_INDEX
    syms_per_block = max(1, -(-block_bits // 4))  # ceil
    bler = np.empty_like(snr_grid_db)
    for p, snr_db in enumerate(snr_grid_db):
        rng = _point_rng(seed, alpha, layer, channel_kind, p)
        n0 = 10.0 ** (-snr_db / 10.0)
        n = blocks_per_point * syms_per_block
        tx = rng.integers(0, 16, n)
        noise = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.sqrt(n0 / 2)
        if channel_kind == "rayleigh_flat":
            h = (rng.normal(size=n) + 1j * rng.normal(size=n)) / np.sqrt(2)
            rx_eq = geom.points[tx] + noise / h
        else:
            rx_eq = geom.points[tx] + noise
        idx = demap_indices(np.ascontiguousarray(rx_eq), geom.points)
        sym_err = layer_bits[idx] != layer_bits[tx]
        blk_err = sym_err.reshape(blocks_per_point, syms_per_block).any(axis=1)
        bler[p] = blk_err.mean()
    return LinkCurve(alpha=float(alpha), layer=layer, channel_kind=channel_kind,
                     snr_db=snr_grid_db, bler=bler,
                     blocks=blocks_per_point, block_bits=block_bits)


def isotonic_decreasing(y):
    """Pool-adjacent-violators fit, constrained non-increasing."""
    y = np.asarray(y, dtype=float)
    vals = list(y)
    wts = [1.0] * len(vals)
    i = 0
    while i < len(vals) - 1:
        if vals[i] < vals[i + 1]:  # violation of non-increasing order
            merged = (vals[i] * wts[i] + vals[i + 1] * wts[i + 1]) / (wts[i] + wts[i + 1])
            vals[i] = merged
            wts[i] += wts[i + 1]
            del vals[i + 1], wts[i + 1]
            if i > 0:
                i -= 1
        else:
            i += 1
    return np.repeat(vals, np.asarray(wts, dtype=int))


def threshold_at_target(curve: LinkCurve, target_bler: float) -> float:
    """SNR achieving the target BLER, by log-domain interpolation.

    The raw curve is isotonically smoothed first; interpolation is linear in
    snr vs log(bler) between the bracketing samples.
    """
    smooth = isotonic_decreasing(curve.bler)
    floor = 0.5 / curve.blocks  # half a block: below MC resolution
    smooth = np.clip(smooth, floor, 1.0)
    if not smooth.max() >= target_bler >= smooth.min():
        raise ValueError(
            f"target {target_bler} outside achievable bler range "
            f"[{smooth.min():.3g}, {smooth.max():.3g}] for alpha={curve.alpha} "
            f"{curve.layer} {curve.channel_kind}"
        )
    # exact hit on a sample wins
    hits = np.nonzero(smooth == target_bler)[0]
    if hits.size:
        return float(curve.snr_db[hits[0]])
    above = np.nonzero(smooth > target_bler)[0]
    i = above[-1]
    lo, hi = np.log(smooth[i]), np.log(smooth[i + 1])
    t = (np.log(target_bler) - lo) / (hi - lo)
    return float(curve.snr_db[i] + t * (curve.snr_db[i + 1] - curve.snr_db[i]))


def _curve_combos(alphas):
    for alpha in alphas:
        for layer in LAYERS:
            if alpha == 0.0 and layer == "LP":
                continue  # QPSK mode carries no LP stream
            for kind in CHANNEL_KINDS:
                yield alpha, layer, kind


def build_curves(config: LinkcharConfig):
    """All curves for the configured alpha grid, both layers, both channels."""
    grid = config.snr_grid()
    curves = {}
    for alpha, layer, kind in _curve_combos(config.alphas):
        curves[(round(alpha, 3), layer, kind)] = simulate_bler_curve(
            alpha, layer, kind, grid, config.blocks_per_point,
            config.block_bits, config.seed,
        )
    return curves


def thresholds_from_curves(curves, target_bler) -> ThresholdSet:
    snrs = {key: threshold_at_target(c, target_bler) for key, c in curves.items()}
    return ThresholdSet(
        snr_at_target=snrs,
        target_bler=target_bler,
        cqi_subgroup_threshold=snrs[(0.1, "LP", "rayleigh_flat")],
    )


def write_cache(path, config: LinkcharConfig, curves):
    lines = []
    for (alpha, layer, kind), c in sorted(curves.items()):
        for snr, bler in zip(c.snr_db, c.bler):
            lines.append(
                f"{alpha:.3f} {layer} {kind} {snr:.6f} {bler:.10f} "
                f"{c.blocks} {c.block_bits}"
            )
    body = "\n".join(lines)
    checksum = hashlib.sha256(body.encode()).hexdigest()[:16]
    with open(path, "w") as f:
        f.write(f"# lhsim-curves v{CACHE_VERSION}\n")
        f.write(f"# config_hash={config.config_hash()}\n")
        f.write(f"# checksum={checksum}\n")
        f.write("# alpha layer channel_kind snr_db bler blocks block_bits\n")
        f.write(body + "\n")


def read_cache(path, config: LinkcharConfig = None):
    """Load curves; raises CacheError on corruption or config mismatch."""
    try:
        with open(path) as f:
            raw = f.read()
    except OSError as exc:
        raise CacheError(f"cannot read curve cache {path}: {exc}") from exc
    lines = raw.splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    if not header or not header[0].startswith(f"# lhsim-curves v{CACHE_VERSION}"):
        raise CacheError(f"{path}: unrecognized cache version")
    meta = {}
    for ln in header[1:]:
        if "=" in ln:
            k, v = ln[1:].strip().split("=", 1)
            meta[k] = v
    data_lines = [ln for ln in lines if ln and not ln.startswith("#")]
    body = "\n".join(data_lines)
    checksum = hashlib.sha256(body.encode()).hexdigest()[:16]
    if meta.get("checksum") != checksum:
        raise CacheError(f"{path}: checksum mismatch, cache is corrupted")
    if config is not None and meta.get("config_hash") != config.config_hash():
        raise CacheError(f"{path}: cache was built from a different config")
    rows = {}
    for ln in data_lines:
        alpha_s, layer, kind, snr_s, bler_s, blocks_s, bits_s = ln.split()
        key = (round(float(alpha_s), 3), layer, kind)
        rows.setdefault(key, []).append(
            (float(snr_s), float(bler_s), int(blocks_s), int(bits_s))
        )
    curves = {}
    for key, pts in rows.items():
        snr = np.array([p[0] for p in pts])
        bler = np.array([p[1] for p in pts])
        curves[key] = LinkCurve(
            alpha=key[0], layer=key[1], channel_kind=key[2],
            snr_db=snr, bler=bler, blocks=pts[0][2], block_bits=pts[0][3],
        )
    return curves


def build_threshold_set(config: LinkcharConfig, cache_path=None,
                        force=False) -> ThresholdSet:
    """Thresholds for the configured grid, using the cache when it matches."""
    import os

    curves = None
    if cache_path is not None and not force and os.path.exists(cache_path):
        try:
            curves = read_cache(cache_path, config)
        except CacheError as exc:
            if "different config" in str(exc):
                curves = None  # stale cache: rebuild below
            else:
                raise  # corruption is surfaced, never silently recomputed
    if curves is None:
        curves = build_curves(config)
        if cache_path is not None:
            write_cache(cache_path, config, curves)
    return thresholds_from_curves(curves, config.target_bler)
