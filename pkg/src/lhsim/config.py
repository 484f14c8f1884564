"""Flat key=value run configuration with layered resolution.

Resolution order is defaults <- config file <- explicit overrides (CLI
flags). Keys are namespaced (``sys.``, ``channel.``, ``deploy.``,
``sched.``, ``linkchar.``, ``engine.``, ``run.``); unknown keys and type
mismatches are rejected by name. The defaults are the standard evaluation
parameter set (10 MHz / 2120 MHz / 1024 FFT / 604 used subcarriers /
15 kHz spacing / 2000 m ISD / 44 dBm / 8 dBi / -174 dBm/Hz / NF 6 dB /
1 ms TTI / 1% BLER target / audience-count threshold 10).
"""
import hashlib
from dataclasses import dataclass

from lhsim.channel import PATHLOSS_PRESETS, ChannelParams
from lhsim.deployment import RequestDistribution, build_grid
from lhsim.linkchar import LinkcharConfig


class ConfigError(ValueError):
    """A named configuration key failed parsing or validation."""


DEFAULTS = {
    # system numerology
    "sys.bandwidth_mhz": 10.0,
    "sys.fc_mhz": 2120.0,
    "sys.fft_size": 1024,
    "sys.used_subcarriers": 604,
    "sys.subcarrier_spacing_hz": 15000.0,
    "sys.tti_ms": 1.0,
    "sys.isd_m": 2000.0,
    "sys.tx_power_dbm": 44.0,
    "sys.gnb_gain_dbi": 8.0,
    "sys.ue_gain_dbi": 0.0,
    "sys.noise_density_dbm_hz": -174.0,
    "sys.noise_figure_db": 6.0,
    "sys.target_bler": 0.01,
    # propagation
    "channel.pathloss_preset": "uma_urllc_a",
    "channel.shadow_sigma_los_db": 8.0,
    "channel.shadow_sigma_nlos_db": 12.0,
    "channel.shadow_corr_distance_m": 50.0,
    "channel.shadow_site_corr": 0.7,
    "channel.max_doppler_hz": 423.0,
    "channel.n_scatterers": 16,
    # user drop
    "deploy.users_per_cell": 30,
    "deploy.drop_radius_fraction": 1.0,
    "deploy.request_kind": "uniform",
    "deploy.zipf_s": 1.0,
    "deploy.request_weights": "",
    # scheduling
    "sched.total_count_threshold": 10,
    "sched.hcg_fraction_threshold": 0.5,
    "sched.mr_alpha": 0.3,
    # link characterization
    "linkchar.block_bits": 4,
    "linkchar.blocks_per_point": 4000,
    "linkchar.snr_start_db": 0.0,
    "linkchar.snr_stop_db": 62.0,
    "linkchar.snr_step_db": 2.0,
    "linkchar.seed": 1,
    # engine fidelity
    "engine.n_tti": 200,
    "engine.n_sym": 500,
    "engine.alpha_override": "",
    "engine.ring_active": True,
    "engine.ring_power_offset_db": -36.0,
    "engine.hlsa_power_offset_db": -3.0,
    "engine.coverage_offset_db": 11.0,
    # orchestration
    "run.scheme": "lhs",
    "run.iterations": 10,
    "run.seed": 1,
    "run.out": "results",
    "run.cache": "linkchar_cache.txt",
}

_POSITIVE = {
    "sys.bandwidth_mhz", "sys.fc_mhz", "sys.fft_size", "sys.used_subcarriers",
    "sys.subcarrier_spacing_hz", "sys.tti_ms", "sys.isd_m",
    "channel.shadow_corr_distance_m", "channel.n_scatterers",
    "deploy.users_per_cell", "deploy.zipf_s", "sched.total_count_threshold",
    "linkchar.block_bits", "linkchar.blocks_per_point", "linkchar.snr_step_db",
    "engine.n_tti", "engine.n_sym", "run.iterations",
}
_NONNEGATIVE = {
    "sys.gnb_gain_dbi", "sys.ue_gain_dbi", "sys.noise_figure_db",
    "channel.shadow_sigma_los_db", "channel.shadow_sigma_nlos_db",
    "channel.max_doppler_hz", "linkchar.seed", "run.seed",
}
_UNIT_FRACTION = {  # in (0, 1]
    "sys.target_bler", "deploy.drop_radius_fraction",
    "sched.hcg_fraction_threshold",
}


def _coerce(key, raw):
    """Parse a raw string (or pass through a native value) to the key's type."""
    default = DEFAULTS[key]
    if not isinstance(raw, str):
        if isinstance(default, bool) and not isinstance(raw, bool):
            raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(raw, bool) or raw != int(raw):
                raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}")
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    text = raw.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected an integer, got {text!r}")
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected a number, got {text!r}")
    return text


def _parse_alpha_list(text, key):
    if not text:
        return None
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers")
    return vals


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Resolved configuration: a validated, immutable key -> value mapping."""
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def config_hash(self) -> str:
        blob = "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- factories for the domain modules ---------------------------------

    def deployment(self):
        return build_grid(isd=self["sys.isd_m"])

    def channel_params(self) -> ChannelParams:
        v = self.values
        return ChannelParams(
            fc_ghz=v["sys.fc_mhz"] / 1000.0,
            tx_power_dbm=v["sys.tx_power_dbm"],
            gnb_gain_dbi=v["sys.gnb_gain_dbi"],
            ue_gain_dbi=v["sys.ue_gain_dbi"],
            noise_figure_db=v["sys.noise_figure_db"],
            noise_density_dbm_hz=v["sys.noise_density_dbm_hz"],
            shadow_sigma_los_db=v["channel.shadow_sigma_los_db"],
            shadow_sigma_nlos_db=v["channel.shadow_sigma_nlos_db"],
            shadow_corr_distance_m=v["channel.shadow_corr_distance_m"],
            shadow_site_corr=v["channel.shadow_site_corr"],
            max_doppler_hz=v["channel.max_doppler_hz"],
            tti_s=v["sys.tti_ms"] * 1e-3,
            subcarrier_spacing_hz=v["sys.subcarrier_spacing_hz"],
            pathloss_preset=v["channel.pathloss_preset"],
            n_scatterers=v["channel.n_scatterers"],
        )

    def linkchar_config(self) -> LinkcharConfig:
        v = self.values
        return LinkcharConfig(
            snr_start_db=v["linkchar.snr_start_db"],
            snr_stop_db=v["linkchar.snr_stop_db"],
            snr_step_db=v["linkchar.snr_step_db"],
            blocks_per_point=v["linkchar.blocks_per_point"],
            block_bits=v["linkchar.block_bits"],
            target_bler=v["sys.target_bler"],
            seed=v["linkchar.seed"],
        )

    def request_distribution(self) -> RequestDistribution:
        kind = self["deploy.request_kind"]
        if kind == "explicit":
            text = self["deploy.request_weights"]
            if not text:
                raise ConfigError(
                    "key 'deploy.request_weights': required when "
                    "deploy.request_kind=explicit")
            weights = [float(x) for x in text.split(",")]
            return RequestDistribution(weights=weights)
        return RequestDistribution(kind=kind, zipf_s=self["deploy.zipf_s"])

    def alpha_override(self):
        return _parse_alpha_list(self["engine.alpha_override"],
                                 "engine.alpha_override")

    def metadata_lines(self, **extra):
        """`#`-prefixed header echoing the resolved configuration."""
        lines = [f"# config_hash={self.config_hash()}"]
        for k, v in extra.items():
            lines.append(f"# {k}={v}")
        for k in sorted(self.values):
            lines.append(f"# {k}={self.values[k]}")
        return lines


def _validate(values):
    for key in _POSITIVE:
        if not values[key] > 0:
            raise ConfigError(f"key {key!r}: must be positive, got {values[key]}")
    for key in _NONNEGATIVE:
        if values[key] < 0:
            raise ConfigError(f"key {key!r}: must be nonnegative, got {values[key]}")
    for key in _UNIT_FRACTION:
        if not 0 < values[key] <= 1:
            raise ConfigError(f"key {key!r}: must be in (0, 1], got {values[key]}")
    if values["run.scheme"] not in ("lhs", "scptm"):
        raise ConfigError("key 'run.scheme': must be 'lhs' or 'scptm'")
    if values["deploy.request_kind"] not in ("uniform", "zipf", "explicit"):
        raise ConfigError(
            "key 'deploy.request_kind': must be uniform, zipf, or explicit")
    if values["channel.pathloss_preset"] not in PATHLOSS_PRESETS:
        raise ConfigError(
            f"key 'channel.pathloss_preset': must be one of {PATHLOSS_PRESETS}")
    if not 0 <= values["channel.shadow_site_corr"] < 1:
        raise ConfigError("key 'channel.shadow_site_corr': must be in [0, 1)")
    for key in ("engine.ring_power_offset_db", "engine.hlsa_power_offset_db"):
        if values[key] > 0:
            raise ConfigError(f"key {key!r}: power offsets must be <= 0 dB")
    if not 0 <= values["engine.coverage_offset_db"] <= 40:
        raise ConfigError(
            "key 'engine.coverage_offset_db': must be in [0, 40] dB")
    if values["linkchar.snr_stop_db"] <= values["linkchar.snr_start_db"]:
        raise ConfigError("key 'linkchar.snr_stop_db': must exceed snr_start_db")
    if values["sched.mr_alpha"] not in (0.1, 0.3, 0.5):
        raise ConfigError("key 'sched.mr_alpha': must be one of 0.1, 0.3, 0.5")
    override = _parse_alpha_list(values["engine.alpha_override"],
                                 "engine.alpha_override")
    if override is not None:
        if len(override) != 3 or any(not 0 < a <= 0.5 for a in override):
            raise ConfigError(
                "key 'engine.alpha_override': need 3 alphas in (0, 0.5]")


def read_config_file(path):
    """Parse one `key=value` file; `#` starts a comment, blank lines ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, raw = text.partition("=")
            out[key.strip()] = raw.strip()
    return out


def parse_config(path=None, overrides=None) -> RunConfig:
    """Layered resolution: defaults <- file at `path` <- `overrides` dict."""
    values = dict(DEFAULTS)
    for layer in (read_config_file(path) if path else {}, overrides or {}):
        for key, raw in layer.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = _coerce(key, raw)
    _validate(values)
    return RunConfig(values=values)
