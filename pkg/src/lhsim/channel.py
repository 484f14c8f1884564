"""Channel modeling: UMa path loss, correlated lognormal shadowing,
Doppler-correlated Ped-B frequency-selective fading, and per-sub-band SINR.

Large-scale terms are fixed per run; the 6-tap fading evolves per TTI with
Jakes (sum-of-sinusoids) Doppler correlation. Sub-band gains average the
tap frequency response over each sub-band's 67 subcarriers.
"""
import math
from dataclasses import dataclass

import numpy as np

from lhsim.deployment import N_SUBBANDS

# ITU Pedestrian-B power delay profile (6 taps), powers normalized to 1.
PEDB_DELAYS_NS = np.array([0.0, 200.0, 800.0, 1200.0, 2300.0, 3700.0])
PEDB_POWERS_DB = np.array([0.0, -0.9, -4.9, -8.0, -7.8, -23.9])

SUBCARRIERS_PER_SUBBAND = 67
N_DATA_SUBCARRIERS = 603  # 604 used including DC

_H_BS = 25.0   # gNB antenna height, m
_H_UT = 1.5    # UE antenna height, m
_C = 299792458.0

PATHLOSS_PRESETS = ("uma_urllc_a", "uma_mmtc_a")


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class ChannelParams:
    fc_ghz: float = 2.12
    tx_power_dbm: float = 44.0
    gnb_gain_dbi: float = 8.0
    ue_gain_dbi: float = 0.0
    noise_figure_db: float = 6.0
    noise_density_dbm_hz: float = -174.0
    penetration_loss_db: float = 0.0
    shadow_sigma_los_db: float = 8.0
    shadow_sigma_nlos_db: float = 12.0
    shadow_corr_distance_m: float = 50.0
    shadow_site_corr: float = 0.5
    max_doppler_hz: float = 423.0
    tti_s: float = 1e-3
    subcarrier_spacing_hz: float = 15e3
    pathloss_preset: str = "uma_urllc_a"
    n_scatterers: int = 16
    shadow_n_harmonics: int = 256

    def noise_dbm_per_subband(self) -> float:
        bw = SUBCARRIERS_PER_SUBBAND * self.subcarrier_spacing_hz
        return self.noise_density_dbm_hz + 10 * math.log10(bw) + self.noise_figure_db


def path_loss(distance_m, fc_ghz, los, preset="uma_urllc_a"):
    """Urban-macro path loss in dB (3GPP-style UMa formulas).

    Both shipped presets use identical coefficients; the preset knob exists
    because evaluation configs differ only in deployment assumptions, not in
    the UMa formula itself.
    """
    if preset not in PATHLOSS_PRESETS:
        raise ValueError(f"unknown path loss preset {preset!r}")
    d2d = np.asarray(distance_m, dtype=float)
    if np.any(d2d < 10.0):
        raise ValueError("distance below 10 m is outside model validity")
    d3d = d2d  # flat evaluation: antenna heights enter only via the breakpoint
    fc_hz = fc_ghz * 1e9
    d_bp = 4.0 * (_H_BS - 1.0) * (_H_UT - 1.0) * fc_hz / _C
    pl_los_near = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
    pl_los_far = (28.0 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
                  - 9.0 * np.log10(d_bp ** 2 + (_H_BS - _H_UT) ** 2))
    pl_los = np.where(d2d <= d_bp, pl_los_near, pl_los_far)
    if np.ndim(los) == 0 and los:
        return pl_los if pl_los.ndim else float(pl_los)
    pl_nlos = 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
    pl = np.where(los, pl_los, np.maximum(pl_los, pl_nlos))
    return pl if pl.ndim else float(pl)


def los_probability(d2d_m):
    """UMa line-of-sight probability for UE height <= 13 m."""
    d = np.asarray(d2d_m, dtype=float)
    p = np.where(d <= 18.0, 1.0,
                 18.0 / np.maximum(d, 18.0)
                 + np.exp(-d / 63.0) * (1.0 - 18.0 / np.maximum(d, 18.0)))
    return p if p.ndim else float(p)


class ShadowingField:
    """Per-site lognormal shadowing with exponential spatial autocorrelation.

    Random-Fourier-feature construction: a fixed set of seeded harmonics per
    site yields a deterministic, point-wise evaluable Gaussian field whose
    covariance approximates exp(-distance / corr_distance). Unit variance;
    callers scale by the LOS/NLOS sigma.
    """

    def __init__(self, seed, corr_distance_m=50.0, n_harmonics=256,
                 site_corr=0.5):
        if corr_distance_m <= 0:
            raise ValueError("correlation distance must be positive")
        if not 0 <= site_corr < 1:
            raise ValueError("inter-site correlation must be in [0, 1)")
        self.seed = int(seed)
        self.corr = float(corr_distance_m)
        self.n = int(n_harmonics)
        self.site_corr = float(site_corr)
        self._cache = {}

    def _harmonics(self, site_id):
        if site_id not in self._cache:
            # site_id -1 is the cross-site common component
            rng = np.random.default_rng(
                np.random.SeedSequence([self.seed, 0x5A0D, int(site_id) + 1]))
            u = rng.random(self.n)
            # radial wavenumber from the 2D spectral density of exp(-d/corr)
            w = np.sqrt(1.0 - (1.0 - u) ** 2) / (self.corr * (1.0 - u))
            theta = 2 * np.pi * rng.random(self.n)
            phase = 2 * np.pi * rng.random(self.n)
            wvec = np.stack([w * np.cos(theta), w * np.sin(theta)], axis=1)
            self._cache[site_id] = (wvec, phase)
        return self._cache[site_id]

    def _field(self, positions, site_id):
        wvec, phase = self._harmonics(site_id)
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        arg = pos @ wvec.T + phase
        return np.sqrt(2.0 / self.n) * np.cos(arg).sum(axis=1)

    def standard(self, positions, site_id):
        """Unit-variance field values at (n, 2) positions for one site.

        Inter-site correlation `site_corr` via a shared common component:
        the same UE location sees partially correlated shadowing toward
        different sites.
        """
        vals = self._field(positions, site_id)
        if self.site_corr > 0:
            common = self._field(positions, -1)
            vals = (np.sqrt(self.site_corr) * common
                    + np.sqrt(1.0 - self.site_corr) * vals)
        return vals if np.ndim(positions) > 1 else float(vals[0])

    def sample(self, position, site_id, sigma_db):
        return sigma_db * self.standard(position, site_id)


class JakesFading:
    """Ped-B 6-tap fading with Jakes Doppler autocorrelation.

    Clarke sum-of-sinusoids per tap: g(t) = sqrt(p/M) sum_m exp(j(w_m t + phi_m))
    with w_m = 2 pi fd cos(angle_m). Deterministic random access in the TTI
    index per (seed, link key, tap).
    """

    def __init__(self, seed, fd_hz=423.0, tti_s=1e-3, n_scatterers=16):
        if fd_hz < 0:
            raise ValueError("Doppler frequency must be nonnegative")
        self.seed = int(seed)
        self.fd = float(fd_hz)
        self.tti_s = float(tti_s)
        self.m = int(n_scatterers)
        self.tap_powers = db_to_linear(PEDB_POWERS_DB)
        self.tap_powers = self.tap_powers / self.tap_powers.sum()
        self.n_taps = len(self.tap_powers)
        self._omega = None  # (L, taps, M) Doppler radian frequencies
        self._amp = None    # (L, taps, M) complex amplitudes

    def prepare_links(self, link_keys):
        """Seed the sinusoid banks for a list of integer link keys."""
        L = len(link_keys)
        omega = np.empty((L, self.n_taps, self.m))
        amp = np.empty((L, self.n_taps, self.m), dtype=np.complex128)
        scale = np.sqrt(self.tap_powers / self.m)
        for i, key in enumerate(link_keys):
            rng = np.random.default_rng(
                np.random.SeedSequence([self.seed, 0xFAD, int(key)]))
            angles = 2 * np.pi * rng.random((self.n_taps, self.m))
            phases = 2 * np.pi * rng.random((self.n_taps, self.m))
            omega[i] = 2 * np.pi * self.fd * np.cos(angles)
            amp[i] = scale[:, None] * np.exp(1j * phases)
        self._omega = omega
        self._amp = amp

    def taps_at(self, tti):
        """Complex tap gains, shape (links, 6), at TTI index `tti`."""
        if self._omega is None:
            raise RuntimeError("call prepare_links first")
        t = tti * self.tti_s
        return (self._amp * np.exp(1j * self._omega * t)).sum(axis=2)

    def taps_stream(self, n_tti, start=0):
        """Yield taps for TTIs start..start+n_tti-1 via phasor recursion.

        Equivalent to `taps_at` up to floating-point rounding but avoids one
        full complex-exponential evaluation per TTI.
        """
        if self._omega is None:
            raise RuntimeError("call prepare_links first")
        phasor = self._amp * np.exp(1j * self._omega * (start * self.tti_s))
        step = np.exp(1j * self._omega * self.tti_s)
        for _ in range(n_tti):
            yield phasor.sum(axis=2)
            phasor *= step


class SubbandMapper:
    """Tap-domain to sub-band-domain conversion for the 9x67 subcarrier plan."""

    def __init__(self, subcarrier_spacing_hz=15e3):
        delays = PEDB_DELAYS_NS * 1e-9
        offsets = (np.arange(N_DATA_SUBCARRIERS) - (N_DATA_SUBCARRIERS - 1) / 2)
        freqs = offsets * subcarrier_spacing_hz
        self.center_response = np.empty((N_SUBBANDS, len(delays)), dtype=np.complex128)
        self.quad = np.empty((N_SUBBANDS, len(delays), len(delays)), dtype=np.complex128)
        for s in range(N_SUBBANDS):
            f = freqs[s * SUBCARRIERS_PER_SUBBAND:(s + 1) * SUBCARRIERS_PER_SUBBAND]
            e = np.exp(-2j * np.pi * np.outer(f, delays))  # (67, taps)
            self.center_response[s] = e[len(f) // 2]
            self.quad[s] = e.conj().T @ e / len(f)

    def complex_gain(self, taps):
        """Frequency response at each sub-band center; taps shape (..., 6)."""
        return taps @ self.center_response.T  # (..., 9)

    def power_gain(self, taps):
        """Mean |H(f)|^2 over each sub-band's 67 subcarriers."""
        # G[l, s] = g^H quad_s g
        t = np.atleast_2d(taps)
        g = np.empty((t.shape[0], N_SUBBANDS))
        tc = t.conj()
        for s in range(N_SUBBANDS):
            g[:, s] = ((tc @ self.quad[s]) * t).sum(axis=1).real
        return g if np.ndim(taps) > 1 else g[0]


def subband_gain(taps, subband_id, subcarrier_spacing_hz=15e3):
    """Linear power gain of one sub-band for a single tap vector."""
    if not 1 <= subband_id <= N_SUBBANDS:
        raise ValueError("sub-band id must be in 1..9")
    mapper = SubbandMapper(subcarrier_spacing_hz)
    return float(mapper.power_gain(np.asarray(taps))[subband_id - 1])


@dataclass
class SinrReport:
    """Per-sub-band link quality for one user at one TTI. dB/dBm units."""
    signal_dbm: list        # per sub-band: list of serving powers, or None if idle
    interference_dbm: list  # per sub-band: float or None
    noise_dbm: float
    sinr_db: list           # per sub-band: float or None (idle)

    def is_idle(self, subband):
        return self.sinr_db[subband] is None


class ChannelModel:
    """Bundles large-scale and small-scale state for one user drop.

    All randomness is keyed on (seed, user id, site id[, tti]), so any value
    can be recomputed independently of evaluation order.
    """

    def __init__(self, dep, params: ChannelParams, seed):
        self.dep = dep
        self.params = params
        self.seed = int(seed)
        self.shadow = ShadowingField(seed, params.shadow_corr_distance_m,
                                     params.shadow_n_harmonics,
                                     params.shadow_site_corr)
        self.mapper = SubbandMapper(params.subcarrier_spacing_hz)
        self.noise_dbm = params.noise_dbm_per_subband()
        self.users = None

    # -- large-scale -----------------------------------------------------

    def _los_draw(self, user_id, site_id, d2d):
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, 0x105, int(user_id), int(site_id)]))
        return rng.random() < los_probability(max(d2d, 1e-9))

    def set_users(self, users):
        """Fix the user drop and precompute static link gains.

        Each user's modeled site set is the 9 center cells plus the tier-1/2
        neighbors of its serving cell; farther sites are ignored.
        """
        p = self.params
        self.users = users
        site_pos = self.dep.positions()
        n_u = len(users)
        n_s = len(self.dep.sites)
        self.relevant = []
        for u in users:
            sset = set(self.dep.center_cells)
            sset |= set(self.dep.tier1[u.serving_cell])
            sset |= set(self.dep.tier2[u.serving_cell])
            self.relevant.append(tuple(sorted(sset)))

        self.rx_dbm = np.full((n_u, n_s), -np.inf)
        fading_keys = []
        self.link_index = {}  # (u_idx, site) -> row in fading arrays
        for ui, u in enumerate(users):
            pos = np.array([u.x, u.y])
            for s in self.relevant[ui]:
                d2d = max(float(np.hypot(*(pos - site_pos[s]))), 10.0)
                los = self._los_draw(u.id, s, d2d)
                pl = path_loss(d2d, p.fc_ghz, los, p.pathloss_preset)
                sigma = p.shadow_sigma_los_db if los else p.shadow_sigma_nlos_db
                sh = self.shadow.sample(pos, s, sigma)
                self.rx_dbm[ui, s] = (p.tx_power_dbm + p.gnb_gain_dbi + p.ue_gain_dbi
                                      - pl - sh - p.penetration_loss_db)
                self.link_index[(ui, s)] = len(fading_keys)
                fading_keys.append(u.id * 1000 + s)
        self.rx_lin_mw = db_to_linear(self.rx_dbm)
        self.fading = JakesFading(self.seed, p.max_doppler_hz, p.tti_s,
                                  p.n_scatterers)
        self.fading.prepare_links(fading_keys)
        self._tti_cache = (None, None, None)

    # -- small-scale -----------------------------------------------------

    def _gains_at(self, tti):
        cached_tti, H, G = self._tti_cache
        if cached_tti == tti:
            return H, G
        taps = self.fading.taps_at(tti)
        H = self.mapper.complex_gain(taps)   # (L, 9) complex at centers
        G = self.mapper.power_gain(taps)     # (L, 9) mean power
        self._tti_cache = (tti, H, G)
        return H, G

    def subband_gains(self, tti):
        """Per-link sub-band response at one TTI.

        Returns (H, G): complex center-subcarrier response and mean power
        gain, both shaped (links, 9) and indexed by `link_index` rows.
        """
        return self._gains_at(tti)

    def iter_subband_gains(self, n_tti):
        """Stream (H, G) for TTIs 0..n_tti-1 (phasor-recursion fast path)."""
        for taps in self.fading.taps_stream(n_tti):
            yield self.mapper.complex_gain(taps), self.mapper.power_gain(taps)

    def complex_link_gain(self, user_idx, site, subband, tti):
        """Complex amplitude (sqrt-mW scale) of one link on one sub-band."""
        H, _ = self._gains_at(tti)
        li = self.link_index[(user_idx, site)]
        return np.sqrt(self.rx_lin_mw[user_idx, site]) * H[li, subband]

    def power_link_gain(self, user_idx, site, subband, tti):
        """Received power in linear mW of one link on one sub-band."""
        _, G = self._gains_at(tti)
        li = self.link_index[(user_idx, site)]
        return self.rx_lin_mw[user_idx, site] * G[li, subband]

    def interference_mw(self, user_idx, subband, tti, active_sites,
                        exclude=()):
        """Sum of co-sub-band powers from every modeled non-serving site."""
        total = 0.0
        rel = set(self.relevant[user_idx])
        for s in active_sites:
            if s in exclude or s not in rel:
                continue
            total += self.power_link_gain(user_idx, s, subband, tti)
        return total

    def mean_combined_snr_db(self, user_idx, sites):
        """Fading-averaged combined SNR of one or more co-serving sites."""
        sig = sum(self.rx_lin_mw[user_idx, s] for s in sites)
        return float(linear_to_db(sig) - self.noise_dbm)

    def sinr_report(self, user_idx, tti, active_by_subband,
                    serving_by_subband) -> SinrReport:
        """Assemble the per-sub-band SINR view for one user at one TTI.

        active_by_subband: sub-band -> iterable of transmitting site ids.
        serving_by_subband: sub-band -> iterable of sites serving this user
        (empty or missing sub-band means idle for this user).
        """
        noise_mw = float(db_to_linear(self.noise_dbm))
        signal_dbm, interf_dbm, sinr_db = [], [], []
        for sb in range(N_SUBBANDS):
            serving = tuple(serving_by_subband.get(sb, ()))
            if not serving:
                signal_dbm.append(None)
                interf_dbm.append(None)
                sinr_db.append(None)
                continue
            sig = [self.power_link_gain(user_idx, s, sb, tti) for s in serving]
            interf = self.interference_mw(
                user_idx, sb, tti, active_by_subband.get(sb, ()), exclude=serving)
            sinr = sum(sig) / (interf + noise_mw)
            signal_dbm.append([float(linear_to_db(x)) for x in sig])
            interf_dbm.append(float(linear_to_db(interf)) if interf > 0 else -np.inf)
            sinr_db.append(float(linear_to_db(sinr)))
        return SinrReport(signal_dbm=signal_dbm, interference_dbm=interf_dbm,
                          noise_dbm=self.noise_dbm, sinr_db=sinr_db)
