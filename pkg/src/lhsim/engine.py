"""TTI-driven system simulation.

Per iteration: drop users, subgroup them on fading-averaged combined SNR,
build the schedule, then walk the TTIs evaluating decode success. Two
fidelity modes coexist:

* symbol mode for the LSA-wide macro-diversity transmissions — every TTI
  sends N_sym random symbols through the composite constellation formed by
  the three serving complex gains, with interference-plus-noise as
  Gaussian; a layer counts as decoded in a TTI when its bit errors are 0;
* threshold mode for cell-local (HLSA / baseline) transmissions — a layer
  is decoded in a TTI when the sub-band SINR meets its 1%-BLER threshold.

Either way a layer is *received* for the run when its per-TTI success
rate is at least 1 - target_bler. Metrics aggregate across iterations
into means with 95% confidence half-widths.
"""
import os
from dataclasses import dataclass, field

import numpy as np

from lhsim import scheduler as sch
from lhsim.channel import ChannelModel, db_to_linear
from lhsim.deployment import N_CENTER, drop_users
from lhsim.hqam import HP_BITS_OF_INDEX, LP_BITS_OF_INDEX, geometry_from_alpha
from lhsim.kernels import demap_indices_multi

HD = "HD"
SD = "SD"
OUTAGE = "outage"

QPSK_ALPHA = 0.0  # threshold-table key for plain QPSK transmissions


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecodeOutcome:
    """Per-layer reception for one (user, content)."""
    bl: bool
    el: bool

    @property
    def state(self):
        # an enhancement layer without its base layer is useless: outage
        if self.bl:
            return HD if self.el else SD
        return OUTAGE


def classify(bl_received, el_received) -> str:
    return DecodeOutcome(bool(bl_received), bool(el_received)).state


# ---------------------------------------------------------------------------
# decode primitives
# ---------------------------------------------------------------------------

def evaluate_threshold_mode(sinr_lin, threshold_db, success_rate):
    """Received flag for one layer from a per-TTI linear-SINR series."""
    ok = np.asarray(sinr_lin) >= db_to_linear(threshold_db)
    return bool(ok.mean() >= success_rate)


def evaluate_symbol_mode(gains, alphas, ipn_mw, n_sym, rng, success_rate,
                         block_bits=4, target_bler=0.01) -> DecodeOutcome:
    """Composite-constellation detection over all TTIs of one run.

    gains: (n_tx, T) complex serving amplitudes (sqrt-mW scale).
    ipn_mw: (T,) interference-plus-noise power at the detector.

    Each TTI's symbols split into blocks of `block_bits` layer bits; a block
    fails on any layer-bit error (the link-characterization block model).
    The layer is decoded in a TTI when the block error fraction meets the
    BLER target, and received for the run when at least `success_rate` of
    the TTIs decode — the same operating point the SINR thresholds encode,
    so both fidelity modes agree on flat single-link channels.
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=np.complex128))
    ipn_mw = np.asarray(ipn_mw, dtype=float)
    n_tx, T = gains.shape
    spb = max(1, -(-block_bits // 4))        # symbols per block
    n_blk = max(1, n_sym // spb)
    n_use = n_blk * spb
    pts = np.stack([geometry_from_alpha(a).points for a in alphas[:n_tx]])
    comp = gains.T @ pts                                # (T, 16)
    words = rng.integers(0, 16, size=(T, n_use))
    noise = rng.normal(size=(T, n_use)) + 1j * rng.normal(size=(T, n_use))
    rx = comp[np.arange(T)[:, None], words] + noise * np.sqrt(ipn_mw / 2)[:, None]
    idx = demap_indices_multi(
        rx.ravel(), np.ascontiguousarray(comp),
        np.repeat(np.arange(T), n_use)).reshape(T, n_use)
    hp_err = (HP_BITS_OF_INDEX[idx] != HP_BITS_OF_INDEX[words]).reshape(
        T, n_blk, spb).any(axis=2)
    lp_err = (LP_BITS_OF_INDEX[idx] != LP_BITS_OF_INDEX[words]).reshape(
        T, n_blk, spb).any(axis=2)
    bl_ok = hp_err.mean(axis=1) <= target_bler
    el_ok = lp_err.mean(axis=1) <= target_bler
    return DecodeOutcome(bl=bool(bl_ok.mean() >= success_rate),
                         el=bool(el_ok.mean() >= success_rate))


# ---------------------------------------------------------------------------
# per-iteration plumbing
# ---------------------------------------------------------------------------

@dataclass
class _SinrTask:
    """One (user, sub-band, serving set) SINR series to materialize."""
    ui: int
    sb: int
    serving: tuple
    interferers: tuple  # (site, power scale) pairs
    serving_scale: float = 1.0


@dataclass
class _SymTask:
    """One LSA-wide composite transmission toward one user."""
    ui: int
    sb: int
    serving: tuple      # 3 co-transmitting cells
    alphas: tuple       # per-cell alpha, aligned with serving
    interferers: tuple  # (site, power scale) pairs
    cell: int
    distance: float


def _materialize(model, n_tti, sinr_tasks, sym_tasks, cov_scale=1.0):
    """One pass over the TTIs filling every task's link-state series.

    `cov_scale` is the linear link-to-system coverage offset credited to
    every useful signal (see ``engine.coverage_offset_db``). Returns
    (sinr_lin (n_thr, T), gains (n_sym, 3, T) complex, ipn_mw (n_sym, T)
    including noise).
    """
    noise_mw = float(db_to_linear(model.noise_dbm))
    n_thr, n_sym = len(sinr_tasks), len(sym_tasks)
    n_all = n_thr + n_sym

    sig_rows, sig_sb, sig_rx, sig_tid = [], [], [], []
    int_rows, int_sb, int_rx, int_tid = [], [], [], []
    for tid, task in enumerate(sinr_tasks + sym_tasks):
        for s in task.serving:
            if tid < n_thr:
                sig_rows.append(model.link_index[(task.ui, s)])
                sig_sb.append(task.sb)
                sig_rx.append(model.rx_lin_mw[task.ui, s]
                              * task.serving_scale * cov_scale)
                sig_tid.append(tid)
        for s, scale in task.interferers:
            int_rows.append(model.link_index[(task.ui, s)])
            int_sb.append(task.sb)
            int_rx.append(model.rx_lin_mw[task.ui, s] * scale)
            int_tid.append(tid)
    sig_rows, sig_sb = np.array(sig_rows, int), np.array(sig_sb, int)
    sig_rx, sig_tid = np.array(sig_rx, float), np.array(sig_tid, int)
    int_rows, int_sb = np.array(int_rows, int), np.array(int_sb, int)
    int_rx, int_tid = np.array(int_rx, float), np.array(int_tid, int)

    g_rows = np.zeros((n_sym, 3), int)
    g_amp = np.zeros((n_sym, 3))
    g_sb = np.zeros(n_sym, int)
    for i, task in enumerate(sym_tasks):
        g_sb[i] = task.sb
        for k, s in enumerate(task.serving):
            g_rows[i, k] = model.link_index[(task.ui, s)]
            g_amp[i, k] = np.sqrt(model.rx_lin_mw[task.ui, s] * cov_scale)

    sinr = np.zeros((n_thr, n_tti))
    gains = np.zeros((n_sym, 3, n_tti), dtype=np.complex128)
    ipn = np.zeros((n_sym, n_tti))
    for t, (H, G) in enumerate(model.iter_subband_gains(n_tti)):
        interf = np.zeros(n_all)
        if int_rows.size:
            interf = np.bincount(int_tid, weights=int_rx * G[int_rows, int_sb],
                                 minlength=n_all)
        if n_thr:
            sig = np.bincount(sig_tid, weights=sig_rx * G[sig_rows, sig_sb],
                              minlength=n_thr)
            sinr[:, t] = sig / (interf[:n_thr] + noise_mw)
        if n_sym:
            # center-subcarrier phase with the sub-band-averaged amplitude,
            # so symbol mode sees the same (frequency-diversity smoothed)
            # fading statistics the SINR thresholds are defined on
            h = H[g_rows, g_sb[:, None]]
            mag = np.abs(h)
            unit = np.where(mag > 0, h / np.where(mag > 0, mag, 1.0), 1.0)
            gains[:, :, t] = g_amp * unit * np.sqrt(G[g_rows, g_sb[:, None]])
            ipn[:, t] = interf[n_thr:] + noise_mw
    return sinr, gains, ipn


@dataclass
class IterationStats:
    """Raw per-iteration counters, merged later into MetricsReport."""
    n_users: int = 0
    n_hcg: int = 0
    local_pop: np.ndarray = field(default_factory=lambda: np.zeros(N_CENTER, int))
    local_hd: np.ndarray = field(default_factory=lambda: np.zeros(N_CENTER, int))
    local_sd: np.ndarray = field(default_factory=lambda: np.zeros(N_CENTER, int))
    bl_cnt: int = 0
    el_cnt: int = 0
    hls_req: np.ndarray = field(default_factory=lambda: np.zeros(N_CENTER, int))
    hls_served: np.ndarray = field(default_factory=lambda: np.zeros(N_CENTER, int))
    mr_pop: int = 0
    mr_hd: int = 0
    mr_sd: int = 0
    sr_pop: int = 0
    sr_s1: int = 0
    sr_s1_alone: int = 0
    sr_s2: int = 0
    # per-user local-service records for the distance profile
    dist_m: list = field(default_factory=list)
    dist_cell: list = field(default_factory=list)
    dist_bl: list = field(default_factory=list)
    dist_el: list = field(default_factory=list)


def _interferers(active, relevant, serving, sb):
    on = active.get(sb, {})
    return tuple(sorted((s, on[s])
                        for s in (set(on) & relevant) - set(serving)))


def _simulate_iteration(config, dep, params, dist, thresholds, scheme,
                        seed, it, local_only=None) -> IterationStats:
    # local-service characterization mode: pinned per-cell alphas probe the
    # LSA-wide service in isolation, without emergent hyper-local slots on
    # air (the hyper-local experiments run with the default schedule)
    if local_only is None:
        local_only = scheme == "lhs" and config.alpha_override() is not None
    ss = np.random.SeedSequence([int(seed), int(it)])
    drop_seed, chan_seed, sched_seed, sym_seed = (
        int(x) for x in ss.generate_state(4))
    users = drop_users(dep, config["deploy.users_per_cell"],
                       config["deploy.drop_radius_fraction"], dist, drop_seed)
    model = ChannelModel(dep, params, chan_seed)
    model.set_users(users)
    n_tti = config["engine.n_tti"]
    n_sym = config["engine.n_sym"]
    success_rate = 1.0 - config["sys.target_bler"]
    mr_alpha = config["sched.mr_alpha"]
    site_pos = dep.positions()

    # link-to-system coverage offset: credits the coding/HARQ gain the
    # uncoded block model leaves out by shifting every link's required
    # SINR down, i.e. boosting the useful signal on both decode paths and
    # on the CQI used for subgrouping
    cov_db = config["engine.coverage_offset_db"]
    cov_scale = float(db_to_linear(cov_db))

    # subgrouping on fading-averaged post-combining SNR over the LSA cells
    snr_by_user = {}
    for ui, u in enumerate(users):
        lsa = dep.lsas[dep.lsa_of_cell(u.serving_cell)]
        snr_by_user[u.id] = model.mean_combined_snr_db(ui, lsa.cell_ids) + cov_db
    labels = sch.subgroup_users(users, snr_by_user,
                                thresholds.cqi_subgroup_threshold)

    # schedule + global sub-band occupancy (site -> linear power scale;
    # ring sites and emergent hyper-local slots run at a configurable
    # back-off, everything else at full power)
    ring_scale = float(db_to_linear(config["engine.ring_power_offset_db"]))
    hlsa_scale = float(db_to_linear(config["engine.hlsa_power_offset_db"]))
    active = {sb: {} for sb in range(9)}
    if config["engine.ring_active"]:
        for site in dep.sites[N_CENTER:]:
            for sb in range(9):
                active[sb][site.id] = ring_scale
    lsa_reqs, decisions, scptm_groups = {}, {}, {}
    for lsa in dep.lsas:
        req = sch.request_matrix_for_lsa(users, lsa, labels)
        lsa_reqs[lsa.id] = sch.alg1_lsa_select(req)[0]
        if scheme == "lhs":
            dec = sch.lhs_schedule(
                req, config["sched.hcg_fraction_threshold"],
                config["sched.total_count_threshold"], mr_alpha,
                alpha_override=config.alpha_override())
            decisions[lsa.id] = dec
            for i, _ in enumerate(dec.lsa_req):
                for cell in lsa.cell_ids:
                    active[lsa.subband_ids[i]][cell] = 1.0
            if not local_only:
                for j, cell in enumerate(lsa.cell_ids):
                    for k, _ in enumerate(dec.slots[j]):
                        active[dep.hlsa_subbands[cell][k]][cell] = hlsa_scale
        else:
            groups = sch.scptm_schedule(
                req, seed=sched_seed * 8 + lsa.id,
                hcg_fraction_threshold=config["sched.hcg_fraction_threshold"],
                total_count_threshold=config["sched.total_count_threshold"])
            scptm_groups[lsa.id] = groups
            # reuse-1 baseline: every cell transmits its groups (popular
            # locals included) independently at full power, with no LSA
            # sub-band partitioning — other cells' groups are plain
            # co-channel interference
            for g in groups:
                active[g.subband][lsa.cell_ids[g.cell]] = 1.0

    # task assembly ------------------------------------------------------
    stats = IterationStats(n_users=len(users),
                           n_hcg=sum(1 for v in labels.values() if v == sch.HCG))
    sinr_tasks, sym_tasks = [], []
    thr_meta = []     # parallel to sinr_tasks: list of consumer tuples
    relevant = [set(r) for r in model.relevant]

    def add_thr(ui, sb, serving, consumers, serving_scale=1.0):
        sinr_tasks.append(_SinrTask(
            ui, sb, tuple(serving),
            _interferers(active, relevant[ui], serving, sb), serving_scale))
        thr_meta.append(consumers)

    cell0 = dep.center_cells[0]
    # hyper-local measurement slots on cell 0's first two hyper-local
    # sub-bands (the baseline probe uses a reuse-1 sub-band instead). The
    # MR probe runs at full power — its benchmark is the baseline's
    # full-power point-to-multipoint 16QAM — while the SR probe runs at
    # the same back-off as the emergent slots it characterizes.
    meas_mr_sb = dep.hlsa_subbands[cell0][0] if scheme == "lhs" else 1
    meas_sr_sb = dep.hlsa_subbands[cell0][1]
    thr = thresholds.threshold

    for ui, u in enumerate(users):
        cell = u.serving_cell
        lsa = dep.lsas[dep.lsa_of_cell(cell)]
        cell_pos = lsa.cell_ids.index(cell)
        d = float(np.hypot(u.x - site_pos[cell][0], u.y - site_pos[cell][1]))
        # local-service coverage is measured over the *total* dropped users:
        # the LSA's top-requested content toward every user, as the LSA-wide
        # macro-diversity composite (lhs) or the serving cell's QPSK
        # transmission exposed to reuse-1 inter-cell interference (baseline)
        if lsa_reqs[lsa.id]:
            content0 = lsa_reqs[lsa.id][0]
            if scheme == "lhs":
                sb0 = lsa.subband_ids[0]
                sym_tasks.append(_SymTask(
                    ui, sb0, tuple(lsa.cell_ids),
                    decisions[lsa.id].alpha_by_content[content0],
                    _interferers(active, relevant[ui], lsa.cell_ids, sb0),
                    cell, d))
            else:
                g = next((g for g in scptm_groups[lsa.id]
                          if g.cell == cell_pos and g.content == content0),
                         None)
                sb0 = g.subband if g is not None else lsa.subband_ids[0]
                add_thr(ui, sb0, (cell,),
                        [("local", cell, "qpsk", thr(QPSK_ALPHA, "HP"), d)])
        if u.content not in lsa_reqs[lsa.id]:
            stats.hls_req[cell] += 1
            # a hyper-local request is served when the layer carrying the
            # requester's subgroup quality decodes: HCG users need the
            # enhancement quality, LCG users the base quality
            hcg_u = labels[u.id] == sch.HCG
            if scheme == "lhs":
                slots = () if local_only \
                    else decisions[lsa.id].slots[cell_pos]
                for k, slot in enumerate(slots):
                    sb = dep.hlsa_subbands[cell][k]
                    if u.content == slot.hp_content:
                        # MR: the layer matching the subgroup quality; SR:
                        # the HP half is a single-resolution service
                        layer = "LP" if slot.kind == "MR" and hcg_u else "HP"
                        add_thr(ui, sb, (cell,),
                                [("hls", cell, thr(slot.alpha, layer))],
                                serving_scale=hlsa_scale)
                    elif u.content == slot.lp_content:
                        add_thr(ui, sb, (cell,),
                                [("hls", cell, thr(slot.alpha, "LP"))],
                                serving_scale=hlsa_scale)
            else:
                g = next((g for g in scptm_groups[lsa.id]
                          if g.cell == cell_pos and g.content == u.content), None)
                if g is not None:
                    if g.modulation == "uniform16qam":
                        # 16QAM groups are all-HCG by construction
                        add_thr(ui, g.subband, (cell,),
                                [("hls", cell, thr(0.5, "LP"))])
                    elif not hcg_u:
                        # a QPSK group downgrades to base quality: its HCG
                        # requesters go unserved
                        add_thr(ui, g.subband, (cell,),
                                [("hls", cell, thr(QPSK_ALPHA, "HP"))])

        # fixed measurement transmissions toward every cell-0 user
        if cell == cell0 and not (scheme == "lhs" and local_only):
            if scheme == "lhs":
                add_thr(ui, meas_mr_sb, (cell0,),
                        [("mr_bl", thr(mr_alpha, "HP")),
                         ("mr_el", thr(mr_alpha, "LP"))])
                add_thr(ui, meas_sr_sb, (cell0,),
                        [("sr_s1", thr(sch.SR_ALPHA, "HP")),
                         ("sr_s1_alone", thr(QPSK_ALPHA, "HP")),
                         ("sr_s2", thr(sch.SR_ALPHA, "LP"), labels[u.id])],
                        serving_scale=hlsa_scale)
            else:
                # the baseline has no reduced-power slot concept: its
                # point-to-multipoint transmission runs at full power on a
                # reuse-1 sub-band
                add_thr(ui, meas_mr_sb, (cell0,),
                        [("mr_16qam", thr(0.5, "LP"))])

    # link-state materialization + decode --------------------------------
    sinr, gains, ipn = _materialize(model, n_tti, sinr_tasks, sym_tasks,
                                    cov_scale)

    for i, task in enumerate(sym_tasks):
        rng = np.random.default_rng(
            np.random.SeedSequence([sym_seed, 0x517B, users[task.ui].id]))
        out = evaluate_symbol_mode(gains[i], task.alphas, ipn[i], n_sym, rng,
                                   success_rate,
                                   block_bits=config["linkchar.block_bits"],
                                   target_bler=config["sys.target_bler"])
        stats.local_pop[task.cell] += 1
        stats.local_hd[task.cell] += out.state == HD
        stats.local_sd[task.cell] += out.state == SD
        stats.bl_cnt += out.bl
        stats.el_cnt += out.el
        stats.dist_m.append(task.distance)
        stats.dist_cell.append(task.cell)
        stats.dist_bl.append(out.bl)
        stats.dist_el.append(out.el)

    mr = {"bl": 0, "el": 0, "hd16": 0, "pop": 0}
    for i, consumers in enumerate(thr_meta):
        for item in consumers:
            tag = item[0]
            if tag == "local":
                _, cell, mod, t, d = item
                ok = evaluate_threshold_mode(sinr[i], t, success_rate)
                stats.local_pop[cell] += 1
                bl = el = False
                if mod == "16qam" and ok:
                    stats.local_hd[cell] += 1
                    bl = el = True
                elif mod == "qpsk" and ok:
                    stats.local_sd[cell] += 1
                    bl = True
                stats.bl_cnt += bl
                stats.el_cnt += el
                stats.dist_m.append(d)
                stats.dist_cell.append(cell)
                stats.dist_bl.append(bl)
                stats.dist_el.append(el)
            elif tag == "hls":
                _, cell, t = item
                stats.hls_served[cell] += evaluate_threshold_mode(
                    sinr[i], t, success_rate)
            elif tag == "mr_bl":
                mr["pop"] += 1
                mr["bl"] += evaluate_threshold_mode(sinr[i], item[1], success_rate)
            elif tag == "mr_el":
                mr["el"] += evaluate_threshold_mode(sinr[i], item[1], success_rate)
            elif tag == "mr_16qam":
                mr["pop"] += 1
                mr["hd16"] += evaluate_threshold_mode(sinr[i], item[1], success_rate)
            elif tag == "sr_s1":
                stats.sr_pop += 1
                stats.sr_s1 += evaluate_threshold_mode(sinr[i], item[1], success_rate)
            elif tag == "sr_s1_alone":
                stats.sr_s1_alone += evaluate_threshold_mode(
                    sinr[i], item[1], success_rate)
            elif tag == "sr_s2":
                ok = evaluate_threshold_mode(sinr[i], item[1], success_rate)
                stats.sr_s2 += ok and item[2] == sch.HCG

    stats.mr_pop = mr["pop"]
    if scheme == "lhs":
        # the MR measurement sends one content on both layers: HD needs both
        # (EL implies BL decodes here since the HP threshold is lower)
        stats.mr_hd = mr["el"] if mr["el"] <= mr["bl"] else mr["bl"]
        stats.mr_sd = mr["bl"] - stats.mr_hd
    else:
        stats.mr_hd = mr["hd16"]
        stats.mr_sd = 0
    return stats


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    name: str
    population: str
    value: float
    ci_half: float


@dataclass
class MetricsReport:
    scheme: str
    iterations: int
    seed: int
    config_hash: str
    rows: list

    def row(self, name, population="all") -> MetricRow:
        for r in self.rows:
            if r.name == name and r.population == population:
                return r
        raise KeyError((name, population))

    def value(self, name, population="all") -> float:
        return self.row(name, population).value

    def to_text(self, metadata_lines=()):
        out = list(metadata_lines)
        out.append(f"# scheme={self.scheme} iterations={self.iterations} "
                   f"seed={self.seed} config_hash={self.config_hash}")
        out.append("# name population value ci_low ci_high")
        for r in self.rows:
            v, h = r.value, r.ci_half
            lo, hi = (v - h, v + h) if np.isfinite(v) else (v, v)
            out.append(f"{r.name} {r.population} {v:.6f} {lo:.6f} {hi:.6f}")
        return "\n".join(out) + "\n"


def _ci(samples):
    """Mean and 95% half-width over non-nan per-iteration samples."""
    x = np.asarray(samples, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return float("nan"), 0.0
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(1.96 * x.std(ddof=1) / np.sqrt(x.size))


def _frac(num, den):
    return num / den if den > 0 else np.nan


def _aggregate(stats_list, scheme, iterations, seed, config_hash):
    rows = []

    def add(name, population, samples):
        v, h = _ci(samples)
        rows.append(MetricRow(name, population, v, h))

    for c in range(N_CENTER):
        hd = [_frac(s.local_hd[c], s.local_pop[c]) for s in stats_list]
        sd = [_frac(s.local_sd[c], s.local_pop[c]) for s in stats_list]
        out = [1.0 - a - b if not np.isnan(a) else np.nan
               for a, b in zip(hd, sd)]
        add("local_hd", f"cell{c}", hd)
        add("local_sd", f"cell{c}", sd)
        add("local_outage", f"cell{c}", out)
    add("local_bl", "all",
        [_frac(s.bl_cnt, s.local_pop.sum()) for s in stats_list])
    add("local_el", "all",
        [_frac(s.el_cnt, s.local_pop.sum()) for s in stats_list])
    add("hcg_fraction", "all",
        [_frac(s.n_hcg, s.n_users) for s in stats_list])
    add("hls_served_per_cell", "all",
        [s.hls_served.sum() / N_CENTER for s in stats_list])
    for c in range(N_CENTER):
        add("hls_served", f"cell{c}", [float(s.hls_served[c]) for s in stats_list])

    mr_hd = [_frac(s.mr_hd, s.mr_pop) for s in stats_list]
    mr_sd = [_frac(s.mr_sd, s.mr_pop) for s in stats_list]
    add("mr_hls_hd", "cell0", mr_hd)
    add("mr_hls_sd", "cell0", mr_sd)
    add("mr_hls_outage", "cell0",
        [1.0 - a - b if not np.isnan(a) else np.nan
         for a, b in zip(mr_hd, mr_sd)])
    if scheme == "lhs":
        add("sr_hls_service1", "cell0",
            [_frac(s.sr_s1, s.sr_pop) for s in stats_list])
        add("sr_hls_service1_alone", "cell0",
            [_frac(s.sr_s1_alone, s.sr_pop) for s in stats_list])
        add("sr_hls_service2", "cell0",
            [_frac(s.sr_s2, s.sr_pop) for s in stats_list])
    return MetricsReport(scheme=scheme, iterations=iterations, seed=seed,
                         config_hash=config_hash, rows=rows)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def load_thresholds(config, force=False):
    """Thresholds from the configured cache; building is the CLI's job."""
    from lhsim.linkchar import build_threshold_set

    path = config["run.cache"]
    if not force and not os.path.exists(path):
        raise EngineError(
            f"link characterization cache not found at '{path}'; "
            "run the `linkchar` subcommand first")
    return build_threshold_set(config.linkchar_config(), cache_path=path,
                               force=force)


def _run_iterations(config, scheme, iterations, seed, thresholds,
                    local_only=None):
    dep = config.deployment()
    params = config.channel_params()
    dist = config.request_distribution()
    return [_simulate_iteration(config, dep, params, dist, thresholds,
                                scheme, seed, it, local_only)
            for it in range(iterations)]


def run_simulation(config, scheme=None, iterations=None, seed=None,
                   thresholds=None) -> MetricsReport:
    scheme = scheme or config["run.scheme"]
    iterations = iterations if iterations is not None else config["run.iterations"]
    seed = seed if seed is not None else config["run.seed"]
    if scheme not in ("lhs", "scptm"):
        raise EngineError(f"unknown scheme {scheme!r}")
    if iterations < 1:
        raise EngineError("iterations must be >= 1")
    if thresholds is None:
        thresholds = load_thresholds(config)
    stats = _run_iterations(config, scheme, iterations, seed, thresholds)
    return _aggregate(stats, scheme, iterations, seed, config.config_hash())


def _variant(config, **dotted):
    from lhsim.config import RunConfig

    values = dict(config.values)
    values.update({k.replace("__", "."): v for k, v in dotted.items()})
    return RunConfig(values=values)


DEFAULT_HCG_RADII = (1.0, 0.8, 0.65, 0.5, 0.4, 0.3, 0.2)
DEFAULT_DROP_RADII = (0.2, 0.4, 0.6, 0.8, 1.0)


def metric_sweep_hcg(config, radii=DEFAULT_HCG_RADII, thresholds=None,
                     iterations=None, seed=None):
    """HCG-fraction sweep (by shrinking the drop radius): per-layer decode %.

    Returns rows (hcg_fraction, bl_fraction, el_fraction, bl_ci, el_ci),
    sorted by HCG fraction.
    """
    if thresholds is None:
        thresholds = load_thresholds(config)
    iterations = iterations if iterations is not None else config["run.iterations"]
    seed = seed if seed is not None else config["run.seed"]
    rows = []
    for r in radii:
        cfg = _variant(config, deploy__drop_radius_fraction=r)
        stats = _run_iterations(cfg, "lhs", iterations, seed, thresholds,
                                local_only=True)
        hcg, _ = _ci([_frac(s.n_hcg, s.n_users) for s in stats])
        bl, bl_h = _ci([_frac(s.bl_cnt, s.local_pop.sum()) for s in stats])
        el, el_h = _ci([_frac(s.el_cnt, s.local_pop.sum()) for s in stats])
        rows.append((hcg, bl, el, bl_h, el_h))
    rows.sort(key=lambda row: row[0])
    return rows


@dataclass
class DistanceProfile:
    alpha_mode: str
    bin_edges: np.ndarray
    n: np.ndarray          # users per bin
    p_hd: np.ndarray       # P(BL+EL) per bin
    p_sd: np.ndarray       # P(BL only) per bin
    p_outage: np.ndarray
    cell_hd: np.ndarray    # per center cell, pooled over distance
    cell_outage: np.ndarray


def metric_distance_profile(config, alpha_mode="adaptive", thresholds=None,
                            iterations=None, seed=None,
                            n_bins=6) -> DistanceProfile:
    """Decode probability vs serving-site distance for the LSA-wide service.

    alpha_mode 'adaptive' uses the per-cell alpha assignment; 'same_alpha'
    fixes alpha = 0.5 in every cell.
    """
    if alpha_mode not in ("adaptive", "same_alpha"):
        raise EngineError(f"unknown alpha_mode {alpha_mode!r}")
    if thresholds is None:
        thresholds = load_thresholds(config)
    iterations = iterations if iterations is not None else config["run.iterations"]
    seed = seed if seed is not None else config["run.seed"]
    cfg = config if alpha_mode == "adaptive" else _variant(
        config, engine__alpha_override="0.5,0.5,0.5")
    stats = _run_iterations(cfg, "lhs", iterations, seed, thresholds,
                            local_only=True)

    d = np.concatenate([np.asarray(s.dist_m, float) for s in stats])
    cell = np.concatenate([np.asarray(s.dist_cell, int) for s in stats])
    bl = np.concatenate([np.asarray(s.dist_bl, bool) for s in stats])
    el = np.concatenate([np.asarray(s.dist_el, bool) for s in stats])
    hd = bl & el
    sd = bl & ~el
    rmax = config["deploy.drop_radius_fraction"] * cfg.deployment().radius
    edges = np.linspace(0.0, rmax, n_bins + 1)
    which = np.clip(np.digitize(d, edges) - 1, 0, n_bins - 1)
    n = np.bincount(which, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        p_hd = np.bincount(which, weights=hd, minlength=n_bins) / n
        p_sd = np.bincount(which, weights=sd, minlength=n_bins) / n
    cell_n = np.bincount(cell, minlength=N_CENTER)
    with np.errstate(invalid="ignore"):
        cell_hd = np.bincount(cell, weights=hd, minlength=N_CENTER) / cell_n
        cell_out = np.bincount(cell, weights=~bl, minlength=N_CENTER) / cell_n
    return DistanceProfile(alpha_mode=alpha_mode, bin_edges=edges, n=n,
                           p_hd=p_hd, p_sd=p_sd, p_outage=1.0 - p_hd - p_sd,
                           cell_hd=cell_hd, cell_outage=cell_out)


def metric_sweep_drop_radius(config, radii=DEFAULT_DROP_RADII, thresholds=None,
                             iterations=None, seed=None):
    """Average cell-local services served per cell, LHS vs baseline.

    Returns rows (radius_fraction, lhs_served, scptm_served, lhs_ci,
    scptm_ci); a request counts as served when the layer carrying the
    requester's subgroup quality decodes (HCG: enhancement, LCG: base).
    """
    if thresholds is None:
        thresholds = load_thresholds(config)
    iterations = iterations if iterations is not None else config["run.iterations"]
    seed = seed if seed is not None else config["run.seed"]
    rows = []
    for r in radii:
        cfg = _variant(config, deploy__drop_radius_fraction=r)
        per_scheme = {}
        for scheme in ("lhs", "scptm"):
            stats = _run_iterations(cfg, scheme, iterations, seed, thresholds)
            per_scheme[scheme] = _ci(
                [s.hls_served.sum() / N_CENTER for s in stats])
        rows.append((r, per_scheme["lhs"][0], per_scheme["scptm"][0],
                     per_scheme["lhs"][1], per_scheme["scptm"][1]))
    return rows
