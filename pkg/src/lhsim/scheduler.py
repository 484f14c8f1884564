"""Scheduling: user subgrouping, LSA/HLSA content selection, per-cell
alpha assignment, and the single-cell point-to-multipoint baseline.

Content selection works on a per-LSA request matrix (3 cells x 15
contents). HLSA slots come in two kinds: multi-resolution (one content on
both layers) and single-resolution pairs (two contents multiplexed at
alpha = 0.3, the larger-audience one on HP). A pair candidate with no HP
partner gets its own multi-resolution slot while the slot budget lasts and
is multiplexed with the next candidate once it does not, so every
admissible content is served at the highest resolution the budget allows.
"""
from dataclasses import dataclass, field

import numpy as np

from lhsim.deployment import N_CONTENTS

HCG = "HCG"
LCG = "LCG"

DEFAULT_TOTAL_COUNT_THRESHOLD = 10
DEFAULT_HCG_FRACTION = 0.5
SR_ALPHA = 0.3
ALPHA_LADDER = (0.5, 0.3, 0.1)


@dataclass
class RequestMatrix:
    """Requester counts for one LSA: 3 cells x 15 contents."""
    count: np.ndarray
    count_hcg: np.ndarray

    def __post_init__(self):
        self.count = np.asarray(self.count, dtype=int)
        self.count_hcg = np.asarray(self.count_hcg, dtype=int)
        if self.count.shape != (3, N_CONTENTS) or self.count_hcg.shape != (3, N_CONTENTS):
            raise ValueError("request matrix must be 3 cells x 15 contents")
        if np.any(self.count_hcg > self.count) or np.any(self.count_hcg < 0):
            raise ValueError("0 <= count_hcg <= count must hold elementwise")

    def total_count(self):
        return self.count.sum(axis=0)


@dataclass(frozen=True)
class Slot:
    kind: str            # MR | SR
    hp_content: int
    lp_content: int = 0  # 0 = none
    alpha: float = SR_ALPHA

    def contents(self):
        return (self.hp_content,) if self.lp_content == 0 else (
            self.hp_content, self.lp_content)


@dataclass
class ScheduleDecision:
    """One LSA's decision: LSA-wide contents + per-cell HLSA slot lists."""
    lsa_req: tuple                 # up to 3 distinct content ids
    alpha_by_content: dict         # content -> (alpha cell0, cell1, cell2)
    slots: tuple                   # 3 tuples of Slot, one per cell

    def __post_init__(self):
        if len(set(self.lsa_req)) != len(self.lsa_req):
            raise ValueError("lsa_req contents must be distinct")
        for cell_slots in self.slots:
            if len(cell_slots) > 6:
                raise ValueError("at most 6 HLSA slots per cell")
            seen = set(self.lsa_req)
            for slot in cell_slots:
                for c in slot.contents():
                    if c in seen:
                        raise ValueError(f"content {c} scheduled twice")
                    seen.add(c)

    def to_rows(self, lsa, hlsa_subbands):
        """Tabular form: (cell, subband, kind, hp_content, lp_content, alpha)."""
        rows = []
        for i, content in enumerate(self.lsa_req):
            alphas = self.alpha_by_content[content]
            for j, cell in enumerate(lsa.cell_ids):
                rows.append((cell, lsa.subband_ids[i], "LSA", content, 0, alphas[j]))
        for j, cell in enumerate(lsa.cell_ids):
            bands = hlsa_subbands[cell]
            for k, slot in enumerate(self.slots[j]):
                rows.append((cell, bands[k], slot.kind, slot.hp_content,
                             slot.lp_content, slot.alpha))
        return rows


def serialize_schedule(rows):
    out = ["# cell subband kind hp_content lp_content alpha"]
    for cell, sb, kind, hp, lp, alpha in rows:
        out.append(f"{cell} {sb} {kind} {hp} {lp} {alpha:.2f}")
    return "\n".join(out) + "\n"


def subgroup_users(users, snr_db_by_user, cqi_threshold_db):
    """Label each user HCG/LCG by post-combining sub-band SNR (>= is HCG)."""
    labels = {}
    for u in users:
        snr = snr_db_by_user[u.id]
        lab = HCG if snr >= cqi_threshold_db else LCG
        labels[u.id] = lab
        u.subgroup = lab
    return labels


def request_matrix_for_lsa(users, lsa, labels):
    count = np.zeros((3, N_CONTENTS), dtype=int)
    hcg = np.zeros((3, N_CONTENTS), dtype=int)
    cell_pos = {cid: i for i, cid in enumerate(lsa.cell_ids)}
    for u in users:
        if u.serving_cell in cell_pos:
            i = cell_pos[u.serving_cell]
            count[i, u.content - 1] += 1
            if labels[u.id] == HCG:
                hcg[i, u.content - 1] += 1
    return RequestMatrix(count=count, count_hcg=hcg)


def alg1_lsa_select(req: RequestMatrix):
    """The up-to-3 most requested contents LSA-wide; ties to lower id."""
    totals = req.total_count()
    order = sorted(range(N_CONTENTS), key=lambda j: (-totals[j], j))
    lsa_req = tuple(j + 1 for j in order[:3] if totals[j] > 0)
    mm_flag = np.zeros(N_CONTENTS, dtype=bool)
    for c in lsa_req:
        mm_flag[c - 1] = True
    return lsa_req, mm_flag


def alg2_hlsa_select(req: RequestMatrix, mm_flag,
                     hcg_fraction_threshold=DEFAULT_HCG_FRACTION,
                     total_count_threshold=DEFAULT_TOTAL_COUNT_THRESHOLD,
                     max_slots=6, mr_alpha=SR_ALPHA):
    """Per-cell HLSA slot lists.

    Scans contents by descending in-cell HCG count. An unflagged content
    whose HCG share meets the threshold becomes a multi-resolution slot when
    its audience exceeds the count threshold, otherwise it becomes the LP
    half of a single-resolution pair whose HP half is the best unflagged
    content with a minority HCG share and a large audience. When no HP
    partner exists the candidate is served on its own multi-resolution
    slot while the remaining budget can fit every remaining candidate,
    and is paired with the next small HCG-majority candidate otherwise.
    """
    all_slots = []
    for i in range(3):
        count = req.count[i]
        hcg = req.count_hcg[i]
        flag = np.asarray(mm_flag, dtype=bool).copy()
        order = sorted(range(N_CONTENTS), key=lambda j: (-hcg[j], j))
        slots = []
        for pos, j in enumerate(order):
            if len(slots) >= max_slots:
                break
            if flag[j] or count[j] == 0:
                continue
            frac = hcg[j] / count[j]
            if frac < hcg_fraction_threshold:
                continue  # minority-HCG contents only ever ride as HP partners
            if count[j] > total_count_threshold:
                flag[j] = True
                slots.append(Slot("MR", j + 1, 0, mr_alpha))
            else:
                flag[j] = True
                partner = None
                # the partner scan resumes at the current rank, never earlier
                for k in order[pos:]:
                    if flag[k] or count[k] == 0:
                        continue
                    if (hcg[k] / count[k] < hcg_fraction_threshold
                            and count[k] > total_count_threshold):
                        partner = k
                        break
                if partner is not None:
                    flag[partner] = True
                    slots.append(Slot("SR", partner + 1, j + 1, SR_ALPHA))
                    continue
                # no minority-HCG partner: pair with the next small
                # HCG-majority candidate only when the remaining slot
                # budget cannot fit every remaining candidate on its own
                # slot, so each content gets the highest resolution the
                # budget allows (up to 12 single-resolution services)
                mates = [k for k in order[pos:]
                         if not flag[k] and count[k] > 0
                         and hcg[k] / count[k] >= hcg_fraction_threshold
                         and count[k] <= total_count_threshold]
                budget_after = max_slots - len(slots) - 1
                if mates and len(mates) > budget_after:
                    mate = mates[0]
                    flag[mate] = True
                    hp, lp = (mate, j) if count[mate] >= count[j] else (j, mate)
                    slots.append(Slot("SR", hp + 1, lp + 1, SR_ALPHA))
                else:
                    # room (or no mate): a single-content multi-resolution
                    # slot serves both subgroups of the lone candidate
                    slots.append(Slot("MR", j + 1, 0, mr_alpha))
        all_slots.append(tuple(slots))
    return tuple(all_slots)


def alg3_alpha_assign(hcg_counts, total_counts):
    """Per-cell alpha for one LSA-wide content.

    Cells ordered by (HCG count desc, total count desc, cell index asc)
    receive (0.5, 0.3, 0.1) in order; this single sort reproduces every
    branch of the cascaded tie-break rules.
    """
    C = [int(x) for x in hcg_counts]
    TC = [int(x) for x in total_counts]
    if len(C) != 3 or len(TC) != 3 or min(C) < 0 or min(TC) < 0:
        raise ValueError("need nonnegative HCG/total counts for 3 cells")
    order = sorted(range(3), key=lambda i: (-C[i], -TC[i], i))
    alphas = [0.0] * 3
    for rank, cell in enumerate(order):
        alphas[cell] = ALPHA_LADDER[rank]
    return tuple(alphas)


def lhs_schedule(req: RequestMatrix,
                 hcg_fraction_threshold=DEFAULT_HCG_FRACTION,
                 total_count_threshold=DEFAULT_TOTAL_COUNT_THRESHOLD,
                 mr_alpha=SR_ALPHA, alpha_override=None) -> ScheduleDecision:
    """Full per-LSA decision: contents, slots, and alpha vectors."""
    lsa_req, mm_flag = alg1_lsa_select(req)
    slots = alg2_hlsa_select(req, mm_flag, hcg_fraction_threshold,
                             total_count_threshold, mr_alpha=mr_alpha)
    alpha_by_content = {}
    for c in lsa_req:
        if alpha_override is not None:
            alpha_by_content[c] = tuple(alpha_override)
        else:
            alpha_by_content[c] = alg3_alpha_assign(
                req.count_hcg[:, c - 1], req.count[:, c - 1])
    return ScheduleDecision(lsa_req=lsa_req, alpha_by_content=alpha_by_content,
                            slots=slots)


@dataclass(frozen=True)
class ScptmGroup:
    cell: int            # position within the LSA (0..2)
    content: int
    modulation: str      # qpsk | uniform16qam
    subband: int


def scptm_schedule(req: RequestMatrix, seed,
                   hcg_fraction_threshold=DEFAULT_HCG_FRACTION,
                   total_count_threshold=DEFAULT_TOTAL_COUNT_THRESHOLD,
                   n_subbands=9):
    """Reuse-1 baseline: per-cell groups on uniformly random distinct sub-bands.

    Following the least-channel-gain strategy the baseline serves every
    requested content it has capacity for (most-requested first, one
    sub-band each); there is no audience-size admission. A group is 16QAM
    only when it contains no LCG requester, else QPSK.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5C]))
    groups = []
    for i in range(3):
        order = sorted(range(N_CONTENTS),
                       key=lambda j: (-req.count[i, j], j))
        contents = [j + 1 for j in order if req.count[i, j] > 0]
        contents = contents[:n_subbands]
        bands = rng.choice(n_subbands, size=len(contents), replace=False)
        for c, sb in zip(contents, bands):
            all_hcg = req.count_hcg[i, c - 1] == req.count[i, c - 1]
            mod = "uniform16qam" if all_hcg else "qpsk"
            groups.append(ScptmGroup(cell=i, content=c, modulation=mod,
                                     subband=int(sb)))
    return groups
