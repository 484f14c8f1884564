import itertools

import numpy as np
import pytest

from lhsim import scheduler as sch
from lhsim.deployment import N_CONTENTS

# ---------------------------------------------------------------------------
# Independent oracles: line-by-line transcriptions of the published pseudocode
# (MATLAB-style stable descending sorts), kept free of the production code's
# simplifications. Documented fixes: the HCG threshold is a fraction of the
# content's in-cell requesters, and a pair candidate with no HP partner is
# promoted to an HP-only slot instead of looping forever.
# ---------------------------------------------------------------------------


def oracle_alg1(count):
    totals = count.sum(axis=0)
    order = sorted(range(len(totals)), key=lambda j: (-totals[j], j))
    picked = [j + 1 for j in order[:3] if totals[j] > 0]
    flag = np.zeros(len(totals), dtype=bool)
    for c in picked:
        flag[c - 1] = True
    return tuple(picked), flag


def oracle_alg2_cell(count, hcg, mm_flag, frac_thr, tc_thr, max_slots=6):
    n = len(count)
    s_idx = sorted(range(n), key=lambda j: (-hcg[j], j))
    flag = list(mm_flag)
    slots = []
    for pos in range(n):
        j = s_idx[pos]
        if flag[j] or len(slots) >= max_slots:
            continue
        if count[j] == 0 or hcg[j] / count[j] < frac_thr:
            continue
        if count[j] > tc_thr:
            slots.append(("MR", j + 1, 0))
            flag[j] = True
        else:
            flag[j] = True
            sr_found = False
            for k in s_idx[pos:]:
                if (not flag[k] and count[k] > 0
                        and hcg[k] / count[k] < frac_thr and count[k] > tc_thr):
                    slots.append(("SR", k + 1, j + 1))
                    flag[k] = True
                    sr_found = True
                    break
            if not sr_found:
                mates = [k for k in s_idx[pos:]
                         if not flag[k] and count[k] > 0
                         and hcg[k] / count[k] >= frac_thr
                         and count[k] <= tc_thr]
                if mates and len(mates) > max_slots - len(slots) - 1:
                    mate = mates[0]
                    flag[mate] = True
                    hp, lp = (mate, j) if count[mate] >= count[j] else (j, mate)
                    slots.append(("SR", hp + 1, lp + 1))
                else:
                    slots.append(("MR", j + 1, 0))
    return slots


def oracle_alg3(C, TC):
    ladder = [0.5, 0.3, 0.1]
    alpha = list(ladder)  # initialization; survives only the all-tied case
    sC = sorted(range(3), key=lambda i: (-C[i], i))
    sTC = sorted(range(3), key=lambda i: (-TC[i], i))
    sorted_C = [C[i] for i in sC]
    sorted_TC = [TC[i] for i in sTC]

    def assign(inds, vals):
        for i, v in zip(inds, vals):
            alpha[i] = v

    if len(set(sorted_C)) == 3:
        assign(sC, ladder)
    elif len(set(sorted_C)) == 1:
        if len(set(sorted_TC)) == 3:
            assign(sTC, ladder)
        elif len(set(sorted_TC)) == 1:
            pass  # alpha remains the initialization
        else:
            # both published sub-branches assign the same vector
            assign(sTC, ladder)
    else:
        if sorted_C[0] == sorted_C[1]:
            if TC[sC[0]] >= TC[sC[1]]:
                assign(sC, [0.5, 0.3, 0.1])
            else:
                assign(sC, [0.3, 0.5, 0.1])
        else:
            if TC[sC[1]] >= TC[sC[2]]:
                assign(sC, [0.5, 0.3, 0.1])
            else:
                assign(sC, [0.5, 0.1, 0.3])
    return tuple(alpha)


def pad_matrix(small):
    """Embed a (3, k) matrix into the full 15-content width."""
    full = np.zeros((3, N_CONTENTS), dtype=int)
    full[:, : small.shape[1]] = small
    return full


def make_req(count, hcg):
    return sch.RequestMatrix(count=pad_matrix(count), count_hcg=pad_matrix(hcg))


class TestRequestMatrix:
    def test_hcg_bounded_by_count(self):
        with pytest.raises(ValueError):
            sch.RequestMatrix(count=np.zeros((3, 15)), count_hcg=np.ones((3, 15)))

    def test_random_drops_satisfy_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            count = rng.integers(0, 20, (3, 15))
            hcg = rng.binomial(count, 0.6)
            m = sch.RequestMatrix(count=count, count_hcg=hcg)
            assert np.all(m.count_hcg <= m.count)


class TestAlg1:
    def test_simple_selection(self):
        count = np.zeros((3, 15), dtype=int)
        count[0, :5] = [4, 1, 3, 5, 0]
        count[1, :5] = [4, 1, 3, 5, 0]
        count[2, :5] = [4, 1, 3, 5, 0]
        req = sch.RequestMatrix(count=count, count_hcg=np.zeros_like(count))
        picked, _ = sch.alg1_lsa_select(req)
        assert picked == (4, 1, 3)

    def test_tie_break_lower_id(self):
        count = np.zeros((3, 15), dtype=int)
        count[0, :4] = [7, 7, 7, 7]
        req = sch.RequestMatrix(count=count, count_hcg=np.zeros_like(count))
        picked, _ = sch.alg1_lsa_select(req)
        assert picked == (1, 2, 3)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(1)
        count = rng.integers(0, 9, (3, 15))
        req = sch.RequestMatrix(count=count, count_hcg=np.zeros_like(count))
        base, _ = sch.alg1_lsa_select(req)
        perm = sch.RequestMatrix(count=count[[2, 0, 1]],
                                 count_hcg=np.zeros_like(count))
        assert sch.alg1_lsa_select(perm)[0] == base

    def test_fewer_than_three_contents(self):
        count = np.zeros((3, 15), dtype=int)
        count[1, 6] = 5
        req = sch.RequestMatrix(count=count, count_hcg=np.zeros_like(count))
        picked, _ = sch.alg1_lsa_select(req)
        assert picked == (7,)

    def test_oracle_exhaustive_totals(self):
        # all (3-cell x 4-content) matrices summarized by totals 0..12
        for totals in itertools.product(range(13), repeat=4):
            count = np.zeros((3, 15), dtype=int)
            count[0, :4] = totals
            req = sch.RequestMatrix(count=count, count_hcg=np.zeros_like(count))
            got, gflag = sch.alg1_lsa_select(req)
            want, wflag = oracle_alg1(count)
            assert got == want
            assert np.array_equal(gflag, wflag)


class TestAlg2:
    def _run(self, count, hcg, mm_flag=None, frac=0.5, tc=10):
        req = make_req(count, hcg)
        if mm_flag is None:
            mm_flag = np.zeros(N_CONTENTS, dtype=bool)
        return sch.alg2_hlsa_select(req, mm_flag, frac, tc)

    def test_mr_slot(self):
        count = np.zeros((3, 4), dtype=int)
        hcg = np.zeros((3, 4), dtype=int)
        count[0, 0], hcg[0, 0] = 12, 8   # 67% HCG, audience > 10
        slots = self._run(count, hcg)
        assert slots[0][0].kind == "MR"
        assert slots[0][0].hp_content == 1

    def test_sr_pairing(self):
        count = np.zeros((3, 4), dtype=int)
        hcg = np.zeros((3, 4), dtype=int)
        count[0, 1], hcg[0, 1] = 8, 6    # B: small majority-HCG audience
        count[0, 2], hcg[0, 2] = 11, 2   # C: big minority-HCG audience
        slots = self._run(count, hcg)
        assert slots[0][0] == sch.Slot("SR", hp_content=3, lp_content=2, alpha=0.3)

    def test_small_majority_pairing_under_scarcity(self):
        count = np.zeros((3, 4), dtype=int)
        hcg = np.zeros((3, 4), dtype=int)
        count[0, 1], hcg[0, 1] = 5, 4    # B: small majority-HCG audience
        count[0, 2], hcg[0, 2] = 8, 6    # C: larger majority-HCG audience
        req = make_req(count, hcg)
        slots = sch.alg2_hlsa_select(req, np.zeros(N_CONTENTS, dtype=bool),
                                     max_slots=1)
        # one slot for two candidates: they share an SR slot with the
        # larger audience on HP
        assert slots[0] == (sch.Slot("SR", hp_content=3, lp_content=2,
                                     alpha=0.3),)

    def test_no_pairing_when_budget_suffices(self):
        count = np.zeros((3, 4), dtype=int)
        hcg = np.zeros((3, 4), dtype=int)
        count[0, 1], hcg[0, 1] = 5, 4
        count[0, 2], hcg[0, 2] = 8, 6
        slots = self._run(count, hcg)
        # six slots for two candidates: each gets its own MR slot
        assert [s.kind for s in slots[0]] == ["MR", "MR"]
        assert [s.hp_content for s in slots[0]] == [3, 2]

    def test_lone_lp_promoted(self):
        count = np.zeros((3, 4), dtype=int)
        hcg = np.zeros((3, 4), dtype=int)
        count[0, 1], hcg[0, 1] = 8, 6
        slots = self._run(count, hcg)
        assert slots[0][0].kind == "MR"
        assert slots[0][0].hp_content == 2
        assert slots[0][0].lp_content == 0

    def test_six_slot_cap(self):
        count = np.zeros((3, 15), dtype=int)
        hcg = np.zeros((3, 15), dtype=int)
        count[0] = 12
        hcg[0] = 12
        req = sch.RequestMatrix(count=count, count_hcg=hcg)
        slots = sch.alg2_hlsa_select(req, np.zeros(15, dtype=bool))
        assert len(slots[0]) == 6
        assert all(s.kind == "MR" for s in slots[0])

    def test_flagged_contents_skipped(self):
        count = np.zeros((3, 4), dtype=int)
        hcg = np.zeros((3, 4), dtype=int)
        count[0, 0], hcg[0, 0] = 12, 12
        flag = np.zeros(N_CONTENTS, dtype=bool)
        flag[0] = True
        slots = self._run(count, hcg, mm_flag=flag)
        assert slots[0] == ()

    def test_oracle_exhaustive_single_cell(self):
        # every (count, hcg) pair over 4 contents with count 0..4, small
        # thresholds so every branch is reachable
        per_content = [(c, h) for c in range(5) for h in range(c + 1)]
        zero_flag = [False] * N_CONTENTS
        for combo in itertools.product(per_content, repeat=4):
            count = np.zeros((3, 4), dtype=int)
            hcg = np.zeros((3, 4), dtype=int)
            count[0, :4] = [c for c, _ in combo]
            hcg[0, :4] = [h for _, h in combo]
            got = self._run(count, hcg, frac=0.5, tc=2)[0]
            want = oracle_alg2_cell(
                pad_matrix(count)[0], pad_matrix(hcg)[0], zero_flag, 0.5, 2)
            assert [(s.kind, s.hp_content, s.lp_content) for s in got] == want

    def test_oracle_randomized_full_width(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            count = rng.integers(0, 25, (3, 15))
            hcg = rng.binomial(count, rng.random())
            flag = rng.random(15) < 0.2
            req = sch.RequestMatrix(count=count, count_hcg=hcg)
            got = sch.alg2_hlsa_select(req, flag)
            for i in range(3):
                want = oracle_alg2_cell(count[i], hcg[i], list(flag), 0.5, 10)
                assert [(s.kind, s.hp_content, s.lp_content) for s in got[i]] == want


class TestAlg3:
    def test_unique_hcg_counts(self):
        assert sch.alg3_alpha_assign([10, 7, 3], [20, 15, 9]) == (0.5, 0.3, 0.1)

    def test_all_tied_hcg_unique_totals(self):
        assert sch.alg3_alpha_assign([5, 5, 5], [9, 20, 12]) == (0.1, 0.5, 0.3)

    def test_two_tied_hcg_totals_decide(self):
        assert sch.alg3_alpha_assign([8, 8, 2], [4, 9, 1]) == (0.3, 0.5, 0.1)

    def test_fully_tied_keeps_default(self):
        assert sch.alg3_alpha_assign([4, 4, 4], [6, 6, 6]) == (0.5, 0.3, 0.1)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            C = rng.integers(0, 9, 3)
            TC = C + rng.integers(0, 9, 3)
            base = sch.alg3_alpha_assign(C, TC)
            assert sch.alg3_alpha_assign(3 * C, 3 * TC) == base

    def test_oracle_exhaustive(self):
        for C in itertools.product(range(5), repeat=3):
            for TC in itertools.product(range(5), repeat=3):
                assert sch.alg3_alpha_assign(C, TC) == oracle_alg3(list(C), list(TC))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            sch.alg3_alpha_assign([-1, 0, 0], [0, 0, 0])


class TestScheduleDecision:
    def _req(self, seed=3):
        rng = np.random.default_rng(seed)
        count = rng.integers(0, 25, (3, 15))
        hcg = rng.binomial(count, 0.6)
        return sch.RequestMatrix(count=count, count_hcg=hcg)

    def test_invariants_on_random_draws(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            count = rng.integers(0, 30, (3, 15))
            hcg = rng.binomial(count, rng.random())
            req = sch.RequestMatrix(count=count, count_hcg=hcg)
            dec = sch.lhs_schedule(req)  # constructor enforces the invariants
            assert len(dec.lsa_req) <= 3
            for cell_slots in dec.slots:
                assert len(cell_slots) <= 6
                for s in cell_slots:
                    if s.kind == "SR":
                        assert s.alpha == 0.3

    def test_duplicate_content_rejected(self):
        with pytest.raises(ValueError):
            sch.ScheduleDecision(
                lsa_req=(1,), alpha_by_content={1: (0.5, 0.3, 0.1)},
                slots=((sch.Slot("MR", 1),), (), ()),
            )

    def test_alpha_override(self):
        dec = sch.lhs_schedule(self._req(), alpha_override=(0.1, 0.5, 0.3))
        for c in dec.lsa_req:
            assert dec.alpha_by_content[c] == (0.1, 0.5, 0.3)

    def test_serialization_round_shape(self):
        from lhsim.deployment import build_grid

        grid = build_grid()
        dec = sch.lhs_schedule(self._req())
        rows = dec.to_rows(grid.lsas[0], grid.hlsa_subbands)
        text = sch.serialize_schedule(rows)
        body = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert len(body) == len(rows)
        for ln in body:
            cell, sb, kind, hp, lp, alpha = ln.split()
            assert kind in ("LSA", "MR", "SR")
            assert 0 <= int(sb) < 9


class TestSubgrouping:
    def test_boundary_is_hcg(self):
        from lhsim.deployment import UserTerminal

        u = UserTerminal(id=0, x=0, y=0, serving_cell=0, content=1)
        labels = sch.subgroup_users([u], {0: 25.0}, cqi_threshold_db=25.0)
        assert labels[0] == sch.HCG

    def test_all_high_snr_all_hcg(self):
        from lhsim.deployment import UserTerminal

        users = [UserTerminal(id=i, x=0, y=0, serving_cell=0, content=1)
                 for i in range(20)]
        labels = sch.subgroup_users(users, {i: 60.0 for i in range(20)}, 30.0)
        assert all(v == sch.HCG for v in labels.values())


class TestScptm:
    def _req(self):
        count = np.zeros((3, 15), dtype=int)
        hcg = np.zeros((3, 15), dtype=int)
        count[:, 0] = [8, 9, 10]          # content 1: LSA-wide top
        count[0, 1], hcg[0, 1] = 12, 12   # content 2: big all-HCG group
        count[0, 2], hcg[0, 2] = 15, 3    # content 3: big LCG-heavy group
        count[0, 3], hcg[0, 3] = 5, 5     # content 4: small, not scheduled
        return sch.RequestMatrix(count=count, count_hcg=hcg)

    def test_modulation_rule(self):
        groups = sch.scptm_schedule(self._req(), seed=1)
        by_content = {(g.cell, g.content): g for g in groups}
        assert by_content[(0, 2)].modulation == "uniform16qam"
        assert by_content[(0, 3)].modulation == "qpsk"

    def test_small_group_also_served(self):
        # the least-channel-gain baseline has no audience-size admission
        groups = sch.scptm_schedule(self._req(), seed=1)
        assert (0, 4) in {(g.cell, g.content) for g in groups}

    def test_capacity_capped_at_subband_count(self):
        count = np.ones((3, 15), dtype=int)
        req = sch.RequestMatrix(count=count, count_hcg=count.copy())
        groups = sch.scptm_schedule(req, seed=3)
        for cell in range(3):
            assert sum(1 for g in groups if g.cell == cell) == 9

    def test_distinct_subbands_within_cell(self):
        rng = np.random.default_rng(0)
        for seed in range(20):
            count = rng.integers(0, 30, (3, 15))
            hcg = rng.binomial(count, 0.5)
            req = sch.RequestMatrix(count=count, count_hcg=hcg)
            groups = sch.scptm_schedule(req, seed=seed)
            for cell in range(3):
                bands = [g.subband for g in groups if g.cell == cell]
                assert len(bands) == len(set(bands))

    def test_reuse_one_collisions_possible(self):
        # adjacent cells may draw the same sub-band: reuse-1 interference
        hits = 0
        for seed in range(40):
            groups = sch.scptm_schedule(self._req(), seed=seed)
            sb = {}
            for g in groups:
                sb.setdefault(g.subband, set()).add(g.cell)
            if any(len(cells) > 1 for cells in sb.values()):
                hits += 1
        assert hits > 0
