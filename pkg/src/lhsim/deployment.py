"""Hexagonal 57-cell layout, LSA/HLSA partition, and user dropping.

The measured 9-cell center cluster is a 3x3 rhombus of hexes (axial coords
q, r in {-1, 0, 1}); each axial row of 3 contiguous cells forms one LSA.
The remaining 48 sites are interferer rings: every tier-1/tier-2 neighbor
of a center-cluster cell first, then the nearest lattice sites to fill 57.
"""
from dataclasses import dataclass, field

import numpy as np

N_SITES = 57
N_CENTER = 9
N_CONTENTS = 15
N_SUBBANDS = 9


@dataclass(frozen=True)
class CellSite:
    id: int
    x: float
    y: float
    radius: float
    lsa_id: int  # -1 for interferer-ring sites
    tier: int    # 0 = center cluster, 1/2 = interferer tiers, 3 = filler


@dataclass(frozen=True)
class Lsa:
    id: int
    cell_ids: tuple       # exactly 3 center-cluster cells
    subband_ids: tuple    # exactly 3 of the 9 sub-bands


@dataclass
class UserTerminal:
    id: int
    x: float
    y: float
    serving_cell: int
    content: int          # requested content in 1..15
    subgroup: str = "unassigned"   # HCG | LCG | unassigned


@dataclass(frozen=True, eq=False)
class Deployment:
    isd: float
    radius: float
    sites: tuple                    # 57 CellSite, center cluster first
    lsas: tuple                     # 3 Lsa
    tier1: dict                     # center cell id -> tuple of site ids
    tier2: dict
    hlsa_subbands: dict             # center cell id -> 6 sub-band ids

    @property
    def center_cells(self):
        return tuple(s.id for s in self.sites[:N_CENTER])

    def positions(self):
        return np.array([[s.x, s.y] for s in self.sites])

    def lsa_of_cell(self, cell_id):
        return self.sites[cell_id].lsa_id


def _axial_to_xy(q, r, isd):
    return isd * (q + r / 2.0), isd * np.sqrt(3.0) / 2.0 * r


def build_grid(isd: float = 2000.0, tiers: int = 2) -> Deployment:
    """57-site hex deployment: 9-cell center cluster plus interferer rings."""
    if isd <= 0:
        raise ValueError("inter-site distance must be positive")
    radius = isd / 2.0

    center_axial = [(q, r) for r in (-1, 0, 1) for q in (-1, 0, 1)]
    # cell ids 0..8: LSA k is axial row r = k-1, matching the tricolor cluster
    lsa_rows = {(-1): 0, 0: 1, 1: 2}

    def cube_dist(a, b):
        dq, dr = a[0] - b[0], a[1] - b[1]
        return (abs(dq) + abs(dr) + abs(dq + dr)) // 2

    lattice = [(q, r) for q in range(-8, 9) for r in range(-8, 9)]
    ring = [p for p in lattice if p not in center_axial]
    min_d = {p: min(cube_dist(p, c) for c in center_axial) for p in ring}
    # all tier-1/2 neighbors first, then nearest fillers up to 57 sites

    def sort_key(p):
        x, y = _axial_to_xy(*p, isd)
        return (min_d[p], x * x + y * y, p)

    ring.sort(key=sort_key)
    ring = ring[: N_SITES - N_CENTER]

    sites = []
    for cid, (q, r) in enumerate(center_axial):
        x, y = _axial_to_xy(q, r, isd)
        sites.append(CellSite(cid, x, y, radius, lsa_id=lsa_rows[r], tier=0))
    for cid, p in enumerate(ring, start=N_CENTER):
        x, y = _axial_to_xy(*p, isd)
        tier = min_d[p] if min_d[p] <= tiers else 3
        sites.append(CellSite(cid, x, y, radius, lsa_id=-1, tier=tier))

    axial_of = dict(zip(range(N_CENTER), center_axial))
    axial_of.update(dict(zip(range(N_CENTER, N_SITES), ring)))
    tier1, tier2 = {}, {}
    for cid in range(N_CENTER):
        a = axial_of[cid]
        t1, t2 = [], []
        for other, b in axial_of.items():
            if other == cid:
                continue
            d = cube_dist(a, b)
            if d == 1:
                t1.append(other)
            elif d == 2:
                t2.append(other)
        tier1[cid] = tuple(sorted(t1))
        tier2[cid] = tuple(sorted(t2))

    lsas, hlsa = [], {}
    for k in range(3):
        cell_ids = tuple(cid for cid in range(N_CENTER)
                         if sites[cid].lsa_id == k)
        subbands = tuple(range(3 * k, 3 * k + 3))
        lsas.append(Lsa(id=k, cell_ids=cell_ids, subband_ids=subbands))
    dep = Deployment(isd=isd, radius=radius, sites=tuple(sites),
                     lsas=tuple(lsas), tier1=tier1, tier2=tier2,
                     hlsa_subbands={})
    hlsa = partition_hlsa_subbands(dep)
    return Deployment(isd=isd, radius=radius, sites=tuple(sites),
                      lsas=tuple(lsas), tier1=tier1, tier2=tier2,
                      hlsa_subbands=hlsa)


def partition_hlsa_subbands(dep) -> dict:
    """Each center cell's HLSA sub-bands: the 6 not owned by its LSA.

    Per cell the other LSAs' triples are ordered cleanest-first (the LSA
    whose nearest cell is farther away comes first, since its local
    transmissions are the weaker co-channel interference), and each triple
    is rotated by the cell's index within its own LSA so that low-index
    hyper-local slots of co-LSA cells land on different sub-bands.
    """
    pos = dep.positions()
    out = {}
    for lsa in dep.lsas:
        for j, cid in enumerate(lsa.cell_ids):
            others = sorted(
                (o for o in dep.lsas if o.id != lsa.id),
                key=lambda o: -min(float(np.hypot(*(pos[c] - pos[cid])))
                                   for c in o.cell_ids))
            order = []
            for o in others:
                t = tuple(o.subband_ids)
                order.extend(t[j % 3:] + t[:j % 3])
            out[cid] = tuple(order)
    return out


class RequestDistribution:
    """Distribution over content ids 1..15: uniform, zipf(s), or explicit weights."""

    def __init__(self, kind="uniform", zipf_s=1.0, weights=None):
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if w.size != N_CONTENTS or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be 15 nonnegative values")
        elif kind == "uniform":
            w = np.ones(N_CONTENTS)
        elif kind == "zipf":
            w = 1.0 / np.arange(1, N_CONTENTS + 1) ** float(zipf_s)
        else:
            raise ValueError(f"unknown request distribution {kind!r}")
        self.probs = w / w.sum()

    def sample(self, rng, n):
        return rng.choice(np.arange(1, N_CONTENTS + 1), size=n, p=self.probs)


def drop_users(dep: Deployment, users_per_cell: int, drop_radius_fraction: float,
               request_dist: RequestDistribution, seed) -> list:
    """Uniform user drop around each center-cluster site, fixed per run."""
    if not 0 < drop_radius_fraction <= 1:
        raise ValueError("drop_radius_fraction must be in (0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD20]))
    users = []
    rmax = drop_radius_fraction * dep.radius  # radius = isd/2 = 1000 m by default
    uid = 0
    for cid in dep.center_cells:
        site = dep.sites[cid]
        r = rmax * np.sqrt(rng.random(users_per_cell))
        theta = 2 * np.pi * rng.random(users_per_cell)
        contents = request_dist.sample(rng, users_per_cell)
        for k in range(users_per_cell):
            users.append(UserTerminal(
                id=uid, x=site.x + r[k] * np.cos(theta[k]),
                y=site.y + r[k] * np.sin(theta[k]),
                serving_cell=cid, content=int(contents[k]),
            ))
            uid += 1
    return users
