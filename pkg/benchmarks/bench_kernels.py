"""Compare the compiled demapping kernel against the numpy fallback.

Run as a script:

    python benchmarks/bench_kernels.py [n_symbols]

Both backends are imported side by side (the environment switch only
matters at package import, so the modules are loaded directly here),
checked for agreement, and timed on a representative workload: ML
detection of composite 16-point constellations, one constellation per
TTI, as produced by the engine's symbol-fidelity path.
"""
import sys
import time

import numpy as np

from lhsim.hqam import geometry_from_alpha
from lhsim.kernels import _demap_py

try:
    from lhsim.kernels import _demap_c
except ImportError:
    _demap_c = None


def make_workload(n, n_groups=200, seed=7):
    rng = np.random.default_rng(seed)
    base = geometry_from_alpha(0.3).points
    # per-group complex gain: one composite constellation per TTI
    gains = rng.normal(size=(n_groups, 1)) + 1j * rng.normal(size=(n_groups, 1))
    points = gains * base[None, :]
    group = rng.integers(0, n_groups, size=n)
    words = rng.integers(0, 16, size=n)
    noise = (rng.normal(size=n) + 1j * rng.normal(size=n)) * 0.05
    rx = points[group, words] + noise
    return rx, np.ascontiguousarray(points), group


def timed(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
    rx, points, group = make_workload(n)

    out_py, t_py = timed(_demap_py.demap_indices_multi, rx, points, group)
    print(f"numpy  backend: {t_py * 1e3:8.1f} ms  "
          f"({n / t_py / 1e6:.1f} Msym/s)")

    if _demap_c is None:
        print("cython backend: not built (pip install -e . compiles it)")
        return

    out_c, t_c = timed(_demap_c.demap_indices_multi, rx, points, group)
    print(f"cython backend: {t_c * 1e3:8.1f} ms  "
          f"({n / t_c / 1e6:.1f} Msym/s)")
    if not np.array_equal(out_py, out_c):
        raise SystemExit("backend outputs disagree")
    print(f"agreement: identical indices; speedup x{t_py / t_c:.1f}")


if __name__ == "__main__":
    main()
